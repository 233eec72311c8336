#include "claimcraft/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "claimcraft/common.hpp"

namespace claimcraft {

namespace {

constexpr double kRmsEps = 1e-5;
constexpr double kRopeBase = 10000.0;
constexpr double kInitStd = 0.02;
constexpr char kCheckpointMagic[4] = {'C', 'C', 'K', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void ModelConfig::validate() const {
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || n_kv_heads <= 0 || ffn_size <= 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (vocab_size <= 0) throw ConfigError("model needs a vocabulary size");
  if (max_positions < 16) throw ConfigError("max_positions must be at least 16");
  if (d_model % n_heads != 0) throw ConfigError("d_model must divide into heads");
  if (n_heads % n_kv_heads != 0) throw ConfigError("query heads must group evenly over kv heads");
  if (head_dim() % 2 != 0) throw ConfigError("head dimension must be even for rotary positions");
}

long long ModelConfig::parameter_count() const {
  const long long d = d_model, f = ffn_size, v = vocab_size;
  const long long dk = static_cast<long long>(n_kv_heads) * head_dim();
  const long long per_layer = d            // ln1
                              + d * d      // wq
                              + 2 * d * dk // wk, wv
                              + d * d      // wo
                              + d          // ln2
                              + 2 * d * f  // w1, w3
                              + f * d;     // w2
  return v * d + n_layers * per_layer + d;
}

// ---------------------------------------------------------------------------

template <typename S>
struct TransformerT<S>::Indices {
  // Tensor order: embedding, then nine tensors per layer, then final_norm.
  // Layer slots: 0 ln1, 1 wq, 2 wk, 3 wv, 4 wo, 5 ln2, 6 w1, 7 w3, 8 w2.
  static int embedding() { return 0; }
  static int layer(int i, int slot) { return 1 + i * 9 + slot; }
  static int final_norm(const ModelConfig& c) { return 1 + c.n_layers * 9; }
};

template <typename S>
TransformerT<S>::TransformerT(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int d = cfg_.d_model;
  const int dk = cfg_.n_kv_heads * cfg_.head_dim();
  const int f = cfg_.ffn_size;

  const auto add = [&](const std::string& name, int rows, int cols) {
    names_.push_back(name);
    params_.emplace_back(Mat::Zero(rows, cols));
  };
  add("embedding", cfg_.vocab_size, d);
  for (int i = 0; i < cfg_.n_layers; ++i) {
    const std::string p = "layer" + std::to_string(i) + ".";
    add(p + "ln1", d, 1);
    add(p + "wq", d, d);
    add(p + "wk", d, dk);
    add(p + "wv", d, dk);
    add(p + "wo", d, d);
    add(p + "ln2", d, 1);
    add(p + "w1", d, f);
    add(p + "w3", d, f);
    add(p + "w2", f, d);
  }
  add("final_norm", d, 1);

  // Scaled-normal init. Projections that write into the residual stream are
  // shrunk by 1/sqrt(2L); norm gains start at one. Each tensor draws from its
  // own fork so a layout change elsewhere never shifts another tensor's values.
  const double residual_std = kInitStd / std::sqrt(2.0 * cfg_.n_layers);
  const Rng root(cfg_.seed);
  for (std::size_t t = 0; t < params_.size(); ++t) {
    Mat& w = params_[t];
    const std::string& name = names_[t];
    if (name.find("ln") != std::string::npos || name == "final_norm") {
      w.setOnes();
      continue;
    }
    const bool residual = name.ends_with(".wo") || name.ends_with(".w2");
    const double std_dev = residual ? residual_std : kInitStd;
    Rng stream = root.fork(t + 1);
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        w(r, c) = static_cast<S>(stream.normal(0.0, std_dev));
      }
    }
  }
}

template <typename S>
std::vector<typename TransformerT<S>::Mat> TransformerT<S>::zero_like() const {
  std::vector<Mat> out;
  out.reserve(params_.size());
  for (const Mat& w : params_) out.emplace_back(Mat::Zero(w.rows(), w.cols()));
  return out;
}

// ---------------------------------------------------------------------------

namespace {

template <typename Mat, typename Vec, typename S>
void rms_norm(const Mat& x, const Mat& gain, Mat& out, Vec& rinv) {
  const Eigen::Index t_len = x.rows(), d = x.cols();
  rinv.resize(t_len);
  out.resize(t_len, d);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    const S ms = x.row(t).squaredNorm() / static_cast<S>(d);
    const S r = S(1) / std::sqrt(ms + static_cast<S>(kRmsEps));
    rinv(t) = r;
    out.row(t) = (x.row(t) * r).cwiseProduct(gain.col(0).transpose());
  }
}

// Backward through rms_norm; accumulates the gain gradient into dgain.
template <typename Mat, typename Vec, typename S>
void rms_norm_backward(const Mat& x, const Mat& gain, const Vec& rinv, const Mat& dout, Mat& dx,
                       Mat& dgain) {
  const Eigen::Index t_len = x.rows(), d = x.cols();
  dx.resize(t_len, d);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    const S r = rinv(t);
    const auto dyg = dout.row(t).cwiseProduct(gain.col(0).transpose());
    const S dot = dyg.cwiseProduct(x.row(t)).sum();
    dx.row(t) = r * dyg - (r * r * r * dot / static_cast<S>(d)) * x.row(t);
    dgain.col(0) += dout.row(t).cwiseProduct(x.row(t) * r).transpose();
  }
}

// In-place rotary rotation over per-head rows, split-half pairing. Row t gets
// position pos0 + t; direction -1 inverts the rotation for backprop.
template <typename Mat, typename S>
void rope(Mat& x, int n_heads, int head_dim, Eigen::Index pos0, int direction) {
  const int half = head_dim / 2;
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    const double pos = static_cast<double>(pos0 + t);
    for (int h = 0; h < n_heads; ++h) {
      const int base = h * head_dim;
      for (int j = 0; j < half; ++j) {
        const double theta = pos * std::pow(kRopeBase, -2.0 * j / head_dim);
        const S c = static_cast<S>(std::cos(theta));
        const S s = static_cast<S>(std::sin(theta)) * static_cast<S>(direction);
        const S x1 = x(t, base + j);
        const S x2 = x(t, base + half + j);
        x(t, base + j) = x1 * c - x2 * s;
        x(t, base + half + j) = x2 * c + x1 * s;
      }
    }
  }
}

}  // namespace

template <typename S>
struct TransformerT<S>::Workspace {
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  struct Layer {
    Mat x_in, xn1, q, k, v, concat, x_mid, xn2, a, b, h;
    Vec r1, r2;
    std::vector<Mat> attn;  // per query head, row-softmaxed with causal zeros
  };
  std::vector<Layer> layers;
  Mat x_final, xn_final;
  Vec rf;
};

template <typename S>
typename TransformerT<S>::Mat TransformerT<S>::forward_cached(
    const std::vector<std::int32_t>& ids, Workspace* ws) const {
  const Eigen::Index t_len = static_cast<Eigen::Index>(ids.size());
  if (t_len == 0) throw DataError("empty input to forward");
  if (t_len > cfg_.max_positions) {
    throw DataError("input of " + std::to_string(ids.size()) + " tokens exceeds max positions");
  }
  for (const std::int32_t id : ids) {
    if (id < 0 || id >= cfg_.vocab_size) {
      throw DataError("token id " + std::to_string(id) + " outside the vocabulary");
    }
  }

  const int d = cfg_.d_model;
  const int hd = cfg_.head_dim();
  const int nh = cfg_.n_heads;
  const int nkv = cfg_.n_kv_heads;
  const int group = nh / nkv;
  const S scale = S(1) / std::sqrt(static_cast<S>(hd));
  const Mat& emb = params_[Indices::embedding()];

  Mat x(t_len, d);
  for (Eigen::Index t = 0; t < t_len; ++t) x.row(t) = emb.row(ids[static_cast<std::size_t>(t)]);
  if (ws) ws->layers.resize(static_cast<std::size_t>(cfg_.n_layers));

  typename Workspace::Vec rinv;
  Mat xn, q, k, v, concat, a, b, h;
  for (int li = 0; li < cfg_.n_layers; ++li) {
    const Mat& ln1 = params_[Indices::layer(li, 0)];
    const Mat& wq = params_[Indices::layer(li, 1)];
    const Mat& wk = params_[Indices::layer(li, 2)];
    const Mat& wv = params_[Indices::layer(li, 3)];
    const Mat& wo = params_[Indices::layer(li, 4)];
    const Mat& ln2 = params_[Indices::layer(li, 5)];
    const Mat& w1 = params_[Indices::layer(li, 6)];
    const Mat& w3 = params_[Indices::layer(li, 7)];
    const Mat& w2 = params_[Indices::layer(li, 8)];
    auto* lw = ws ? &ws->layers[static_cast<std::size_t>(li)] : nullptr;

    if (lw) lw->x_in = x;
    rms_norm<Mat, typename Workspace::Vec, S>(x, ln1, xn, rinv);
    if (lw) {
      lw->xn1 = xn;
      lw->r1 = rinv;
    }

    q.noalias() = xn * wq;
    k.noalias() = xn * wk;
    v.noalias() = xn * wv;
    rope<Mat, S>(q, nh, hd, 0, +1);
    rope<Mat, S>(k, nkv, hd, 0, +1);
    if (lw) {
      lw->q = q;
      lw->k = k;
      lw->v = v;
      lw->attn.resize(static_cast<std::size_t>(nh));
    }

    concat.resize(t_len, d);
    for (int hq = 0; hq < nh; ++hq) {
      const int g = hq / group;
      const auto qh = q.middleCols(hq * hd, hd);
      const auto kg = k.middleCols(g * hd, hd);
      const auto vg = v.middleCols(g * hd, hd);
      Mat att = qh * kg.transpose() * scale;
      for (Eigen::Index i = 0; i < t_len; ++i) {
        auto row = att.row(i);
        const S mx = row.head(i + 1).maxCoeff();
        S denom = 0;
        for (Eigen::Index j = 0; j <= i; ++j) {
          row(j) = std::exp(row(j) - mx);
          denom += row(j);
        }
        row.head(i + 1) /= denom;
        if (i + 1 < t_len) row.tail(t_len - i - 1).setZero();
      }
      concat.middleCols(hq * hd, hd).noalias() = att * vg;
      if (lw) lw->attn[static_cast<std::size_t>(hq)] = std::move(att);
    }
    if (lw) lw->concat = concat;
    x.noalias() += concat * wo;

    if (lw) lw->x_mid = x;
    rms_norm<Mat, typename Workspace::Vec, S>(x, ln2, xn, rinv);
    if (lw) {
      lw->xn2 = xn;
      lw->r2 = rinv;
    }
    a.noalias() = xn * w1;
    b.noalias() = xn * w3;
    h = a.unaryExpr([](S t) { return t / (S(1) + std::exp(-t)); }).cwiseProduct(b);
    if (lw) {
      lw->a = a;
      lw->b = b;
      lw->h = h;
    }
    x.noalias() += h * w2;
  }

  if (ws) ws->x_final = x;
  rms_norm<Mat, typename Workspace::Vec, S>(x, params_[Indices::final_norm(cfg_)], xn, rinv);
  if (ws) {
    ws->xn_final = xn;
    ws->rf = rinv;
  }
  Mat logits;
  logits.noalias() = xn * emb.transpose();
  return logits;
}

template <typename S>
typename TransformerT<S>::Mat TransformerT<S>::forward(const std::vector<std::int32_t>& ids) const {
  return forward_cached(ids, nullptr);
}

// ---------------------------------------------------------------------------

template <typename S>
LossParts sequence_loss(const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& logits,
                        const std::vector<std::int32_t>& targets,
                        const std::vector<std::uint8_t>& mask, double lambda) {
  const auto t_len = static_cast<std::size_t>(logits.rows());
  if (targets.size() != t_len || mask.size() != t_len) {
    throw DataError("loss shapes disagree");
  }
  double ce_sum = 0.0, z_sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < t_len; ++t) {
    if (!mask[t]) continue;
    if (targets[t] < 0 || targets[t] >= logits.cols()) {
      throw DataError("loss target outside the vocabulary");
    }
    const auto row = logits.row(static_cast<Eigen::Index>(t));
    const double mx = static_cast<double>(row.maxCoeff());
    double sum = 0.0;
    for (Eigen::Index v = 0; v < logits.cols(); ++v) {
      sum += std::exp(static_cast<double>(row(v)) - mx);
    }
    const double z = mx + std::log(sum);
    ce_sum += z - static_cast<double>(row(targets[t]));
    z_sum += z * z;
    ++n;
  }
  if (n == 0) throw DataError("loss mask selects no positions");
  LossParts out;
  out.ce = ce_sum / static_cast<double>(n);
  out.z = lambda * z_sum / static_cast<double>(n);
  out.total = out.ce + out.z;
  return out;
}

template <typename S>
LossParts TransformerT<S>::accumulate_gradients(const TrainExample& ex, std::vector<Mat>& grads,
                                                double lambda) const {
  if (grads.size() != params_.size()) throw DataError("gradient list does not match parameters");
  for (std::size_t t = 0; t < grads.size(); ++t) {
    if (grads[t].rows() != params_[t].rows() || grads[t].cols() != params_[t].cols()) {
      throw DataError("gradient shape does not match tensor " + names_[t]);
    }
  }

  Workspace ws;
  const Mat logits = forward_cached(ex.ids, &ws);
  const LossParts loss = sequence_loss<S>(logits, ex.targets, ex.mask, lambda);

  const Eigen::Index t_len = logits.rows();
  const Eigen::Index vocab = logits.cols();
  std::size_t n_masked = 0;
  for (const auto m : ex.mask) n_masked += m ? 1 : 0;
  const double inv_n = 1.0 / static_cast<double>(n_masked);

  // d loss / d logits: softmax minus one-hot for the cross entropy, plus
  // 2 lambda z softmax for the squared log-partition, averaged over masked rows.
  Mat dlogits = Mat::Zero(t_len, vocab);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    if (!ex.mask[static_cast<std::size_t>(t)]) continue;
    const auto row = logits.row(t);
    const double mx = static_cast<double>(row.maxCoeff());
    double sum = 0.0;
    for (Eigen::Index v = 0; v < vocab; ++v) sum += std::exp(static_cast<double>(row(v)) - mx);
    const double z = mx + std::log(sum);
    const double coef = (1.0 + 2.0 * lambda * z) * inv_n;
    for (Eigen::Index v = 0; v < vocab; ++v) {
      dlogits(t, v) = static_cast<S>(coef * std::exp(static_cast<double>(row(v)) - z));
    }
    dlogits(t, ex.targets[static_cast<std::size_t>(t)]) -= static_cast<S>(inv_n);
  }

  const int hd = cfg_.head_dim();
  const int nh = cfg_.n_heads;
  const int nkv = cfg_.n_kv_heads;
  const int group = nh / nkv;
  const S scale = S(1) / std::sqrt(static_cast<S>(hd));
  const Mat& emb = params_[Indices::embedding()];
  Mat& demb = grads[Indices::embedding()];

  // Tied head: logits = xn_final * emb^T feeds the embedding gradient twice,
  // here and again at the lookup below.
  demb.noalias() += dlogits.transpose() * ws.xn_final;
  Mat dnorm = dlogits * emb;
  Mat dx;
  rms_norm_backward<Mat, typename Workspace::Vec, S>(ws.x_final,
                                                     params_[Indices::final_norm(cfg_)], ws.rf,
                                                     dnorm, dx, grads[Indices::final_norm(cfg_)]);

  Mat dxn, dh, da, db, dconcat, dq, dk, dv, dtmp;
  for (int li = cfg_.n_layers - 1; li >= 0; --li) {
    const auto& lw = ws.layers[static_cast<std::size_t>(li)];
    const Mat& wq = params_[Indices::layer(li, 1)];
    const Mat& wk = params_[Indices::layer(li, 2)];
    const Mat& wv = params_[Indices::layer(li, 3)];
    const Mat& wo = params_[Indices::layer(li, 4)];
    const Mat& w1 = params_[Indices::layer(li, 6)];
    const Mat& w3 = params_[Indices::layer(li, 7)];
    const Mat& w2 = params_[Indices::layer(li, 8)];

    // Feed-forward residual: x = x_mid + (silu(xn2 w1) .* (xn2 w3)) w2.
    grads[Indices::layer(li, 8)].noalias() += lw.h.transpose() * dx;
    dh.noalias() = dx * w2.transpose();
    const Mat sig = lw.a.unaryExpr([](S t) { return S(1) / (S(1) + std::exp(-t)); });
    const Mat ones = Mat::Ones(sig.rows(), sig.cols());
    da = dh.cwiseProduct(lw.b).cwiseProduct(sig).cwiseProduct(
        ones + lw.a.cwiseProduct(ones - sig));
    db = dh.cwiseProduct(lw.a.cwiseProduct(sig));
    grads[Indices::layer(li, 6)].noalias() += lw.xn2.transpose() * da;
    grads[Indices::layer(li, 7)].noalias() += lw.xn2.transpose() * db;
    dxn.noalias() = da * w1.transpose();
    dxn.noalias() += db * w3.transpose();
    rms_norm_backward<Mat, typename Workspace::Vec, S>(
        lw.x_mid, params_[Indices::layer(li, 5)], lw.r2, dxn, dtmp, grads[Indices::layer(li, 5)]);
    dx += dtmp;

    // Attention residual: x_mid = x_in + concat(heads) wo.
    grads[Indices::layer(li, 4)].noalias() += lw.concat.transpose() * dx;
    dconcat.noalias() = dx * wo.transpose();

    dq.setZero(t_len, nh * hd);
    dk.setZero(t_len, nkv * hd);
    dv.setZero(t_len, nkv * hd);
    for (int hq = 0; hq < nh; ++hq) {
      const int g = hq / group;
      const Mat& att = lw.attn[static_cast<std::size_t>(hq)];
      const auto dout = dconcat.middleCols(hq * hd, hd);
      dv.middleCols(g * hd, hd).noalias() += att.transpose() * dout;
      Mat datt = dout * lw.v.middleCols(g * hd, hd).transpose();
      // Row softmax: ds = a .* (da - rowsum(da .* a)); causal zeros in a keep
      // the masked columns at zero.
      for (Eigen::Index i = 0; i < t_len; ++i) {
        const S dot = datt.row(i).cwiseProduct(att.row(i)).sum();
        datt.row(i) = att.row(i).cwiseProduct(
            (datt.row(i).array() - dot).matrix());
      }
      dq.middleCols(hq * hd, hd).noalias() = datt * lw.k.middleCols(g * hd, hd) * scale;
      dk.middleCols(g * hd, hd).noalias() +=
          datt.transpose() * lw.q.middleCols(hq * hd, hd) * scale;
    }
    rope<Mat, S>(dq, nh, hd, 0, -1);
    rope<Mat, S>(dk, nkv, hd, 0, -1);
    grads[Indices::layer(li, 1)].noalias() += lw.xn1.transpose() * dq;
    grads[Indices::layer(li, 2)].noalias() += lw.xn1.transpose() * dk;
    grads[Indices::layer(li, 3)].noalias() += lw.xn1.transpose() * dv;
    dxn.noalias() = dq * wq.transpose();
    dxn.noalias() += dk * wk.transpose();
    dxn.noalias() += dv * wv.transpose();
    rms_norm_backward<Mat, typename Workspace::Vec, S>(
        lw.x_in, params_[Indices::layer(li, 0)], lw.r1, dxn, dtmp, grads[Indices::layer(li, 0)]);
    dx += dtmp;
  }

  for (std::size_t t = 0; t < ex.ids.size(); ++t) {
    demb.row(ex.ids[t]) += dx.row(static_cast<Eigen::Index>(t));
  }

  for (std::size_t t = 0; t < grads.size(); ++t) {
    if (!grads[t].allFinite()) {
      throw NumericError("non-finite gradient in " + names_[t]);
    }
  }
  return loss;
}

// ---------------------------------------------------------------------------

std::int32_t sample_token(const std::vector<double>& logits, const SampleSettings& st, Rng& rng) {
  if (logits.empty()) throw DataError("cannot sample from empty logits");
  if (st.greedy) {
    std::size_t best = 0;
    for (std::size_t v = 1; v < logits.size(); ++v) {
      if (logits[v] > logits[best]) best = v;
    }
    return static_cast<std::int32_t>(best);
  }

  std::vector<double> probs(logits.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v < logits.size(); ++v) {
    probs[v] = logits[v] / st.temperature;
    mx = std::max(mx, probs[v]);
  }
  double denom = 0.0;
  for (double& p : probs) {
    p = std::exp(p - mx);
    denom += p;
  }
  for (double& p : probs) p /= denom;

  double total = 1.0;
  std::vector<char> kept(probs.size(), 1);
  if (st.top_p < 1.0) {
    std::vector<std::size_t> order(probs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (probs[a] != probs[b]) return probs[a] > probs[b];
      return a < b;
    });
    std::fill(kept.begin(), kept.end(), 0);
    double cum = 0.0;
    std::size_t cut = order.size() - 1;
    for (std::size_t i = 0; i < order.size(); ++i) {
      cum += probs[order[i]];
      if (cum >= st.top_p) {
        cut = i;
        break;
      }
    }
    // Ties at the boundary probability all stay in the nucleus.
    const double boundary = probs[order[cut]];
    while (cut + 1 < order.size() && probs[order[cut + 1]] == boundary) ++cut;
    total = 0.0;
    for (std::size_t i = 0; i <= cut; ++i) {
      kept[order[i]] = 1;
      total += probs[order[i]];
    }
  }

  const double u = rng.uniform01() * total;
  double cum = 0.0;
  std::int32_t last_kept = 0;
  for (std::size_t v = 0; v < probs.size(); ++v) {
    if (!kept[v]) continue;
    last_kept = static_cast<std::int32_t>(v);
    cum += probs[v];
    if (u < cum) return last_kept;
  }
  return last_kept;
}

namespace {

template <typename Row>
std::int32_t pick_token(const Row& logits, const SampleSettings& st, Rng& rng) {
  std::vector<double> row(static_cast<std::size_t>(logits.size()));
  for (Eigen::Index v = 0; v < logits.size(); ++v) {
    row[static_cast<std::size_t>(v)] = static_cast<double>(logits(v));
  }
  return sample_token(row, st, rng);
}

}  // namespace

template <typename S>
std::vector<std::int32_t> TransformerT<S>::sample_trajectory(
    const std::vector<std::int32_t>& prompt, const SampleSettings& st, Rng& rng) const {
  if (st.temperature <= 0.0) throw ConfigError("sampling temperature must be positive");
  if (st.top_p <= 0.0 || st.top_p > 1.0) throw ConfigError("top_p must lie in (0, 1]");
  if (st.max_new < 0) throw ConfigError("max_new must be non-negative");
  if (st.max_new == 0) return {};

  using Row = Eigen::Matrix<S, 1, Eigen::Dynamic>;
  const int d = cfg_.d_model;
  const int hd = cfg_.head_dim();
  const int nh = cfg_.n_heads;
  const int nkv = cfg_.n_kv_heads;
  const int group = nh / nkv;
  const int dk = nkv * hd;
  const S scale = S(1) / std::sqrt(static_cast<S>(hd));
  const Mat& emb = params_[Indices::embedding()];

  // Post-rotation keys and raw values per layer, one row per position.
  std::vector<Mat> kcache(static_cast<std::size_t>(cfg_.n_layers)),
      vcache(static_cast<std::size_t>(cfg_.n_layers));
  for (int li = 0; li < cfg_.n_layers; ++li) {
    kcache[static_cast<std::size_t>(li)] = Mat::Zero(cfg_.max_positions, dk);
    vcache[static_cast<std::size_t>(li)] = Mat::Zero(cfg_.max_positions, dk);
  }

  // Prime the caches with one full pass over the prompt.
  Workspace ws;
  const Mat prompt_logits = forward_cached(prompt, &ws);
  for (int li = 0; li < cfg_.n_layers; ++li) {
    const auto& lw = ws.layers[static_cast<std::size_t>(li)];
    kcache[static_cast<std::size_t>(li)].topRows(lw.k.rows()) = lw.k;
    vcache[static_cast<std::size_t>(li)].topRows(lw.v.rows()) = lw.v;
  }

  std::vector<std::int32_t> out;
  Row logits = prompt_logits.row(prompt_logits.rows() - 1);
  Eigen::Index pos = static_cast<Eigen::Index>(prompt.size());

  Row x(d), xn(d), q(nh * hd), kx(dk), vx(dk), concat(d), aff(cfg_.ffn_size), bff(cfg_.ffn_size);
  while (true) {
    const std::int32_t next = pick_token(logits, st, rng);
    out.push_back(next);
    if (next == st.eos_id) break;
    if (static_cast<int>(out.size()) >= st.max_new) break;
    if (pos >= cfg_.max_positions) break;  // context is full, nothing left to feed

    // One decode step at position pos.
    x = emb.row(next);
    for (int li = 0; li < cfg_.n_layers; ++li) {
      const Mat& ln1 = params_[Indices::layer(li, 0)];
      const Mat& wq = params_[Indices::layer(li, 1)];
      const Mat& wk = params_[Indices::layer(li, 2)];
      const Mat& wv = params_[Indices::layer(li, 3)];
      const Mat& wo = params_[Indices::layer(li, 4)];
      const Mat& ln2 = params_[Indices::layer(li, 5)];
      const Mat& w1 = params_[Indices::layer(li, 6)];
      const Mat& w3 = params_[Indices::layer(li, 7)];
      const Mat& w2 = params_[Indices::layer(li, 8)];
      Mat& kc = kcache[static_cast<std::size_t>(li)];
      Mat& vc = vcache[static_cast<std::size_t>(li)];

      S r = x.squaredNorm() / static_cast<S>(d);
      r = S(1) / std::sqrt(r + static_cast<S>(kRmsEps));
      xn = (x * r).cwiseProduct(ln1.col(0).transpose());

      q.noalias() = xn * wq;
      kx.noalias() = xn * wk;
      vx.noalias() = xn * wv;
      rope<Row, S>(q, nh, hd, pos, +1);
      rope<Row, S>(kx, nkv, hd, pos, +1);
      kc.row(pos) = kx;
      vc.row(pos) = vx;

      for (int hq = 0; hq < nh; ++hq) {
        const int g = hq / group;
        const auto qh = q.middleCols(hq * hd, hd);
        const auto kg = kc.middleCols(g * hd, hd).topRows(pos + 1);
        const auto vg = vc.middleCols(g * hd, hd).topRows(pos + 1);
        Row att = qh * kg.transpose() * scale;
        const S mx = att.maxCoeff();
        S denom = 0;
        for (Eigen::Index j = 0; j <= pos; ++j) {
          att(j) = std::exp(att(j) - mx);
          denom += att(j);
        }
        att /= denom;
        concat.middleCols(hq * hd, hd).noalias() = att * vg;
      }
      x.noalias() += concat * wo;

      r = x.squaredNorm() / static_cast<S>(d);
      r = S(1) / std::sqrt(r + static_cast<S>(kRmsEps));
      xn = (x * r).cwiseProduct(ln2.col(0).transpose());
      aff.noalias() = xn * w1;
      bff.noalias() = xn * w3;
      aff = aff.unaryExpr([](S t) { return t / (S(1) + std::exp(-t)); }).cwiseProduct(bff);
      x.noalias() += aff * w2;
    }
    S r = x.squaredNorm() / static_cast<S>(d);
    r = S(1) / std::sqrt(r + static_cast<S>(kRmsEps));
    xn = (x * r).cwiseProduct(params_[Indices::final_norm(cfg_)].col(0).transpose());
    logits.noalias() = xn * emb.transpose();
    ++pos;
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void write_u32(std::ofstream& f, std::uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_i32(std::ofstream& f, std::int32_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ofstream& f, std::uint64_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::ifstream& f) {
  std::uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!f) throw DataError("checkpoint is truncated");
  return v;
}

std::int32_t read_i32(std::ifstream& f) {
  std::int32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!f) throw DataError("checkpoint is truncated");
  return v;
}

std::uint64_t read_u64(std::ifstream& f) {
  std::uint64_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!f) throw DataError("checkpoint is truncated");
  return v;
}

}  // namespace

template <typename S>
void TransformerT<S>::save_checkpoint(const std::string& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint " + path);
  f.write(kCheckpointMagic, 4);
  write_u32(f, kCheckpointVersion);
  write_i32(f, cfg_.d_model);
  write_i32(f, cfg_.n_layers);
  write_i32(f, cfg_.n_heads);
  write_i32(f, cfg_.n_kv_heads);
  write_i32(f, cfg_.ffn_size);
  write_i32(f, cfg_.max_positions);
  write_i32(f, cfg_.vocab_size);
  write_u64(f, cfg_.seed);
  write_u32(f, static_cast<std::uint32_t>(params_.size()));
  std::vector<float> buf;
  for (std::size_t t = 0; t < params_.size(); ++t) {
    const Mat& w = params_[t];
    write_u32(f, static_cast<std::uint32_t>(names_[t].size()));
    f.write(names_[t].data(), static_cast<std::streamsize>(names_[t].size()));
    write_u32(f, static_cast<std::uint32_t>(w.rows()));
    write_u32(f, static_cast<std::uint32_t>(w.cols()));
    buf.resize(static_cast<std::size_t>(w.size()));
    std::size_t i = 0;
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) buf[i++] = static_cast<float>(w(r, c));
    }
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!f) throw DataError("failed while writing checkpoint " + path);
}

template <typename S>
TransformerT<S> TransformerT<S>::load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint " + path);
  char magic[4] = {};
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw DataError("not a model checkpoint: " + path);
  }
  const std::uint32_t version = read_u32(f);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig cfg;
  cfg.d_model = read_i32(f);
  cfg.n_layers = read_i32(f);
  cfg.n_heads = read_i32(f);
  cfg.n_kv_heads = read_i32(f);
  cfg.ffn_size = read_i32(f);
  cfg.max_positions = read_i32(f);
  cfg.vocab_size = read_i32(f);
  cfg.seed = read_u64(f);

  TransformerT model(cfg);
  const std::uint32_t count = read_u32(f);
  if (count != model.params_.size()) throw DataError("checkpoint tensor count mismatch");
  std::vector<float> buf;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::uint32_t name_len = read_u32(f);
    if (name_len > 1024) throw DataError("checkpoint is corrupt");
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    if (!f) throw DataError("checkpoint is truncated");
    if (name != model.names_[t]) {
      throw DataError("checkpoint tensor order mismatch at " + name);
    }
    const std::uint32_t rows = read_u32(f);
    const std::uint32_t cols = read_u32(f);
    Mat& w = model.params_[t];
    if (rows != static_cast<std::uint32_t>(w.rows()) ||
        cols != static_cast<std::uint32_t>(w.cols())) {
      throw DataError("checkpoint tensor shape mismatch at " + name);
    }
    buf.resize(static_cast<std::size_t>(rows) * cols);
    f.read(reinterpret_cast<char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!f) throw DataError("checkpoint is truncated");
    std::size_t i = 0;
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = static_cast<S>(buf[i++]);
    }
  }
  return model;
}

// ---------------------------------------------------------------------------

template class TransformerT<float>;
template class TransformerT<double>;
template LossParts sequence_loss<float>(
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>&, const std::vector<std::int32_t>&,
    const std::vector<std::uint8_t>&, double);
template LossParts sequence_loss<double>(
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>&, const std::vector<std::int32_t>&,
    const std::vector<std::uint8_t>&, double);

}  // namespace claimcraft
