#include "claimcraft/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "claimcraft/common.hpp"

namespace claimcraft {

void TrainSpec::validate() const {
  if (batch_size <= 0) throw ConfigError("batch size must be positive");
  if (window_len <= 0) throw ConfigError("window length must be positive");
  if (peak_lr <= 0.0) throw ConfigError("peak learning rate must be positive");
  if (warmup_steps < 0) throw ConfigError("warmup steps cannot be negative");
  if (total_steps <= 0) throw ConfigError("total steps must be positive");
  if (warmup_steps > total_steps) throw ConfigError("warmup cannot exceed total steps");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ConfigError("moment coefficients must lie in [0, 1)");
  }
  if (adam_eps <= 0.0) throw ConfigError("optimizer epsilon must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight decay cannot be negative");
  if (clip_norm <= 0.0) throw ConfigError("clip norm must be positive");
  if (min_lr_ratio < 0.0 || min_lr_ratio > 1.0) {
    throw ConfigError("min_lr_ratio must lie in [0, 1]");
  }
}

double schedule_lr(const TrainSpec& spec, int step) {
  if (step < spec.warmup_steps) {
    return spec.peak_lr * static_cast<double>(step + 1) / spec.warmup_steps;
  }
  if (spec.decay == DecayShape::constant || spec.total_steps <= spec.warmup_steps) {
    return spec.peak_lr;
  }
  const double progress = static_cast<double>(step - spec.warmup_steps) /
                          static_cast<double>(spec.total_steps - spec.warmup_steps);
  const double floor = spec.peak_lr * spec.min_lr_ratio;
  return floor + (spec.peak_lr - floor) * 0.5 * (1.0 + std::cos(M_PI * progress));
}

// ---------------------------------------------------------------------------

AdamW::AdamW(const Transformer& model, const TrainSpec& spec) : spec_(spec) {
  spec_.validate();
  m_ = model.zero_like();
  v_ = model.zero_like();
  decay_.reserve(model.tensor_names().size());
  for (const auto& name : model.tensor_names()) {
    const bool gain = name.find("ln") != std::string::npos || name == "final_norm";
    decay_.push_back(gain ? 0 : 1);
  }
}

double AdamW::step(Transformer& model, std::vector<Transformer::Mat>& grads, double lr) {
  if (grads.size() != m_.size()) throw DataError("gradient list does not match optimizer state");
  ++t_;

  double sq = 0.0;
  for (const auto& g : grads) sq += static_cast<double>(g.squaredNorm());
  const double norm = std::sqrt(sq);
  if (norm > spec_.clip_norm) {
    const float scale = static_cast<float>(spec_.clip_norm / norm);
    for (auto& g : grads) g *= scale;
  }

  const float b1 = static_cast<float>(spec_.beta1);
  const float b2 = static_cast<float>(spec_.beta2);
  const float bc1 = static_cast<float>(1.0 - std::pow(spec_.beta1, t_));
  const float bc2 = static_cast<float>(1.0 - std::pow(spec_.beta2, t_));
  const float eps = static_cast<float>(spec_.adam_eps);
  const float flr = static_cast<float>(lr);
  const float decay_mult = static_cast<float>(1.0 - lr * spec_.weight_decay);

  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto& p = model.tensors()[i];
    if (decay_[i]) p *= decay_mult;
    m_[i].array() = b1 * m_[i].array() + (1.0f - b1) * grads[i].array();
    v_[i].array() = b2 * v_[i].array() + (1.0f - b2) * grads[i].array().square();
    p.array() -= flr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps);
  }
  return norm;
}

// ---------------------------------------------------------------------------

std::vector<TrainExample> make_windows(const std::vector<std::vector<std::int32_t>>& sequences,
                                       int window_len) {
  if (window_len <= 0) throw ConfigError("window length must be positive");
  std::vector<TrainExample> out;
  const auto w = static_cast<std::size_t>(window_len);
  for (const auto& seq : sequences) {
    if (seq.size() < 2) continue;
    for (std::size_t start = 0; start + 1 < seq.size(); start += w) {
      const std::size_t stop = std::min(seq.size(), start + w + 1);
      TrainExample ex;
      ex.ids.assign(seq.begin() + static_cast<std::ptrdiff_t>(start),
                    seq.begin() + static_cast<std::ptrdiff_t>(stop - 1));
      ex.targets.assign(seq.begin() + static_cast<std::ptrdiff_t>(start + 1),
                        seq.begin() + static_cast<std::ptrdiff_t>(stop));
      ex.mask.assign(ex.ids.size(), 1);
      out.push_back(std::move(ex));
    }
  }
  return out;
}

namespace {

template <typename T>
void deterministic_shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace

void split_windows(std::vector<TrainExample> all, double val_fraction, std::uint64_t seed,
                   std::vector<TrainExample>& train, std::vector<TrainExample>& val) {
  if (val_fraction < 0.0 || val_fraction >= 1.0) {
    throw ConfigError("validation fraction must lie in [0, 1)");
  }
  train.clear();
  val.clear();
  Rng rng = Rng(seed).fork(11);
  deterministic_shuffle(all, rng);
  std::size_t n_val = 0;
  if (val_fraction > 0.0 && all.size() >= 2) {
    n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(all.size())));
    n_val = std::max<std::size_t>(1, std::min(n_val, all.size() - 1));
  }
  val.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_val));
  train.assign(all.begin() + static_cast<std::ptrdiff_t>(n_val), all.end());
}

double unigram_entropy(const std::vector<TrainExample>& windows) {
  std::map<std::int32_t, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& ex : windows) {
    for (std::size_t t = 0; t < ex.targets.size(); ++t) {
      if (!ex.mask[t]) continue;
      ++counts[ex.targets[t]];
      ++total;
    }
  }
  if (total == 0) throw DataError("no masked targets to measure");
  double h = 0.0;
  for (const auto& [id, c] : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h;
}

double validation_ce(const Transformer& model, const std::vector<TrainExample>& val) {
  if (val.empty()) throw DataError("empty validation set");
  double sum = 0.0;
  for (const auto& ex : val) {
    sum += sequence_loss(model.forward(ex.ids), ex.targets, ex.mask).ce;
  }
  return sum / static_cast<double>(val.size());
}

// ---------------------------------------------------------------------------

namespace {

TrainResult run_training(Transformer& model, const std::vector<TrainExample>& examples,
                         const std::vector<TrainExample>& val, const TrainSpec& spec,
                         const PretrainOptions& opt) {
  spec.validate();
  if (examples.empty()) throw DataError("no training examples");
  if (opt.val_every <= 0) throw ConfigError("val_every must be positive");

  TrainResult result;
  AdamW optimizer(model, spec);
  Rng rng(spec.seed);

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  deterministic_shuffle(order, rng);
  std::size_t cursor = 0;

  auto snapshot = model.tensors();
  auto grads = model.zero_like();

  for (int step = 0; step < spec.total_steps; ++step) {
    for (auto& g : grads) g.setZero();
    double ce = 0.0, zl = 0.0, total = 0.0;
    bool bad = false;
    for (int b = 0; b < spec.batch_size; ++b) {
      if (cursor == order.size()) {
        deterministic_shuffle(order, rng);
        cursor = 0;
      }
      const auto& ex = examples[order[cursor++]];
      try {
        const LossParts parts = model.accumulate_gradients(ex, grads);
        ce += parts.ce;
        zl += parts.z;
        total += parts.total;
      } catch (const NumericError&) {
        bad = true;
        break;
      }
    }
    const double inv_b = 1.0 / spec.batch_size;
    if (!bad && !std::isfinite(total * inv_b)) bad = true;
    if (bad) {
      model.tensors() = snapshot;
      result.diverged = true;
      result.stop_reason = "diverged";
      return result;
    }

    const float scale = static_cast<float>(inv_b);
    for (auto& g : grads) g *= scale;
    const double lr = schedule_lr(spec, step);
    const double gnorm = optimizer.step(model, grads, lr);
    result.steps.push_back({step, lr, ce * inv_b, zl * inv_b, total * inv_b, gnorm});

    const bool probe = (step + 1) % opt.val_every == 0 || step + 1 == spec.total_steps;
    if (probe) {
      if (!val.empty()) {
        const double vce = validation_ce(model, val);
        if (!std::isfinite(vce)) {
          model.tensors() = snapshot;
          result.diverged = true;
          result.stop_reason = "diverged";
          return result;
        }
        result.val.push_back({step + 1, vce});
        if (opt.early_stop_val_ce >= 0.0 && vce < opt.early_stop_val_ce) {
          result.stop_reason = "early_stop";
          return result;
        }
      }
      snapshot = model.tensors();
    }
  }
  result.stop_reason = "completed";
  return result;
}

}  // namespace

TrainResult pretrain(Transformer& model, const std::vector<TrainExample>& train,
                     const std::vector<TrainExample>& val, const TrainSpec& spec,
                     const PretrainOptions& opt) {
  return run_training(model, train, val, spec, opt);
}

// ---------------------------------------------------------------------------

std::optional<PostTrainPair> build_posttrain_pair(const std::vector<std::string>& texts,
                                                  const std::vector<std::size_t>& group_starts,
                                                  Rng& rng) {
  if (group_starts.size() < 2) return std::nullopt;

  // Months since the anchor for each monthly group, from the elapsed-time
  // tokens that open them.
  std::vector<int> month(group_starts.size(), 0);
  int cum = 0;
  for (std::size_t g = 0; g < group_starts.size(); ++g) {
    const auto gap = att_value(texts.at(group_starts[g]));
    if (!gap) throw DataError("group start does not point at an elapsed-time token");
    cum += *gap;
    month[g] = cum;
  }

  std::vector<std::size_t> eligible;
  for (std::size_t g = 1; g < group_starts.size(); ++g) {
    if (month[g] - month[0] >= 2) eligible.push_back(g);
  }
  if (eligible.empty()) return std::nullopt;

  const std::size_t pick = eligible[static_cast<std::size_t>(rng.below(eligible.size()))];
  const std::size_t pos = group_starts[pick];

  PostTrainPair pair;
  pair.prompt.assign(texts.begin(), texts.begin() + static_cast<std::ptrdiff_t>(pos));
  pair.prompt.push_back(tok::instruct_dx);

  std::set<std::string> known;
  for (std::size_t t = 0; t < pos; ++t) {
    if (const auto major = dx_major_value(texts[t])) known.insert(*major);
  }
  for (std::size_t t = pos; t < texts.size(); ++t) {
    const auto major = dx_major_value(texts[t]);
    if (!major || known.count(*major)) continue;
    known.insert(*major);  // also deduplicates within the response
    pair.response.push_back(texts[t]);
  }
  pair.response.push_back(tok::eos);
  return pair;
}

void write_pairs(const std::string& path, const std::vector<PostTrainPair>& pairs) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write " + path);
  for (const auto& pair : pairs) {
    for (std::size_t t = 0; t < pair.prompt.size(); ++t) {
      if (t) f << ' ';
      f << pair.prompt[t];
    }
    f << '\t';
    for (std::size_t t = 0; t < pair.response.size(); ++t) {
      if (t) f << ' ';
      f << pair.response[t];
    }
    f << '\n';
  }
  if (!f) throw DataError("failed while writing " + path);
}

namespace {

std::vector<std::string> split_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

}  // namespace

std::vector<PostTrainPair> read_pairs(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path);
  std::vector<PostTrainPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected exactly one tab between prompt and response");
    }
    PostTrainPair pair;
    pair.prompt = split_tokens(line.substr(0, tab));
    pair.response = split_tokens(line.substr(tab + 1));
    out.push_back(std::move(pair));
  }
  return out;
}

namespace {

void check_pair(const PostTrainPair& pair) {
  if (pair.prompt.empty()) throw DataError("empty prompt");
  if (pair.prompt.back() != tok::instruct_dx) {
    throw DataError("prompt must end with the instruction token");
  }
  for (std::size_t t = 0; t + 1 < pair.prompt.size(); ++t) {
    if (pair.prompt[t] == tok::instruct_dx) {
      throw DataError("prompt contains a second instruction token");
    }
  }
  if (pair.response.empty() || pair.response.back() != tok::eos) {
    throw DataError("response must end with <eos>");
  }
  for (std::size_t t = 0; t + 1 < pair.response.size(); ++t) {
    if (!dx_major_value(pair.response[t])) {
      throw DataError("response may contain only major diagnosis tokens before <eos>");
    }
  }
}

}  // namespace

TrainExample pair_example(const PostTrainPair& pair, const Vocabulary& vocab) {
  check_pair(pair);
  std::vector<std::string> joined = pair.prompt;
  joined.insert(joined.end(), pair.response.begin(), pair.response.end());
  const auto ids = vocab.encode(joined);

  TrainExample ex;
  ex.ids.assign(ids.begin(), ids.end() - 1);
  ex.targets.assign(ids.begin() + 1, ids.end());
  ex.mask.assign(ex.ids.size(), 0);
  for (std::size_t t = pair.prompt.size() - 1; t < ex.mask.size(); ++t) ex.mask[t] = 1;
  return ex;
}

TrainResult posttrain(Transformer& model, const std::vector<PostTrainPair>& pairs,
                      const Vocabulary& vocab, const TrainSpec& spec) {
  if (pairs.empty()) throw DataError("no post-training pairs");
  std::vector<TrainExample> examples;
  examples.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    TrainExample ex;
    try {
      ex = pair_example(pairs[i], vocab);
    } catch (const DataError& e) {
      throw DataError("pair " + std::to_string(i) + ": " + e.what());
    }
    if (ex.ids.size() > static_cast<std::size_t>(model.config().max_positions)) {
      throw DataError("pair " + std::to_string(i) + ": exceeds the model context");
    }
    examples.push_back(std::move(ex));
  }
  PretrainOptions opt;
  return run_training(model, examples, {}, spec, opt);
}

void write_metrics_csv(const std::string& path, const TrainResult& result) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write " + path);
  f << "step,ce,z,total\n";
  char buf[160];
  for (const auto& s : result.steps) {
    std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.10g\n", s.step, s.ce, s.z, s.total);
    f << buf;
  }
  if (!f) throw DataError("failed while writing " + path);
}

}  // namespace claimcraft
