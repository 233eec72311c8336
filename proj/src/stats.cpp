#include "claimcraft/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "claimcraft/common.hpp"

namespace claimcraft {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double mean(const std::vector<double>& v) {
  if (v.empty()) throw DataError("mean of an empty vector");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) throw DataError("sample variance needs at least two values");
  const double m = mean(v);
  double acc = 0.0;
  for (const double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size() - 1);
}

namespace {

void require_finite(const std::vector<double>& v, const char* what) {
  for (const double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(what) + " contains a non-finite value");
  }
}

// 1-based midranks in input order.
std::vector<double> midranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> out(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) out[idx[k]] = r;
    i = j + 1;
  }
  return out;
}

struct Placements {
  std::vector<double> v10;  // per positive
  std::vector<double> v01;  // per negative
  double auc = 0.0;
};

// Midrank placements: v10[i] is the fraction of negatives scored below
// positive i (ties half), v01[j] the fraction of positives above negative j.
Placements placements(const std::vector<double>& pos, const std::vector<double>& neg) {
  const std::size_t m = pos.size();
  const std::size_t n = neg.size();
  if (m < 2 || n < 2) throw DataError("placement variance needs two scores per class");
  require_finite(pos, "positive scores");
  require_finite(neg, "negative scores");

  std::vector<double> all(pos);
  all.insert(all.end(), neg.begin(), neg.end());
  const auto tz = midranks(all);
  const auto tx = midranks(pos);
  const auto ty = midranks(neg);

  Placements p;
  p.v10.resize(m);
  p.v01.resize(n);
  for (std::size_t i = 0; i < m; ++i) p.v10[i] = (tz[i] - tx[i]) / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    p.v01[j] = 1.0 - (tz[m + j] - ty[j]) / static_cast<double>(m);
  }
  p.auc = mean(p.v10);
  return p;
}

double covariance(const std::vector<double>& x, double mx, const std::vector<double>& y,
                  double my) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - mx) * (y[i] - my);
  return acc / static_cast<double>(x.size() - 1);
}

}  // namespace

AucEstimate delong_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  const Placements p = placements(pos, neg);
  const double s10 = covariance(p.v10, p.auc, p.v10, p.auc);
  const double s01 = covariance(p.v01, p.auc, p.v01, p.auc);
  return {p.auc, s10 / static_cast<double>(pos.size()) + s01 / static_cast<double>(neg.size())};
}

PairedAucTest delong_paired(const std::vector<double>& pos_a, const std::vector<double>& neg_a,
                            const std::vector<double>& pos_b, const std::vector<double>& neg_b) {
  if (pos_a.size() != pos_b.size() || neg_a.size() != neg_b.size()) {
    throw DataError("paired comparison requires the same subjects under both models");
  }
  const Placements pa = placements(pos_a, neg_a);
  const Placements pb = placements(pos_b, neg_b);
  const double m = static_cast<double>(pos_a.size());
  const double n = static_cast<double>(neg_a.size());

  PairedAucTest t;
  t.a = {pa.auc, covariance(pa.v10, pa.auc, pa.v10, pa.auc) / m +
                     covariance(pa.v01, pa.auc, pa.v01, pa.auc) / n};
  t.b = {pb.auc, covariance(pb.v10, pb.auc, pb.v10, pb.auc) / m +
                     covariance(pb.v01, pb.auc, pb.v01, pb.auc) / n};
  const double cov = covariance(pa.v10, pa.auc, pb.v10, pb.auc) / m +
                     covariance(pa.v01, pa.auc, pb.v01, pb.auc) / n;
  t.delta = pa.auc - pb.auc;
  t.variance = t.a.variance + t.b.variance - 2.0 * cov;
  if (t.variance <= 0.0) {
    // Degenerate: identical placements (z := 0) or a numerically vanished
    // variance with a real gap.
    t.variance = std::max(t.variance, 0.0);
    t.z = 0.0;
    t.p_two_sided = t.delta == 0.0 ? 1.0 : 0.0;
    return t;
  }
  t.z = t.delta / std::sqrt(t.variance);
  t.p_two_sided = 2.0 * normal_cdf(-std::abs(t.z));
  return t;
}

// ---------------------------------------------------------------------------

SignedRankTest wilcoxon_signed_rank(const std::vector<double>& diffs) {
  require_finite(diffs, "paired differences");
  std::vector<double> d;
  d.reserve(diffs.size());
  for (const double x : diffs) {
    if (x != 0.0) d.push_back(x);
  }

  SignedRankTest out;
  out.n_nonzero = d.size();
  if (d.empty()) return out;  // w_plus 0, p 1

  const std::size_t n = d.size();
  std::vector<double> mags(n);
  for (std::size_t i = 0; i < n; ++i) mags[i] = std::abs(d[i]);
  const auto ranks = midranks(mags);
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] > 0.0) out.w_plus += ranks[i];
  }

  if (n <= kWilcoxonExactLimit) {
    // Doubled midranks are integers; count sign assignments by subset sum.
    // Counts stay below 2^25 and are exact in doubles.
    std::vector<long long> r2(n);
    long long total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      r2[i] = std::llround(2.0 * ranks[i]);
      total += r2[i];
    }
    std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
    count[0] = 1.0;
    for (const long long r : r2) {
      for (long long s = total; s >= r; --s) {
        count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - r)];
      }
    }
    const long long w2 = std::llround(2.0 * out.w_plus);
    double below = 0.0;
    double above = 0.0;
    for (long long s = 0; s <= total; ++s) {
      if (s <= w2) below += count[static_cast<std::size_t>(s)];
      if (s >= w2) above += count[static_cast<std::size_t>(s)];
    }
    const double denom = std::ldexp(1.0, static_cast<int>(n));
    out.p_two_sided = std::min(1.0, 2.0 * std::min(below, above) / denom);
    out.exact = true;
    return out;
  }

  const double nn = static_cast<double>(n);
  const double mu = nn * (nn + 1.0) / 4.0;
  double tie = 0.0;
  {
    std::vector<double> sorted(mags);
    std::sort(sorted.begin(), sorted.end());
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      tie += t * t * t - t;
      i = j + 1;
    }
  }
  const double sigma2 = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie / 48.0;
  out.exact = false;
  if (sigma2 <= 0.0) {
    out.p_two_sided = 1.0;
    return out;
  }
  const double z = (out.w_plus - mu) / std::sqrt(sigma2);
  out.p_two_sided = 2.0 * normal_cdf(-std::abs(z));
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> holm_adjust(const std::vector<double>& pvals) {
  for (const double p : pvals) {
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("p-value outside [0, 1]");
  }
  const std::size_t m = pvals.size();
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return pvals[a] < pvals[b]; });
  std::vector<double> out(m);
  double running = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    running = std::max(running, static_cast<double>(m - k) * pvals[idx[k]]);
    out[idx[k]] = std::min(1.0, running);
  }
  return out;
}

Interval bootstrap_percentile_ci(
    std::size_t n, const std::function<double(const std::vector<std::size_t>&)>& stat,
    std::size_t n_boot, double alpha, Rng& rng) {
  if (n == 0) throw DataError("bootstrap over zero items");
  if (n_boot == 0) throw DataError("bootstrap needs replicates");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("bootstrap alpha outside (0, 1)");

  std::vector<double> reps(n_boot);
  std::vector<std::size_t> sample(n);
  for (std::size_t b = 0; b < n_boot; ++b) {
    for (std::size_t i = 0; i < n; ++i) sample[i] = static_cast<std::size_t>(rng.below(n));
    reps[b] = stat(sample);
  }
  std::sort(reps.begin(), reps.end());
  const auto quantile = [&](double prob) {
    const double h = prob * static_cast<double>(n_boot - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    if (lo + 1 >= n_boot) return reps.back();
    return reps[lo] * (1.0 - frac) + reps[lo + 1] * frac;
  };
  return {quantile(alpha / 2.0), quantile(1.0 - alpha / 2.0)};
}

}  // namespace claimcraft
