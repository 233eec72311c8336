#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "claimcraft/rng.hpp"

namespace claimcraft {

// Standard normal CDF.
double normal_cdf(double z);

double mean(const std::vector<double>& v);
double sample_variance(const std::vector<double>& v);  // (n-1) denominator

// ---------------------------------------------------------------------------
// AUC with the DeLong placement variance. Ties contribute 1/2.

struct AucEstimate {
  double auc = 0.0;
  double variance = 0.0;

  bool operator==(const AucEstimate&) const = default;
};

// Requires at least two scores on each side; scores must be finite.
AucEstimate delong_auc(const std::vector<double>& pos, const std::vector<double>& neg);

// Paired comparison of two score sets over the same subjects: pos_a[i] and
// pos_b[i] score the same positive, likewise for negatives. The difference
// variance is covariance-adjusted; the test is two-sided.
struct PairedAucTest {
  AucEstimate a, b;
  double delta = 0.0;     // auc_a - auc_b
  double variance = 0.0;  // var(delta)
  double z = 0.0;
  double p_two_sided = 1.0;
};

PairedAucTest delong_paired(const std::vector<double>& pos_a, const std::vector<double>& neg_a,
                            const std::vector<double>& pos_b, const std::vector<double>& neg_b);

// ---------------------------------------------------------------------------
// Two-sided Wilcoxon signed-rank test on paired differences. Zero differences
// are dropped; tied magnitudes share midranks. Up to kWilcoxonExactLimit
// nonzero pairs the tail is enumerated exactly (doubled midranks are integers,
// so a subset-sum table over sign flips is exact); above it a normal
// approximation with tie-corrected variance is used, without continuity
// correction.

inline constexpr std::size_t kWilcoxonExactLimit = 25;

struct SignedRankTest {
  std::size_t n_nonzero = 0;
  double w_plus = 0.0;  // sum of ranks of positive differences
  double p_two_sided = 1.0;
  bool exact = true;
};

SignedRankTest wilcoxon_signed_rank(const std::vector<double>& diffs);

// ---------------------------------------------------------------------------

// Holm step-down multiplicity adjustment; returns adjusted p-values in the
// input order, clamped to 1.
std::vector<double> holm_adjust(const std::vector<double>& pvals);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Percentile bootstrap confidence interval for a statistic of n items. The
// callback receives a resampled index multiset of size n for each replicate;
// interval endpoints interpolate linearly between order statistics.
Interval bootstrap_percentile_ci(
    std::size_t n, const std::function<double(const std::vector<std::size_t>&)>& stat,
    std::size_t n_boot, double alpha, Rng& rng);

}  // namespace claimcraft
