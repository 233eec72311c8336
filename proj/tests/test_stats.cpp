#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "claimcraft/common.hpp"
#include "claimcraft/rng.hpp"
#include "claimcraft/stats.hpp"

using namespace claimcraft;

namespace {

// Independent oracle: direct pairwise psi sums, no midranks. Quadratic, test
// sizes only.
double psi(double x, double y) { return x > y ? 1.0 : (x == y ? 0.5 : 0.0); }

struct NaiveDeLong {
  double auc;
  double variance;
  std::vector<double> v10, v01;
};

NaiveDeLong naive_delong(const std::vector<double>& pos, const std::vector<double>& neg) {
  const std::size_t m = pos.size(), n = neg.size();
  NaiveDeLong r;
  r.v10.resize(m);
  r.v01.resize(n);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (const double y : neg) acc += psi(pos[i], y);
    r.v10[i] = acc / static_cast<double>(n);
  }
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (const double x : pos) acc += psi(x, neg[j]);
    r.v01[j] = acc / static_cast<double>(m);
  }
  double auc = 0.0;
  for (const double v : r.v10) auc += v;
  r.auc = auc / static_cast<double>(m);
  double s10 = 0.0, s01 = 0.0;
  for (const double v : r.v10) s10 += (v - r.auc) * (v - r.auc);
  for (const double v : r.v01) s01 += (v - r.auc) * (v - r.auc);
  s10 /= static_cast<double>(m - 1);
  s01 /= static_cast<double>(n - 1);
  r.variance = s10 / static_cast<double>(m) + s01 / static_cast<double>(n);
  return r;
}

// Independent oracle: full enumeration of sign assignments, own ranks.
std::pair<double, double> brute_wilcoxon(const std::vector<double>& diffs) {
  std::vector<double> nz;
  for (const double x : diffs) {
    if (x != 0.0) nz.push_back(x);
  }
  const std::size_t n = nz.size();
  if (n == 0) return {0.0, 1.0};
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < n; ++i) order.emplace_back(std::abs(nz[i]), i);
  std::sort(order.begin(), order.end());
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && order[j + 1].first == order[i].first) ++j;
    for (std::size_t k = i; k <= j; ++k) {
      ranks[order[k].second] = 0.5 * static_cast<double>(i + j) + 1.0;
    }
    i = j + 1;
  }
  double w = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (nz[k] > 0.0) w += ranks[k];
  }
  const std::size_t masks = std::size_t{1} << n;
  std::size_t below = 0, above = 0;
  for (std::size_t mask = 0; mask < masks; ++mask) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (mask & (std::size_t{1} << k)) s += ranks[k];
    }
    if (s <= w + 1e-9) ++below;
    if (s >= w - 1e-9) ++above;
  }
  const double p =
      2.0 * static_cast<double>(std::min(below, above)) / static_cast<double>(masks);
  return {w, std::min(1.0, p)};
}

const std::vector<double> kPosA{0.92, 0.85, 0.85, 0.71, 0.64, 0.77,
                               0.55, 0.91, 0.83, 0.60, 0.49, 0.88};
const std::vector<double> kNegA{0.35, 0.42, 0.55, 0.27, 0.64, 0.31, 0.18, 0.22,
                               0.47, 0.51, 0.39, 0.44, 0.29, 0.71, 0.12};
const std::vector<double> kPosB{0.88, 0.79, 0.81, 0.66, 0.58, 0.70,
                               0.61, 0.84, 0.76, 0.52, 0.57, 0.80};
const std::vector<double> kNegB{0.40, 0.45, 0.50, 0.33, 0.61, 0.36, 0.25, 0.28,
                               0.49, 0.53, 0.41, 0.46, 0.34, 0.66, 0.20};

}  // namespace

TEST_CASE("normal cdf matches reference points") {
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_cdf(1.96) == doctest::Approx(0.9750021048517795).epsilon(1e-12));
  CHECK(normal_cdf(-1.6448536269514722) == doctest::Approx(0.05).epsilon(1e-12));
  for (double z = -4.0; z <= 4.0; z += 0.37) {
    CHECK(normal_cdf(z) + normal_cdf(-z) == doctest::Approx(1.0).epsilon(1e-13));
  }
}

TEST_CASE("mean and sample variance") {
  CHECK(mean({2.0, 4.0, 9.0}) == doctest::Approx(5.0));
  CHECK(sample_variance({2.0, 4.0, 9.0}) == doctest::Approx(13.0));  // (9+1+16)/2
  CHECK_THROWS_AS(mean({}), DataError);
  CHECK_THROWS_AS(sample_variance({1.0}), DataError);
}

TEST_CASE("auc matches hand-computed placements") {
  // pos {1,3} vs neg {0,2}: correct pairs 3 of 4; v10 {0.5,1}, v01 {1,0.5},
  // s10 = s01 = 0.125, var = 0.125/2 + 0.125/2.
  const auto r = delong_auc({1.0, 3.0}, {0.0, 2.0});
  CHECK(r.auc == doctest::Approx(0.75));
  CHECK(r.variance == doctest::Approx(0.125));
}

TEST_CASE("auc agrees with the pairwise oracle on frozen fixtures") {
  // Values cross-checked against an independent pairwise implementation and
  // sklearn's rank-based AUC.
  const auto a = delong_auc(kPosA, kNegA);
  CHECK(a.auc == doctest::Approx(0.9416666666666665).epsilon(1e-12));
  CHECK(a.variance == doctest::Approx(0.001597823472823473).epsilon(1e-9));
  const auto b = delong_auc(kPosB, kNegB);
  CHECK(b.auc == doctest::Approx(0.95).epsilon(1e-12));
  CHECK(b.variance == doctest::Approx(0.0013585257335257334).epsilon(1e-9));
}

TEST_CASE("auc agrees with the pairwise oracle on tie-heavy random data") {
  Rng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = 2 + rng.below(39);
    const std::size_t n = 2 + rng.below(39);
    std::vector<double> pos(m), neg(n);
    // Coarse grid forces ties within and across classes.
    for (auto& x : pos) x = 0.25 * static_cast<double>(rng.below(12)) + 0.25;
    for (auto& y : neg) y = 0.25 * static_cast<double>(rng.below(12));
    const auto got = delong_auc(pos, neg);
    const auto want = naive_delong(pos, neg);
    CHECK(got.auc == doctest::Approx(want.auc).epsilon(1e-12));
    CHECK(got.variance == doctest::Approx(want.variance).epsilon(1e-10));
  }
}

TEST_CASE("auc extremes") {
  const auto perfect = delong_auc({5.0, 6.0, 7.0}, {1.0, 2.0});
  CHECK(perfect.auc == doctest::Approx(1.0));
  CHECK(perfect.variance == doctest::Approx(0.0));
  // Score shifts common to both classes change nothing.
  const auto base = delong_auc(kPosA, kNegA);
  std::vector<double> pos(kPosA), neg(kNegA);
  for (auto& x : pos) x += 100.0;
  for (auto& y : neg) y += 100.0;
  const auto shifted = delong_auc(pos, neg);
  CHECK(shifted.auc == doctest::Approx(base.auc).epsilon(1e-13));
  CHECK(shifted.variance == doctest::Approx(base.variance).epsilon(1e-13));

  CHECK_THROWS_AS(delong_auc({1.0}, {0.0, 2.0}), DataError);
  CHECK_THROWS_AS(delong_auc({1.0, 2.0}, {0.0}), DataError);
  CHECK_THROWS_AS(delong_auc({1.0, std::nan("")}, {0.0, 2.0}), NumericError);
}

TEST_CASE("paired auc comparison matches frozen fixture") {
  const auto t = delong_paired(kPosA, kNegA, kPosB, kNegB);
  CHECK(t.a.auc == doctest::Approx(0.9416666666666665).epsilon(1e-12));
  CHECK(t.b.auc == doctest::Approx(0.95).epsilon(1e-12));
  CHECK(t.delta == doctest::Approx(-0.008333333333333).epsilon(1e-9));
  CHECK(t.variance == doctest::Approx(0.0002735690235690243).epsilon(1e-9));
  CHECK(t.z == doctest::Approx(-0.5038314736557966).epsilon(1e-9));
  CHECK(t.p_two_sided == doctest::Approx(0.6143798085376831).epsilon(1e-9));
}

TEST_CASE("paired auc comparison properties") {
  const auto self = delong_paired(kPosA, kNegA, kPosA, kNegA);
  CHECK(self.delta == 0.0);
  CHECK(self.z == 0.0);
  CHECK(self.p_two_sided == 1.0);

  const auto ab = delong_paired(kPosA, kNegA, kPosB, kNegB);
  const auto ba = delong_paired(kPosB, kNegB, kPosA, kNegA);
  CHECK(ab.z == doctest::Approx(-ba.z).epsilon(1e-12));
  CHECK(ab.p_two_sided == doctest::Approx(ba.p_two_sided).epsilon(1e-12));

  // Paired covariance against the pairwise oracle on random data.
  Rng rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t m = 3 + rng.below(20);
    const std::size_t n = 3 + rng.below(20);
    std::vector<double> pa(m), na(n), pb(m), nb(n);
    for (std::size_t i = 0; i < m; ++i) {
      pa[i] = 0.5 * static_cast<double>(rng.below(8));
      pb[i] = pa[i] + 0.25 * static_cast<double>(rng.below(4));
    }
    for (std::size_t j = 0; j < n; ++j) {
      na[j] = 0.5 * static_cast<double>(rng.below(8));
      nb[j] = na[j] + 0.25 * static_cast<double>(rng.below(4));
    }
    const auto t = delong_paired(pa, na, pb, nb);
    const auto oa = naive_delong(pa, na);
    const auto ob = naive_delong(pb, nb);
    double s10ab = 0.0, s01ab = 0.0;
    for (std::size_t i = 0; i < m; ++i) s10ab += (oa.v10[i] - oa.auc) * (ob.v10[i] - ob.auc);
    for (std::size_t j = 0; j < n; ++j) s01ab += (oa.v01[j] - oa.auc) * (ob.v01[j] - ob.auc);
    s10ab /= static_cast<double>(m - 1);
    s01ab /= static_cast<double>(n - 1);
    const double want_var = oa.variance + ob.variance -
                            2.0 * (s10ab / static_cast<double>(m) + s01ab / static_cast<double>(n));
    if (want_var > 1e-12) {
      CHECK(t.variance == doctest::Approx(want_var).epsilon(1e-9));
    }
  }

  CHECK_THROWS_AS(delong_paired(kPosA, kNegA, kPosB, {0.1, 0.2}), DataError);
}

TEST_CASE("signed-rank exact tail matches frozen fixtures") {
  {
    const auto r = wilcoxon_signed_rank({1.0, 2.0, 3.0});
    CHECK(r.exact);
    CHECK(r.n_nonzero == 3);
    CHECK(r.w_plus == doctest::Approx(6.0));
    CHECK(r.p_two_sided == doctest::Approx(0.25));
  }
  {
    const auto r = wilcoxon_signed_rank({1.0, -1.0});
    CHECK(r.exact);
    CHECK(r.w_plus == doctest::Approx(1.5));
    CHECK(r.p_two_sided == doctest::Approx(1.0));
  }
  {
    // Zeros drop; tied magnitudes share midranks.
    const auto r = wilcoxon_signed_rank({0.0, 2.0, -2.0, 0.0, 3.0});
    CHECK(r.exact);
    CHECK(r.n_nonzero == 3);
    CHECK(r.w_plus == doctest::Approx(4.5));
    CHECK(r.p_two_sided == doctest::Approx(0.75));
  }
  {
    const std::vector<double> d{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    const auto r = wilcoxon_signed_rank(d);
    CHECK(r.w_plus == doctest::Approx(55.0));
    CHECK(r.p_two_sided == doctest::Approx(0.001953125).epsilon(1e-12));
  }
  {
    const auto r = wilcoxon_signed_rank({0.0, 0.0});
    CHECK(r.n_nonzero == 0);
    CHECK(r.p_two_sided == 1.0);
  }
}

TEST_CASE("signed-rank exact tail matches full enumeration") {
  Rng rng(404);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    std::vector<double> d(n);
    for (auto& x : d) x = 0.5 * static_cast<double>(rng.int_range(-4, 4));
    const auto got = wilcoxon_signed_rank(d);
    const auto [w, p] = brute_wilcoxon(d);
    CHECK(got.exact);
    CHECK(got.w_plus == doctest::Approx(w));
    CHECK(got.p_two_sided == doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("signed-rank switches to the tie-corrected normal tail") {
  // n = 30 with heavy ties; statistic and p pinned against scipy with the
  // continuity correction off.
  const std::vector<double> d{3,  -1, 2, 5, -2, 4, 1,  -3, 6, 2,  -4, 7, 1, -1, 2,
                              8,  -5, 3, 2, -2, 9, 4,  -1, 5, 3,  -6, 2, 1, 4,  -3};
  const auto r = wilcoxon_signed_rank(d);
  CHECK_FALSE(r.exact);
  CHECK(r.n_nonzero == 30);
  CHECK(r.w_plus == doctest::Approx(331.5));
  CHECK(r.p_two_sided == doctest::Approx(0.0410441581478677).epsilon(1e-12));

  // Exact-path boundary.
  std::vector<double> d25;
  for (int i = 1; i <= 25; ++i) d25.push_back(i);
  const auto r25 = wilcoxon_signed_rank(d25);
  CHECK(r25.exact);
  CHECK(r25.p_two_sided == doctest::Approx(2.0 / 33554432.0).epsilon(1e-12));
  d25.push_back(26.0);
  CHECK_FALSE(wilcoxon_signed_rank(d25).exact);

  CHECK_THROWS_AS(wilcoxon_signed_rank({1.0, std::nan("")}), NumericError);
}

TEST_CASE("holm adjustment") {
  const auto adj = holm_adjust({0.01, 0.04, 0.03, 0.005});
  REQUIRE(adj.size() == 4);
  CHECK(adj[0] == doctest::Approx(0.03));
  CHECK(adj[1] == doctest::Approx(0.06));
  CHECK(adj[2] == doctest::Approx(0.06));
  CHECK(adj[3] == doctest::Approx(0.02));

  CHECK(holm_adjust({0.5, 0.9}) == std::vector<double>{1.0, 1.0});
  CHECK(holm_adjust({0.2}) == std::vector<double>{0.2});
  CHECK(holm_adjust({}).empty());
  CHECK_THROWS_AS(holm_adjust({-0.01}), DataError);
  CHECK_THROWS_AS(holm_adjust({1.2}), DataError);

  // Adjusted values dominate raw ones and are permutation-equivariant.
  Rng rng(9);
  std::vector<double> p(9);
  for (auto& x : p) x = rng.uniform01();
  const auto a = holm_adjust(p);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(a[i] >= p[i]);
  std::vector<std::size_t> perm(p.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);
  std::vector<double> q(p.size());
  for (std::size_t i = 0; i < perm.size(); ++i) q[i] = p[perm[i]];
  const auto aq = holm_adjust(q);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    CHECK(aq[i] == doctest::Approx(a[perm[i]]).epsilon(1e-15));
  }
}

TEST_CASE("percentile bootstrap") {
  std::vector<double> values(200);
  Rng data_rng(31);
  for (auto& v : values) v = data_rng.normal(10.0, 3.0);
  const auto stat = [&](const std::vector<std::size_t>& idx) {
    double acc = 0.0;
    for (const std::size_t i : idx) acc += values[i];
    return acc / static_cast<double>(idx.size());
  };

  Rng rng_a = Rng(42).fork(7);
  const auto ci = bootstrap_percentile_ci(values.size(), stat, 2000, 0.05, rng_a);
  const double m = mean(values);
  const double se = std::sqrt(sample_variance(values) / static_cast<double>(values.size()));
  CHECK(ci.lo < m);
  CHECK(ci.hi > m);
  const double half = 0.5 * (ci.hi - ci.lo);
  CHECK(half == doctest::Approx(1.96 * se).epsilon(0.25));

  // Nested coverage and determinism.
  Rng rng_b = Rng(42).fork(7);
  const auto again = bootstrap_percentile_ci(values.size(), stat, 2000, 0.05, rng_b);
  CHECK(again.lo == ci.lo);
  CHECK(again.hi == ci.hi);
  Rng rng_c = Rng(42).fork(8);
  const auto other = bootstrap_percentile_ci(values.size(), stat, 2000, 0.05, rng_c);
  CHECK(other.lo != ci.lo);
  Rng rng_d = Rng(42).fork(7);
  const auto narrow = bootstrap_percentile_ci(values.size(), stat, 2000, 0.10, rng_d);
  CHECK(narrow.lo >= ci.lo);
  CHECK(narrow.hi <= ci.hi);

  // Degenerate data collapses the interval.
  const auto const_stat = [](const std::vector<std::size_t>&) { return 3.25; };
  Rng rng_e(1);
  const auto flat = bootstrap_percentile_ci(50, const_stat, 100, 0.05, rng_e);
  CHECK(flat.lo == 3.25);
  CHECK(flat.hi == 3.25);

  Rng rng_f(2);
  CHECK_THROWS_AS(bootstrap_percentile_ci(0, const_stat, 100, 0.05, rng_f), DataError);
  CHECK_THROWS_AS(bootstrap_percentile_ci(10, const_stat, 0, 0.05, rng_f), DataError);
  CHECK_THROWS_AS(bootstrap_percentile_ci(10, const_stat, 100, 0.0, rng_f), DataError);
}
