#include <gtest/gtest.h>

#include <random>

#include "shortint/shortwin.hpp"

using namespace shortint;

namespace {

const PrimeTable& primes() {
  static const PrimeTable t(100'000);
  return t;
}

}  // namespace

TEST(WindowSums, OneFunction) {
  const auto t = ValueTable::build(dk_spec(1), 10'000, primes(), {.h_max = 20});
  EXPECT_TRUE(t.exact());
  for (auto s : window_sums_exact(t, 7)) ASSERT_EQ(s, 7);
  for (auto s : window_sums_exact(t, 0)) ASSERT_EQ(s, 0);
  EXPECT_THROW(window_sums(t, 21), RangeError);
}

TEST(WindowSums, DivisorFunctionMatchesDirectSummation) {
  const std::uint64_t X = 10'000, h = 10;
  const auto t = ValueTable::build(dk_spec(2), X, primes(), {.h_max = h});
  const auto sums = window_sums_exact(t, h);
  for (std::uint64_t x = X; x <= 2 * X; ++x) {
    std::int64_t direct = 0;
    for (std::uint64_t m = x + 1; m <= x + h; ++m) direct += dk_value(trial_division_factor(m), 2);
    ASSERT_EQ(sums[x - X], direct) << x;
  }
}

TEST(ValueTable, ComplexPrefixMatchesDirectOnRandomWindows) {
  const auto spec = dk_twist_spec(3, 1.25);
  const std::uint64_t X = 200'000;
  const auto t = ValueTable::build(spec, X, primes(), {.h_max = 500, .t0 = 1.25});
  EXPECT_FALSE(t.exact());
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::uint64_t> xs(X, 2 * X), hs(1, 500);
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t x = xs(rng), h = hs(rng);
    ComplexNeumaierSum direct;
    NeumaierSum mass;
    for (std::uint64_t m = x + 1; m <= x + h; ++m) {
      const cplx v = eval(spec, trial_division_factor(m));
      direct += v;
      mass += std::abs(v);
    }
    ASSERT_LE(std::abs(t.range_sum(x, x + h) - direct.value()), 1e-9 * mass.value()) << x << " " << h;
  }
}

TEST(ValueTable, ThreadCountInvariant) {
  const auto spec = dk_twist_spec(2, 0.5);
  const auto a = ValueTable::build(spec, 50'000, primes(), {.h_max = 30, .t0 = 0.5, .threads = {1}, .chunk = 4096});
  const auto b = ValueTable::build(spec, 50'000, primes(), {.h_max = 30, .t0 = 0.5, .threads = {6}, .chunk = 4096});
  EXPECT_EQ(a.long_twisted(), b.long_twisted());
  for (std::uint64_t x = 50'000; x <= 100'000; x += 37) ASSERT_EQ(a.range_sum(x, x + 30), b.range_sum(x, x + 30));
}

TEST(WindowWeight, Examples) {
  EXPECT_EQ(window_weight(123.0, 7.0, 0.0), cplx(7.0));
  EXPECT_EQ(window_weight_mean(123.0, 7.0, 0.0), cplx(1.0));
  const cplx lim = window_weight_mean(500.0, 1e-9, 2.0);
  EXPECT_NEAR(std::abs(lim - std::exp(cplx(0, 2.0 * std::log(500.0)))), 0.0, 1e-8);

  // Composite Simpson with 2e5 panels as the quadrature oracle.
  const double x = 100, h = 10, t0 = 3;
  const int n = 200'000;
  ComplexNeumaierSum acc;
  for (int i = 0; i <= n; ++i) {
    const double u = x + h * i / n;
    const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    acc += w * std::exp(cplx(0, t0 * std::log(u)));
  }
  const cplx quad = acc.value() * (h / n / 3.0);
  EXPECT_NEAR(std::abs(window_weight(x, h, t0) - quad), 0.0, 1e-10);
}

TEST(Discrepancy, OneFunctionIsZero) {
  const auto t = ValueTable::build(dk_spec(1), 10'000, primes(), {.h_max = 16});
  const auto scan = discrepancy_profile(t, 16, {.etas = {0.1, 1.0}});
  for (auto d : scan.delta) ASSERT_EQ(d, cplx(0.0));
  EXPECT_EQ(scan.delta.size(), 10'001u);
  EXPECT_EQ(exceptional_measure(scan, 1e-12), 0.0);
  EXPECT_EQ(l2_variance(t, 16, 0.0, Centering::plain), 0.0);
}

TEST(Discrepancy, PureTwistCancelsThroughWeight) {
  const double tau = 2.5;
  const std::uint64_t X = 1'000'000, h = 1000;
  const PrimeTable P(2000);
  const auto t = ValueTable::build(dk_twist_spec(1, tau), X, P, {.h_max = h, .t0 = tau});
  const auto scan = discrepancy_profile(t, h, {.t0 = tau, .etas = {}, .keep_delta = false});
  EXPECT_LE(scan.max_abs, 1e-2);
}

TEST(Discrepancy, MismatchedT0IsParameterError) {
  const auto t = ValueTable::build(dk_twist_spec(2, 1.0), 10'000, primes(), {.h_max = 8, .t0 = 1.0});
  EXPECT_THROW(discrepancy_profile(t, 8, {.t0 = 0.5, .etas = {}}), ParameterError);
  EXPECT_NO_THROW(discrepancy_profile(t, 8, {.t0 = 0.5, .centering = Centering::plain, .etas = {}}));
  EXPECT_THROW(discrepancy_profile(t, 0, {.t0 = 1.0, .etas = {}}), ParameterError);
  EXPECT_THROW(discrepancy_profile(t, 9, {.t0 = 1.0, .etas = {}}), RangeError);
}

TEST(Discrepancy, SummaryInvariants) {
  const std::uint64_t X = 100'000, h = 10;
  const auto t = ValueTable::build(dk_spec(2), X, primes(), {.h_max = h});
  const double L = std::log(static_cast<double>(X));
  const auto scan = discrepancy_profile(t, h, {.normalizer = L, .etas = {0.1, 0.25, 0.5, 1.0, 2.0}});
  EXPECT_EQ(scan.delta.size(), X + 1);
  for (auto d : scan.delta) ASSERT_TRUE(std::isfinite(d.real()) && std::isfinite(d.imag()));
  EXPECT_LE(scan.mean_abs * scan.mean_abs, scan.l2 + 1e-9);
  for (std::size_t i = 1; i < scan.exceptional.size(); ++i) {
    EXPECT_LE(scan.exceptional[i].second, scan.exceptional[i - 1].second);
  }
  EXPECT_LE(scan.p50, scan.p90);
  EXPECT_LE(scan.p90, scan.p99);
  EXPECT_EQ(exceptional_measure(scan, 1e-300), 1.0);
  // Telescoping: with h | X the mean of Delta is a boundary effect.
  EXPECT_LE(std::abs(scan.mean_delta), 10.0 * t.max_abs() / static_cast<double>(X));
}

TEST(Variance, DiagonalScalingAtMillion) {
  const std::uint64_t X = 1'000'000;
  const PrimeTable P(2000);
  const auto t = ValueTable::build(dk_spec(2), X, P, {.h_max = 8});
  double prev = std::numeric_limits<double>::infinity();
  std::vector<double> hv;
  for (std::uint64_t h : {1, 2, 4, 8}) {
    const double v = l2_variance(t, h, 0.0, Centering::plain);
    EXPECT_LT(v, prev);
    prev = v;
    hv.push_back(h * v);
  }
  std::vector<double> sorted = hv;
  std::sort(sorted.begin(), sorted.end());
  const double median = 0.5 * (sorted[1] + sorted[2]);
  for (double v : hv) {
    EXPECT_LE(v, 2 * median);
    EXPECT_GE(v, median / 2);
  }
}

TEST(InverseThreshold, Examples) {
  const std::uint64_t X = 100'000;
  const auto r = inverse_threshold_experiment(X, 2, 0.36, {0, 1, 2, 4, 8, 16}, primes());
  EXPECT_EQ(r.rows[0].vanish_fraction, 1.0);
  for (std::size_t i = 1; i < r.rows.size(); ++i) {
    EXPECT_LE(r.rows[i].vanish_fraction, r.rows[i - 1].vanish_fraction);
  }
  EXPECT_THROW(inverse_threshold_experiment(X, 2, 2.0, {1}, primes()), ParameterError);
}

TEST(InverseThreshold, UnitWindowsMatchDirectCount) {
  const std::uint64_t X = 20'000;
  const double eps = 0.2;
  const auto r = inverse_threshold_experiment(X, 1, eps, {1}, primes());
  const double ll = std::log(std::log(static_cast<double>(X)));
  std::uint64_t vanish = 0;
  double mass = 0;
  for (std::uint64_t x = X; x <= 2 * X; ++x) {
    const auto f = trial_division_factor(x + 1);
    const bool typical = std::abs(small_omega(f) - ll) <= eps * ll;
    if (!typical) ++vanish, mass += 1.0;
  }
  EXPECT_EQ(r.rows[0].vanish_fraction, static_cast<double>(vanish) / (X + 1));
  EXPECT_DOUBLE_EQ(r.rows[0].concentrated_dk_mass, mass / (X + 1));
}
