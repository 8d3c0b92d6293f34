#include <gtest/gtest.h>

#include <cmath>

#include "shortint/multfun.hpp"
#include "shortint/zeta.hpp"

using namespace shortint;

namespace {

const PrimeTable& primes_1e6() {
  static const PrimeTable t(1'000'000);
  return t;
}

MultiplicativeFunctionSpec constant_prime_spec(double value, unsigned k) {
  MultiplicativeFunctionSpec s;
  s.name = "const";
  s.bound_k = k;
  s.real_flag = true;
  s.rule = [value](std::uint64_t, unsigned a) { return cplx(a == 1 ? value : 0.0, 0.0); };
  return s;
}

}  // namespace

TEST(Eval, Examples) {
  EXPECT_EQ(eval(dk_spec(2), trial_division_factor(12)), cplx(6.0));
  EXPECT_EQ(eval(dk_twist_spec(2, 3.0), FactorVector{}), cplx(1.0));
  EXPECT_EQ(eval(omega_pow_spec(3), FactorVector{}), cplx(1.0));
  const cplx v = eval(dk_twist_spec(2, 3.0), trial_division_factor(2));
  const cplx want = 2.0 * std::exp(cplx(0.0, 3.0 * std::log(2.0)));
  EXPECT_NEAR(std::abs(v - want), 0.0, 1e-15);
}

TEST(Eval, NonFiniteRuleIsEvaluationError) {
  MultiplicativeFunctionSpec s = constant_prime_spec(std::numeric_limits<double>::infinity(), 1);
  EXPECT_THROW(eval(s, trial_division_factor(6)), EvaluationError);
}

TEST(DkBounded, Examples) {
  const auto& P = primes_1e6();
  EXPECT_TRUE(check_dk_bounded(dk_spec(2), 1, 10'001, P).violations.empty());

  auto big = constant_prime_spec(3.0, 2);
  auto rep = check_dk_bounded(big, 1, 101, P);
  for (std::uint64_t p : {2, 3, 5, 7, 97}) {
    EXPECT_NE(std::find(rep.violations.begin(), rep.violations.end(), p), rep.violations.end()) << p;
  }

  MultiplicativeFunctionSpec mob;
  mob.bound_k = 1;
  mob.rule = [](std::uint64_t, unsigned a) { return cplx(a % 2 ? -1.0 : 1.0); };
  EXPECT_TRUE(check_dk_bounded(mob, 1, 10'001, P).violations.empty());
}

TEST(DkBounded, OmegaPowViolatesAtPrimeSquares) {
  auto rep = check_dk_bounded(omega_pow_spec(2), 1, 101, primes_1e6());
  EXPECT_NE(std::find(rep.violations.begin(), rep.violations.end(), 4u), rep.violations.end());
  EXPECT_EQ(std::find(rep.violations.begin(), rep.violations.end(), 6u), rep.violations.end());
}

TEST(CustomRules, ParseAndEvaluate) {
  auto s = parse_custom_rules(
      "# Liouville-like with a twist at 5\n"
      "name test\n"
      "bound 2\n"
      "real false\n"
      "5 1 0 1\n"
      "<=3 * -1 0\n"
      "mod:4:1 1 2 0\n"
      "10..20 2 0.5 0\n");
  EXPECT_EQ(s.name, "test");
  EXPECT_EQ(s.bound_k, 2u);
  EXPECT_EQ(s.at(5, 1), cplx(0, 1));
  EXPECT_EQ(s.at(2, 7), cplx(-1, 0));
  EXPECT_EQ(s.at(13, 1), cplx(2, 0));
  EXPECT_EQ(s.at(13, 2), cplx(0.5, 0));
  EXPECT_EQ(s.at(7, 1), cplx(0, 0));
  EXPECT_THROW(parse_custom_rules("5 1 x 0\n"), FormatError);
  EXPECT_THROW(parse_custom_rules("5 1 0\n"), FormatError);
}

TEST(Registry, Names) {
  EXPECT_EQ(spec_from_name("dk:3").bound_k, 3u);
  EXPECT_EQ(spec_from_name("omega_pow:2").at(7, 3), cplx(8.0));
  EXPECT_EQ(spec_from_name("rough:2:10:100").at(11, 1), cplx(0.0));
  EXPECT_EQ(spec_from_name("rough:2:10:100").at(101, 1), cplx(2.0));
  EXPECT_FALSE(spec_from_name("dk_twist:2:3").real_flag);
  EXPECT_THROW(spec_from_name("nope"), ParameterError);
  EXPECT_THROW(spec_from_name("dk:x"), ParameterError);
}

TEST(Mertens, Examples) {
  const auto& P = primes_1e6();
  for (std::uint64_t x : {10u, 1000u, 1'000'000u}) EXPECT_EQ(mertens_product(dk_spec(1), x, P), 1.0);
  EXPECT_NEAR(mertens_product(dk_spec(2), 10, P), 1.5 * 4.0 / 3.0 * 1.2 * 8.0 / 7.0, 1e-12);
  double prev = 0.0;
  for (std::uint64_t x = 10; x <= 1'000'000; x *= 10) {
    const double v = mertens_product(dk_spec(3), x, P);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Mertens, LogRatioTrendTowardKMinusOne) {
  const PrimeTable P(100'000'000);
  double prev_gap = 1e9;
  for (std::uint64_t x : {10'000ull, 1'000'000ull, 100'000'000ull}) {
    const double r = std::log(mertens_product(dk_spec(3), x, P)) / std::log(std::log(static_cast<double>(x)));
    const double gap = std::abs(r - 2.0);
    EXPECT_LT(gap, prev_gap) << x;
    prev_gap = gap;
  }
}

TEST(HThreshold, Examples) {
  EXPECT_NEAR(h_threshold_from(3.0, 20.0, 0.1, 2), std::pow(60.0, 1.1 * std::log(2.0)) / 3.0, 1e-12);
  EXPECT_NEAR(h_threshold_from(3.0, 20.0, 0.1, 2), 7.56, 0.01);
  const auto& P = primes_1e6();
  auto s = constant_prime_spec(0.5, 1);
  EXPECT_EQ(h_threshold(s, 1'000'000, 0.3, P), 1.0 / mertens_product(s, 1'000'000, P));
  EXPECT_THROW(h_threshold_from(1.0, 0.5, 0.1, 2), DomainError);
  EXPECT_THROW(h_threshold(dk_spec(2), 2, 0.1, P), DomainError);
}

TEST(HThreshold, DkExponentTrend) {
  // log H / log log X against k log k - k + 1 for d_k.
  const PrimeTable P(100'000'000);
  const unsigned k = 3;
  const double target = k * std::log(k) - k + 1;
  const double e6 = std::log(h_threshold(dk_spec(k), 1'000'000, 0.0, P)) / std::log(std::log(1e6));
  const double e8 = std::log(h_threshold(dk_spec(k), 100'000'000, 0.0, P)) / std::log(std::log(1e8));
  EXPECT_LT(std::abs(e8 - target), std::abs(e6 - target) + 0.05);
  EXPECT_NEAR(e8, target, 0.6);
}

TEST(Halasz, Examples) {
  const auto& P = primes_1e6();
  EXPECT_EQ(halasz_distance_sq(dk_spec(2), 0.0, 10'000, P), 0.0);
  auto neg = constant_prime_spec(-1.0, 1);
  NeumaierSum recip;
  for (auto p : P) {
    if (p > 10'000) break;
    recip += 1.0 / p;
  }
  EXPECT_NEAR(halasz_distance_sq(neg, 0.0, 10'000, P), 2.0 * recip.value(), 1e-12);
}

TEST(Halasz, NonnegativeAndMonotoneInX) {
  const auto& P = primes_1e6();
  auto f = dk_twist_spec(2, 1.7);
  for (double t : {-5.0, 0.0, 0.3, 1.7, 40.0}) {
    double prev = -1.0;
    for (std::uint64_t X : {100u, 1000u, 100'000u, 1'000'000u}) {
      const double v = halasz_distance_sq(f, t, X, P);
      EXPECT_GE(v, -1e-9);
      EXPECT_LE(prev, v + 1e-9);
      prev = v;
    }
  }
}

TEST(Halasz, GridKernelMatchesDirect) {
  const auto s = prime_sample(dk_twist_spec(2, 3.0), 100'000, primes_1e6());
  const double lo = -7.3, step = 0.0137;
  const std::size_t n = 3000;
  const auto g = halasz_grid(s, lo, step, n, Threads{3});
  for (std::size_t j = 0; j < n; j += 97) {
    EXPECT_NEAR(g[j], halasz_distance_sq(s, lo + j * step), 1e-10) << j;
  }
  EXPECT_EQ(g, halasz_grid(s, lo, step, n, Threads{1}));
}

TEST(FindT0, RealFunctionShortCircuits) {
  const auto prof = find_t0(dk_spec(3), 10'000, primes_1e6());
  EXPECT_EQ(prof.t0, 0.0);
  EXPECT_EQ(prof.reason, "declared_real");

  auto undeclared = dk_spec(2);
  undeclared.real_flag = false;
  const auto p2 = find_t0(undeclared, 10'000, primes_1e6());
  EXPECT_EQ(p2.reason, "almost_real");
  EXPECT_EQ(p2.t0, 0.0);
}

TEST(FindT0, RecoversTwist) {
  T0Options opt;
  opt.window_lo = -10;
  opt.window_hi = 10;
  const auto prof = find_t0(dk_twist_spec(2, 3.0), 100'000, primes_1e6(), opt);
  EXPECT_EQ(prof.reason, "scan");
  EXPECT_NEAR(prof.t0, 3.0, prof.final_step);
  EXPECT_FALSE(prof.boundary);
  EXPECT_LE(prof.d2_at_t0, halasz_distance_sq(dk_twist_spec(2, 3.0), 0.0, 100'000, primes_1e6()));
}

TEST(FindT0, BoundaryWindowFlagged) {
  T0Options opt;
  opt.window_lo = 5;
  opt.window_hi = 10;
  const auto f = dk_twist_spec(2, 3.0);
  const auto prof = find_t0(f, 100'000, primes_1e6(), opt);
  EXPECT_TRUE(prof.boundary);
  // D^2 is not monotone on [5, 10]; the smaller endpoint value wins.
  const double d5 = halasz_distance_sq(f, 5.0, 100'000, primes_1e6());
  const double d10 = halasz_distance_sq(f, 10.0, 100'000, primes_1e6());
  EXPECT_DOUBLE_EQ(prof.t0, d5 <= d10 ? 5.0 : 10.0);
}

TEST(FindT0, EmptyWindowIsParameterError) {
  T0Options opt;
  opt.window_lo = 2;
  opt.window_hi = 1;
  EXPECT_THROW(find_t0(dk_twist_spec(2, 3.0), 1000, primes_1e6(), opt), ParameterError);
}

TEST(FindT0, TwistEquivariance) {
  T0Options opt;
  opt.window_lo = -4;
  opt.window_hi = 4;
  opt.coarse_step = 0.01;
  opt.refine_rounds = 0;
  const auto s_f = prime_sample(dk_twist_spec(2, 0.5), 50'000, primes_1e6());
  const auto s_g = prime_sample(dk_twist_spec(2, 2.0), 50'000, primes_1e6());
  const auto gf = halasz_grid(s_f, -4, 0.01, 801);
  const auto gg = halasz_grid(s_g, -4, 0.01, 801);
  const auto af = std::min_element(gf.begin(), gf.end()) - gf.begin();
  const auto ag = std::min_element(gg.begin(), gg.end()) - gg.begin();
  EXPECT_NEAR((ag - af) * 0.01, 1.5, 0.01 + 1e-9);
}

TEST(LowerBoundProfile, Examples) {
  const auto s = prime_sample(dk_twist_spec(2, 1.0), 100'000, primes_1e6());
  const auto m0 = distance_lowerbound_profile(s, 1e5, 1.0, {1.0}, 0.2);
  EXPECT_NEAR(m0[0], halasz_distance_sq(s, 1.0), 1e-15);
  std::vector<double> grid;
  for (int j = 0; j < 50; ++j) grid.push_back(-20.0 + j * 0.8);
  for (double m : distance_lowerbound_profile(s, 1e5, 1.0, grid, 0.0)) EXPECT_GE(m, 0.0);
}

TEST(LowerBoundProfile, D2MarginsBoundedBelow) {
  const auto s = prime_sample(dk_spec(2), 1'000'000, primes_1e6());
  std::vector<double> grid;
  for (int j = 0; j < 1000; ++j) grid.push_back(-50.0 + j * 0.1);
  // rho below rho_{2,1}.
  for (double m : distance_lowerbound_profile(s, 1e6, 0.0, grid, 0.2)) EXPECT_GE(m, -10.0);
}

TEST(Nonvanishing, Examples) {
  const auto& P = primes_1e6();
  std::vector<std::pair<double, double>> wz;
  for (double w = 2; w <= 5000; w *= 3) wz.push_back({w, std::min(10'000.0, w * w)});
  EXPECT_GE(nonvanishing_audit(dk_spec(3), 1.0, 10'000, wz, P).worst_margin, 0.0);

  auto zero = constant_prime_spec(0.0, 2);
  const auto z1 = nonvanishing_audit(zero, 1.0, 1e6, {{10, 100}}, P);
  const auto z2 = nonvanishing_audit(zero, 1.0, 1e6, {{10, 1e6}}, P);
  EXPECT_LT(z2.worst_margin, z1.worst_margin);
  EXPECT_LT(z1.worst_margin, 0.0);

  MultiplicativeFunctionSpec big;
  big.bound_k = 2;
  big.rule = [](std::uint64_t p, unsigned a) { return cplx(a == 1 && p > 100 ? 2.0 : 0.0); };
  const auto r = nonvanishing_audit(big, 1.0, 10'000, wz, P);
  EXPECT_TRUE(std::isfinite(r.worst_margin));
  EXPECT_EQ(r.margins.size(), wz.size());

  EXPECT_THROW(nonvanishing_audit(big, 1.0, 10'000, {}, P), ParameterError);
  EXPECT_THROW(nonvanishing_audit(big, 1.0, 10'000, {{100, 50}}, P), ParameterError);
}

TEST(Zeta, KnownValues) {
  EXPECT_NEAR(zeta(cplx(2.0, 0.0)).real(), std::numbers::pi * std::numbers::pi / 6.0, 1e-14);
  // zeta(1/2 + 14.134725141734693i) is a zero.
  EXPECT_LT(std::abs(zeta(cplx(0.5, 14.134725141734693))), 1e-10);
  // zeta(1 + i) = 0.5821580597520036 - 0.9268485643308071 i.
  const cplx z = zeta(cplx(1.0, 1.0));
  EXPECT_NEAR(z.real(), 0.5821580597520036, 1e-13);
  EXPECT_NEAR(z.imag(), -0.9268485643308071, 1e-13);
  EXPECT_THROW(zeta(cplx(1.0, 0.0)), DomainError);
}

TEST(EulerDiagnostics, OneFunctionRatioInEnvelope) {
  const auto& P = primes_1e6();
  const auto d = euler_product_diagnostics(dk_spec(1), 0.0, 1.0, 10'000, 1.0, P);
  EXPECT_GE(d.ratio_34, 0.1);
  EXPECT_LE(d.ratio_34, 10.0);
}

TEST(EulerDiagnostics, LargeGammaSendsFToOne) {
  const auto& P = primes_1e6();
  const auto d = euler_product_diagnostics(dk_spec(2), 0.0, 60.0, 10'000, 1.0, P);
  EXPECT_NEAR(d.F_gamma_abs, 1.0, 1e-12);
}

TEST(EulerDiagnostics, D2Envelope) {
  const auto& P = primes_1e6();
  // gamma = 0.1 sits below 1/log(10^4), so the nearest admissible value is used.
  EXPECT_THROW(euler_product_diagnostics(dk_spec(2), 0.0, 0.1, 10'000, 1.0, P), ParameterError);
  const auto d = euler_product_diagnostics(dk_spec(2), 0.0, 0.11, 10'000, 1.0, P);
  EXPECT_GE(d.ratio_34, 0.1);
  EXPECT_LE(d.ratio_34, 10.0);
  EXPECT_LE(d.ratio_35, 10.0);
}

TEST(EulerDiagnostics, FullSeriesMatchesZetaSquare) {
  const PrimeTable small(1000);
  const cplx s(1.3, 2.0);
  const auto full = dirichlet_series_full(dk_spec(2), s, small);
  EXPECT_NEAR(std::abs(full.value - zeta(s) * zeta(s)), 0.0, 1e-11);
  const auto rough = dirichlet_series_full(rough_spec(2, 3, 7), s, small);
  cplx expect = zeta(s) * zeta(s);
  for (double p : {3.0, 5.0, 7.0}) expect *= std::pow(1.0 - std::pow(p, -s), 2.0);
  EXPECT_NEAR(std::abs(rough.value - expect), 0.0, 1e-11);
}

TEST(EulerDiagnostics, NoTailModelIsAccuracyError) {
  auto s = constant_prime_spec(1.0, 1);
  EXPECT_THROW(euler_product_diagnostics(s, 0.0, 0.5, 10'000, 1.0, primes_1e6()), AccuracyError);
}
