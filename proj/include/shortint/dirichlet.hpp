#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "shortint/error.hpp"
#include "shortint/multfun.hpp"
#include "shortint/numeric.hpp"
#include "shortint/parallel.hpp"
#include "shortint/primes.hpp"
#include "shortint/restrict.hpp"
#include "shortint/sieve.hpp"

namespace shortint {

/// Sparse Dirichlet polynomial sum a_n n^{-s}; n strictly increasing.
struct DirichletPoly {
  std::vector<std::uint64_t> n;
  std::vector<cplx> a;

  void push(std::uint64_t m, cplx v) {
    if (!n.empty() && m <= n.back()) throw InvariantError("DirichletPoly indices must increase");
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw InvariantError("non-finite coefficient");
    n.push_back(m);
    a.push_back(v);
  }
  std::size_t size() const { return n.size(); }
  bool empty() const { return n.empty(); }
  std::uint64_t max_n() const { return n.empty() ? 1 : n.back(); }

  /// Keeps the nonzero entries of a dense array indexed from n_lo.
  static DirichletPoly from_dense(std::uint64_t n_lo, const std::vector<cplx>& dense) {
    DirichletPoly p;
    for (std::size_t i = 0; i < dense.size(); ++i) {
      if (dense[i] != cplx(0.0)) p.push(n_lo + i, dense[i]);
    }
    return p;
  }

  double l1_over_n() const {
    NeumaierSum s;
    for (std::size_t i = 0; i < n.size(); ++i) s += std::abs(a[i]) / static_cast<double>(n[i]);
    return s.value();
  }
  double l2_squared() const {
    NeumaierSum s;
    for (const auto& v : a) s += std::norm(v);
    return s.value();
  }
};

/// f(n) for n in [lo, hi), sieved in chunks.
inline std::vector<cplx> spec_values(const MultiplicativeFunctionSpec& spec, std::uint64_t lo, std::uint64_t hi,
                                     const PrimeTable& primes, Threads threads = {}) {
  if (hi <= lo) return {};
  if (primes.limit() < isqrt(hi - 1)) throw PreconditionError("prime table does not reach sqrt(hi)");
  std::vector<cplx> out(hi - lo, cplx(1.0));
  parallel_chunks(ChunkPlan{lo, hi, std::uint64_t{1} << 18}.count(), threads, [&](std::size_t c) {
    const ChunkPlan plan{lo, hi, std::uint64_t{1} << 18};
    const std::uint64_t a = plan.lo(c), b = plan.hi(c);
    cplx* base = out.data() + (a - lo);
    sieve_prime_powers(a, b, primes, [&](std::size_t j, std::uint64_t p, std::uint32_t e) { base[j] *= spec.at(p, e); });
  });
  return out;
}

// -------------------------------------------------------------- evaluation

/// Steps between direct re-seeds of the per-n phase rotation. The rotation
/// drifts by about 4 ulp per step, so a block stays near 1e-12 relative.
inline constexpr std::size_t kReseedInterval = 1024;

/// sum_n a_n n^{-sigma - i t_j} at t_j = t_min + j dt, j < count.
/// Each block of kReseedInterval grid points starts from direct exponentials;
/// per-point compensated sums run over n in index order, so the result does
/// not depend on the thread count.
inline std::vector<cplx> dpoly_grid_values(const DirichletPoly& p, double sigma, double t_min, double dt,
                                           std::size_t count, Threads threads = {}) {
  std::vector<cplx> out(count);
  std::vector<double> logn(p.size()), scale(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    logn[i] = std::log(static_cast<double>(p.n[i]));
    scale[i] = std::exp(-sigma * logn[i]);
  }
  const std::size_t blocks = (count + kReseedInterval - 1) / kReseedInterval;
  parallel_chunks(blocks, threads, [&](std::size_t b) {
    const std::size_t j0 = b * kReseedInterval, j1 = std::min(count, j0 + kReseedInterval);
    std::vector<ComplexNeumaierSum> acc(j1 - j0);
    const double t0 = t_min + static_cast<double>(j0) * dt;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p.a[i] == cplx(0.0)) continue;
      cplx z = p.a[i] * scale[i] * unit_phase(t0, logn[i]);
      const cplx rot = unit_phase(dt, logn[i]);
      for (std::size_t j = 0; j < j1 - j0; ++j) {
        acc[j] += z;
        z *= rot;
      }
    }
    for (std::size_t j = j0; j < j1; ++j) out[j] = acc[j - j0].value();
  });
  return out;
}

/// sum_n a_n n^{-sigma - i t} at arbitrary points, by direct exponentials.
inline std::vector<cplx> dpoly_points(const DirichletPoly& p, const std::vector<double>& t, double sigma = 1.0,
                                      Threads threads = {}) {
  std::vector<cplx> out(t.size());
  parallel_chunks(t.size(), threads, [&](std::size_t j) {
    ComplexNeumaierSum acc;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double ln = std::log(static_cast<double>(p.n[i]));
      acc += p.a[i] * std::exp(-sigma * ln) * unit_phase(t[j], ln);
    }
    out[j] = acc.value();
  });
  return out;
}

struct DirichletGrid {
  std::uint64_t n_lo = 0, n_hi = 0;
  DirichletPoly coeffs;
  double t_min = 0, dt = 0;
  std::vector<cplx> values;  // A(1 + i t_j)

  std::size_t size() const { return values.size(); }
  double t(std::size_t j) const { return t_min + static_cast<double>(j) * dt; }
};

inline DirichletGrid dpoly_eval(const DirichletPoly& coeffs, double t_min, double dt, std::size_t count,
                                Threads threads = {}) {
  if (!(dt > 0) && count > 1) throw ParameterError("grid step must be positive");
  DirichletGrid g;
  g.coeffs = coeffs;
  g.n_lo = coeffs.empty() ? 0 : coeffs.n.front();
  g.n_hi = coeffs.empty() ? 0 : coeffs.n.back();
  g.t_min = t_min;
  g.dt = dt;
  g.values = dpoly_grid_values(coeffs, 1.0, t_min, dt, count, threads);
  return g;
}

// ------------------------------------------------------------ mean values

/// One check of an upper bound with an unspecified implied constant.
struct BoundCheck {
  std::string id;
  double lhs = 0, rhs = 0, ratio = 0;
  double envelope = 100;
  bool pass() const { return ratio <= envelope; }
};

inline BoundCheck make_check(std::string id, double lhs, double rhs, double envelope) {
  BoundCheck c{std::move(id), lhs, rhs, 0.0, envelope};
  c.ratio = rhs > 0 ? lhs / rhs : (lhs == 0 ? 0.0 : std::numeric_limits<double>::infinity());
  return c;
}

/// Polynomials with at most this many terms integrate pair by pair.
inline constexpr std::size_t kPairwiseLimit = 1024;

/// Trapezoidal integral of |sum a_n n^{it}|^2 over [-T, T] with M panels.
/// Sparse inputs use the closed form of the trapezoid sum of (n/m)^{it}
/// (a Dirichlet kernel), so the diagonal contributes exactly 2T sum |a_n|^2.
inline double trapezoid_square_integral(const DirichletPoly& a, double T, std::size_t M, Threads threads = {}) {
  const double h = 2.0 * T / static_cast<double>(M);
  if (a.size() <= kPairwiseLimit) {
    NeumaierSum off;
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = i + 1; j < a.size(); ++j) {
        const double lam = std::log(static_cast<double>(a.n[j]) / static_cast<double>(a.n[i]));
        const double K = h * (std::sin((M + 1) * lam * h / 2.0) / std::sin(lam * h / 2.0) - std::cos(lam * T));
        off += 2.0 * (a.a[i] * std::conj(a.a[j])).real() * K;
      }
    }
    return 2.0 * T * a.l2_squared() + off.value();
  }
  // Values at t_j = -T + j h, i.e. the n^{-i u} kernel at u = T - j h.
  const auto g = dpoly_grid_values(a, 0.0, T, -h, M + 1, threads);
  NeumaierSum s;
  for (std::size_t j = 0; j <= M; ++j) s += (j == 0 || j == M ? 0.5 : 1.0) * std::norm(g[j]);
  return h * s.value();
}

struct MeanValueCheck : BoundCheck {
  std::size_t panels = 0;
  double step = 0;
};

/// lhs = trapezoidal int_{-T}^{T} |sum a_n n^{it}|^2 dt,
/// rhs = T sum|a_n|^2 + T sum_{1<=|m|<=N/T} sum_n |a_n a_{n+m}|.
inline MeanValueCheck meanvalue_check(const DirichletPoly& a, double T, double quad_step, Threads threads = {},
                                      double envelope = 100) {
  if (!(T >= 1)) throw ParameterError("T must be >= 1");
  const double N = static_cast<double>(a.max_n());
  if (N >= 2 && quad_step > 1.0 / (4.0 * std::log(N))) throw ParameterError("quad_step exceeds 1/(4 log N)");
  if (!(quad_step > 0)) throw ParameterError("quad_step must be positive");
  MeanValueCheck r;
  r.panels = static_cast<std::size_t>(std::ceil(2.0 * T / quad_step));
  r.step = 2.0 * T / static_cast<double>(r.panels);
  const double lhs = trapezoid_square_integral(a, T, r.panels, threads);
  NeumaierSum near;
  const double reach = N / T;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size() && static_cast<double>(a.n[j] - a.n[i]) <= reach; ++j) {
      near += 2.0 * std::abs(a.a[i]) * std::abs(a.a[j]);
    }
  }
  const double rhs = T * a.l2_squared() + T * near.value();
  static_cast<BoundCheck&>(r) = make_check("mean_value", lhs, rhs, envelope);
  return r;
}

/// Coefficients conj(a_n)/n, so that |sum a_n n^{-1-it}| = |sum b_n n^{it}|.
inline DirichletPoly to_meanvalue_form(const DirichletPoly& p) {
  DirichletPoly q;
  q.n = p.n;
  q.a.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) q.a[i] = std::conj(p.a[i]) / static_cast<double>(p.n[i]);
  return q;
}

/// Correlation sum of |f(n) f(n+k)| against the Henriot-type product bound.
inline BoundCheck henriot_correlation(const MultiplicativeFunctionSpec& spec, std::uint64_t x, std::uint64_t y,
                                      std::uint64_t K, std::uint64_t r1, std::uint64_t r2, const PrimeTable& primes,
                                      std::optional<double> theta = std::nullopt, double envelope = 100) {
  if (y == 0 || y > x) throw ParameterError("need x >= y >= 1");
  if (r1 == 0 || r2 == 0 || K == 0) throw ParameterError("r1, r2, K must be positive");
  const double xd = static_cast<double>(x);
  const double th = theta.value_or(std::log(static_cast<double>(y)) / std::log(xd));
  if (static_cast<double>(y) < std::pow(xd, th) * (1 - 1e-12)) throw ParameterError("y below x^theta");
  const double rmax = std::pow(xd, 3.0 * th / 7.0);
  if (r1 > rmax || r2 > rmax) throw ParameterError("r1 or r2 exceeds x^{3 theta/7}");
  if (static_cast<double>(K) > xd) throw ParameterError("K must lie in [1, x]");
  if (primes.limit() < x) throw PreconditionError("prime table does not reach x");

  const std::uint64_t lo = x + 1, hi = x + y + K + 1;
  const auto vals = spec_values(spec, lo, hi, primes);
  std::vector<double> absf(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) absf[i] = std::abs(vals[i]);
  const std::uint64_t g = std::gcd(r1, r2);
  NeumaierSum lhs;
  for (std::uint64_t n = ((x / r1) + 1) * r1; n <= x + y; n += r1) {
    for (std::int64_t k = -static_cast<std::int64_t>(K); k <= static_cast<std::int64_t>(K); ++k) {
      if (k == 0 || static_cast<std::uint64_t>(k < 0 ? -k : k) % g) continue;
      const std::int64_t m = static_cast<std::int64_t>(n) + k;
      if (m % static_cast<std::int64_t>(r2)) continue;
      const double fm = m >= static_cast<std::int64_t>(lo)
                            ? absf[static_cast<std::uint64_t>(m) - lo]
                            : std::abs(eval(spec, trial_division_factor(static_cast<std::uint64_t>(m))));
      lhs += absf[n - lo] * fm;
    }
  }

  NeumaierSum logs;
  for (std::uint32_t p : primes) {
    if (p > x) break;
    const double u = (2.0 * std::abs(spec.at(p, 1)) - 2.0) / p;
    if (u <= -1.0) throw DomainError("Henriot product factor is not positive");
    logs += std::log1p(u);
  }
  double extra = 1.0;
  for (const auto& e : trial_division_factor(r1 * r2)) {
    if (e.prime > K) extra *= 1.0 + (1.0 - std::abs(spec.at(e.prime, 1))) / static_cast<double>(e.prime);
  }
  const double fr = std::abs(eval(spec, trial_division_factor(r1))) * std::abs(eval(spec, trial_division_factor(r2)));
  const double rhs = static_cast<double>(K) * fr / static_cast<double>(r1 * r2) * static_cast<double>(y) *
                     std::exp(logs.value()) * extra;
  return make_check("correlation", lhs.value(), rhs, envelope);
}

/// (T H(f,X,eps)/X + 1) P_f(X)^2.
inline double frak_S(double T, std::uint64_t X, const MultiplicativeFunctionSpec& spec, double eps,
                     const PrimeTable& primes) {
  const double Pf = mertens_product(spec, X, primes);
  const double H = h_threshold_from(Pf, std::log(static_cast<double>(X)), eps, spec.bound_k);
  return (T * H / static_cast<double>(X) + 1.0) * Pf * Pf;
}

// -------------------------------------------------------- discrete points

struct WellSpacedSet {
  std::vector<double> points;
  double T = 0;

  void validate() const {
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (std::abs(points[i]) > T) throw InvariantError("well-spaced point outside [-T, T]");
      if (i > 0 && points[i] - points[i - 1] < 1.0) throw InvariantError("well-spaced points closer than 1");
    }
  }
  std::size_t size() const { return points.size(); }
};

inline WellSpacedSet make_well_spaced(std::vector<double> points, double T) {
  WellSpacedSet s{std::move(points), T};
  s.validate();
  return s;
}

/// lhs = sum_{t} |sum_{X<n<=2X} a_n n^{-1-it}|^2 against
/// min{(1 + T/X) log X, (1 + |T| T^{1/2}/X) log T} (1/X) sum |a_n|^2.
/// Logarithms are floored at 1 so that T < e still gives a usable bound.
inline BoundCheck discrete_meanvalue_check(const DirichletPoly& a, const WellSpacedSet& set, std::uint64_t X,
                                           double envelope = 100, Threads threads = {}) {
  set.validate();
  for (auto m : a.n) {
    if (m <= X || m > 2 * X) throw ParameterError("coefficients must lie in (X, 2X]");
  }
  const auto v = dpoly_points(a, set.points, 1.0, threads);
  NeumaierSum lhs;
  for (const auto& z : v) lhs += std::norm(z);
  const double Xd = static_cast<double>(X), T = std::max(set.T, 1.0);
  const double b1 = (1.0 + T / Xd) * std::max(1.0, std::log(Xd));
  const double b2 = (1.0 + set.size() * std::sqrt(T) / Xd) * std::max(1.0, std::log(T));
  const double rhs = std::min(b1, b2) * a.l2_squared() / Xd;
  return make_check("discrete_mean_value", lhs.value(), rhs, envelope);
}

struct LargeValueSet {
  WellSpacedSet set;
  double bound = 0;
  double envelope = 10;
  std::size_t candidates = 0;
  bool within_envelope() const { return static_cast<double>(set.size()) <= envelope * bound; }
};

/// Well-spaced t in [-T, T] with |P(1+it)| >= 1/V. Candidates come from a grid
/// of step 1/(4 log 2P); they are taken in decreasing |P| order and kept when
/// at distance >= 1 from every point already kept, so the largest value
/// (t = 0 for positive coefficients) is always selected.
inline LargeValueSet large_value_set(const DirichletPoly& prime_coeffs, double P, double T, double V, unsigned k,
                                     double envelope = 10, Threads threads = {}) {
  if (!(V >= 1)) throw ParameterError("V must be >= 1");
  if (!(T >= 1)) throw ParameterError("T must be >= 1");
  for (const auto& c : prime_coeffs.a) {
    if (std::abs(c) > k * (1 + 1e-12)) throw ParameterError("prime coefficient exceeds k");
  }
  LargeValueSet out;
  out.envelope = envelope;
  out.set.T = T;
  const double step0 = 1.0 / (4.0 * std::log(2.0 * P));
  const auto half = static_cast<std::int64_t>(std::ceil(T / step0));
  const double step = T / static_cast<double>(half);
  const std::size_t count = static_cast<std::size_t>(2 * half + 1);
  const auto vals = dpoly_grid_values(prime_coeffs, 1.0, -T, step, count, threads);
  const double thr = 1.0 / V;
  std::vector<std::pair<double, double>> cand;  // (-|P|, t)
  for (std::size_t j = 0; j < count; ++j) {
    const double t = (static_cast<std::int64_t>(j) - half) * step;
    if (std::abs(vals[j]) >= thr) cand.emplace_back(-std::abs(vals[j]), t);
  }
  out.candidates = cand.size();
  std::sort(cand.begin(), cand.end());
  std::set<double> kept;
  for (const auto& [neg, t] : cand) {
    auto it = kept.lower_bound(t);
    if (it != kept.end() && *it - t < 1.0) continue;
    if (it != kept.begin() && t - *std::prev(it) < 1.0) continue;
    if (std::abs(dpoly_points(prime_coeffs, {t})[0]) < thr) continue;
    kept.insert(t);
  }
  out.set.points.assign(kept.begin(), kept.end());
  out.set.validate();
  const double lP = std::log(P), lT = std::log(T);
  out.bound = std::pow(T, 2.0 * std::log(V) / lP) * V * V *
              std::exp(2.0 * k * (lT / lP) * std::max(0.0, std::log(std::max(lT, 1.0))));
  return out;
}

// ----------------------------------------------------------------- Ramare

/// Which n carry a_n = f(n). With A set, [P, Q] must lie in one of its two
/// ranges; then b_m keeps the condition on the other range, which makes
/// a_{mp} = b_m c_p hold for every p in [P, Q] not dividing m.
struct RamareRestriction {
  std::optional<double> omega_max;         // Omega(n) <= omega_max
  std::optional<RestrictionParams> A;
};

struct RamareDecomposition {
  std::vector<double> t;
  std::vector<cplx> lhs;
  std::vector<std::array<cplx, 5>> B;
  std::vector<double> residual;
  double l1 = 0;         // sum_{X<n<=2X} |a_n|/n
  double tolerance = 0;  // 1e-9 (1 + l1)
  std::uint64_t hypothesis_violations = 0;
  std::size_t bins = 0;
  double max_residual() const { return residual.empty() ? 0.0 : *std::max_element(residual.begin(), residual.end()); }
};

/// Splits sum_{X<n<=2X} a_n n^{-s} into B1 = sum_v Q_v R_v plus four
/// correction pieces: B2 (pairs with mp in (X, X e^{1/H}] missed by the bins),
/// B3 (binned pairs beyond 2X, subtracted; also any landing at or below X), B4 (pairs with p | m) and B5
/// (n free of primes in [P, Q]). Bins v cover every prime of [P, Q], with
/// e^{v/H} < p <= e^{(v+1)/H}.
inline RamareDecomposition ramare_decompose(const MultiplicativeFunctionSpec& spec, std::uint64_t X, double P,
                                            double Q, double H, const std::vector<double>& t_points,
                                            const PrimeTable& primes, const RamareRestriction& restriction = {},
                                            Threads threads = {}) {
  if (!(P >= 1 && Q >= P)) throw ParameterError("need 1 <= P <= Q");
  if (!(H >= 1)) throw ParameterError("H must be >= 1");
  if (X < 2) throw ParameterError("X must be >= 2");
  const std::uint64_t N = static_cast<std::uint64_t>(std::floor(2.0 * static_cast<double>(X) * std::exp(1.0 / H)));
  if (N > 60'000'000) throw CapacityError("Ramare decomposition range exceeds in-memory limit");
  if (primes.limit() < isqrt(N)) throw PreconditionError("prime table does not reach sqrt(2X e^{1/H})");

  // Which A range [P, Q] belongs to, and the other one.
  double o_lo = 0, o_hi = -1;
  if (restriction.A) {
    const auto& r = *restriction.A;
    if (r.Q1() >= r.P2()) throw ParameterError("A ranges overlap");
    if (P >= r.P1() && Q <= r.Q1()) o_lo = r.P2(), o_hi = r.Q2();
    else if (P >= r.P2() && Q <= r.Q2()) o_lo = r.P1(), o_hi = r.Q1();
    else throw ParameterError("[P, Q] must lie inside one range of A");
  }

  // Per-n data on [1, N].
  std::vector<cplx> f(N + 1, cplx(1.0));
  std::vector<std::uint8_t> Om(N + 1, 0), wPQ(N + 1, 0), hasO(N + 1, 0);
  const ChunkPlan plan{1, N + 1, std::uint64_t{1} << 18};
  parallel_chunks(plan.count(), threads, [&](std::size_t c) {
    const std::uint64_t a = plan.lo(c), b = plan.hi(c);
    sieve_prime_powers(a, b, primes, [&](std::size_t j, std::uint64_t p, std::uint32_t e) {
      const std::uint64_t n = a + j;
      f[n] *= spec.at(p, e);
      Om[n] = static_cast<std::uint8_t>(Om[n] + e);
      const double pd = static_cast<double>(p);
      if (pd >= P && pd <= Q) ++wPQ[n];
      if (pd >= o_lo && pd <= o_hi) hasO[n] = 1;
    });
  });
  const bool useA = restriction.A.has_value();
  auto a_of = [&](std::uint64_t n) -> cplx {
    if (restriction.omega_max && Om[n] > *restriction.omega_max) return 0.0;
    if (useA && !(wPQ[n] > 0 && hasO[n])) return 0.0;
    return f[n];
  };
  auto b_of = [&](std::uint64_t m) -> cplx {
    if (restriction.omega_max && Om[m] + 1.0 > *restriction.omega_max) return 0.0;
    if (useA && !hasO[m]) return 0.0;
    return f[m];
  };

  // Primes of [P, Q] and their bins.
  struct PrimeBin {
    std::uint64_t p;
    long v;
  };
  std::vector<PrimeBin> pq;
  for (std::uint32_t p : primes) {
    if (p > Q) break;
    if (p < P) continue;
    const double lp = std::log(static_cast<double>(p));
    long v = static_cast<long>(std::floor(H * lp));
    while (std::exp(v / H) >= p) --v;
    while (std::exp((v + 1) / H) < p) ++v;
    pq.push_back({p, v});
  }
  if (static_cast<double>(primes.limit()) < std::min(Q, static_cast<double>(N))) {
    throw PreconditionError("prime table does not reach min(Q, 2X e^{1/H})");
  }
  struct MRange {
    std::uint64_t lo, hi;  // m in [lo, hi]
  };
  auto m_range = [&](long v) {
    const double e = std::exp(-static_cast<double>(v) / H);
    const double xl = static_cast<double>(X) * e, xh = 2.0 * static_cast<double>(X) * e;
    return MRange{static_cast<std::uint64_t>(std::floor(xl)) + 1, static_cast<std::uint64_t>(std::floor(xh))};
  };

  std::vector<cplx> B2(N + 1), B3(N + 1), B4(N + 1), B5(N + 1);
  auto cell = [](std::vector<cplx>& v, std::uint64_t n) -> cplx& {
    if (n >= v.size()) v.resize(n + 1);
    return v[n];
  };
  RamareDecomposition out;
  out.t = t_points;
  // Binned pairs.
  std::vector<long> vs;
  for (const auto& pb : pq) {
    if (vs.empty() || vs.back() != pb.v) vs.push_back(pb.v);
    const auto mr = m_range(pb.v);
    const cplx c = f[pb.p];
    for (std::uint64_t m = mr.lo; m <= mr.hi; ++m) {
      const cplx w = b_of(m) * c / (wPQ[m] + 1.0);
      if (w == cplx(0.0)) continue;
      const std::uint64_t n = m * pb.p;
      if (m % pb.p == 0) cell(B4, n) -= w;
      else if (n <= X || n > 2 * X) cell(B3, n) -= w;
    }
  }
  out.bins = vs.size();
  // Terms on (X, 2X].
  for (std::uint64_t n = X + 1; n <= 2 * X; ++n) {
    if (wPQ[n] == 0) B5[n] += a_of(n);
  }
  for (const auto& pb : pq) {
    const auto mr = m_range(pb.v);
    const cplx c = f[pb.p];
    for (std::uint64_t n = (X / pb.p + 1) * pb.p; n <= 2 * X; n += pb.p) {
      const cplx an = a_of(n);
      const std::uint64_t m = n / pb.p;
      if (m % pb.p == 0) {
        B4[n] += an / static_cast<double>(wPQ[n]);
        continue;
      }
      const cplx bc = b_of(m) * c;
      if (std::abs(an - bc) > 1e-12 * (1.0 + std::abs(an))) ++out.hypothesis_violations;
      if (m < mr.lo || m > mr.hi) B2[n] += bc / (wPQ[m] + 1.0);
    }
  }

  // Evaluation.
  DirichletPoly lhs_poly;
  NeumaierSum l1;
  for (std::uint64_t n = X + 1; n <= 2 * X; ++n) {
    const cplx an = a_of(n);
    if (an != cplx(0.0)) lhs_poly.push(n, an), l1 += std::abs(an) / static_cast<double>(n);
  }
  out.l1 = l1.value();
  out.tolerance = 1e-9 * (1.0 + out.l1);
  out.lhs = dpoly_points(lhs_poly, t_points, 1.0, threads);
  std::vector<cplx> b1(t_points.size(), cplx(0.0));
  {
    std::vector<ComplexNeumaierSum> acc(t_points.size());
    std::size_t i = 0;
    for (long v : vs) {
      DirichletPoly Qv, Rv;
      while (i < pq.size() && pq[i].v == v) Qv.push(pq[i].p, f[pq[i].p]), ++i;
      const auto mr = m_range(v);
      for (std::uint64_t m = mr.lo; m <= mr.hi; ++m) {
        const cplx w = b_of(m) / (wPQ[m] + 1.0);
        if (w != cplx(0.0)) Rv.push(m, w);
      }
      const auto qv = dpoly_points(Qv, t_points, 1.0, threads);
      const auto rv = dpoly_points(Rv, t_points, 1.0, threads);
      for (std::size_t j = 0; j < t_points.size(); ++j) acc[j] += qv[j] * rv[j];
    }
    for (std::size_t j = 0; j < t_points.size(); ++j) b1[j] = acc[j].value();
  }
  const auto e2 = dpoly_points(DirichletPoly::from_dense(0, B2), t_points, 1.0, threads);
  const auto e3 = dpoly_points(DirichletPoly::from_dense(0, B3), t_points, 1.0, threads);
  const auto e4 = dpoly_points(DirichletPoly::from_dense(0, B4), t_points, 1.0, threads);
  const auto e5 = dpoly_points(DirichletPoly::from_dense(0, B5), t_points, 1.0, threads);
  for (std::size_t j = 0; j < t_points.size(); ++j) {
    out.B.push_back({b1[j], e2[j], e3[j], e4[j], e5[j]});
    ComplexNeumaierSum s;
    for (const auto& piece : out.B.back()) s += piece;
    out.residual.push_back(std::abs(out.lhs[j] - s.value()));
  }
  if (out.max_residual() > out.tolerance) {
    throw IdentityViolation("Ramare residual " + std::to_string(out.max_residual()) + " exceeds tolerance " +
                            std::to_string(out.tolerance));
  }
  return out;
}

/// Default inputs: [P, Q] = [P1, Q1], H = P1^{1/6} (at least 1), a_n = f(n) on
/// A intersected with B_{eps/2}.
struct RamareDefaults {
  double P = 0, Q = 0, H = 1;
  RamareRestriction restriction;
};

inline RamareDefaults ramare_defaults(const MultiplicativeFunctionSpec& spec, std::uint64_t X, double eps,
                                      double eps0, const PrimeTable& primes) {
  RamareDefaults d;
  const auto r = default_params(static_cast<double>(X), eps0);
  d.P = r.P1();
  d.Q = r.Q1();
  d.H = std::max(1.0, std::pow(r.P1(), 1.0 / 6.0));
  d.restriction.A = r;
  d.restriction.omega_max = b_threshold(eps / 2.0, mertens_product(spec, X, primes), static_cast<double>(X));
  return d;
}

// ---------------------------------------------------------------- rough sums

struct RoughOptions {
  double rho = 0.05;    // below rho_{k,alpha}
  double sigma0 = 0.5;  // t range starts at (log X)^{sigma0}
  double envelope = 100;
};

struct RoughRestricted {
  std::vector<double> t;
  std::vector<cplx> sums, R_values;
  double bound_sum = 0, bound_R = 0;
  double sup_sum = 0, sup_R = 0;
  double ratio_sum = 0, ratio_R = 0;
  double envelope = 100;
  bool pass() const { return ratio_sum <= envelope && ratio_R <= envelope; }
};

/// sums[j] = sum over (X, 2X] of [P,Q]-free n of f(n) n^{-1-i t0-i t_j};
/// R_values[j] = sum over (X, 2X] of f(n) n^{-s} / (#{p in [P,Q] : p | n} + 1).
inline RoughRestricted rough_restricted_sum(const MultiplicativeFunctionSpec& spec, std::uint64_t X, double P, double Q,
                                            double t0, double t_min, double dt, std::size_t count,
                                            const PrimeTable& primes, const RoughOptions& opt = {},
                                            Threads threads = {}) {
  if (primes.limit() < X) throw PreconditionError("prime table does not reach X");
  const std::uint64_t lo = X + 1, hi = 2 * X + 1;
  std::vector<cplx> f(hi - lo, cplx(1.0));
  std::vector<std::uint8_t> w(hi - lo, 0);
  const ChunkPlan plan{lo, hi, std::uint64_t{1} << 18};
  parallel_chunks(plan.count(), threads, [&](std::size_t c) {
    const std::uint64_t a = plan.lo(c), b = plan.hi(c);
    sieve_prime_powers(a, b, primes, [&](std::size_t j, std::uint64_t p, std::uint32_t e) {
      f[a - lo + j] *= spec.at(p, e);
      const double pd = static_cast<double>(p);
      if (pd >= P && pd <= Q) ++w[a - lo + j];
    });
  });
  DirichletPoly rough, R;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] == cplx(0.0)) continue;
    if (w[i] == 0) rough.push(lo + i, f[i]);
    R.push(lo + i, f[i] / (w[i] + 1.0));
  }
  RoughRestricted out;
  out.envelope = opt.envelope;
  for (std::size_t j = 0; j < count; ++j) out.t.push_back(t_min + static_cast<double>(j) * dt);
  out.sums = dpoly_grid_values(rough, 1.0, t0 + t_min, dt, count, threads);
  out.R_values = dpoly_grid_values(R, 1.0, t0 + t_min, dt, count, threads);
  for (std::size_t j = 0; j < count; ++j) {
    out.sup_sum = std::max(out.sup_sum, std::abs(out.sums[j]));
    out.sup_R = std::max(out.sup_R, std::abs(out.R_values[j]));
  }
  const double Xd = static_cast<double>(X), lX = std::log(Xd);
  const double Pf = mertens_product(spec, X, primes);
  double Z = std::numeric_limits<double>::infinity();
  for (double t : out.t) Z = std::min(Z, std::abs(t));
  Z = std::max(1.0, Z);
  const double q = (Q > P && P > 1) ? std::log(Q) / std::log(P) : 1.0;
  const unsigned k = spec.bound_k;
  const double halasz = std::pow(q, 2.0 * k) * std::log(lX) / std::pow(lX, opt.rho);
  out.bound_sum = (1.0 / std::sqrt(Z) + halasz) * Pf;
  out.bound_R = std::pow(q, k) * (1.0 / std::pow(lX, opt.sigma0 / 2.0) + halasz) * Pf;
  out.ratio_sum = out.sup_sum / out.bound_sum;
  out.ratio_R = out.sup_R / out.bound_R;
  return out;
}

// ------------------------------------------------------------ amplification

/// Q(s)^l A(s) with Q over primes in (Y1, 2Y1] (c_p = f(p)) and A over
/// m in (X/Y2, 2X/Y2] with a_m = f(m) 1_{B_eps}(m).
inline DirichletPoly amplified_polynomial(const MultiplicativeFunctionSpec& spec, double Y1, double Y2,
                                          std::uint64_t X, unsigned l, double eps, const PrimeTable& primes) {
  const double Xd = static_cast<double>(X);
  const auto m_lo = static_cast<std::uint64_t>(std::floor(Xd / Y2)) + 1;
  const auto m_hi = static_cast<std::uint64_t>(std::floor(2.0 * Xd / Y2));
  const double theta = b_threshold(eps, mertens_product(spec, X, primes), Xd);
  std::vector<std::pair<std::uint64_t, cplx>> cur;
  for (std::uint64_t m = m_lo; m <= m_hi; ++m) {
    const auto fv = trial_division_factor(m);
    if (big_omega(fv) <= theta) {
      const cplx v = eval(spec, fv);
      if (v != cplx(0.0)) cur.emplace_back(m, v);
    }
  }
  std::vector<std::pair<std::uint64_t, cplx>> qp;
  for (std::uint32_t p : primes) {
    if (p > 2 * Y1) break;
    if (p > Y1) qp.emplace_back(p, spec.at(p, 1));
  }
  if (l > 0 && static_cast<double>(primes.limit()) < 2 * Y1) throw PreconditionError("prime table does not reach 2 Y1");
  for (unsigned i = 0; i < l; ++i) {
    std::vector<std::pair<std::uint64_t, cplx>> next;
    next.reserve(cur.size() * qp.size());
    for (const auto& [n, v] : cur) {
      for (const auto& [p, c] : qp) next.emplace_back(checked_mul(n, p), v * c);
    }
    std::stable_sort(next.begin(), next.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    cur.clear();
    for (const auto& e : next) {
      if (!cur.empty() && cur.back().first == e.first) cur.back().second += e.second;
      else cur.push_back(e);
    }
  }
  DirichletPoly out;
  for (const auto& [n, v] : cur) out.push(n, v);
  return out;
}

inline unsigned amplification_length(double Y1, double Y2) {
  if (!(Y1 > 1 && Y2 >= 1)) throw ParameterError("need Y1 > 1 and Y2 >= 1");
  return static_cast<unsigned>(std::ceil(std::log(Y2) / std::log(Y1) - 1e-12));
}

struct AmplifiedCheck : BoundCheck {
  unsigned l = 0;
  std::size_t terms = 0;
};

/// lhs = int_{-T}^{T} |Q(1+it)^l A(1+it)|^2 dt (trapezoid),
/// rhs = S(T, X, f, eps) k^{2l} ((l+1)!)^2.
inline AmplifiedCheck amplified_meanvalue(const MultiplicativeFunctionSpec& spec, double Y1, double Y2, std::uint64_t X,
                                          unsigned l, double T, double eps, double quad_step, const PrimeTable& primes,
                                          Threads threads = {}, double envelope = 100) {
  if (l > 20) throw OverflowError("l > 20: ((l+1)!)^2 guard");
  if (l != amplification_length(Y1, Y2)) throw ParameterError("l must equal ceil(log Y2 / log Y1)");
  const auto poly = amplified_polynomial(spec, Y1, Y2, X, l, eps, primes);
  const auto mv = meanvalue_check(to_meanvalue_form(poly), T, quad_step, threads);
  const double fl = factorial(l + 1);
  const double rhs = frak_S(T, X, spec, eps, primes) * std::pow(static_cast<double>(spec.bound_k), 2.0 * l) * fl * fl;
  AmplifiedCheck r;
  static_cast<BoundCheck&>(r) = make_check("amplified_mean_value", mv.lhs, rhs, envelope);
  r.l = l;
  r.terms = poly.size();
  return r;
}

// ------------------------------------------------------------------ Perron

struct PerronCheck {
  cplx approx;
  double exact = 0;
  double error = 0;
  std::size_t panels = 0;
};

/// (1/2pi) int_{-t_max}^{t_max} A_f(1+it) ((x+h)^{1+it} - x^{1+it})/(1+it) dt
/// against sum_{x<m<=x+h} f(m), with A_f over (x, 2x].
inline PerronCheck perron_window_check(const MultiplicativeFunctionSpec& spec, double x, double h, double t_max,
                                       double quad_step, const PrimeTable& primes, Threads threads = {}) {
  if (!(x > 1 && h > 0 && h <= x)) throw ParameterError("need x > 1 and 0 < h <= x");
  if (x == std::floor(x) || x + h == std::floor(x + h)) throw ParameterError("x and x+h must not be integers");
  if (!(quad_step > 0) || quad_step > 1.0 / (4.0 * std::log(2.0 * x))) {
    throw ParameterError("quad_step exceeds 1/(4 log 2x)");
  }
  const auto lo = static_cast<std::uint64_t>(std::floor(x)) + 1;
  const auto hi = static_cast<std::uint64_t>(std::floor(2.0 * x));
  const auto vals = spec_values(spec, lo, hi + 1, primes);
  DirichletPoly A;
  NeumaierSum exact;
  for (std::uint64_t m = lo; m <= hi; ++m) {
    const cplx v = vals[m - lo];
    if (v != cplx(0.0)) A.push(m, v);
    if (static_cast<double>(m) <= x + h) exact += v.real();
  }
  PerronCheck r;
  r.exact = exact.value();
  r.panels = static_cast<std::size_t>(std::ceil(2.0 * t_max / quad_step));
  const double step = 2.0 * t_max / static_cast<double>(r.panels);
  const auto av = dpoly_grid_values(A, 1.0, -t_max, step, r.panels + 1, threads);
  const double lxh = std::log(x + h), lx = std::log(x);
  ComplexNeumaierSum acc;
  for (std::size_t j = 0; j <= r.panels; ++j) {
    const double t = -t_max + static_cast<double>(j) * step;
    const cplx s(1.0, t);
    const cplx u = ((x + h) * std::conj(unit_phase(t, lxh)) - x * std::conj(unit_phase(t, lx))) / s;
    acc += (j == 0 || j == r.panels ? 0.5 : 1.0) * av[j] * u;
  }
  r.approx = acc.value() * step / (2.0 * kPi);
  r.error = std::abs(r.approx - r.exact);
  return r;
}

}  // namespace shortint
