#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "shortint/error.hpp"
#include "shortint/multfun.hpp"
#include "shortint/numeric.hpp"
#include "shortint/parallel.hpp"
#include "shortint/primes.hpp"
#include "shortint/sieve.hpp"

namespace shortint {

/// Thresholds of the two prime ranges defining A, kept in log space because
/// the unclamped values overflow a double long before any clamp stops firing.
struct RestrictionParams {
  double log_P1 = 0, log_Q1 = 0, log_P2 = 0, log_Q2 = 0;
  double eps0 = 0;
  bool q1_raised = false;   // Q1 <- max(Q1, P1^2)
  bool q2_clamped = false;  // Q2 <- min(Q2, X^{1/10})
  bool q2_floor = false;    // Q2 <- max(Q2, P2^2) after the cap
  bool p_floor = false;     // P_j <- max(P_j, 2)

  double P1() const { return std::exp(log_P1); }
  double Q1() const { return std::exp(log_Q1); }
  double P2() const { return std::exp(log_P2); }
  double Q2() const { return std::exp(log_Q2); }
  bool clamped() const { return q1_raised || q2_clamped || q2_floor || p_floor; }
};

/// Parameters from L = log log X alone; usable where X itself is not a double.
inline RestrictionParams default_params_loglog(double L, double eps0) {
  if (!(L > 0)) throw ParameterError("log log X must be positive");
  if (!(eps0 > 0)) throw ParameterError("eps0 must be positive");
  RestrictionParams r;
  r.eps0 = eps0;
  const double log_logX = L;
  const double logX = std::exp(L);
  r.log_P1 = std::sqrt(L);
  r.log_Q1 = eps0 * log_logX;
  r.log_P2 = L * L;
  r.log_Q2 = std::pow(L, 100.0);
  const double log2 = std::log(2.0);
  if (r.log_P1 < log2) r.log_P1 = log2, r.p_floor = true;
  if (r.log_P2 < log2) r.log_P2 = log2, r.p_floor = true;
  if (r.log_Q1 < 2.0 * r.log_P1) r.log_Q1 = 2.0 * r.log_P1, r.q1_raised = true;
  if (r.log_Q2 > logX / 10.0) r.log_Q2 = logX / 10.0, r.q2_clamped = true;
  if (r.log_Q2 < 2.0 * r.log_P2) r.log_Q2 = 2.0 * r.log_P2, r.q2_floor = true;
  return r;
}

inline RestrictionParams default_params(double X, double eps0) {
  if (!(X >= 16)) throw ParameterError("default_params needs X >= 16");
  return default_params_loglog(std::log(std::log(X)), eps0);
}

/// eps0 = (alpha eps / 3) log k.
inline double default_eps0(double alpha, double eps, unsigned k) {
  return alpha * eps / 3.0 * std::log(static_cast<double>(k));
}

inline bool has_prime_in(const FactorVector& fv, double lo, double hi) {
  return std::any_of(fv.begin(), fv.end(), [&](const PrimePower& e) {
    const double p = static_cast<double>(e.prime);
    return p >= lo && p <= hi;
  });
}

inline bool in_A(const FactorVector& fv, const RestrictionParams& r) {
  return has_prime_in(fv, r.P1(), r.Q1()) && has_prime_in(fv, r.P2(), r.Q2());
}

inline double b_threshold(double eps, double PfX, double X) { return (1.0 + eps) * std::log(PfX * std::log(X)); }

inline bool in_B(const FactorVector& fv, double eps, double PfX, double X) {
  if (!(PfX > 0)) throw ParameterError("P_f(X) must be positive");
  return big_omega(fv) <= b_threshold(eps, PfX, X);
}

// ------------------------------------------------------- sieve reductions

/// Per-integer data the restriction sums need.
struct ArithRow {
  std::uint64_t n;
  unsigned Omega;
  unsigned omega;
  double abs_f;
  bool in_A1, in_A2;
};

/// Calls fn(partial, row) for every n in [lo, hi), chunk by chunk; partials are
/// returned in chunk order.
template <class Partial, class Fn>
std::vector<Partial> reduce_rows(const MultiplicativeFunctionSpec* spec, std::uint64_t lo, std::uint64_t hi,
                                 const PrimeTable& primes, const RestrictionParams* params, Threads threads,
                                 Fn&& fn, std::uint64_t chunk = std::uint64_t{1} << 18) {
  if (primes.limit() < isqrt(hi - 1)) throw PreconditionError("prime table does not reach sqrt(hi)");
  const double a1 = params ? params->P1() : 0, b1 = params ? params->Q1() : -1;
  const double a2 = params ? params->P2() : 0, b2 = params ? params->Q2() : -1;
  return map_chunks<Partial>(ChunkPlan{lo, hi, chunk}, threads, [&](std::uint64_t a, std::uint64_t b) {
    const std::size_t n = b - a;
    std::vector<std::uint8_t> Om(n, 0), om(n, 0), f1(n, 0), f2(n, 0);
    std::vector<double> absf(spec ? n : 0, 1.0);
    sieve_prime_powers(a, b, primes, [&](std::size_t j, std::uint64_t p, std::uint32_t e) {
      Om[j] = static_cast<std::uint8_t>(Om[j] + e);
      ++om[j];
      const double pd = static_cast<double>(p);
      if (pd >= a1 && pd <= b1) f1[j] = 1;
      if (pd >= a2 && pd <= b2) f2[j] = 1;
      if (spec) absf[j] *= std::abs(spec->at(p, e));
    });
    Partial part{};
    for (std::size_t j = 0; j < n; ++j) {
      fn(part, ArithRow{a + j, Om[j], om[j], spec ? absf[j] : 1.0, f1[j] != 0, f2[j] != 0});
    }
    return part;
  });
}

// ------------------------------------------------------------- tail sums

struct TailB {
  double threshold = 0;  // (1+eps) log(P_f(X) log X)
  double PfX = 0;
  double lhs = 0, rhs = 0, ratio = 0;
  double rankin_rhs = 0;            // sum |f(n)| (1+delta)^{Omega(n) - threshold}
  std::uint64_t rankin_violations = 0;  // n with 1_{Omega>theta}|f| > |f|(1+delta)^{Omega-theta}
  std::uint64_t excluded = 0;
};

/// lhs = sum_{X<n<=3X, n not in B_eps} |f(n)|,
/// rhs = X P_f(X) (P_f(X) log X)^{-(1+eps) log(1+delta) + delta}.
inline TailB tail_sum_B(const MultiplicativeFunctionSpec& spec, std::uint64_t X, double eps, double delta,
                        const PrimeTable& primes, Threads threads = {}) {
  if (!(delta > 0 && delta < 1)) throw ParameterError("delta must lie in (0, 1)");
  TailB r;
  const double Xd = static_cast<double>(X);
  r.PfX = mertens_product(spec, X, primes);
  r.threshold = b_threshold(eps, r.PfX, Xd);
  struct P {
    NeumaierSum lhs, rankin;
    std::uint64_t viol = 0, excl = 0;
  };
  const double lg = std::log1p(delta);
  auto parts = reduce_rows<P>(&spec, X + 1, 3 * X + 1, primes, nullptr, threads, [&](P& p, const ArithRow& row) {
    const double w = row.abs_f * std::exp((row.Omega - r.threshold) * lg);
    p.rankin += w;
    if (row.Omega > r.threshold) {
      p.lhs += row.abs_f;
      ++p.excl;
      if (row.abs_f > w) ++p.viol;
    }
  });
  NeumaierSum lhs, rk;
  for (auto& p : parts) lhs.merge(p.lhs), rk.merge(p.rankin), r.rankin_violations += p.viol, r.excluded += p.excl;
  r.lhs = lhs.value();
  r.rankin_rhs = rk.value();
  const double base = r.PfX * std::log(Xd);
  r.rhs = Xd * r.PfX * std::pow(base, -(1.0 + eps) * lg + delta);
  r.ratio = r.lhs / r.rhs;
  return r;
}

struct TailA {
  double lhs = 0, rhs_factor = 0, ratio = 0;
  double density = 0;  // #{X<n<=2X : n in A} / X
  double prod1 = 0, prod2 = 0;
};

/// lhs = sum_{X<n<=2X, n not in A} |f(n)|,
/// rhs_factor = X P_f(2X) sum_j prod_{p in [P_j,Q_j]} (1 - |f(p)|/p).
inline TailA tail_sum_A(const MultiplicativeFunctionSpec& spec, std::uint64_t X, const RestrictionParams& params,
                        const PrimeTable& primes, Threads threads = {}) {
  TailA r;
  auto prod = [&](double lo, double hi) {
    NeumaierSum logs;
    for (std::uint32_t p : primes) {
      if (p > hi) break;
      if (p < lo) continue;
      const double u = std::abs(spec.at(p, 1)) / p;
      if (u >= 1.0) throw DomainError("|f(p)| >= p inside a restriction range");
      logs += std::log1p(-u);
    }
    return std::exp(logs.value());
  };
  if (static_cast<double>(primes.limit()) < std::max(params.Q2(), 2.0 * X)) {
    throw PreconditionError("prime table does not cover the restriction ranges");
  }
  r.prod1 = prod(params.P1(), params.Q1());
  r.prod2 = prod(params.P2(), params.Q2());
  struct P {
    NeumaierSum lhs;
    std::uint64_t inA = 0;
  };
  auto parts = reduce_rows<P>(&spec, X + 1, 2 * X + 1, primes, &params, threads, [](P& p, const ArithRow& row) {
    if (row.in_A1 && row.in_A2) ++p.inA;
    else p.lhs += row.abs_f;
  });
  NeumaierSum lhs;
  std::uint64_t inA = 0;
  for (auto& p : parts) lhs.merge(p.lhs), inA += p.inA;
  r.lhs = lhs.value();
  r.density = static_cast<double>(inA) / static_cast<double>(X);
  r.rhs_factor = static_cast<double>(X) * mertens_product(spec, 2 * X, primes) * (r.prod1 + r.prod2);
  r.ratio = r.lhs / r.rhs_factor;
  return r;
}

/// Truncated Euler product for c_k with its tail bound.
struct CkValue {
  double value = 0;
  double tail_relative = 0;
  std::uint64_t cutoff = 0;
};

/// c_k = (1/(k-1)!) prod_p (1 - 1/p)^k (1 + k/(p-1)).
inline CkValue kpow_constant(unsigned k, const PrimeTable& primes) {
  if (k == 0) throw ParameterError("k must be >= 1");
  CkValue c;
  c.cutoff = primes.limit();
  NeumaierSum logs;
  for (std::uint32_t p : primes) {
    const double pd = p;
    logs += k * std::log1p(-1.0 / pd) + std::log1p(k / (pd - 1.0));
  }
  const double Y = static_cast<double>(c.cutoff);
  // Each remaining log factor is -k(k-1)/(2p^2) + O(k^3/p^3); sum_{p>Y} 1/p^2 < 1.26/(Y log Y).
  c.tail_relative = (k == 1) ? 0.0 : 2.52 * k * k / (Y * std::log(Y));
  if (c.tail_relative > 1e-6) throw AccuracyError("Euler product tail for c_k exceeds 1e-6; extend the prime cutoff");
  c.value = std::exp(logs.value()) / factorial(k - 1);
  return c;
}

struct KpowOmega {
  std::uint64_t sum = 0;
  double c_k = 0;
  double c_k_tail = 0;
  double normalized = 0;
};

/// sum_{n<=x} k^{omega(n)} exactly, with c_k and sum / (x log^{k-1} x).
inline KpowOmega kpow_omega_sum(std::uint64_t x, unsigned k, const PrimeTable& euler_primes, Threads threads = {}) {
  if (k == 0) throw ParameterError("k must be >= 1");
  if (x < 1) throw ParameterError("x must be >= 1");
  KpowOmega r;
  r.sum = sieve_kpow_omega_sum(x, k, threads, std::uint64_t{1} << 18);
  const auto c = kpow_constant(k, euler_primes);
  r.c_k = c.value;
  r.c_k_tail = c.tail_relative;
  const double xd = static_cast<double>(x);
  r.normalized = static_cast<double>(r.sum) / (xd * std::pow(std::log(xd), k - 1.0));
  return r;
}

struct ConcentratedTail {
  double lhs = 0, normalized = 0;
  double lower_lhs = 0;   // deviants below the band
  double rankin_rhs = 0;  // sum over those of k^Omega A^omega A^{-(k-eps) log log x}
  std::uint64_t rankin_violations = 0;
  double A = 0;
};

/// lhs = sum over n <= x with |omega(n) - k log log x| >= eps log log x of k^{Omega(n)}.
/// Weight on deviant n: k^{Omega(n)} as written, or the d_k(n) it is meant to majorize.
enum class TailWeight { kpow_big_omega, dk };

inline ConcentratedTail concentrated_dk_tail(std::uint64_t x, unsigned k, double eps, const PrimeTable& primes,
                                             Threads threads = {}, TailWeight weight = TailWeight::kpow_big_omega) {
  if (k == 0) throw ParameterError("k must be >= 1");
  ConcentratedTail r;
  const double xd = static_cast<double>(x);
  const double L = std::log(std::log(xd));
  r.A = (k - eps) / k;
  const bool rankin = r.A > 0 && r.A < 1;
  const double logA = rankin ? std::log(r.A) : 0.0;
  const double logk = std::log(static_cast<double>(k));
  struct P {
    NeumaierSum lhs, lower, rk;
    std::uint64_t viol = 0;
  };
  const auto dk = dk_spec(k);
  const auto* wspec = weight == TailWeight::dk ? &dk : nullptr;
  auto parts = reduce_rows<P>(wspec, 1, x + 1, primes, nullptr, threads, [&](P& p, const ArithRow& row) {
    if (std::abs(row.omega - k * L) < eps * L) return;
    const double w = wspec ? row.abs_f : std::exp(row.Omega * logk);
    p.lhs += w;
    if (row.omega < k * L) {
      p.lower += w;
      if (rankin) {
        const double bound = w * std::exp((row.omega - (k - eps) * L) * logA);
        p.rk += bound;
        if (w > bound * (1 + 1e-12)) ++p.viol;
      }
    }
  });
  NeumaierSum lhs, lower, rk;
  for (auto& p : parts) lhs.merge(p.lhs), lower.merge(p.lower), rk.merge(p.rk), r.rankin_violations += p.viol;
  r.lhs = lhs.value();
  r.lower_lhs = lower.value();
  r.rankin_rhs = rk.value();
  r.normalized = r.lhs / (xd * std::pow(std::log(xd), k - 1.0));
  return r;
}

struct ConcentrationReport {
  std::uint64_t lo = 0, hi = 0;  // n in (lo, hi]
  unsigned k = 0;
  double eps = 0;
  double loglog = 0;
  std::uint64_t typical = 0, deviant = 0;
  double weighted_typical = 0, weighted_deviant = 0;  // weight k^Omega
  double lower_bound = 0, upper_bound = 0;            // x / (log x)^{(k +- eps) log k - k + 1}
  double ratio_lower = 0, ratio_upper = 0;            // typical / bound
  std::vector<std::uint64_t> histogram;               // count by omega
  std::vector<double> weighted_histogram;
};

/// Counts over n in (lo, hi] of |omega(n) - k log log x| <= eps log log x, x = hi.
inline ConcentrationReport omega_concentration_counts(std::uint64_t lo, std::uint64_t hi, unsigned k, double eps,
                                                      const PrimeTable& primes, Threads threads = {}) {
  if (k == 0) throw ParameterError("k must be >= 1");
  if (hi <= lo) throw ParameterError("empty range");
  ConcentrationReport r;
  r.lo = lo, r.hi = hi, r.k = k, r.eps = eps;
  const double x = static_cast<double>(hi);
  r.loglog = std::log(std::log(x));
  const double logk = std::log(static_cast<double>(k));
  struct P {
    std::uint64_t typ = 0, dev = 0;
    NeumaierSum wt, wd;
    std::vector<std::uint64_t> hist = std::vector<std::uint64_t>(64, 0);
    std::vector<NeumaierSum> whist = std::vector<NeumaierSum>(64);
  };
  auto parts = reduce_rows<P>(nullptr, lo + 1, hi + 1, primes, nullptr, threads, [&](P& p, const ArithRow& row) {
    const double w = std::exp(row.Omega * logk);
    if (std::abs(row.omega - k * r.loglog) <= eps * r.loglog) ++p.typ, p.wt += w;
    else ++p.dev, p.wd += w;
    ++p.hist[row.omega];
    p.whist[row.omega] += w;
  });
  NeumaierSum wt, wd;
  std::vector<NeumaierSum> wh(64);
  r.histogram.assign(64, 0);
  for (auto& p : parts) {
    r.typical += p.typ, r.deviant += p.dev;
    wt.merge(p.wt), wd.merge(p.wd);
    for (std::size_t i = 0; i < 64; ++i) r.histogram[i] += p.hist[i], wh[i].merge(p.whist[i]);
  }
  std::size_t top = 64;
  while (top > 1 && r.histogram[top - 1] == 0) --top;
  r.histogram.resize(top);
  for (std::size_t i = 0; i < top; ++i) r.weighted_histogram.push_back(wh[i].value());
  r.weighted_typical = wt.value();
  r.weighted_deviant = wd.value();
  const double lx = std::log(x);
  r.lower_bound = x / std::pow(lx, (k + eps) * logk - k + 1.0);
  r.upper_bound = x / std::pow(lx, (k - eps) * logk - k + 1.0);
  r.ratio_lower = r.typical / r.lower_bound;
  r.ratio_upper = r.typical / r.upper_bound;
  return r;
}

struct ShiuRatio {
  double ratio = 0;
  double window_sum = 0;
  double PfX = 0;
};

/// (sum_{Y-y<n<=Y} |f(n)|) / (y P_f(X)).
inline ShiuRatio shiu_ratio(const MultiplicativeFunctionSpec& spec, std::uint64_t X, std::uint64_t Y, std::uint64_t y,
                            const PrimeTable& primes, double delta = 0.5, Threads threads = {}) {
  const double Xd = static_cast<double>(X), Yd = static_cast<double>(Y);
  if (!(Yd > std::sqrt(Xd) && Y <= X)) throw ParameterError("Shiu window needs sqrt(X) < Y <= X");
  if (static_cast<double>(y) < std::pow(Yd, delta)) throw ParameterError("window length y below Y^delta");
  if (y > Y) throw ParameterError("window length y exceeds Y");
  ShiuRatio r;
  r.PfX = mertens_product(spec, X, primes);
  struct P {
    NeumaierSum s;
  };
  auto parts = reduce_rows<P>(&spec, Y - y + 1, Y + 1, primes, nullptr, threads,
                              [](P& p, const ArithRow& row) { p.s += row.abs_f; });
  NeumaierSum s;
  for (auto& p : parts) s.merge(p.s);
  r.window_sum = s.value();
  r.ratio = r.window_sum / (static_cast<double>(y) * r.PfX);
  return r;
}

struct RhoSigma {
  double rho = 0, sigma = 0;
};

/// rho_{k,alpha} = k alpha/3 - (2k/(3 pi)) sin(pi alpha/2), sigma = min(1, rho)/4.
/// The factor k is applied last so that rho(2, a) = 2 rho(1, a) bit for bit.
inline RhoSigma rho_sigma(unsigned k, double alpha) {
  if (k == 0) throw ParameterError("k must be >= 1");
  if (!(alpha > 0 && alpha <= 1)) throw ParameterError("alpha must lie in (0, 1]");
  const double unit = alpha / 3.0 - 2.0 / (3.0 * kPi) * std::sin(kPi * alpha / 2.0);
  RhoSigma r;
  r.rho = k * unit;
  if (!(r.rho > 0)) throw DomainError("rho_{k,alpha} is not positive");
  r.sigma = std::min(1.0, r.rho) / 4.0;
  return r;
}

}  // namespace shortint
