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

struct ValueTableOptions {
  std::uint64_t h_max = 0;
  double t0 = 0.0;
  Threads threads{};
  std::uint64_t chunk = std::uint64_t{1} << 18;
  bool force_complex = false;
  std::uint64_t memory_budget = std::uint64_t{3} << 30;
};

/// Values of f on (X - h_max, 2X + h_max] held as prefix sums. Integer-valued
/// untwisted specs use exact int64 prefixes; everything else uses double-double
/// complex prefixes so that differences stay accurate far below the prefix size.
class ValueTable {
 public:
  static ValueTable build(const MultiplicativeFunctionSpec& spec, std::uint64_t X, const PrimeTable& primes,
                          const ValueTableOptions& opt = {}) {
    if (X < 2) throw PreconditionError("value table needs X >= 2");
    if (opt.h_max >= X) throw ParameterError("h_max must be smaller than X");
    ValueTable t;
    t.X_ = X;
    t.h_max_ = opt.h_max;
    t.t0_ = opt.t0;
    t.first_ = X - opt.h_max;
    t.last_ = 2 * X + opt.h_max;
    t.exact_ = spec.integer_valued() && !opt.force_complex;
    const std::uint64_t len = t.last_ - t.first_;
    const std::uint64_t bytes = (len + 1) * (t.exact_ ? sizeof(std::int64_t) : sizeof(ComplexDoubleDouble));
    if (bytes > opt.memory_budget) throw CapacityError("value table exceeds the memory budget");
    if (primes.limit() < isqrt(t.last_)) throw PreconditionError("prime table does not reach sqrt(2X + h_max)");

    // Values are computed per chunk in parallel, then summed sequentially.
    const ChunkPlan plan{t.first_ + 1, t.last_ + 1, opt.chunk};
    struct Partial {
      ComplexNeumaierSum plain, twisted;
      double max_abs = 0.0;
    };
    if (t.exact_) t.iprefix_.assign(len + 1, 0);
    else t.cprefix_.assign(len + 1, ComplexDoubleDouble{});
    auto parts = map_chunks<Partial>(plan, opt.threads, [&](std::uint64_t a, std::uint64_t b) {
      Partial part;
      const std::size_t n = b - a;
      const std::size_t base = a - t.first_;
      if (t.exact_) {
        std::vector<std::int64_t> v(n, 1);
        sieve_prime_powers(a, b, primes, [&](std::size_t j, std::uint64_t p, std::uint32_t e) {
          v[j] *= spec.integer_rule(p, e);
        });
        for (std::size_t j = 0; j < n; ++j) t.iprefix_[base + j] = v[j];
        t.accumulate(part.plain, part.twisted, part.max_abs, a, n,
                     [&](std::size_t j) { return cplx(static_cast<double>(v[j]), 0.0); });
      } else {
        std::vector<cplx> v(n, 1.0);
        sieve_prime_powers(a, b, primes, [&](std::size_t j, std::uint64_t p, std::uint32_t e) {
          v[j] *= spec.at(p, e);
        });
        for (std::size_t j = 0; j < n; ++j) {
          t.cprefix_[base + j].re.hi = v[j].real();
          t.cprefix_[base + j].im.hi = v[j].imag();
        }
        t.accumulate(part.plain, part.twisted, part.max_abs, a, n, [&](std::size_t j) { return v[j]; });
      }
      return part;
    });
    ComplexNeumaierSum plain, twisted;
    for (const auto& p : parts) {
      plain.merge(p.plain);
      twisted.merge(p.twisted);
      t.max_abs_ = std::max(t.max_abs_, p.max_abs);
    }
    t.long_plain_ = plain.value() / static_cast<double>(X);
    t.long_twisted_ = twisted.value() / static_cast<double>(X);
    // Slot i holds f(first + i) for i >= 1; turn it into sum_{first < n <= first + i}.
    if (t.exact_) {
      std::int64_t run = 0;
      for (std::size_t i = 1; i <= len; ++i) {
        if (__builtin_add_overflow(run, t.iprefix_[i], &run)) throw OverflowError("exact prefix sum overflow");
        t.iprefix_[i] = run;
      }
    } else {
      ComplexDoubleDouble run;
      for (std::size_t i = 1; i <= len; ++i) {
        run += cplx(t.cprefix_[i].re.hi, t.cprefix_[i].im.hi);
        t.cprefix_[i] = run;
      }
    }
    return t;
  }

  std::uint64_t X() const { return X_; }
  std::uint64_t h_max() const { return h_max_; }
  double t0() const { return t0_; }
  bool exact() const { return exact_; }
  /// Table holds n with first() < n <= last().
  std::uint64_t first() const { return first_; }
  std::uint64_t last() const { return last_; }
  double max_abs() const { return max_abs_; }
  /// (1/X) sum_{X<n<=2X} f(n).
  cplx long_plain() const { return long_plain_; }
  /// (1/X) sum_{X<n<=2X} f(n) n^{-i t0}.
  cplx long_twisted() const { return long_twisted_; }

  /// sum_{a < n <= b} f(n).
  cplx range_sum(std::uint64_t a, std::uint64_t b) const {
    check(a, b);
    if (exact_) return static_cast<double>(iprefix_[b - first_] - iprefix_[a - first_]);
    return cprefix_[b - first_].minus(cprefix_[a - first_]);
  }
  std::int64_t range_sum_exact(std::uint64_t a, std::uint64_t b) const {
    if (!exact_) throw PreconditionError("table is not in exact integer mode");
    check(a, b);
    return iprefix_[b - first_] - iprefix_[a - first_];
  }
  cplx value(std::uint64_t n) const { return range_sum(n - 1, n); }

 private:
  void check(std::uint64_t a, std::uint64_t b) const {
    if (a < first_ || b > last_ || b < a) throw RangeError("window outside the value table");
  }

  template <class Get>
  void accumulate(ComplexNeumaierSum& plain, ComplexNeumaierSum& twisted, double& max_abs, std::uint64_t a,
                  std::size_t n, Get&& get) const {
    for (std::size_t j = 0; j < n; ++j) {
      const std::uint64_t m = a + j;
      const cplx v = get(j);
      max_abs = std::max(max_abs, std::abs(v));
      if (m <= X_ || m > 2 * X_) continue;
      plain += v;
      twisted += t0_ == 0.0 ? v : v * unit_phase(t0_, std::log(static_cast<double>(m)));
    }
  }

  std::uint64_t X_ = 0, h_max_ = 0, first_ = 0, last_ = 0;
  double t0_ = 0.0;
  bool exact_ = false;
  std::vector<std::int64_t> iprefix_;
  std::vector<ComplexDoubleDouble> cprefix_;
  cplx long_plain_, long_twisted_;
  double max_abs_ = 0.0;
};

/// S_{f,h}(x) = sum_{x < m <= x+h} f(m) for every integer x in [X, 2X].
inline std::vector<cplx> window_sums(const ValueTable& t, std::uint64_t h) {
  if (h > t.h_max()) throw RangeError("window length exceeds the table margin");
  std::vector<cplx> out(t.X() + 1);
  for (std::uint64_t x = t.X(); x <= 2 * t.X(); ++x) out[x - t.X()] = t.range_sum(x, x + h);
  return out;
}

inline std::vector<std::int64_t> window_sums_exact(const ValueTable& t, std::uint64_t h) {
  if (h > t.h_max()) throw RangeError("window length exceeds the table margin");
  std::vector<std::int64_t> out(t.X() + 1);
  for (std::uint64_t x = t.X(); x <= 2 * t.X(); ++x) out[x - t.X()] = t.range_sum_exact(x, x + h);
  return out;
}

/// int_x^{x+h} u^{i t0} du = ((x+h)^{1+it0} - x^{1+it0}) / (1 + i t0), evaluated
/// as x^{1+it0} expm1((1+it0) log1p(h/x)) / (1+it0) to avoid cancellation.
inline cplx window_weight(double x, double h, double t0) {
  if (t0 == 0.0) return h;
  const cplx s(1.0, t0);
  const cplx xs = x * unit_phase(-t0, std::log(x));
  return xs * cexpm1(s * std::log1p(h / x)) / s;
}

inline cplx window_weight_mean(double x, double h, double t0) {
  if (h == 0.0) return unit_phase(-t0, std::log(x));
  return window_weight(x, h, t0) / h;
}

enum class Centering { plain, twisted };

struct ScanOptions {
  double t0 = 0.0;
  Centering centering = Centering::twisted;
  double normalizer = 1.0;
  std::vector<double> etas;
  bool keep_delta = true;
  bool keep_abs = true;
  Threads threads{};
  std::uint64_t chunk = std::uint64_t{1} << 16;
};

struct WindowScan {
  std::uint64_t X = 0, h = 0;
  double t0 = 0.0;
  double normalizer = 1.0;
  std::vector<cplx> delta;        // per x in [X, 2X], when kept
  std::vector<double> abs_sorted;  // |delta| ascending, when kept
  cplx mean_delta;
  double mean_abs = 0.0;
  double l2 = 0.0;            // (1/(X+1)) sum |delta|^2
  double max_abs = 0.0;
  double p50 = 0.0, p90 = 0.0, p99 = 0.0;
  std::vector<std::pair<double, double>> exceptional;  // (eta, fraction)
};

namespace detail {

/// Runs fn(x, delta) over x in [X, 2X] in fixed chunks; returns per-chunk
/// compensated partial sums merged in chunk order.
struct ScanPartial {
  ComplexNeumaierSum sum;
  NeumaierSum abs_sum, sq_sum;
  double max_abs = 0.0;
};

template <class Sink>
ScanPartial scan_delta(const ValueTable& t, std::uint64_t h, double t0, Centering centering, Threads threads,
                       std::uint64_t chunk, Sink&& sink) {
  if (h == 0) throw ParameterError("discrepancy needs h >= 1");
  if (h > t.h_max()) throw RangeError("window length exceeds the table margin");
  if (centering == Centering::twisted && t0 != t.t0()) {
    throw ParameterError("t0 differs from the value table's twisted prefix");
  }
  const double tt = centering == Centering::twisted ? t0 : 0.0;
  const cplx L = centering == Centering::twisted ? t.long_twisted() : t.long_plain();
  const double hd = static_cast<double>(h);
  const std::uint64_t X = t.X();
  const ChunkPlan plan{X, 2 * X + 1, chunk};
  auto parts = map_chunks<ScanPartial>(plan, threads, [&](std::uint64_t a, std::uint64_t b) {
    ScanPartial part;
    for (std::uint64_t x = a; x < b; ++x) {
      const cplx S = t.range_sum(x, x + h);
      const cplx w = tt == 0.0 ? cplx(1.0) : window_weight_mean(static_cast<double>(x), hd, tt);
      const cplx d = S / hd - w * L;
      const double ad = std::abs(d);
      part.sum += d;
      part.abs_sum += ad;
      part.sq_sum += ad * ad;
      part.max_abs = std::max(part.max_abs, ad);
      sink(x, d);
    }
    return part;
  });
  ScanPartial total;
  for (const auto& p : parts) {
    total.sum.merge(p.sum);
    total.abs_sum.merge(p.abs_sum);
    total.sq_sum.merge(p.sq_sum);
    total.max_abs = std::max(total.max_abs, p.max_abs);
  }
  return total;
}

}  // namespace detail

inline double exceptional_measure(const WindowScan& scan, double eta) {
  if (!(eta > 0)) throw ParameterError("eta must be positive");
  if (scan.abs_sorted.empty()) throw PreconditionError("scan was run without keeping |delta|");
  const double thr = eta * scan.normalizer;
  const auto it = std::upper_bound(scan.abs_sorted.begin(), scan.abs_sorted.end(), thr);
  return static_cast<double>(scan.abs_sorted.end() - it) / static_cast<double>(scan.abs_sorted.size());
}

/// Delta(x) = (1/h) S(x) - (1/h) int_x^{x+h} u^{it0} du * (1/X) sum f(n) n^{-it0}
/// for every integer x in [X, 2X].
inline WindowScan discrepancy_profile(const ValueTable& t, std::uint64_t h, const ScanOptions& opt = {}) {
  WindowScan scan;
  scan.X = t.X();
  scan.h = h;
  scan.t0 = opt.centering == Centering::twisted ? opt.t0 : 0.0;
  scan.normalizer = opt.normalizer;
  const std::uint64_t n = t.X() + 1;
  if (opt.keep_delta) scan.delta.resize(n);
  if (opt.keep_abs) scan.abs_sorted.resize(n);
  const std::uint64_t X = t.X();
  const auto total = detail::scan_delta(t, h, opt.t0, opt.centering, opt.threads, opt.chunk,
                                        [&](std::uint64_t x, cplx d) {
                                          if (opt.keep_delta) scan.delta[x - X] = d;
                                          if (opt.keep_abs) scan.abs_sorted[x - X] = std::abs(d);
                                        });
  const double nd = static_cast<double>(n);
  scan.mean_delta = total.sum.value() / nd;
  scan.mean_abs = total.abs_sum.value() / nd;
  scan.l2 = total.sq_sum.value() / nd;
  scan.max_abs = total.max_abs;
  if (opt.keep_abs) {
    std::sort(scan.abs_sorted.begin(), scan.abs_sorted.end());
    auto q = [&](double p) { return scan.abs_sorted[static_cast<std::size_t>(std::floor(p * (nd - 1)))]; };
    scan.p50 = q(0.50);
    scan.p90 = q(0.90);
    scan.p99 = q(0.99);
    for (double eta : opt.etas) scan.exceptional.push_back({eta, exceptional_measure(scan, eta)});
  }
  return scan;
}

/// (1/X) sum_{x in [X, 2X]} |Delta(x)|^2.
inline double l2_variance(const ValueTable& t, std::uint64_t h, double t0, Centering mode, Threads threads = {}) {
  const auto total =
      detail::scan_delta(t, h, t0, mode, threads, std::uint64_t{1} << 16, [](std::uint64_t, cplx) {});
  return total.sq_sum.value() / static_cast<double>(t.X());
}

// ----------------------------------------------------- inverse threshold

struct InverseThresholdRow {
  std::uint64_t h = 0;
  double vanish_fraction = 0.0;
  double concentrated_dk_mass = 0.0;
};

struct InverseThresholdResult {
  std::uint64_t X = 0;
  unsigned k = 0;
  double eps_prime = 0.0;
  double loglogX = 0.0;
  double typical_lo = 0.0, typical_hi = 0.0;  // omega band
  std::uint64_t typical_count = 0;            // over (X, 2X]
  std::vector<InverseThresholdRow> rows;
};

/// For each h: the fraction of x in [X, 2X] whose window (x, x+h] holds no n
/// with |omega(n) - k log log X| <= eps' log log X, and the mean over x of
/// (1/h) sum of d_k over the remaining (deviant) n in the window, divided by
/// log^{k-1} X.
inline InverseThresholdResult inverse_threshold_experiment(std::uint64_t X, unsigned k, double eps_prime,
                                                           const std::vector<std::uint64_t>& h_grid,
                                                           const PrimeTable& primes, Threads threads = {},
                                                           std::uint64_t chunk = std::uint64_t{1} << 18) {
  if (k == 0) throw ParameterError("k must be >= 1");
  if (!(eps_prime >= 0) || eps_prime >= k) throw ParameterError("eps' must satisfy 0 <= eps' < k");
  if (X < 16) throw ParameterError("X must be at least 16");
  InverseThresholdResult r;
  r.X = X;
  r.k = k;
  r.eps_prime = eps_prime;
  r.loglogX = std::log(std::log(static_cast<double>(X)));
  r.typical_lo = (k - eps_prime) * r.loglogX;
  r.typical_hi = (k + eps_prime) * r.loglogX;
  const std::uint64_t hmax = h_grid.empty() ? 0 : *std::max_element(h_grid.begin(), h_grid.end());
  const std::uint64_t lo = X + 1, hi = 2 * X + hmax + 1;  // n in [lo, hi)
  if (primes.limit() < isqrt(hi)) throw PreconditionError("prime table does not reach sqrt(2X + h)");
  std::vector<std::uint8_t> typical(hi - lo);
  std::vector<std::uint32_t> deviant_dk(hi - lo);
  parallel_chunks(ChunkPlan{lo, hi, chunk}.count(), threads, [&](std::size_t c) {
    const ChunkPlan plan{lo, hi, chunk};
    const std::uint64_t a = plan.lo(c), b = plan.hi(c);
    std::vector<std::uint8_t> om(b - a, 0);
    std::vector<std::uint64_t> dk(b - a, 1);
    sieve_prime_powers(a, b, primes, [&](std::size_t j, std::uint64_t, std::uint32_t e) {
      ++om[j];
      dk[j] = checked_mul(dk[j], dk_prime_power(e, k));
    });
    for (std::size_t j = 0; j < om.size(); ++j) {
      const bool typ = std::abs(om[j] - k * r.loglogX) <= eps_prime * r.loglogX;
      typical[a - lo + j] = typ;
      if (dk[j] > std::numeric_limits<std::uint32_t>::max()) throw OverflowError("d_k exceeds 32 bits");
      deviant_dk[a - lo + j] = typ ? 0 : static_cast<std::uint32_t>(dk[j]);
    }
  });
  for (std::uint64_t n = X + 1; n <= 2 * X; ++n) r.typical_count += typical[n - lo];
  const double norm = std::pow(std::log(static_cast<double>(X)), static_cast<double>(k) - 1.0);
  const double count = static_cast<double>(X + 1);
  for (std::uint64_t h : h_grid) {
    InverseThresholdRow row;
    row.h = h;
    if (h == 0) {
      row.vanish_fraction = 1.0;
      row.concentrated_dk_mass = 0.0;
      r.rows.push_back(row);
      continue;
    }
    // Window (x, x+h] covers indices x+1-lo .. x+h-lo, i.e. [x-X, x-X+h).
    std::uint64_t typ = 0, mass = 0;
    for (std::uint64_t i = 0; i < h; ++i) typ += typical[i], mass += deviant_dk[i];
    std::uint64_t vanish = 0, mass_sum = 0;
    for (std::uint64_t x = X;; ++x) {
      const std::uint64_t i = x - X;
      if (typ == 0) ++vanish;
      mass_sum = checked_add(mass_sum, mass);
      if (x == 2 * X) break;
      typ += typical[i + h];
      typ -= typical[i];
      mass += deviant_dk[i + h];
      mass -= deviant_dk[i];
    }
    row.vanish_fraction = static_cast<double>(vanish) / count;
    row.concentrated_dk_mass = static_cast<double>(mass_sum) / (count * static_cast<double>(h) * norm);
    r.rows.push_back(row);
  }
  return r;
}

}  // namespace shortint
