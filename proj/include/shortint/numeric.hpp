#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>

#include "shortint/error.hpp"

namespace shortint {

using cplx = std::complex<double>;

/// Neumaier's variant of Kahan summation. Order of additions is the caller's,
/// so the result is deterministic for a fixed order.
class NeumaierSum {
 public:
  NeumaierSum() = default;
  explicit NeumaierSum(double init) : sum_(init) {}

  void add(double x) {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  NeumaierSum& operator+=(double x) {
    add(x);
    return *this;
  }
  void merge(const NeumaierSum& other) {
    add(other.sum_);
    add(other.comp_);
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

class ComplexNeumaierSum {
 public:
  void add(cplx z) {
    re_.add(z.real());
    im_.add(z.imag());
  }
  ComplexNeumaierSum& operator+=(cplx z) {
    add(z);
    return *this;
  }
  void merge(const ComplexNeumaierSum& other) {
    re_.merge(other.re_);
    im_.merge(other.im_);
  }
  cplx value() const { return {re_.value(), im_.value()}; }

 private:
  NeumaierSum re_;
  NeumaierSum im_;
};

/// Unevaluated sum hi + lo with |lo| <= ulp(hi)/2. Used for prefix sums whose
/// differences must stay accurate far below the magnitude of the prefix.
struct DoubleDouble {
  double hi = 0.0;
  double lo = 0.0;

  static DoubleDouble two_sum(double a, double b) {
    const double s = a + b;
    const double bb = s - a;
    const double err = (a - (s - bb)) + (b - bb);
    return {s, err};
  }

  DoubleDouble& operator+=(double x) {
    DoubleDouble s = two_sum(hi, x);
    s.lo += lo;
    *this = two_sum(s.hi, s.lo);
    return *this;
  }

  /// (this - other) rounded to double, accurate to about 2^-104 relative to the
  /// operands.
  double minus(const DoubleDouble& other) const {
    DoubleDouble d = two_sum(hi, -other.hi);
    d.lo += lo - other.lo;
    return d.hi + d.lo;
  }
};

struct ComplexDoubleDouble {
  DoubleDouble re;
  DoubleDouble im;

  ComplexDoubleDouble& operator+=(cplx z) {
    re += z.real();
    im += z.imag();
    return *this;
  }
  cplx minus(const ComplexDoubleDouble& other) const {
    return {re.minus(other.re), im.minus(other.im)};
  }
};

/// e^z - 1 without cancellation for small |z|.
inline cplx cexpm1(cplx z) {
  const double a = z.real();
  const double b = z.imag();
  const double em1 = std::expm1(a);
  const double s = std::sin(b / 2.0);
  const double cos_m1 = -2.0 * s * s;
  const double re = em1 * std::cos(b) + cos_m1;
  const double im = std::exp(a) * std::sin(b);
  return {re, im};
}

/// n^{-it} = exp(-i t log n).
inline cplx unit_phase(double t, double log_n) {
  const double ang = -t * log_n;
  return {std::cos(ang), std::sin(ang)};
}

inline std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  if (__builtin_mul_overflow(a, b, &r)) {
    throw OverflowError("64-bit integer overflow in multiplication");
  }
  return r;
}

inline std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  if (__builtin_add_overflow(a, b, &r)) {
    throw OverflowError("64-bit integer overflow in addition");
  }
  return r;
}

/// C(n, r) with overflow detection.
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t r) {
  if (r > n) return 0;
  if (r > n - r) r = n - r;
  unsigned __int128 acc = 1;
  for (std::uint64_t i = 1; i <= r; ++i) {
    acc = acc * (n - r + i) / i;
    if (acc > std::numeric_limits<std::uint64_t>::max()) {
      throw OverflowError("binomial coefficient exceeds 64 bits");
    }
  }
  return static_cast<std::uint64_t>(acc);
}

inline std::uint64_t isqrt(std::uint64_t n) {
  auto r = static_cast<std::uint64_t>(std::sqrt(static_cast<double>(n)));
  while (r > 0 && r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

inline double factorial(unsigned n) {
  double r = 1.0;
  for (unsigned i = 2; i <= n; ++i) r *= i;
  return r;
}

constexpr double kEulerGamma = std::numbers::egamma;
constexpr double kPi = std::numbers::pi;

}  // namespace shortint
