#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "shortint/error.hpp"
#include "shortint/numeric.hpp"
#include "shortint/parallel.hpp"
#include "shortint/primes.hpp"

namespace shortint {

struct PrimePower {
  std::uint64_t prime = 0;
  std::uint32_t exponent = 0;

  friend bool operator==(const PrimePower&, const PrimePower&) = default;
};

/// Exact factorization of one positive integer: primes strictly increasing,
/// exponents >= 1, and the empty list for n = 1.
class FactorVector {
 public:
  FactorVector() = default;
  explicit FactorVector(std::vector<PrimePower> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].exponent == 0 || entries_[i].prime < 2 ||
          (i > 0 && entries_[i].prime <= entries_[i - 1].prime)) {
        throw InvariantError("FactorVector entries must have increasing primes and positive exponents");
      }
    }
  }

  const std::vector<PrimePower>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// The represented integer, overflow-checked.
  std::uint64_t value() const {
    std::uint64_t n = 1;
    for (const auto& e : entries_) {
      for (std::uint32_t i = 0; i < e.exponent; ++i) n = checked_mul(n, e.prime);
    }
    return n;
  }

  friend bool operator==(const FactorVector&, const FactorVector&) = default;

 private:
  std::vector<PrimePower> entries_;
};

/// Total number of prime factors with multiplicity.
inline unsigned big_omega(const FactorVector& fv) {
  unsigned s = 0;
  for (const auto& e : fv) s += e.exponent;
  return s;
}

/// Number of distinct prime factors.
inline unsigned small_omega(const FactorVector& fv) {
  return static_cast<unsigned>(fv.size());
}

inline bool is_squarefree(const FactorVector& fv) {
  return std::all_of(fv.begin(), fv.end(), [](const PrimePower& e) { return e.exponent == 1; });
}

/// d_k(p^a) = C(a + k - 1, k - 1).
inline std::uint64_t dk_prime_power(unsigned a, unsigned k) {
  if (k == 0) throw PreconditionError("d_k requires k >= 1");
  return binomial(std::uint64_t{a} + k - 1, k - 1);
}

/// Number of ordered k-factorizations. Throws OverflowError rather than wrap.
inline std::uint64_t dk_value(const FactorVector& fv, unsigned k) {
  if (k == 0) throw PreconditionError("d_k requires k >= 1");
  std::uint64_t d = 1;
  for (const auto& e : fv) d = checked_mul(d, dk_prime_power(e.exponent, k));
  return d;
}

/// Reference factorization by trial division.
inline FactorVector trial_division_factor(std::uint64_t n) {
  if (n == 0) throw PreconditionError("cannot factor 0");
  std::vector<PrimePower> out;
  auto take = [&](std::uint64_t p) {
    std::uint32_t a = 0;
    while (n % p == 0) {
      n /= p;
      ++a;
    }
    if (a) out.push_back({p, a});
  };
  take(2);
  take(3);
  for (std::uint64_t d = 5; d * d <= n; d += 6) {
    take(d);
    take(d + 2);
  }
  if (n > 1) out.push_back({n, 1});
  return FactorVector(std::move(out));
}

/// Walks every prime power exactly dividing n for n in [lo, hi), calling
/// visit(n - lo, p, a). For each n the calls come in increasing p. The prime
/// table must reach isqrt(hi - 1).
template <class Visitor>
void sieve_prime_powers(std::uint64_t lo, std::uint64_t hi, const PrimeTable& primes,
                        Visitor&& visit) {
  if (lo < 1 || hi <= lo) throw PreconditionError("sieve range must satisfy 1 <= lo < hi");
  const std::uint64_t root = isqrt(hi - 1);
  if (primes.limit() < root) {
    throw PreconditionError("prime table does not reach sqrt(hi - 1)");
  }
  const std::size_t len = static_cast<std::size_t>(hi - lo);
  auto run = [&](auto tag) {
    using R = decltype(tag);
    std::vector<R> residual(len);
    for (std::size_t j = 0; j < len; ++j) residual[j] = static_cast<R>(lo + j);
    for (std::uint32_t p32 : primes) {
      const R p = p32;
      if (std::uint64_t{p32} > root) break;
      std::uint64_t start = (lo + p32 - 1) / p32 * p32;
      for (std::uint64_t j = start - lo; j < len; j += p32) {
        R r = residual[j] / p;
        std::uint32_t a = 1;
        while (r % p == 0) {
          r /= p;
          ++a;
        }
        residual[j] = r;
        visit(static_cast<std::size_t>(j), std::uint64_t{p32}, a);
      }
    }
    for (std::size_t j = 0; j < len; ++j) {
      if (residual[j] > 1) visit(j, static_cast<std::uint64_t>(residual[j]), std::uint32_t{1});
    }
  };
  if (hi <= (std::uint64_t{1} << 32)) {
    run(std::uint32_t{});
  } else {
    run(std::uint64_t{});
  }
}

struct SieveConfig {
  std::uint64_t segment_size = std::uint64_t{1} << 22;
};

/// Which arrays a segment carries; also the flags word of the cache format.
enum SegmentArrays : std::uint16_t {
  kFactorArrays = 1u << 0,
  kBigOmegaArray = 1u << 1,
  kSmallOmegaArray = 1u << 2,
  kMuSquaredArray = 1u << 3,
  kAllArrays = kFactorArrays | kBigOmegaArray | kSmallOmegaArray | kMuSquaredArray,
};

/// Exact factorization data for every n in [lo, hi), stored CSR-style:
/// entries offsets[j]..offsets[j+1] of primes/exponents factor lo + j.
/// Immutable after construction.
class SieveSegment {
 public:
  SieveSegment() = default;

  std::uint64_t lo() const { return lo_; }
  std::uint64_t hi() const { return hi_; }
  std::size_t length() const { return static_cast<std::size_t>(hi_ - lo_); }
  std::uint16_t arrays() const { return arrays_; }
  bool contains(std::uint64_t n) const { return n >= lo_ && n < hi_; }

  FactorVector factor(std::uint64_t n) const {
    const std::size_t j = index_of(n);
    require(kFactorArrays);
    std::vector<PrimePower> out;
    out.reserve(offsets_[j + 1] - offsets_[j]);
    for (std::uint32_t e = offsets_[j]; e < offsets_[j + 1]; ++e) {
      out.push_back({primes_[e], exponents_[e]});
    }
    return FactorVector(std::move(out));
  }

  /// Visits (p, a) pairs of n without materializing a FactorVector.
  template <class Fn>
  void for_each_prime_power(std::uint64_t n, Fn&& fn) const {
    const std::size_t j = index_of(n);
    require(kFactorArrays);
    for (std::uint32_t e = offsets_[j]; e < offsets_[j + 1]; ++e) fn(primes_[e], exponents_[e]);
  }

  unsigned big_omega(std::uint64_t n) const {
    const std::size_t j = index_of(n);
    require(kBigOmegaArray);
    return big_omega_[j];
  }
  unsigned small_omega(std::uint64_t n) const {
    const std::size_t j = index_of(n);
    require(kSmallOmegaArray);
    return small_omega_[j];
  }
  bool mu_squared(std::uint64_t n) const {
    const std::size_t j = index_of(n);
    require(kMuSquaredArray);
    return (mu_squared_bits_[j / 8] >> (j % 8)) & 1u;
  }

  std::span<const std::uint32_t> offsets() const { return offsets_; }
  std::span<const std::uint64_t> factor_primes() const { return primes_; }
  std::span<const std::uint8_t> factor_exponents() const { return exponents_; }
  std::span<const std::uint8_t> big_omega_array() const { return big_omega_; }
  std::span<const std::uint8_t> small_omega_array() const { return small_omega_; }
  std::span<const std::uint8_t> mu_squared_bits() const { return mu_squared_bits_; }

  friend SieveSegment build_segment(std::uint64_t lo, std::uint64_t hi, const PrimeTable& primes,
                                    const SieveConfig& config, std::uint16_t arrays);
  friend class SegmentCodec;

 private:
  std::size_t index_of(std::uint64_t n) const {
    if (!contains(n)) throw RangeError("integer outside sieve segment");
    return static_cast<std::size_t>(n - lo_);
  }
  void require(std::uint16_t a) const {
    if ((arrays_ & a) == 0) throw PreconditionError("segment was built without the requested array");
  }

  std::uint64_t lo_ = 0;
  std::uint64_t hi_ = 0;
  std::uint16_t arrays_ = 0;
  std::vector<std::uint32_t> offsets_;
  std::vector<std::uint64_t> primes_;
  std::vector<std::uint8_t> exponents_;
  std::vector<std::uint8_t> big_omega_;
  std::vector<std::uint8_t> small_omega_;
  std::vector<std::uint8_t> mu_squared_bits_;
};

/// Builds exact factorization data for [lo, hi). lo = 1 is accepted and
/// factors 1 as the empty list.
inline SieveSegment build_segment(std::uint64_t lo, std::uint64_t hi, const PrimeTable& primes,
                                  const SieveConfig& config = {},
                                  std::uint16_t arrays = kAllArrays) {
  if (lo < 1 || hi <= lo) throw PreconditionError("segment range must satisfy 1 <= lo < hi");
  if (hi - lo > config.segment_size) {
    throw CapacityError("segment length exceeds configured segment size");
  }
  if (primes.limit() < isqrt(hi - 1)) {
    throw PreconditionError("prime table incomplete up to sqrt(hi - 1)");
  }
  SieveSegment seg;
  seg.lo_ = lo;
  seg.hi_ = hi;
  seg.arrays_ = arrays;
  const std::size_t len = seg.length();

  std::vector<std::uint8_t> omega(len, 0);
  std::vector<std::uint8_t> bigomega(len, 0);
  std::vector<std::uint8_t> square(len, 0);
  sieve_prime_powers(lo, hi, primes, [&](std::size_t j, std::uint64_t, std::uint32_t a) {
    omega[j] += 1;
    bigomega[j] = static_cast<std::uint8_t>(bigomega[j] + a);
    if (a > 1) square[j] = 1;
  });

  if (arrays & kFactorArrays) {
    seg.offsets_.resize(len + 1);
    std::uint64_t total = 0;
    for (std::size_t j = 0; j < len; ++j) {
      seg.offsets_[j] = static_cast<std::uint32_t>(total);
      total += omega[j];
    }
    if (total > std::numeric_limits<std::uint32_t>::max()) {
      throw CapacityError("segment factor storage exceeds 32-bit offsets");
    }
    seg.offsets_[len] = static_cast<std::uint32_t>(total);
    seg.primes_.resize(total);
    seg.exponents_.resize(total);
    std::vector<std::uint32_t> cursor(seg.offsets_.begin(), seg.offsets_.end() - 1);
    sieve_prime_powers(lo, hi, primes, [&](std::size_t j, std::uint64_t p, std::uint32_t a) {
      const std::uint32_t at = cursor[j]++;
      seg.primes_[at] = p;
      seg.exponents_[at] = static_cast<std::uint8_t>(a);
    });
  }
  if (arrays & kBigOmegaArray) seg.big_omega_ = bigomega;
  if (arrays & kSmallOmegaArray) seg.small_omega_ = omega;
  if (arrays & kMuSquaredArray) {
    seg.mu_squared_bits_.assign((len + 7) / 8, 0);
    for (std::size_t j = 0; j < len; ++j) {
      if (!square[j]) seg.mu_squared_bits_[j / 8] |= static_cast<std::uint8_t>(1u << (j % 8));
    }
  }
  return seg;
}

inline FactorVector factor(const SieveSegment& seg, std::uint64_t n) { return seg.factor(n); }

/// Sum of d(n) for n <= x by the hyperbola method:
/// 2 * sum_{m <= sqrt x} floor(x/m) - floor(sqrt x)^2.
inline std::uint64_t divisor_sum_hyperbola(std::uint64_t x) {
  if (x < 1) throw PreconditionError("divisor_sum_hyperbola requires x >= 1");
  const std::uint64_t r = isqrt(x);
  std::uint64_t s = 0;
  for (std::uint64_t m = 1; m <= r; ++m) s = checked_add(s, x / m);
  return checked_mul(s, 2) - r * r;
}

/// sum_{d <= x} mu^2(d) floor(x/d), which equals sum_{n <= x} 2^{omega(n)}.
/// Squarefree d are found by striking multiples of p^2, never by factoring.
inline std::uint64_t squarefree_harmonic_oracle(std::uint64_t x) {
  if (x < 1) throw PreconditionError("squarefree_harmonic_oracle requires x >= 1");
  const PrimeTable small(isqrt(x));
  constexpr std::uint64_t kBlock = std::uint64_t{1} << 20;
  std::vector<std::uint8_t> squarefree(kBlock);
  std::uint64_t total = 0;
  for (std::uint64_t lo = 1; lo <= x; lo += kBlock) {
    const std::uint64_t hi = std::min(x + 1, lo + kBlock);
    std::fill(squarefree.begin(), squarefree.begin() + (hi - lo), 1);
    for (std::uint32_t p : small) {
      const std::uint64_t q = std::uint64_t{p} * p;
      if (q >= hi) break;
      for (std::uint64_t m = (lo + q - 1) / q * q; m < hi; m += q) squarefree[m - lo] = 0;
    }
    for (std::uint64_t d = lo; d < hi; ++d) {
      if (squarefree[d - lo]) total = checked_add(total, x / d);
    }
  }
  return total;
}

/// Per-chunk partial reduction over [lo, hi) using the fast prime-power walk.
/// fn(chunk_lo, chunk_hi) -> Partial; partials are returned in chunk order so
/// the caller's merge is independent of the thread count.
template <class Partial, class Fn>
std::vector<Partial> sieve_map(std::uint64_t lo, std::uint64_t hi, std::uint64_t chunk,
                               Threads threads, Fn&& fn) {
  return map_chunks<Partial>(ChunkPlan{lo, hi, chunk}, threads, std::forward<Fn>(fn));
}

/// sum_{n <= x} d(n) computed from sieve factorizations.
inline std::uint64_t sieve_divisor_sum(std::uint64_t x, Threads threads = {},
                                       std::uint64_t chunk = std::uint64_t{1} << 20) {
  const PrimeTable primes(isqrt(x) + 1);
  auto parts = sieve_map<std::uint64_t>(1, x + 1, chunk, threads, [&](std::uint64_t lo, std::uint64_t hi) {
    std::vector<std::uint64_t> d(hi - lo, 1);
    sieve_prime_powers(lo, hi, primes, [&](std::size_t j, std::uint64_t, std::uint32_t a) {
      d[j] *= a + 1;
    });
    std::uint64_t s = 0;
    for (auto v : d) s = checked_add(s, v);
    return s;
  });
  std::uint64_t total = 0;
  for (auto p : parts) total = checked_add(total, p);
  return total;
}

/// sum_{n <= x} k^{omega(n)} computed from sieve factorizations.
inline std::uint64_t sieve_kpow_omega_sum(std::uint64_t x, unsigned k, Threads threads = {},
                                          std::uint64_t chunk = std::uint64_t{1} << 20) {
  const PrimeTable primes(isqrt(x) + 1);
  auto parts = sieve_map<std::uint64_t>(1, x + 1, chunk, threads, [&](std::uint64_t lo, std::uint64_t hi) {
    std::vector<std::uint64_t> v(hi - lo, 1);
    sieve_prime_powers(lo, hi, primes, [&](std::size_t j, std::uint64_t, std::uint32_t) {
      v[j] = checked_mul(v[j], k);
    });
    std::uint64_t s = 0;
    for (auto e : v) s = checked_add(s, e);
    return s;
  });
  std::uint64_t total = 0;
  for (auto p : parts) total = checked_add(total, p);
  return total;
}

}  // namespace shortint
