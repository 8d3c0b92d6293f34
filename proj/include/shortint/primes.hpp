#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "shortint/error.hpp"
#include "shortint/numeric.hpp"

namespace shortint {

/// Primes up to a limit, ascending. Built with a segmented sieve of
/// Eratosthenes over odd numbers.
class PrimeTable {
 public:
  PrimeTable() = default;

  explicit PrimeTable(std::uint64_t limit) : limit_(limit) {
    if (limit >= (std::uint64_t{1} << 32)) {
      throw CapacityError("prime table limit must be below 2^32");
    }
    if (limit < 2) return;
    primes_.push_back(2);
    const std::uint64_t root = isqrt(limit);
    std::vector<std::uint8_t> small(root + 1, 1);
    std::vector<std::uint32_t> base;
    for (std::uint64_t i = 3; i <= root; i += 2) {
      if (!small[i]) continue;
      base.push_back(static_cast<std::uint32_t>(i));
      for (std::uint64_t j = i * i; j <= root; j += 2 * i) small[j] = 0;
    }
    constexpr std::uint64_t kSegment = std::uint64_t{1} << 18;  // odd slots
    std::vector<std::uint8_t> seg(kSegment);
    // slot s in a segment starting at odd number lo represents lo + 2s
    for (std::uint64_t lo = 3; lo <= limit; lo += 2 * kSegment) {
      const std::uint64_t hi = std::min(limit, lo + 2 * kSegment - 2);
      const std::uint64_t slots = (hi - lo) / 2 + 1;
      std::fill(seg.begin(), seg.begin() + slots, 1);
      for (std::uint32_t p : base) {
        const std::uint64_t pp = std::uint64_t{p} * p;
        if (pp > hi) break;
        std::uint64_t start = std::max(pp, (lo + p - 1) / p * p);
        if (start % 2 == 0) start += p;
        for (std::uint64_t j = (start - lo) / 2; j < slots; j += p) seg[j] = 0;
      }
      for (std::uint64_t s = 0; s < slots; ++s) {
        if (seg[s]) primes_.push_back(static_cast<std::uint32_t>(lo + 2 * s));
      }
    }
  }

  std::uint64_t limit() const { return limit_; }
  const std::vector<std::uint32_t>& primes() const { return primes_; }
  std::size_t size() const { return primes_.size(); }
  std::uint32_t operator[](std::size_t i) const { return primes_[i]; }
  auto begin() const { return primes_.begin(); }
  auto end() const { return primes_.end(); }

  /// Number of primes <= x (x may not exceed the table limit).
  std::size_t count_upto(std::uint64_t x) const {
    return static_cast<std::size_t>(
        std::upper_bound(primes_.begin(), primes_.end(), x) - primes_.begin());
  }

  bool is_prime(std::uint64_t n) const {
    if (n > limit_) throw RangeError("is_prime query beyond prime table limit");
    return std::binary_search(primes_.begin(), primes_.end(), n);
  }

 private:
  std::uint64_t limit_ = 0;
  std::vector<std::uint32_t> primes_;
};

using PrimeTablePtr = std::shared_ptr<const PrimeTable>;

inline PrimeTablePtr make_prime_table(std::uint64_t limit) {
  return std::make_shared<const PrimeTable>(limit);
}

}  // namespace shortint
