#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "shortint/primes.hpp"
#include "shortint/segment_cache.hpp"
#include "shortint/sieve.hpp"

using namespace shortint;

namespace {

FactorVector fv(std::initializer_list<PrimePower> e) { return FactorVector(std::vector<PrimePower>(e)); }

std::uint64_t pow_u64(std::uint64_t b, unsigned e) {
  std::uint64_t r = 1;
  while (e--) r *= b;
  return r;
}

}  // namespace

TEST(PrimeTable, SmallValues) {
  PrimeTable t(30);
  EXPECT_EQ(t.primes(), (std::vector<std::uint32_t>{2, 3, 5, 7, 11, 13, 17, 19, 23, 29}));
  EXPECT_EQ(t.count_upto(10), 4u);
  EXPECT_TRUE(t.is_prime(29));
  EXPECT_FALSE(t.is_prime(1));
  EXPECT_THROW(t.is_prime(31), RangeError);
}

TEST(PrimeTable, CountsMatchKnownPi) {
  PrimeTable t(10'000'000);
  EXPECT_EQ(t.count_upto(1'000'000), 78498u);
  EXPECT_EQ(t.size(), 664579u);
}

TEST(BuildSegment, HandFactorizations) {
  PrimeTable primes(10);
  auto seg = build_segment(10, 20, primes);
  EXPECT_EQ(factor(seg, 12), fv({{2, 2}, {3, 1}}));
  EXPECT_EQ(factor(seg, 19), fv({{19, 1}}));
  auto two = build_segment(2, 3, primes);
  EXPECT_EQ(factor(two, 2), fv({{2, 1}}));
}

TEST(BuildSegment, OneIsEmptyFactorization) {
  PrimeTable primes(10);
  auto seg = build_segment(1, 13, primes);
  EXPECT_TRUE(factor(seg, 1).empty());
  EXPECT_EQ(factor(seg, 1).value(), 1u);
  EXPECT_EQ(seg.big_omega(1), 0u);
  EXPECT_TRUE(seg.mu_squared(1));
}

TEST(BuildSegment, SemiprimeNearTenThousand) {
  PrimeTable primes(100);
  auto seg = build_segment(9990, 10000, primes);
  EXPECT_EQ(factor(seg, 9991), fv({{97, 1}, {103, 1}}));
}

TEST(BuildSegment, OutsideRangeThrows) {
  PrimeTable primes(10);
  auto seg = build_segment(10, 20, primes);
  EXPECT_THROW(factor(seg, 20), RangeError);
  EXPECT_THROW(factor(seg, 9), RangeError);
}

TEST(BuildSegment, Errors) {
  PrimeTable primes(10);
  EXPECT_THROW(build_segment(10, 200, primes), PreconditionError);
  EXPECT_THROW(build_segment(20, 10, primes), PreconditionError);
  EXPECT_THROW(build_segment(10, 100, primes, SieveConfig{16}), CapacityError);
}

TEST(BuildSegment, MillionRangeMatchesTrialDivision) {
  PrimeTable primes(2000);
  const std::uint64_t lo = 1'000'000, hi = lo + 10'000;
  auto seg = build_segment(lo, hi, primes);
  for (std::uint64_t n = lo; n < hi; ++n) {
    ASSERT_EQ(factor(seg, n), trial_division_factor(n)) << n;
    ASSERT_EQ(factor(seg, n).value(), n);
  }
}

TEST(BuildSegment, Above32BitsUsesWideResidual) {
  const std::uint64_t lo = (std::uint64_t{1} << 32) - 500, hi = lo + 1000;
  PrimeTable primes(isqrt(hi) + 1);
  auto seg = build_segment(lo, hi, primes);
  for (std::uint64_t n = lo; n < hi; n += 7) ASSERT_EQ(factor(seg, n), trial_division_factor(n)) << n;
}

TEST(Omega, Examples) {
  EXPECT_EQ(big_omega(fv({{2, 2}, {3, 1}})), 3u);
  EXPECT_EQ(small_omega(fv({{2, 2}, {3, 1}})), 2u);
  EXPECT_EQ(big_omega(FactorVector{}), 0u);
  EXPECT_EQ(small_omega(FactorVector{}), 0u);
  EXPECT_EQ(big_omega(fv({{2, 10}})), 10u);
  EXPECT_EQ(small_omega(fv({{2, 10}})), 1u);
}

TEST(FactorVectorInvariant, RejectsBadEntries) {
  EXPECT_THROW(fv({{3, 1}, {2, 1}}), InvariantError);
  EXPECT_THROW(fv({{2, 0}}), InvariantError);
}

TEST(Dk, Examples) {
  EXPECT_EQ(dk_value(trial_division_factor(6), 2), 4u);
  EXPECT_EQ(dk_value(trial_division_factor(4), 3), 6u);
  for (unsigned k = 1; k <= 8; ++k) EXPECT_EQ(dk_value(FactorVector{}, k), 1u);
  EXPECT_THROW(dk_value(FactorVector{}, 0), PreconditionError);
}

TEST(Dk, OverflowIsReported) {
  // d_k(2^a) = C(a+k-1, k-1) grows past 64 bits for large a and k.
  EXPECT_THROW(dk_value(fv({{2, 60}}), 60), OverflowError);
}

TEST(Dk, ConvolutionIdentity) {
  PrimeTable primes(100);
  auto seg = build_segment(1, 10'001, primes);
  for (unsigned k = 2; k <= 5; ++k) {
    for (std::uint64_t n = 1; n <= 10'000; ++n) {
      std::uint64_t s = 0;
      for (std::uint64_t d = 1; d * d <= n; ++d) {
        if (n % d) continue;
        s += dk_value(factor(seg, d), k - 1);
        if (d * d != n) s += dk_value(factor(seg, n / d), k - 1);
      }
      ASSERT_EQ(dk_value(factor(seg, n), k), s) << "k=" << k << " n=" << n;
    }
  }
}

TEST(Dk, PointwiseBoundByBigOmega) {
  PrimeTable primes(2000);
  auto seg = build_segment(1'000'000, 1'050'000, primes);
  for (std::uint64_t n = seg.lo(); n < seg.hi(); ++n) {
    auto f = factor(seg, n);
    for (unsigned k = 2; k <= 5; ++k) ASSERT_LE(dk_value(f, k), pow_u64(k, big_omega(f)));
  }
}

TEST(Oracles, Hyperbola) {
  EXPECT_EQ(divisor_sum_hyperbola(1), 1u);
  EXPECT_EQ(divisor_sum_hyperbola(10), 27u);
  EXPECT_EQ(divisor_sum_hyperbola(100'000), sieve_divisor_sum(100'000));
}

TEST(Oracles, SquarefreeHarmonic) {
  EXPECT_EQ(squarefree_harmonic_oracle(1), 1u);
  EXPECT_EQ(squarefree_harmonic_oracle(4), 7u);
  EXPECT_EQ(squarefree_harmonic_oracle(1000), sieve_kpow_omega_sum(1000, 2));
}

TEST(Oracles, ThreadCountDoesNotChangeSums) {
  EXPECT_EQ(sieve_divisor_sum(300'000, Threads{1}, 1 << 14), sieve_divisor_sum(300'000, Threads{8}, 1 << 14));
}

TEST(SegmentCodec, RoundTrip) {
  PrimeTable primes(200);
  auto seg = build_segment(30'000, 31'000, primes);
  auto bytes = SegmentCodec::encode(seg);
  ASSERT_GE(bytes.size(), 4u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "DKSV");
  auto back = SegmentCodec::decode(bytes);
  EXPECT_EQ(SegmentCodec::encode(back), bytes);
  for (std::uint64_t n = 30'000; n < 31'000; ++n) ASSERT_EQ(factor(back, n), factor(seg, n));
}

TEST(SegmentCodec, CorruptionDetected) {
  PrimeTable primes(200);
  auto bytes = SegmentCodec::encode(build_segment(30'000, 30'100, primes));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(SegmentCodec::decode(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_THROW(SegmentCodec::decode(bad_version), FormatError);
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 1;
  EXPECT_THROW(SegmentCodec::decode(flipped), FormatError);
  auto short_file = bytes;
  short_file.resize(bytes.size() - 20);
  EXPECT_THROW(SegmentCodec::decode(short_file), FormatError);
}

TEST(SegmentCache, HitsAreByteIdenticalAndCorruptFilesRebuilt) {
  const auto dir = std::filesystem::temp_directory_path() / "shortint_cache_test";
  std::filesystem::remove_all(dir);
  PrimeTable primes(200);
  SegmentCache cache(dir);
  auto first = cache.load_or_build(20'000, 21'000, primes);
  EXPECT_EQ(cache.misses(), 1u);
  auto second = cache.load_or_build(20'000, 21'000, primes);
  EXPECT_EQ(cache.hits(), 1u);
  EXPECT_EQ(SegmentCodec::encode(first), SegmentCodec::encode(second));

  {
    std::fstream f(cache.path_for(20'000, 21'000), std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("JUNK", 4);
  }
  auto third = cache.load_or_build(20'000, 21'000, primes);
  EXPECT_EQ(cache.misses(), 2u);
  EXPECT_EQ(SegmentCodec::encode(third), SegmentCodec::encode(first));
  std::filesystem::remove_all(dir);
}
