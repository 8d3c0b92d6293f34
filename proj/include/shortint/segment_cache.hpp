#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "shortint/error.hpp"
#include "shortint/sieve.hpp"

namespace shortint {

/// FNV-1a over a byte range; used for cache checksums and config hashes.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 14695981039346656037ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

/// Binary segment format:
///   "DKSV" | u16 version | u64 lo | u64 hi | u16 flags |
///   arrays present per flags, in this order, all little-endian:
///     offsets u32[len+1], primes u64[total], exponents u8[total]
///     big_omega u8[len]
///     small_omega u8[len]
///     mu_squared bits u8[ceil(len/8)]
///   | u64 FNV-1a of every preceding byte
class SegmentCodec {
 public:
  static constexpr std::uint16_t kVersion = 1;
  static constexpr std::array<char, 4> kMagic{'D', 'K', 'S', 'V'};

  static std::vector<unsigned char> encode(const SieveSegment& seg) {
    std::vector<unsigned char> out;
    out.insert(out.end(), kMagic.begin(), kMagic.end());
    put(out, kVersion);
    put(out, seg.lo_);
    put(out, seg.hi_);
    put(out, seg.arrays_);
    if (seg.arrays_ & kFactorArrays) {
      for (auto v : seg.offsets_) put(out, v);
      for (auto v : seg.primes_) put(out, v);
      out.insert(out.end(), seg.exponents_.begin(), seg.exponents_.end());
    }
    if (seg.arrays_ & kBigOmegaArray) out.insert(out.end(), seg.big_omega_.begin(), seg.big_omega_.end());
    if (seg.arrays_ & kSmallOmegaArray) out.insert(out.end(), seg.small_omega_.begin(), seg.small_omega_.end());
    if (seg.arrays_ & kMuSquaredArray) {
      out.insert(out.end(), seg.mu_squared_bits_.begin(), seg.mu_squared_bits_.end());
    }
    put(out, fnv1a(out.data(), out.size()));
    return out;
  }

  /// Throws FormatError on any structural problem.
  static SieveSegment decode(const std::vector<unsigned char>& in) {
    Reader r{in};
    if (in.size() < 4 + 2 + 8 + 8 + 2 + 8) throw FormatError("segment cache truncated");
    if (std::memcmp(in.data(), kMagic.data(), 4) != 0) throw FormatError("bad segment cache magic");
    r.pos = 4;
    if (r.get<std::uint16_t>() != kVersion) throw FormatError("unsupported segment cache version");
    const std::size_t body = in.size() - 8;
    std::uint64_t stored = 0;
    for (int i = 7; i >= 0; --i) stored = (stored << 8) | in[body + i];
    if (stored != fnv1a(in.data(), body)) throw FormatError("segment cache checksum mismatch");

    SieveSegment seg;
    seg.lo_ = r.get<std::uint64_t>();
    seg.hi_ = r.get<std::uint64_t>();
    seg.arrays_ = r.get<std::uint16_t>();
    if (seg.hi_ <= seg.lo_ || seg.lo_ < 1) throw FormatError("segment cache has invalid range");
    if (seg.arrays_ & ~std::uint16_t{kAllArrays}) throw FormatError("segment cache has unknown flags");
    const std::size_t len = static_cast<std::size_t>(seg.hi_ - seg.lo_);
    if (seg.arrays_ & kFactorArrays) {
      seg.offsets_.resize(len + 1);
      for (auto& v : seg.offsets_) v = r.get<std::uint32_t>(body);
      const std::size_t total = seg.offsets_.back();
      for (std::size_t j = 0; j < len; ++j) {
        if (seg.offsets_[j] > seg.offsets_[j + 1]) throw FormatError("segment cache offsets not monotone");
      }
      seg.primes_.resize(total);
      for (auto& v : seg.primes_) v = r.get<std::uint64_t>(body);
      seg.exponents_ = r.bytes(total, body);
    }
    if (seg.arrays_ & kBigOmegaArray) seg.big_omega_ = r.bytes(len, body);
    if (seg.arrays_ & kSmallOmegaArray) seg.small_omega_ = r.bytes(len, body);
    if (seg.arrays_ & kMuSquaredArray) seg.mu_squared_bits_ = r.bytes((len + 7) / 8, body);
    if (r.pos != body) throw FormatError("segment cache length mismatch");
    return seg;
  }

 private:
  template <class T>
  static void put(std::vector<unsigned char>& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out.push_back(static_cast<unsigned char>(static_cast<std::uint64_t>(v) >> (8 * i)));
    }
  }

  struct Reader {
    const std::vector<unsigned char>& in;
    std::size_t pos = 0;

    template <class T>
    T get(std::size_t limit = static_cast<std::size_t>(-1)) {
      if (limit == static_cast<std::size_t>(-1)) limit = in.size();
      if (pos + sizeof(T) > limit) throw FormatError("segment cache truncated");
      std::uint64_t v = 0;
      for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t{in[pos + i]} << (8 * i);
      pos += sizeof(T);
      return static_cast<T>(v);
    }
    std::vector<std::uint8_t> bytes(std::size_t n, std::size_t limit) {
      if (pos + n > limit) throw FormatError("segment cache truncated");
      std::vector<std::uint8_t> v(in.begin() + static_cast<std::ptrdiff_t>(pos),
                                  in.begin() + static_cast<std::ptrdiff_t>(pos + n));
      pos += n;
      return v;
    }
  };
};

/// Directory of cached segments. A file that fails to decode, or whose range
/// or flags differ from the request, is rebuilt and overwritten.
class SegmentCache {
 public:
  explicit SegmentCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  std::filesystem::path path_for(std::uint64_t lo, std::uint64_t hi) const {
    return dir_ / ("seg_" + std::to_string(lo) + "_" + std::to_string(hi) + ".dksv");
  }

  SieveSegment load_or_build(std::uint64_t lo, std::uint64_t hi, const PrimeTable& primes,
                             const SieveConfig& config = {}, std::uint16_t arrays = kAllArrays) {
    const auto path = path_for(lo, hi);
    if (auto seg = try_load(path); seg && seg->lo() == lo && seg->hi() == hi && seg->arrays() == arrays) {
      ++hits_;
      return std::move(*seg);
    }
    ++misses_;
    SieveSegment seg = build_segment(lo, hi, primes, config, arrays);
    const auto bytes = SegmentCodec::encode(seg);
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
      os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      if (!os) throw FormatError("cannot write segment cache file " + tmp);
    }
    std::filesystem::rename(tmp, path);
    return seg;
  }

  static std::optional<SieveSegment> try_load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) return std::nullopt;
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    try {
      return SegmentCodec::decode(bytes);
    } catch (const FormatError&) {
      return std::nullopt;
    }
  }

  std::uint64_t hits() const { return hits_; }
  std::uint64_t misses() const { return misses_; }

 private:
  std::filesystem::path dir_;
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
};

}  // namespace shortint
