#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace rmtldp {

// Philox4x32-10 block function (Salmon et al., Random123).
inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

/// Counter-based random stream keyed by (seed, stream id).
///
/// The full state is the triple (seed, stream, position), so a stream can be
/// checkpointed and resumed exactly, and any number of streams can be derived
/// from one master seed without coordination. Block `position / 2` of Philox
/// supplies two 64-bit outputs.
class Stream {
 public:
  using result_type = std::uint64_t;

  Stream() = default;
  Stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t position = 0)
      : seed_(seed), stream_(stream), position_(position) {}

  /// Stream id for the `index`-th unit of work inside a named domain.
  /// Domains keep unrelated consumers of one master seed apart.
  static Stream derive(std::uint64_t seed, std::uint32_t domain, std::uint64_t index) {
    return Stream(seed, (std::uint64_t{domain} << 40) ^ index);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64() {
    const std::uint64_t block = position_ >> 1;
    if (!cached_ || cached_block_ != block) {
      cache_ = philox4x32_10(
          {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
           static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
          {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
      cached_block_ = block;
      cached_ = true;
    }
    const bool second = (position_ & 1u) != 0;
    ++position_;
    return second ? (std::uint64_t{cache_[3]} << 32 | cache_[2])
                  : (std::uint64_t{cache_[1]} << 32 | cache_[0]);
  }

  /// Uniform on (0, 1); never returns 0 or 1, so logs are always finite.
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double exponential() { return -std::log(uniform()); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }
  std::uint64_t position() const { return position_; }

  friend bool operator==(const Stream& a, const Stream& b) {
    return a.seed_ == b.seed_ && a.stream_ == b.stream_ && a.position_ == b.position_;
  }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t position_ = 0;
  // Last Philox block; a pure cache, not part of the state.
  std::array<std::uint32_t, 4> cache_{};
  std::uint64_t cached_block_ = 0;
  bool cached_ = false;
};

// Domain tags for Stream::derive.
namespace domain {
inline constexpr std::uint32_t kNaive = 1;
inline constexpr std::uint32_t kPlanted = 2;
inline constexpr std::uint32_t kChain = 3;
inline constexpr std::uint32_t kIid = 4;
inline constexpr std::uint32_t kProbe = 5;
inline constexpr std::uint32_t kVaropt = 6;
inline constexpr std::uint32_t kCalibrate = 7;
inline constexpr std::uint32_t kSample = 8;
inline constexpr std::uint32_t kVerify = 9;
}  // namespace domain

}  // namespace rmtldp
