#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "jsde/errors.hpp"

namespace jsde {

/// Philox4x32-10 block function (Salmon et al., SC'11).
namespace philox {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline constexpr std::uint32_t kMul0 = 0xD2511F53u;
inline constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

constexpr Counter round(const Counter& c, const Key& k) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
  return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
          static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
}

constexpr Counter block(Counter c, Key k) {
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    c = round(c, k);
  }
  return c;
}

}  // namespace philox

/// Purposes partition the counter space so that each kind of draw has its
/// own addresses and never collides with another.
enum class Purpose : std::uint32_t {
  Brownian = 1,
  SmallJumps = 2,
  Jumps0 = 3,
  Jumps1 = 4,
  BridgeBrownian = 5,
  BridgeSmall = 6,
  SplitBrownian = 7,
  SplitSmall = 8,
  InitialValue = 9,
  Generic = 15,
};

/// Counter-based stream addressed by (master seed, stream index).
/// Each draw is a pure function of (seed, stream, purpose, address), so
/// sampling order never matters and there is nothing to exhaust.
class RandomStream {
 public:
  static constexpr std::uint64_t kMaxStream = (std::uint64_t{1} << 48) - 1;

  RandomStream(std::uint64_t master_seed, std::uint64_t stream_index)
      : seed_(master_seed), stream_(stream_index) {
    if (stream_index > kMaxStream) throw DomainError("stream index must be below 2^48");
  }

  std::uint64_t master_seed() const noexcept { return seed_; }
  std::uint64_t stream_index() const noexcept { return stream_; }

  /// Raw 128-bit block at (purpose, address).
  philox::Counter bits(Purpose purpose, std::uint64_t address) const {
    const philox::Counter ctr{static_cast<std::uint32_t>(address), static_cast<std::uint32_t>(address >> 32),
                              static_cast<std::uint32_t>(stream_),
                              static_cast<std::uint32_t>(stream_ >> 32) |
                                  (static_cast<std::uint32_t>(purpose) << 16)};
    const philox::Key key{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
    return philox::block(ctr, key);
  }

  /// Two uniforms in (0, 1) with 53-bit resolution.
  std::array<double, 2> uniform2(Purpose purpose, std::uint64_t address) const {
    const auto b = bits(purpose, address);
    return {to_open_unit(b[0], b[1]), to_open_unit(b[2], b[3])};
  }

  double uniform(Purpose purpose, std::uint64_t address) const { return uniform2(purpose, address)[0]; }

  /// Standard normal by Box-Muller (first member of the pair).
  double normal(Purpose purpose, std::uint64_t address) const {
    const auto u = uniform2(purpose, address);
    return std::sqrt(-2.0 * std::log(u[0])) * std::cos(2.0 * std::numbers::pi * u[1]);
  }

  static double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t x = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 12;
    return (static_cast<double>(x) + 0.5) * 0x1.0p-52;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

/// Sequential view over one (stream, purpose) lane.
class Lane {
 public:
  Lane(const RandomStream& s, Purpose p, std::uint64_t start = 0) : s_(&s), p_(p), next_(start) {}

  double uniform() { return s_->uniform(p_, next_++); }
  double normal() { return s_->normal(p_, next_++); }
  double exponential() { return -std::log(uniform()); }
  std::uint64_t position() const noexcept { return next_; }

 private:
  const RandomStream* s_;
  Purpose p_;
  std::uint64_t next_;
};

}  // namespace jsde
