#pragma once

// Counter-based random streams (Philox4x32-10, Salmon et al. SC'11).
// A stream is addressed by (seed, tag, partition); the block counter walks
// forward inside it, so any partition can be regenerated independently.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace shellquad {

using PhiloxBlock = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

constexpr void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(product);
  hi = static_cast<std::uint32_t>(product >> 32);
}

constexpr PhiloxBlock philox_round(const PhiloxBlock& ctr, const PhiloxKey& key) {
  std::uint32_t lo0 = 0, hi0 = 0, lo1 = 0, hi1 = 0;
  mulhilo(kPhiloxM0, ctr[0], lo0, hi0);
  mulhilo(kPhiloxM1, ctr[2], lo1, hi1);
  return {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

}  // namespace detail

constexpr PhiloxBlock philox4x32_10(PhiloxBlock ctr, PhiloxKey key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += detail::kPhiloxW0;
      key[1] += detail::kPhiloxW1;
    }
    ctr = detail::philox_round(ctr, key);
  }
  return ctr;
}

class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint32_t tag, std::uint32_t partition)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        tag_(tag),
        partition_(partition) {}

  // Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() {
    if (lane_ == 2) refill();
    const std::uint64_t bits =
        (static_cast<std::uint64_t>(buffer_[2 * lane_]) << 32) | buffer_[2 * lane_ + 1];
    ++lane_;
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double radius = std::sqrt(-2.0 * std::log(uniform()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  // Uniform direction on the unit sphere embedded in out.size() dimensions.
  void unit_vector(std::span<double> out) {
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (double& x : out) {
        x = normal();
        norm2 += x * x;
      }
    } while (norm2 == 0.0);
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : out) x *= inv;
  }

  std::uint64_t blocks_used() const { return block_; }

 private:
  void refill() {
    buffer_ = philox4x32_10({static_cast<std::uint32_t>(block_),
                             static_cast<std::uint32_t>(block_ >> 32), partition_, tag_},
                            key_);
    ++block_;
    lane_ = 0;
  }

  PhiloxKey key_;
  std::uint32_t tag_;
  std::uint32_t partition_;
  std::uint64_t block_ = 0;
  PhiloxBlock buffer_{};
  int lane_ = 2;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace shellquad
