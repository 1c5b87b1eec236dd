#pragma once

// Counter-based random streams (Philox4x32-10) and the shared Brownian paths
// that couple the particle systems with the stochastic PDE.
//
// A stream is a Philox key; draw n of a stream is a pure function of
// (key, channel, n), so particle i of replica s sees the same noise no matter
// how many particles run alongside it or which worker executes it.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>
#include <vector>

#include "chaoslab/errors.hpp"
#include "chaoslab/torus.hpp"

namespace chaoslab {

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

inline Philox4x32Counter philox4x32_10(Philox4x32Counter ctr, Philox4x32Key key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
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

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return splitmix64(splitmix64(seed) ^ (value + 0x632BE59BD9B4E019ull));
}

inline std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

// Channels separate independent uses of one stream.
enum class Channel : std::uint32_t { kIncrements = 0, kInitial = 1, kAuxiliary = 2 };

class Stream {
 public:
  explicit Stream(std::uint64_t key) : key_(key) {}

  static Stream for_particle(std::uint64_t replica_seed, std::uint64_t index) {
    return Stream(hash_combine(replica_seed, index));
  }
  static Stream labelled(std::uint64_t replica_seed, std::string_view label) {
    return Stream(hash_combine(replica_seed ^ 0xA5A5A5A5A5A5A5A5ull, hash_label(label)));
  }

  std::uint64_t key() const { return key_; }

  // Two 64-bit words of block n.
  std::array<std::uint64_t, 2> bits(Channel channel, std::uint64_t block) const {
    const Philox4x32Counter ctr{static_cast<std::uint32_t>(block),
                                static_cast<std::uint32_t>(block >> 32),
                                static_cast<std::uint32_t>(channel), 0u};
    const Philox4x32Key k{static_cast<std::uint32_t>(key_), static_cast<std::uint32_t>(key_ >> 32)};
    const auto out = philox4x32_10(ctr, k);
    return {(static_cast<std::uint64_t>(out[1]) << 32) | out[0],
            (static_cast<std::uint64_t>(out[3]) << 32) | out[2]};
  }

  // Uniforms in [0, 1).
  std::array<double, 2> uniform_pair(Channel channel, std::uint64_t block) const {
    const auto b = bits(channel, block);
    return {to_unit(b[0]), to_unit(b[1])};
  }

  // Box-Muller pair of independent standard normals from block n.
  std::array<double, 2> normal_pair(Channel channel, std::uint64_t block) const {
    const auto u = uniform_pair(channel, block);
    const double radius = std::sqrt(-2.0 * std::log(1.0 - u[0]));
    const double angle = kTwoPi * u[1];
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

  // Normal number n of the channel (normals 2b and 2b+1 share block b).
  double normal(Channel channel, std::uint64_t n) const { return normal_pair(channel, n / 2)[n % 2]; }

  // Fills out[0..) with normals n0, n0+1, ...
  void normals(Channel channel, std::uint64_t n0, std::span<double> out) const {
    for (std::size_t i = 0; i < out.size();) {
      const std::uint64_t n = n0 + i;
      const auto pair = normal_pair(channel, n / 2);
      out[i++] = pair[n % 2];
      if (n % 2 == 0 && i < out.size()) out[i++] = pair[1];
    }
  }

  static double to_unit(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t key_;
};

// Common-noise increments dB_j ~ N(0, dt I) on t_j = j dt. Generated once per
// replica at the finest step in use; coarser consumers sum pairs.
class BrownianPaths {
 public:
  BrownianPaths(int dim, double dt, std::vector<double> increments)
      : dim_(dim), dt_(dt), increments_(std::move(increments)) {
    if (dim < 1 || dim > kMaxDim) throw UnsupportedDimension("BrownianPaths: bad dimension");
    if (!(dt > 0.0)) throw InvalidParameter("BrownianPaths: dt must be positive");
    if (increments_.size() % static_cast<std::size_t>(dim) != 0)
      throw InvalidInput("BrownianPaths: increment count not a multiple of the dimension");
  }

  static BrownianPaths generate(std::uint64_t replica_seed, int dim, double dt, long steps) {
    const Stream stream = Stream::labelled(replica_seed, "common");
    std::vector<double> inc(static_cast<std::size_t>(steps) * dim);
    stream.normals(Channel::kIncrements, 0, inc);
    const double scale = std::sqrt(dt);
    for (double& x : inc) x *= scale;
    return BrownianPaths(dim, dt, std::move(inc));
  }

  int dim() const { return dim_; }
  double dt() const { return dt_; }
  long steps() const { return static_cast<long>(increments_.size() / dim_); }
  std::span<const double> increment(long j) const {
    return {increments_.data() + static_cast<std::size_t>(j) * dim_, static_cast<std::size_t>(dim_)};
  }
  std::span<const double> increments() const { return increments_; }

  // Path at twice the step: dB'_j = dB_{2j} + dB_{2j+1}.
  BrownianPaths coarsen() const {
    if (steps() % 2 != 0) throw InvalidInput("BrownianPaths::coarsen: odd number of steps");
    std::vector<double> out(increments_.size() / 2);
    for (long j = 0; j < steps() / 2; ++j)
      for (int a = 0; a < dim_; ++a)
        out[j * dim_ + a] = increments_[(2 * j) * dim_ + a] + increments_[(2 * j + 1) * dim_ + a];
    return BrownianPaths(dim_, 2.0 * dt_, std::move(out));
  }

  // B at t_j.
  std::vector<double> position(long j) const {
    std::vector<double> b(dim_, 0.0);
    for (long s = 0; s < j; ++s)
      for (int a = 0; a < dim_; ++a) b[a] += increments_[s * dim_ + a];
    return b;
  }

  // Bitwise fingerprint, logged per replica to certify coupling.
  std::uint64_t fingerprint() const {
    std::uint64_t h = hash_label("paths");
    for (double x : increments_) {
      std::uint64_t bitsv;
      static_assert(sizeof(bitsv) == sizeof(x));
      std::memcpy(&bitsv, &x, sizeof(x));
      h = hash_combine(h, bitsv);
    }
    return h;
  }

 private:
  int dim_;
  double dt_;
  std::vector<double> increments_;
};

}  // namespace chaoslab
