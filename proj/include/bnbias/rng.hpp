#pragma once

#include <cstdint>
#include <optional>
#include <random>

namespace bnbias {

/// Deterministic random stream.
///
/// Backed by std::mt19937_64, whose output sequence is fixed by the C++
/// standard, so equal seeds give equal streams on every platform. Floating
/// point draws never go through the library distributions (their algorithms
/// are implementation defined):
///
///   uniform()        = (next_u64() >> 11) * 2^-53                 in [0, 1)
///   normal() pairs   : u1 = ((next_u64() >> 11) + 1) * 2^-53       in (0, 1]
///                      u2 = (next_u64() >> 11) * 2^-53
///                      r  = sqrt(-2 ln u1)
///                      z0 = r cos(2 pi u2), z1 = r sin(2 pi u2)
///                      z0 is returned first, z1 is cached for the next call.
///   rademacher()     = +1 if the top bit of next_u64() is set, else -1
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t draws() const noexcept { return draws_; }

  std::uint64_t next_u64() {
    ++draws_;
    return engine_();
  }
  double uniform();
  double normal();
  int rademacher();
  /// Uniform integer in [0, bound), rejection sampled so it is exactly uniform.
  std::uint64_t uniform_index(std::uint64_t bound);

  /// Child stream for worker `index`: seed ^ (index * 0x9E3779B97F4A7C15).
  static std::uint64_t split_seed(std::uint64_t master, std::uint64_t index) {
    return master ^ (index * 0x9E3779B97F4A7C15ULL);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t draws_ = 0;
  std::mt19937_64 engine_;
  std::optional<double> cached_normal_;
};

}  // namespace bnbias
