#include "bnbias/rng.hpp"

#include <cmath>
#include <numbers>

#include "bnbias/errors.hpp"

namespace bnbias {

namespace {
constexpr double kTwoPowMinus53 = 1.0 / 9007199254740992.0;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * kTwoPowMinus53; }

double Rng::normal() {
  if (cached_normal_) {
    const double z = *cached_normal_;
    cached_normal_.reset();
    return z;
  }
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * kTwoPowMinus53;
  const double u2 = static_cast<double>(next_u64() >> 11) * kTwoPowMinus53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_normal_ = r * std::sin(angle);
  return r * std::cos(angle);
}

int Rng::rademacher() { return (next_u64() >> 63) != 0 ? 1 : -1; }

std::uint64_t Rng::uniform_index(std::uint64_t bound) {
  if (bound == 0) throw Error(ErrorCode::kInvalidArgument, "uniform_index bound must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % bound;
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kNotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kDegenerateDirection: return "DegenerateDirection";
    case ErrorCode::kInfeasible: return "Infeasible";
    case ErrorCode::kNotSeparable: return "NotSeparable";
    case ErrorCode::kNotSorted: return "NotSorted";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kDiverged: return "Diverged";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace bnbias
