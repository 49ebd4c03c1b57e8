#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace adaflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Samples are stored one per row (N x D).
using Batch = Eigen::MatrixXd;

using DomainId = std::string;

inline constexpr int kFormatVersion = 1;
inline constexpr double kDefaultEpsilon = 1e-5;
inline constexpr double kDefaultAlpha = 0.2;
inline const double kLog2Pi = std::log(2.0 * std::numbers::pi);

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a value outside the layer's domain makes the map undefined
// (zero scale, non-finite activation).
class NumericError : public Error {
 public:
  using Error::Error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(what);
}

inline bool all_finite(const Eigen::Ref<const Matrix>& m) {
  return m.allFinite();
}

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed for a named stage so stages can be
/// re-run in isolation from the same top-level seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : stage) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(seed ^ mix64(h));
}

}  // namespace adaflow
