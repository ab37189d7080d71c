#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pcrowd {

// Malformed input, contract violation, or bad configuration. CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Backend, network or filesystem failure. CLI exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 64-bit FNV-1a. Stable across platforms and builds.
std::uint64_t fnv1a64(std::string_view bytes);

// splitmix64 finalizer, used to combine seeds.
std::uint64_t mix64(std::uint64_t x);

inline std::uint64_t combine_seeds(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b + 0x9e3779b97f4a7c15ULL));
}

inline std::uint64_t combine_seeds(std::uint64_t a, std::string_view b) {
  return combine_seeds(a, fnv1a64(b));
}

using Rng = std::mt19937_64;

// Standard normal deviate via Box-Muller over the raw engine output, so the
// value depends only on the engine state and not on the library's
// distribution implementation.
double standard_normal(Rng& rng);

// Uniform double in [0, 1).
double uniform01(Rng& rng);

// Uniform integer in [0, n), n > 0.
std::uint64_t uniform_below(Rng& rng, std::uint64_t n);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace pcrowd
