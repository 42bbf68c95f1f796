#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace atom {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Wraps an angle to the interval (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a + kPi, kTwoPi);
  if (a <= 0.0) a += kTwoPi;
  return a - kPi;
}

/// Difference b - a on the circle, wrapped to (-pi, pi].
inline double angle_diff(double b, double a) { return wrap_angle(b - a); }

inline double clamp(double x, double lo, double hi) {
  return x < lo ? lo : (x > hi ? hi : x);
}

// ---------------------------------------------------------------------------
// Error types
// ---------------------------------------------------------------------------

/// Violated precondition or dimension mismatch.
class ContractViolation : public std::invalid_argument {
 public:
  explicit ContractViolation(const std::string& msg)
      : std::invalid_argument(msg) {}
};

/// Geometric degeneracy (coincident points, pose inside obstacle, d <= r).
class DegenerateGeometry : public std::runtime_error {
 public:
  explicit DegenerateGeometry(const std::string& msg)
      : std::runtime_error(msg) {}
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& msg, int epoch)
      : std::runtime_error(msg), epoch(epoch) {}
  int epoch;
};

/// Calibration filter rejected every sample.
class EmptyFilterError : public std::runtime_error {
 public:
  explicit EmptyFilterError(const std::string& msg)
      : std::runtime_error(msg) {}
};

/// A near-zero uncertainty score survived filtering; the ratio in the
/// base error computation would be unbounded.
class DivisionHazardError : public std::runtime_error {
 public:
  explicit DivisionHazardError(const std::string& msg)
      : std::runtime_error(msg) {}
};

/// Bad configuration value (grid too coarse, invalid limits, ...).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Solver failed to converge; carries the best feasible iterate found.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& msg, double v, double omega, double delta)
      : std::runtime_error(msg), v(v), omega(omega), delta(delta) {}
  double v, omega, delta;
};

// ---------------------------------------------------------------------------
// Deterministic RNG (splitmix64 seeding + xoshiro256**)
// ---------------------------------------------------------------------------
// std::shuffle / std::uniform_*_distribution are implementation-defined;
// every stochastic choice in the project goes through this generator so
// results are reproducible byte-for-byte.

struct SplitMix64 {
  std::uint64_t state;
  explicit SplitMix64(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
};

/// Derives an independent stream seed from a base seed and a stream index.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  SplitMix64 sm(base ^ (0x632be59bd9b4e019ULL * (stream + 1)));
  sm.next();
  return sm.next();
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& w : s_) w = sm.next();
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n) {
    return std::uint64_t((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(kTwoPi * u2);
    have_spare_ = true;
    return mag * std::cos(kTwoPi * u2);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace atom
