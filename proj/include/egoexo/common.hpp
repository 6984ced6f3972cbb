#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace egoexo {

// Error taxonomy shared across the pipeline. The CLI maps these onto its
// exit codes (config 2, io 3, prerequisite 4, contract 5, partial 6).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};
struct PrereqError : std::runtime_error {
  explicit PrereqError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};
struct PartialFailure : std::runtime_error {
  explicit PartialFailure(const std::string& msg) : std::runtime_error(msg) {}
};

// Deterministic RNG. mt19937_64 is fully specified by the standard; the
// derived draws below avoid std::*_distribution so streams are identical
// everywhere.
class Rng {
 public:
  explicit Rng(uint64_t seed) : s_(seed * 0x9E3779B97F4A7C15ULL + 1) {}

  uint64_t next_u64() {
    // splitmix64
    uint64_t z = (s_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, n)
  uint64_t next_below(uint64_t n) { return next_u64() % n; }
  int next_int(int n) { return static_cast<int>(next_below(static_cast<uint64_t>(n))); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0, u2 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 1e-300);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(two_pi * u2);
    has_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

  // Derive an independent stream, e.g. one per clip id.
  Rng fork(uint64_t salt) const {
    Rng r(0);
    r.s_ = s_ ^ (salt * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL);
    return r;
  }

 private:
  uint64_t s_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace egoexo
