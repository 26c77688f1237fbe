#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace mmcd {

// Seeded generator with hand-rolled distributions. std:: distributions are
// implementation-defined, so the mappings below are pinned here to keep runs
// reproducible independent of the standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(static_cast<std::uint32_t>(seed ^ (seed >> 32))) {}

  std::uint32_t next_u32() { return gen_(); }

  // Uniform in [0, 1).
  double uniform() { return next_u32() * (1.0 / 4294967296.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi) - lo + 1;
    return lo + static_cast<int>((static_cast<std::uint64_t>(next_u32()) * span) >> 32);
  }

  // Standard normal via Box-Muller. Uses two draws per sample, no caching.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  std::string state() const {
    std::ostringstream os;
    os << gen_;
    return os.str();
  }

  void set_state(const std::string& s) {
    std::istringstream is(s);
    is >> gen_;
  }

 private:
  std::mt19937 gen_;
};

}  // namespace mmcd
