#pragma once

#include <cstdint>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace anosov {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Errc {
  invalid_input,
  not_a_spectrum,
  construction_failed,
  out_of_domain,
  numeric_failure,
  target_unreachable,
  calibration_failed,
  placement_failed,
  degenerate_input,
  invalid_target,
  steering_stalled,
  aborted_gap_violation,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::invalid_input:          return "invalid-input";
    case Errc::not_a_spectrum:         return "not-a-spectrum";
    case Errc::construction_failed:    return "construction-failed";
    case Errc::out_of_domain:          return "out-of-domain";
    case Errc::numeric_failure:        return "numeric-failure";
    case Errc::target_unreachable:     return "target-unreachable";
    case Errc::calibration_failed:     return "calibration-failed";
    case Errc::placement_failed:       return "placement-failed";
    case Errc::degenerate_input:       return "degenerate-input";
    case Errc::invalid_target:         return "invalid-target";
    case Errc::steering_stalled:       return "steering-stalled";
    case Errc::aborted_gap_violation:  return "aborted-gap-violation";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

// Deterministic RNG. The mt19937_64 engine is pinned by the standard; we
// derive uniforms from raw engine output ourselves so results do not depend
// on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    // splitmix64 scramble so nearby seeds give unrelated streams
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    state_.seed(z ^ (z >> 31));
  }

  std::uint64_t bits() { return state_(); }

  // uniform in [0,1)
  double u01() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  // uniform in [a,b)
  double uniform(double a, double b) { return a + (b - a) * u01(); }

  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {  // inclusive range
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(bits() % span);
  }

  double normal() {
    // Box-Muller; one value per call keeps the stream position simple
    double u1 = u01(), u2 = u01();
    while (u1 <= 0.0) u1 = u01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Vec gaussian_vector(int d) {
    Vec v(d);
    for (int i = 0; i < d; ++i) v[i] = normal();
    return v;
  }

  Vec unit_vector(int d) {
    Vec v = gaussian_vector(d);
    double n = v.norm();
    while (n < 1e-12) { v = gaussian_vector(d); n = v.norm(); }
    return v / n;
  }

  // uniform in the closed unit ball of R^d
  Vec ball_point(int d) {
    Vec v = unit_vector(d);
    return v * std::pow(u01(), 1.0 / d);
  }

 private:
  std::mt19937_64 state_;
};

// Compensated (Kahan) accumulator for long orbit sums.
class KahanSum {
 public:
  void add(double x) {
    double y = x - c_;
    double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0, c_ = 0.0;
};

// Halton low-discrepancy sequence in [0,1)^d, used for deterministic searches.
class Halton {
 public:
  explicit Halton(int dim) : dim_(dim) {}

  Vec next() {
    static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19};
    ++index_;
    Vec p(dim_);
    for (int i = 0; i < dim_; ++i) p[i] = radical_inverse(index_, primes[i]);
    return p;
  }

 private:
  static double radical_inverse(std::uint64_t n, int base) {
    double inv = 1.0 / base, f = inv, x = 0.0;
    while (n > 0) {
      x += f * static_cast<double>(n % base);
      n /= base;
      f *= inv;
    }
    return x;
  }
  int dim_;
  std::uint64_t index_ = 0;
};

inline double sqr(double x) { return x * x; }

// volume of the unit ball in R^d
inline double unit_ball_volume(int d) {
  return std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

}  // namespace anosov
