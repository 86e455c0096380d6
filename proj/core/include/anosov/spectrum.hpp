#pragma once

// Numerical Lyapunov analysis for perturbed torus maps: full and summed
// spectra by the reorthonormalized-frame method, Oseledets directions by
// forward/backward flag intersection, finite-horizon expansion functions,
// and unstable-curve length growth.

#include <cstdint>
#include <vector>

#include "anosov/torusmap.hpp"

namespace anosov {

struct EstimatorConfig {
  int orbits = 16;
  long long length = 1000000;   // steps per orbit, including burn-in
  long long burn_in = 1000;
  std::uint64_t seed = 1;
  int threads = 1;
  bool backward = false;        // estimate the inverse map's spectrum
};

struct ValueWithError {
  double value = 0.0;
  double error = 0.0;  // one standard error
};

struct SpectrumEstimate {
  std::vector<double> values;         // descending, nats per iterate
  std::vector<double> errors;         // standard errors
  std::vector<double> summed;         // prefix sums, j = 1..d
  std::vector<double> summed_errors;
  std::vector<std::vector<double>> per_orbit;  // orbit -> per-exponent means
  EstimatorConfig config;

  int dim() const { return static_cast<int>(values.size()); }
  double zero_sum_residual() const;
  // view as an OrderedSpectrum at the estimate's own noise scale
  OrderedSpectrum spectrum() const;
  ValueWithError summed_at(int j) const;  // j = 1..d
};

SpectrumEstimate estimate_spectrum(const PerturbedMap& f, const EstimatorConfig& cfg);

// lambda-hat_j with error, from the same frame recursion
ValueWithError estimate_summed(const PerturbedMap& f, int j, const EstimatorConfig& cfg);

struct OseledetsDirection {
  Vec v;             // unit vector approximating E_j(x)
  double residual;   // 2 - top eigenvalue of the projector sum; 0 is exact
};

// Intersects the forward-iterated j-flag with the backward-iterated
// (d-j+1)-flag at x, both over the given horizon.
OseledetsDirection oseledets_direction(const PerturbedMap& f, const Vec& x, int j, int horizon);

// Monte Carlo average of log |Df restricted to E_j| over uniform samples.
ValueWithError integral_exponent(const PerturbedMap& f, int j, int samples, int horizon,
                                 std::uint64_t seed = 3);

struct FiniteLyapunovMetric {
  int N = 1;
  std::vector<Vec> points;
  Mat chi;                       // samples x d, per-point expansion rates
  bool ordering_ok = false;      // chi_1 > ... > chi_u > 0 > ... > chi_d pointwise
  double violation_fraction = 0.0;
  std::vector<double> l1_deviation;  // per j, mean |chi_j - lambda_j|
};

// theta_j^{(N)}/N at sampled points through N-step products over Oseledets
// directions; reference exponents default to the base spectrum when empty.
FiniteLyapunovMetric finite_metric(const PerturbedMap& f, int N, int samples,
                                   std::vector<double> reference = {}, int horizon = 80,
                                   std::uint64_t seed = 17);

struct LengthGrowthResult {
  double rate = 0.0;     // log(length(f^n W)) / n at the horizon
  bool truncated = false;
  int nodes = 0;
};

// Pushes a unit-length segment seeded along the top Oseledets direction,
// refining the polyline wherever tangents turn, and returns the exponential
// growth rate of its length at the horizon.
LengthGrowthResult unstable_length_growth(const PerturbedMap& f, const Vec& x, int horizon,
                                          int direction_horizon = 80, int max_nodes = 1 << 17);

}  // namespace anosov
