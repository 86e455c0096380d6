#pragma once

// Shared test fixtures and independent oracles. Everything here must stay
// independent of the implementation path it is used to check.

#include <cmath>
#include <vector>

#include "anosov/engine.hpp"
#include "anosov/serialize.hpp"

namespace testing_support {

using namespace anosov;

// the classical area-preserving matrix [[2,1],[1,1]]
inline HyperbolicAutomorphism cat_map() {
  return HyperbolicAutomorphism::from_matrix({2, 1, 1, 1}, 2);
}

// log((3 + sqrt 5)/2), the top exponent of the cat map, by the quadratic formula
inline double cat_lambda1() { return std::log((3.0 + std::sqrt(5.0)) / 2.0); }

// random doubly stochastic matrix as a convex combination of permutations
inline Mat random_doubly_stochastic(int d, Rng& rng, int terms = 10) {
  Mat P = Mat::Zero(d, d);
  std::vector<double> w(terms);
  double total = 0.0;
  for (auto& x : w) {
    x = rng.u01() + 1e-3;
    total += x;
  }
  for (int k = 0; k < terms; ++k) {
    std::vector<int> perm(d);
    for (int i = 0; i < d; ++i) perm[i] = i;
    for (int i = d - 1; i > 0; --i) std::swap(perm[i], perm[rng.bits() % (i + 1)]);
    for (int i = 0; i < d; ++i) P(i, perm[i]) += w[k] / total;
  }
  return P;
}

inline OrderedSpectrum random_spectrum(int d, Rng& rng, double scale = 1.0) {
  std::vector<double> v(d);
  double sum = 0.0;
  for (auto& x : v) {
    x = scale * rng.normal();
    sum += x;
  }
  for (auto& x : v) x -= sum / d;
  std::sort(v.begin(), v.end(), std::greater<double>());
  return OrderedSpectrum(std::move(v), 1e-9);
}

// central finite difference of a vector map
template <typename F>
Mat finite_difference_jacobian(F&& f, const Vec& z, double h = 1e-6) {
  const int d = static_cast<int>(z.size());
  Vec out0 = f(z);
  Mat J(out0.size(), d);
  for (int k = 0; k < d; ++k) {
    Vec zp = z, zm = z;
    zp[k] += h;
    zm[k] -= h;
    J.col(k) = (f(zp) - f(zm)) / (2.0 * h);
  }
  return J;
}

// Monte Carlo estimate of Q(s) = -average log Delta over the unit ball
inline std::pair<double, double> q_monte_carlo(double s, const BumpProfile& profile, int d,
                                               long long n, Rng& rng) {
  KahanSum sum, sumsq;
  for (long long i = 0; i < n; ++i) {
    Vec z = rng.ball_point(d);
    double v = -std::log(delta(1, s, z, profile));
    sum.add(v);
    sumsq.add(v * v);
  }
  double mean = sum.value() / n;
  double var = std::max(0.0, sumsq.value() / n - mean * mean);
  return {mean, std::sqrt(var / n)};
}

// exact-arithmetic descending-power evaluation for small cubics; bisection on
// a bracket known to contain a single root
template <typename F>
double bisect(F&& f, double lo, double hi, int iters = 200) {
  double flo = f(lo);
  for (int i = 0; i < iters; ++i) {
    double mid = 0.5 * (lo + hi);
    double fm = f(mid);
    if ((flo < 0) == (fm < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace testing_support
