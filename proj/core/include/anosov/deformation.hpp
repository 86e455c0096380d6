#pragma once

// The multiparametric volume-preserving deformation of the unit ball:
// compositions of compactly supported plane rotations, their analytic
// Jacobians and principal minors, the per-volume exponent cost Q(s), and the
// cone constants used by the damping machinery.

#include <cstdint>
#include <vector>

#include "anosov/common.hpp"

namespace anosov {

// Rotationally symmetric C^inf bump supported strictly inside the unit ball:
// rho(z) = c * exp(-1/(1 - |z|^2)).
class BumpProfile {
 public:
  explicit BumpProfile(double amplitude);

  double amplitude() const { return c_; }
  double value(double r) const;
  double derivative(double r) const;  // d rho / dr
  double sup_value() const { return sup_value_; }
  double sup_derivative() const { return sup_derivative_; }

 private:
  double c_;
  double sup_value_, sup_derivative_;
};

// Largest amplitude c <= c_start (backtracking halving) whose full deformation
// family keeps all principal minors positive on a sampled (z, t) set.
BumpProfile calibrate_profile(int dim, double c_start = 1.0, std::uint64_t seed = 7);

struct ConeConstants {
  double alpha = 2.0;   // image cone opening
  double beta = 0.5;    // source cone opening, 1/alpha
  double gamma = 0.25;  // minor-cone opening
  double kappa = 0.5;   // projection-expansion lower bound
  double nu = 0.01;     // minor-cone tolerance (nats)

  void validate() const;
};

// identity except the 2x2 rotation block on coordinates (j, j+1); j is 1-based
Mat rotation(int j, double theta, int d);

// h_s^(j)(z) = R^(j)_{s rho(z)} z; exact isometry of each sphere around 0.
Vec apply_elementary(int j, double s, const Vec& z, const BumpProfile& profile);

// the (j,j) entry of the elementary Jacobian, in closed form
double delta(int j, double s, const Vec& z, const BumpProfile& profile);

Mat elementary_jacobian(int j, double s, const Vec& z, const BumpProfile& profile);

// h_t = h^(d-1)_{s_{d-1}} o ... o h^(1)_{s_1} with s_j = b_j t_j.
class ModelDeformation {
 public:
  ModelDeformation(int dim, BumpProfile profile, Vec amplitudes, Vec parameters);

  int dim() const { return d_; }
  const BumpProfile& profile() const { return profile_; }
  const Vec& amplitudes() const { return b_; }
  const Vec& parameters() const { return t_; }
  double effective(int j) const { return b_[j - 1] * t_[j - 1]; }   // j is 1-based
  bool is_identity() const;

  Vec apply(const Vec& z) const;
  Vec apply_inverse(const Vec& z) const;
  Mat jacobian(const Vec& z) const;

  // det_j of the Jacobian through the one-factor formula (the composition
  // contributes a single minor factor, evaluated along the partial orbit).
  double principal_minor(const Vec& z, int j) const;

 private:
  void check_domain(const Vec& z) const;

  int d_;
  BumpProfile profile_;
  Vec b_, t_;
};

// Q(s) = -average over the ball of log Delta^(j)_s; independent of j. The
// reduced integrand depends on (r, |.|-fraction, angle) only, and is
// integrated by Gauss-Legendre x trapezoid refinement until successive
// refinements differ by less than tol.
double q_of(double s, const BumpProfile& profile, int dim, double tol = 1e-9);

// Full d=3 spherical-coordinates quadrature of log Delta^(j)_s for any j;
// an independent route used to cross-check j-invariance.
double q_of_direct3(int j, double s, const BumpProfile& profile, double tol = 1e-8);

// Cached Q with a monotonicity check and least-preimage inversion.
class QFunction {
 public:
  QFunction(const BumpProfile& profile, int dim, double tol = 1e-9);
  double operator()(double s) const;
  double q1() const { return q1_; }
  bool monotone() const { return monotone_; }

  // least s in [0,1] with Q(s) = target, to within inv_tol on Q values
  double inverse_least(double target, double inv_tol = 1e-9) const;

 private:
  const BumpProfile profile_;
  int dim_;
  double tol_;
  std::vector<double> grid_;  // Q on a uniform 201-point grid
  double q1_ = 0.0;
  bool monotone_ = true;
};

// least s in [0,1] with Q(s) = target
double calibrate_amplitude(double target, const BumpProfile& profile, int dim);

// Samples (z, t, j, vectors/frames) and returns constants such that, with a
// factor-2 margin: Dh H_j(beta) stays in H_j(alpha) (and the inverse
// counterpart), the projection bounds hold with kappa, and j-frames inside
// H_j(gamma) obey the minor-cone estimate with tolerance nu.
ConeConstants calibrate_cones(const ModelDeformation& m, double nu,
                              std::uint64_t seed = 11, int frame_samples = 100000);

}  // namespace anosov
