#pragma once

// Dynamics on T^d = R^d / Z^d: hyperbolic automorphisms composed with
// chart-embedded ball deformations, cone fields in the eigenframe, damping
// parameters, and certified disjointness of perturbation towers.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "anosov/deformation.hpp"
#include "anosov/lattice.hpp"

namespace anosov {

// componentwise reduction to [0,1)
Vec torus_wrap(Vec x);
// minimal representative of a - b, componentwise in [-1/2, 1/2)
Vec torus_diff(const Vec& a, const Vec& b);
double torus_distance(const Vec& a, const Vec& b);

class TorusPoint {
 public:
  explicit TorusPoint(Vec x) : x_(torus_wrap(std::move(x))) {}
  const Vec& coords() const { return x_; }
  int dim() const { return static_cast<int>(x_.size()); }

 private:
  Vec x_;
};

// Affine chart Psi(z) = center + frame * (radius * z) (mod 1), injective on
// the unit ball, constant Jacobian.
class ChartedBall {
 public:
  ChartedBall(Vec center, double radius, Mat frame);

  const Vec& center() const { return center_; }
  double radius() const { return radius_; }
  const Mat& frame() const { return frame_; }
  const Mat& frame_inv() const { return frame_inv_; }
  double volume() const { return volume_; }

  Vec chart(const Vec& z) const;          // unit ball -> torus
  Vec chart_inverse(const Vec& x) const;  // torus -> chart coordinates
  bool contains(const Vec& x, double pad = 0.0) const;

 private:
  Vec center_;
  double radius_;
  Mat frame_, frame_inv_;
  double volume_;
};

// One perturbation round: disjoint balls sharing a single model deformation.
struct PerturbationLayer {
  std::vector<ChartedBall> balls;
  ModelDeformation deformation;

  double support_measure() const;
};

// f = base o g_1 o g_2 o ... o g_K, each g_k supported on its layer's balls.
// Immutable; layers are applied newest-first, base last.
class PerturbedMap {
 public:
  explicit PerturbedMap(HyperbolicAutomorphism base);

  const HyperbolicAutomorphism& base() const { return base_; }
  int dim() const { return base_.dim(); }
  const std::vector<PerturbationLayer>& layers() const { return layers_; }
  double support_measure() const;  // of the newest layer; 0 if none

  PerturbedMap with_layer(PerturbationLayer layer) const;

  Vec evaluate(const Vec& x) const;
  Vec evaluate_inverse(const Vec& x) const;
  Mat differential(const Vec& x) const;
  Mat differential_inverse(const Vec& x) const;

  // x <- f(x), D = Df(old x); avoids walking the layers twice
  void step(Vec& x, Mat& D) const;
  void step_inverse(Vec& x, Mat& D) const;

 private:
  struct LayerIndex {
    int cells_per_axis = 1;
    std::vector<std::vector<int>> cells;
  };
  int locate_ball(const PerturbationLayer& layer, const LayerIndex& idx, const Vec& x) const;
  void rebuild_indices();

  HyperbolicAutomorphism base_;
  std::vector<PerturbationLayer> layers_;
  std::vector<LayerIndex> indices_;
};

TorusPoint evaluate(const PerturbedMap& f, const TorusPoint& x);
Mat differential(const PerturbedMap& f, const TorusPoint& x);

// Constant cone fields taken in the base eigenframe.
struct ConeField {
  int j = 1;
  double tau = 0.0;
  Mat frame;
};

struct DampingParameters {
  ConeConstants cones;
  double sigma = 0.0;   // gap lower bound (nats)
  int N = 2;            // tower height (iterates)
  double delta0 = 0.0;  // scaling factor
  Vec a;                // per-coordinate speeds
  double epsilon = 0.0; // bookkeeping tolerance

  int minimal_horizon() const;                  // N_0
  double delta() const { return delta0 / N; }
  void validate(bool rigorous) const;           // rigorous mode enforces N >= N_0
};

// N_0 = floor((2/sigma) log(max{1/kappa, alpha/gamma})) + 2, computed as the
// least integer n >= 2 with e^{(n-1) sigma/2} strictly above the max (the two
// agree in exact arithmetic and the latter is stable under rounding).
int damping_horizon(const ConeConstants& cones, double sigma);

struct PlacementResult {
  std::vector<ChartedBall> balls;
  double support_measure = 0.0;
  double ceiling = 0.0;       // 1/N
  long long attempts = 0;
  double min_margin = 0.0;    // smallest certified separation, in certificate units
};

// Deterministic search placing ball centers on a low-discrepancy sequence;
// a center is accepted only when its N ellipsoidal forward images (exact for
// the linear base) are certified disjoint, with margin factor 2, from all
// previously accepted images. frame_fn supplies per-center chart frames for
// the certificates; refine_fn, when given, runs once per accepted center and
// replaces the chart frame (returning a zero or badly drifted matrix drops
// the ball: the margin-2 certificate only absorbs a factor-2 frame change).
// inflation enlarges the certified radius to absorb earlier layers.
PlacementResult place_balls(const HyperbolicAutomorphism& f, int N, double radius,
                            int budget, std::uint64_t seed = 1,
                            std::function<Mat(const Vec&)> frame_fn = {},
                            double inflation = 0.0,
                            std::function<Mat(const Vec&)> refine_fn = {});

struct DampingWitness {
  std::string what;
  Vec point;
  int j = 0;
  double value = 0.0;
};

struct DampingReport {
  bool pass = false;
  bool cones_ok = false;        // condition (i)
  bool projections_ok = false;  // condition (ii)
  bool tower_ok = false;        // condition (iii)
  bool gap_ok = false;          // condition (iv)
  double worst_opening = 0.0;   // max image opening seen against alpha
  double worst_ratio = 0.0;     // min projection ratio seen against kappa
  double tower_margin = 0.0;
  double averaged_gap = 0.0;
  int samples = 0;
  std::vector<DampingWitness> witnesses;
};

// Samples points on the support and verifies the damping-perturbation
// conditions; off the support they hold automatically for the linear base.
DampingReport check_damping(const PerturbedMap& f, const DampingParameters& p,
                            int samples = 100000, std::uint64_t seed = 5);

struct ConeContractionReport {
  bool pass = false;
  double min_off_support_contraction = 0.0;  // per-step opening ratio floor
  double expected_contraction = 0.0;         // e^{-(lambda_j - lambda_{j+1})}
  double max_final_opening = 0.0;
  double recovery_fraction = 0.0;  // orbits whose opening fell below gamma in N off-support steps
  int samples = 0;
  std::string detail;
};

// Pushes cone boundary vectors along sampled orbits and measures opening
// contraction off the support and recovery below gamma within N steps.
ConeContractionReport cone_contraction_check(const PerturbedMap& f, int j, double tau_in,
                                             int horizon, int samples, double gamma = 0.0,
                                             int N = 0, std::uint64_t seed = 9);

// --- ellipsoid geometry (used by placement and by tests) ---

// least Euclidean norm over the ellipsoid {c + M w : |w| <= 1}
double ellipsoid_min_norm(const Vec& c, const Mat& M);

// certified separation of two ellipsoids on the torus across integer
// translates; returns min over translates of (distance in E1-units - 1),
// positive iff disjoint
double ellipsoid_torus_separation(const Vec& c1, const Mat& M1, const Vec& c2, const Mat& M2);

}  // namespace anosov
