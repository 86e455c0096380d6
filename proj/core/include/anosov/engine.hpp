#pragma once

// One perturbation round end to end (calibrate, place, build, predict,
// measure, check), and the waypoint steering loops: the generic one and the
// foliation-preserving T^3 variant that pins the third exponent.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "anosov/spectrum.hpp"

namespace anosov {

enum class RoundMode { rigorous, empirical };

inline const char* to_string(RoundMode m) {
  return m == RoundMode::rigorous ? "rigorous" : "empirical";
}

struct PerturbationRound {
  PerturbedMap map;        // f_t, newest layer is this round's perturbation
  DampingParameters params;
  Vec amplitudes;          // b_j, least values with Q(b_j) = 3 delta0 a_j
  Vec t;
  double support = 0.0;    // m(Z) of the round's layer
  double q1 = 0.0;         // Q(1) of the profile in use (reported)
  RoundMode mode = RoundMode::empirical;
};

PerturbedMap build_round(const PerturbedMap& f, const DampingParameters& params,
                         const std::vector<ChartedBall>& balls, const BumpProfile& profile,
                         const Vec& amplitudes, const Vec& t);

struct ShiftPrediction {
  Vec shift;  // predicted lambda-hat_j(f_t) - lambda-hat_j(f), j = 1..d-1
  Vec band;   // +- m(Z) nu per coordinate
};

ShiftPrediction predict_shift(const PerturbationRound& round);

struct MeasuredShift {
  Vec shift;
  Vec error;  // combined standard errors
};

MeasuredShift measure_shift(const PerturbedMap& f_base, const PerturbedMap& f_t,
                            const EstimatorConfig& cfg);

struct PsiReport {
  bool pass = false;
  double integral_logpsi = 0.0;     // Monte Carlo mean of log psi
  double integral_err = 0.0;
  double lambda_hat = 0.0;          // independent orbit estimate
  double lambda_hat_err = 0.0;
  bool integral_ok = false;         // (a) equality of the two within 3 sigma
  double max_off_support_dev = 0.0;
  bool off_support_ok = false;      // (b) log psi = sum chi off the support
  double max_on_ball_slack = 0.0;   // (c) excess over nu on the support
  bool on_ball_ok = false;
  int on_ball_samples = 0;
  int transversality_violations = 0;
  double nu = 0.0;
  double epsilon_budget = 0.0;
};

// Verifies the psi-cocycle identities for a single-round map: the integral of
// log psi equals lambda-hat_j, the off-support identity is exact, and on each
// ball the deviation from sum(chi) + log det_j Dh stays within nu plus the
// reported epsilon budget.
PsiReport psi_check(const PerturbationRound& round, int j, int samples,
                    const EstimatorConfig& est_cfg, int horizon = 60,
                    double epsilon_budget = 0.05, std::uint64_t seed = 23);

struct SteerConfig {
  double tol = 1e-2;              // final distance on spectrum entries
  double step_tol = 2e-3;         // waypoint hit tolerance on lambda-hat
  double per_step_cap = 0.04;     // nats of lambda-hat motion per waypoint
  int waypoints = 0;              // 0 -> derived from per_step_cap
  int max_rounds_per_step = 24;
  int max_estimations_per_round = 12;
  double radius = 0.04;
  int ball_budget = 200;
  int tower_height = 1;           // N for empirical rounds; N = 1 has no tower constraint
  double nu = 0.2;                // minor-cone tolerance for calibrations
  double profile_amplitude = 2.5;
  bool attempt_rigorous_first = true;
  int direction_horizon = 12;
  int cone_check_samples = 4000;
  EstimatorConfig est{4, 120000, 1000, 1, 1, false};
  std::uint64_t seed = 1;
};

struct SteeringStep {
  std::vector<double> eta;        // waypoint, lambda-hat coordinates
  std::vector<double> measured;   // measured spectrum entries after the step
  std::vector<double> measured_hat;
  std::vector<double> errors;
  std::vector<double> t;          // parameter of the last round of the step
  std::vector<double> amplitudes;
  double support = 0.0;
  int rounds = 0;
  int estimations = 0;
  RoundMode mode = RoundMode::empirical;
  bool certified = false;         // damping report (rigorous) / cone check (empirical)
  double gap = 0.0;
  double lambda3_drift = 0.0;     // foliated plans only
};

struct SteeringPlan {
  std::vector<double> start;      // spectrum entries of f_0
  std::vector<double> target;
  double sigma_path = 0.0;
  double q1 = 0.0;
  std::vector<SteeringStep> steps;
  bool reached = false;
  std::string status;             // "ok", "steering-stalled", "aborted-gap-violation"
  std::optional<PerturbedMap> final_map;
  std::uint64_t seed = 0;
};

SteeringPlan steer(const HyperbolicAutomorphism& f0, const OrderedSpectrum& xi,
                   const SteerConfig& cfg);

// Foliated T^3 steering: charts keep horizontal slices inside the invariant
// plane of the two leading directions and only the first elementary
// deformation is used, so the third exponent is pinned structurally.
SteeringPlan steer_foliated_T3(const HyperbolicAutomorphism& L, const OrderedSpectrum& xi,
                               const SteerConfig& cfg);

struct StructuralZeroReport {
  double max_offplane_leak = 0.0;  // bottom-row entries over the plane columns
  double max_rate_error = 0.0;     // | |R_33| - e^{lambda_3} | in frame coords
  bool pass = false;
  int samples = 0;
};

// Bottom row of the differential in the base eigenframe must be
// (0, 0, +-e^{lambda_3(L)}) for foliation-preserving maps.
StructuralZeroReport structural_zero_check(const PerturbedMap& f, int samples = 1000,
                                           std::uint64_t seed = 29);

struct BoundaryReport {
  bool pass = false;
  double lambda1 = 0.0, lambda1_err = 0.0, lambda1_base = 0.0;
  double lhat2 = 0.0, lhat2_err = 0.0, lhat2_base = 0.0;
  double slack1 = 0.0, slack2 = 0.0;  // base + 3 sigma - measured; negative flags a bug
};

// Checks lambda_1(f) <= lambda_1(L) + 3 sigma and lambda-hat_2(f) <=
// lambda-hat_2(L) + 3 sigma; a violation flags an estimator or construction
// bug, never a counterexample.
BoundaryReport boundary_check(const SpectrumEstimate& est, const HyperbolicAutomorphism& L);
BoundaryReport boundary_check_T3(const PerturbedMap& f_t, const HyperbolicAutomorphism& L,
                                 const EstimatorConfig& cfg);

}  // namespace anosov
