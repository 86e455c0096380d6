#include "anosov/serialize.hpp"

#include <string>

namespace anosov {

namespace {

Json vec_to_json(const Vec& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec vec_from_json(const Json& j) {
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
  return v;
}

Json mat_to_json(const Mat& m) {
  Json a = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (int k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    a.push_back(row);
  }
  return a;
}

Mat mat_from_json(const Json& j) {
  const int r = static_cast<int>(j.size());
  const int c = static_cast<int>(j.at(0).size());
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int k = 0; k < c; ++k) m(i, k) = j[i][k].get<double>();
  return m;
}

}  // namespace

Json to_json(const OrderedSpectrum& s) {
  Json a = Json::array();
  for (double v : s.entries()) a.push_back(v);
  return a;
}

OrderedSpectrum spectrum_from_json(const Json& j, double tol) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(x.get<double>());
  return OrderedSpectrum(std::move(v), tol);
}

Json matrix_to_json(const std::vector<long long>& m, int d) {
  Json a = Json::array();
  for (int i = 0; i < d; ++i) {
    Json row = Json::array();
    for (int k = 0; k < d; ++k) row.push_back(std::to_string(m[i * d + k]));
    a.push_back(row);
  }
  return a;
}

std::pair<std::vector<long long>, int> matrix_from_json(const Json& j) {
  const int d = static_cast<int>(j.size());
  std::vector<long long> m(d * d);
  for (int i = 0; i < d; ++i) {
    if (static_cast<int>(j[i].size()) != d)
      throw Error(Errc::invalid_input, "matrix rows must have equal length");
    for (int k = 0; k < d; ++k) {
      const auto& cell = j[i][k];
      m[i * d + k] = cell.is_string() ? std::stoll(cell.get<std::string>())
                                      : cell.get<long long>();
    }
  }
  return {m, d};
}

Json to_json(const HyperbolicAutomorphism& h) {
  Json j;
  j["matrix"] = matrix_to_json(h.data(), h.dim());
  j["unstable_index"] = h.unstable_index();
  j["spectrum"] = to_json(h.spectrum());
  return j;
}

HyperbolicAutomorphism automorphism_from_json(const Json& j) {
  auto [m, d] = matrix_from_json(j.is_object() ? j.at("matrix") : j);
  return HyperbolicAutomorphism::from_matrix(std::move(m), d);
}

Json to_json(const ExponentPattern& p) {
  return Json{{"a", p.a}, {"u", p.u}, {"b", p.b}};
}

Json to_json(const LatticePolynomial& p) {
  Json coeffs = Json::array();
  for (const auto& c : p.coeffs) coeffs.push_back(c.str());
  Json j{{"coefficients_ascending", coeffs}};
  if (p.pattern) j["pattern"] = to_json(*p.pattern);
  return j;
}

Json to_json(const BumpProfile& p) { return Json{{"amplitude", p.amplitude()}}; }

BumpProfile profile_from_json(const Json& j) {
  return BumpProfile(j.at("amplitude").get<double>());
}

Json to_json(const ModelDeformation& m) {
  return Json{{"dim", m.dim()},
              {"profile", to_json(m.profile())},
              {"amplitudes", vec_to_json(m.amplitudes())},
              {"parameters", vec_to_json(m.parameters())}};
}

ModelDeformation deformation_from_json(const Json& j) {
  return ModelDeformation(j.at("dim").get<int>(), profile_from_json(j.at("profile")),
                          vec_from_json(j.at("amplitudes")), vec_from_json(j.at("parameters")));
}

Json to_json(const ConeConstants& c) {
  return Json{{"alpha", c.alpha}, {"beta", c.beta}, {"gamma", c.gamma},
              {"kappa", c.kappa}, {"nu", c.nu}};
}

ConeConstants cones_from_json(const Json& j) {
  ConeConstants c;
  c.alpha = j.at("alpha").get<double>();
  c.beta = j.at("beta").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.kappa = j.at("kappa").get<double>();
  c.nu = j.at("nu").get<double>();
  return c;
}

Json to_json(const ChartedBall& b) {
  return Json{{"center", vec_to_json(b.center())},
              {"radius", b.radius()},
              {"frame", mat_to_json(b.frame())}};
}

ChartedBall ball_from_json(const Json& j) {
  return ChartedBall(vec_from_json(j.at("center")), j.at("radius").get<double>(),
                     mat_from_json(j.at("frame")));
}

Json to_json(const DampingParameters& p) {
  return Json{{"cones", to_json(p.cones)}, {"sigma", p.sigma},   {"N", p.N},
              {"N0", p.minimal_horizon()}, {"delta0", p.delta0}, {"delta", p.delta()},
              {"a", vec_to_json(p.a)},     {"epsilon", p.epsilon}};
}

DampingParameters damping_from_json(const Json& j) {
  DampingParameters p;
  p.cones = cones_from_json(j.at("cones"));
  p.sigma = j.at("sigma").get<double>();
  p.N = j.at("N").get<int>();
  p.delta0 = j.at("delta0").get<double>();
  p.a = vec_from_json(j.at("a"));
  p.epsilon = j.at("epsilon").get<double>();
  return p;
}

Json to_json(const PerturbedMap& f) {
  Json layers = Json::array();
  for (const auto& layer : f.layers()) {
    Json balls = Json::array();
    for (const auto& b : layer.balls) balls.push_back(to_json(b));
    layers.push_back(Json{{"balls", balls}, {"deformation", to_json(layer.deformation)}});
  }
  return Json{{"schema_version", kSchemaVersion},
              {"base", to_json(f.base())},
              {"layers", layers}};
}

PerturbedMap map_from_json(const Json& j) {
  PerturbedMap f(automorphism_from_json(j.at("base")));
  for (const auto& lj : j.at("layers")) {
    std::vector<ChartedBall> balls;
    for (const auto& bj : lj.at("balls")) balls.push_back(ball_from_json(bj));
    f = f.with_layer({std::move(balls), deformation_from_json(lj.at("deformation"))});
  }
  return f;
}

Json to_json(const EstimatorConfig& c) {
  return Json{{"orbits", c.orbits},   {"length", c.length}, {"burn_in", c.burn_in},
              {"seed", c.seed},       {"threads", c.threads},
              {"backward", c.backward}};
}

EstimatorConfig estimator_from_json(const Json& j) {
  EstimatorConfig c;
  c.orbits = j.value("orbits", c.orbits);
  c.length = j.value("length", c.length);
  c.burn_in = j.value("burn_in", c.burn_in);
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
  c.backward = j.value("backward", c.backward);
  return c;
}

Json to_json(const SpectrumEstimate& e) {
  return Json{{"schema_version", kSchemaVersion},
              {"values", e.values},
              {"errors", e.errors},
              {"summed", e.summed},
              {"summed_errors", e.summed_errors},
              {"zero_sum_residual", e.zero_sum_residual()},
              {"config", to_json(e.config)}};
}

Json to_json(const TargetReport& r) {
  return Json{{"pass", r.pass},
              {"ordered_strict", r.ordered_strict},
              {"sign_pattern_ok", r.sign_pattern_ok},
              {"relation", to_string(r.relation)},
              {"majorization_ok", r.majorization_ok},
              {"entropy_ok", r.entropy_ok},
              {"offending_prefixes", r.offending},
              {"detail", r.detail}};
}

Json to_json(const AnosovReport& r) {
  return Json{{"pass", r.pass},
              {"abs_det", r.abs_det},
              {"det_ok", r.det_ok},
              {"all_real", r.all_real},
              {"all_simple", r.all_simple},
              {"off_unit_circle", r.off_unit_circle},
              {"unstable_index", r.unstable_index},
              {"moduli", r.moduli},
              {"log_moduli", r.log_moduli},
              {"min_log_gap", r.min_log_gap},
              {"min_unit_distance", r.min_unit_distance},
              {"detail", r.detail}};
}

Json to_json(const PlacementResult& r) {
  Json balls = Json::array();
  for (const auto& b : r.balls) balls.push_back(to_json(b));
  return Json{{"balls", balls},
              {"support_measure", r.support_measure},
              {"ceiling", r.ceiling},
              {"attempts", r.attempts},
              {"min_margin", r.min_margin}};
}

Json to_json(const DampingReport& r) {
  Json w = Json::array();
  for (const auto& x : r.witnesses)
    w.push_back(Json{{"what", x.what}, {"point", vec_to_json(x.point)}, {"j", x.j},
                     {"value", x.value}});
  return Json{{"pass", r.pass},
              {"cones_ok", r.cones_ok},
              {"projections_ok", r.projections_ok},
              {"tower_ok", r.tower_ok},
              {"gap_ok", r.gap_ok},
              {"worst_opening", r.worst_opening},
              {"worst_ratio", r.worst_ratio},
              {"tower_margin", r.tower_margin},
              {"averaged_gap", r.averaged_gap},
              {"samples", r.samples},
              {"witnesses", w}};
}

Json to_json(const ConeContractionReport& r) {
  return Json{{"pass", r.pass},
              {"min_off_support_contraction", r.min_off_support_contraction},
              {"expected_contraction", r.expected_contraction},
              {"max_final_opening", r.max_final_opening},
              {"recovery_fraction", r.recovery_fraction},
              {"samples", r.samples},
              {"detail", r.detail}};
}

Json to_json(const PsiReport& r) {
  return Json{{"pass", r.pass},
              {"integral_logpsi", r.integral_logpsi},
              {"integral_err", r.integral_err},
              {"lambda_hat", r.lambda_hat},
              {"lambda_hat_err", r.lambda_hat_err},
              {"integral_ok", r.integral_ok},
              {"max_off_support_dev", r.max_off_support_dev},
              {"off_support_ok", r.off_support_ok},
              {"max_on_ball_slack", r.max_on_ball_slack},
              {"on_ball_ok", r.on_ball_ok},
              {"on_ball_samples", r.on_ball_samples},
              {"transversality_violations", r.transversality_violations},
              {"nu", r.nu},
              {"epsilon_budget", r.epsilon_budget}};
}

Json to_json(const ShiftPrediction& p) {
  return Json{{"shift", vec_to_json(p.shift)}, {"band", vec_to_json(p.band)}};
}

Json to_json(const MeasuredShift& m) {
  return Json{{"shift", vec_to_json(m.shift)}, {"error", vec_to_json(m.error)}};
}

Json to_json(const StructuralZeroReport& r) {
  return Json{{"pass", r.pass},
              {"max_offplane_leak", r.max_offplane_leak},
              {"max_rate_error", r.max_rate_error},
              {"samples", r.samples}};
}

Json to_json(const BoundaryReport& r) {
  return Json{{"pass", r.pass},
              {"lambda1", r.lambda1},
              {"lambda1_err", r.lambda1_err},
              {"lambda1_base", r.lambda1_base},
              {"lhat2", r.lhat2},
              {"lhat2_err", r.lhat2_err},
              {"lhat2_base", r.lhat2_base},
              {"slack1", r.slack1},
              {"slack2", r.slack2}};
}

Json to_json(const SteeringStep& s) {
  return Json{{"eta", s.eta},
              {"measured", s.measured},
              {"measured_hat", s.measured_hat},
              {"errors", s.errors},
              {"t", s.t},
              {"amplitudes", s.amplitudes},
              {"support", s.support},
              {"rounds", s.rounds},
              {"estimations", s.estimations},
              {"mode", to_string(s.mode)},
              {"certified", s.certified},
              {"gap", s.gap},
              {"lambda3_drift", s.lambda3_drift}};
}

Json to_json(const SteeringPlan& p) {
  Json steps = Json::array();
  for (const auto& s : p.steps) steps.push_back(to_json(s));
  Json j{{"schema_version", kSchemaVersion},
         {"start", p.start},
         {"target", p.target},
         {"sigma_path", p.sigma_path},
         {"q1", p.q1},
         {"steps", steps},
         {"reached", p.reached},
         {"status", p.status},
         {"seed", p.seed}};
  if (p.final_map) j["final_map"] = to_json(*p.final_map);
  return j;
}

}  // namespace anosov
