// Experiment runner: reproducible configs, subcommands wrapping the library
// operations, JSON results plus plot-ready CSV series.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "anosov/serialize.hpp"

namespace fs = std::filesystem;
using namespace anosov;

namespace {

enum ExitCode {
  kOk = 0,
  kInvalidConfig = 2,
  kNumericFailure = 3,
  kSteeringStalled = 4,
  kCertificationFailure = 5,
};

struct Output {
  fs::path dir;

  explicit Output(const std::string& out) : dir(out) { fs::create_directories(dir); }

  void write_json(const std::string& name, const Json& j) const {
    std::ofstream f(dir / name);
    f << j.dump(2) << "\n";
  }
  std::ofstream csv(const std::string& name, const std::string& schema) const {
    std::ofstream f(dir / name);
    f << "# schema=" << schema << "\n";
    return f;
  }
};

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

HyperbolicAutomorphism load_matrix(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(Errc::invalid_input, "cannot open matrix file: " + path);
  Json j;
  f >> j;
  return automorphism_from_json(j);
}

std::vector<double> parse_target(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (...) {
      throw Error(Errc::invalid_input, "target entry is not a number: '" + tok + "'");
    }
  }
  if (out.size() < 2) throw Error(Errc::invalid_input, "target needs at least two entries");
  return out;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case Errc::invalid_input:
    case Errc::invalid_target:
    case Errc::not_a_spectrum:
      return kInvalidConfig;
    case Errc::steering_stalled:
      return kSteeringStalled;
    case Errc::aborted_gap_violation:
    case Errc::calibration_failed:
      return kCertificationFailure;
    default:
      return kNumericFailure;
  }
}

void emit_error(const Error& e) {
  Json j{{"error", errc_name(e.code())}, {"message", e.what()}};
  std::cerr << j.dump() << "\n";
}

// ---------------------------------------------------------------------------

int cmd_construct_matrix(int d, int u, int b, const Output& out, const Json& echo) {
  ExponentPattern pat = default_pattern(d, u, b);
  LatticePolynomial poly = build_polynomial(pat);
  HyperbolicAutomorphism h = companion(poly);
  AnosovReport rep = verify_anosov(h.data(), d);
  Json j{{"schema_version", kSchemaVersion},
         {"config", echo},
         {"pattern", to_json(pat)},
         {"polynomial", to_json(poly)},
         {"matrix", matrix_to_json(h.data(), d)},
         {"spectrum", to_json(h.spectrum())},
         {"unstable_index", h.unstable_index()},
         {"verify", to_json(rep)}};
  out.write_json("matrix.json", j);
  std::cout << "wrote " << (out.dir / "matrix.json").string() << "\n";
  std::cout << "spectrum:";
  for (double v : h.spectrum().entries()) std::cout << " " << fmt17(v);
  std::cout << "\n";
  return rep.pass ? kOk : kCertificationFailure;
}

int cmd_spectrum(const std::string& matrix_file, const EstimatorConfig& ec, const Output& out,
                 const Json& echo) {
  HyperbolicAutomorphism h = load_matrix(matrix_file);
  PerturbedMap f(h);
  SpectrumEstimate est = estimate_spectrum(f, ec);
  Json j = to_json(est);
  j["config_echo"] = echo;
  j["exact_log_moduli"] = to_json(h.spectrum());
  out.write_json("spectrum.json", j);

  auto csv = out.csv("orbit_partials.csv", "spectrum-orbits-v1");
  csv << "orbit";
  for (int k = 1; k <= est.dim(); ++k) csv << ",lambda_" << k;
  for (int k = 1; k <= est.dim(); ++k) csv << ",running_mean_" << k;
  csv << "\n";
  std::vector<double> run(est.dim(), 0.0);
  for (std::size_t o = 0; o < est.per_orbit.size(); ++o) {
    csv << o;
    for (int k = 0; k < est.dim(); ++k) csv << "," << fmt17(est.per_orbit[o][k]);
    for (int k = 0; k < est.dim(); ++k) {
      run[k] += est.per_orbit[o][k];
      csv << "," << fmt17(run[k] / (o + 1));
    }
    csv << "\n";
  }
  std::cout << "lambda:";
  for (int k = 0; k < est.dim(); ++k)
    std::cout << " " << fmt17(est.values[k]) << "+-" << fmt17(est.errors[k]);
  std::cout << "\n";
  return kOk;
}

int cmd_q_table(int d, int points, double amplitude, const Output& out, const Json& echo) {
  BumpProfile profile = calibrate_profile(d, amplitude);
  auto csv = out.csv("q_table.csv", "q-table-v1");
  csv << "s,Q\n";
  for (int i = 0; i <= points; ++i) {
    double s = static_cast<double>(i) / points;
    csv << fmt17(s) << "," << fmt17(q_of(s, profile, d)) << "\n";
  }
  Json j{{"schema_version", kSchemaVersion},
         {"config", echo},
         {"profile", to_json(profile)},
         {"q1", q_of(1.0, profile, d)}};
  out.write_json("q_table.json", j);
  std::cout << "wrote " << (out.dir / "q_table.csv").string() << "\n";
  return kOk;
}

int cmd_deform(const std::string& matrix_file, double radius, int budget, int tower, double nu,
               double t_value, const EstimatorConfig& ec, std::uint64_t seed, const Output& out,
               const Json& echo) {
  HyperbolicAutomorphism h = load_matrix(matrix_file);
  const int d = h.dim();
  const int dm1 = d - 1;
  const int u = h.unstable_index();

  BumpProfile profile = calibrate_profile(d, 1.0, seed + 5);
  QFunction q(profile, d);

  Vec a = Vec::Ones(dm1);
  double delta0 = std::min(0.4, q.q1() / 3.06);
  Vec b(dm1);
  for (int j = 0; j < dm1; ++j) b[j] = q.inverse_least(3.0 * delta0 * a[j]);

  ModelDeformation family(d, profile, b, Vec::Ones(dm1));
  ConeConstants cones = calibrate_cones(family, nu, seed + 9, 40000);
  double sigma = 1.9 * gap(h.spectrum(), u);
  int N0 = damping_horizon(cones, sigma);
  int N = std::max(tower, N0);

  PlacementResult placed = place_balls(h, N, radius, budget, seed);

  DampingParameters params;
  params.cones = cones;
  params.sigma = sigma;
  params.N = N;
  params.delta0 = delta0;
  params.a = a;
  params.epsilon = radius;
  params.validate(/*rigorous=*/true);

  PerturbedMap f0(h);
  Vec t = Vec::Constant(dm1, t_value);
  PerturbedMap f_t = build_round(f0, params, placed.balls, profile, b, t);

  PerturbationRound round{f_t, params, b, t, placed.support_measure, q.q1(),
                          RoundMode::rigorous};
  ShiftPrediction pred = predict_shift(round);
  MeasuredShift meas = measure_shift(f0, f_t, ec);
  DampingReport damp = check_damping(f_t, params, 20000, seed + 7);
  EstimatorConfig psi_cfg = ec;
  psi_cfg.seed = ec.seed + 17;
  PsiReport psi = psi_check(round, 1, 4000, psi_cfg);

  Json j{{"schema_version", kSchemaVersion},
         {"config", echo},
         {"q1", q.q1()},
         {"N", N},
         {"N0", N0},
         {"params", to_json(params)},
         {"placement",
          Json{{"support_measure", placed.support_measure},
               {"ceiling", placed.ceiling},
               {"balls", placed.balls.size()},
               {"min_margin", placed.min_margin}}},
         {"prediction", to_json(pred)},
         {"measured", to_json(meas)},
         {"damping", to_json(damp)},
         {"psi", to_json(psi)},
         {"map", to_json(f_t)}};
  out.write_json("deform.json", j);

  auto csv = out.csv("deform_shift.csv", "deform-shift-v1");
  csv << "j,predicted,band,measured,error\n";
  for (int k = 0; k < dm1; ++k)
    csv << (k + 1) << "," << fmt17(pred.shift[k]) << "," << fmt17(pred.band[k]) << ","
        << fmt17(meas.shift[k]) << "," << fmt17(meas.error[k]) << "\n";

  std::cout << "m(Z)=" << fmt17(placed.support_measure) << " N=" << N
            << " predicted=" << fmt17(pred.shift[0]) << " measured=" << fmt17(meas.shift[0])
            << "+-" << fmt17(meas.error[0]) << "\n";
  if (!damp.pass || !psi.pass) return kCertificationFailure;
  return kOk;
}

int run_steer(bool foliated, const std::string& matrix_file, const std::string& target,
              SteerConfig cfg, const Output& out, const Json& echo) {
  HyperbolicAutomorphism h = load_matrix(matrix_file);
  std::vector<double> xi_entries = parse_target(target);
  if (static_cast<int>(xi_entries.size()) != h.dim())
    throw Error(Errc::invalid_target, "target dimension does not match the matrix");
  OrderedSpectrum xi(xi_entries, 1e-9);

  SteeringPlan plan = foliated ? steer_foliated_T3(h, xi, cfg) : steer(h, xi, cfg);

  Json j = to_json(plan);
  j["config"] = echo;
  out.write_json("plan.json", j);

  auto csv = out.csv("steps.csv", "steer-steps-v1");
  csv << "step,mode,rounds,estimations,support,certified,gap";
  const int dm1 = h.dim() - 1;
  for (int k = 1; k <= dm1; ++k) csv << ",eta_" << k;
  for (int k = 1; k <= dm1; ++k) csv << ",measured_hat_" << k;
  for (int k = 1; k <= dm1; ++k) csv << ",t_" << k;
  csv << "\n";
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    const auto& s = plan.steps[i];
    csv << i << "," << to_string(s.mode) << "," << s.rounds << "," << s.estimations << ","
        << fmt17(s.support) << "," << (s.certified ? 1 : 0) << "," << fmt17(s.gap);
    for (int k = 0; k < dm1; ++k) csv << "," << fmt17(s.eta[k]);
    for (int k = 0; k < dm1; ++k) csv << "," << fmt17(s.measured_hat[k]);
    for (int k = 0; k < dm1; ++k) csv << "," << fmt17(s.t[k]);
    csv << "\n";
  }

  std::cout << "status=" << plan.status << " steps=" << plan.steps.size();
  if (!plan.steps.empty()) {
    std::cout << " final:";
    for (double v : plan.steps.back().measured) std::cout << " " << fmt17(v);
  }
  std::cout << "\n";
  if (plan.status == "aborted-gap-violation") return kCertificationFailure;
  if (!plan.reached) return kSteeringStalled;
  return kOk;
}

int cmd_verify(const std::string& check, int d, std::uint64_t seed, const Output& out,
               const Json& echo) {
  Rng rng(seed);
  bool pass = true;
  Json j{{"schema_version", kSchemaVersion}, {"config", echo}, {"check", check}};

  if (check == "minors") {
    BumpProfile profile = calibrate_profile(d, 1.0, seed);
    auto csv = out.csv("residuals.csv", "verify-minors-v1");
    csv << "sample,j,residual\n";
    double worst = 0.0;
    for (int s = 0; s < 2000; ++s) {
      Vec t(d - 1), b = Vec::Ones(d - 1);
      for (int k = 0; k < d - 1; ++k) t[k] = rng.u01();
      ModelDeformation m(d, profile, b, t);
      Vec z = rng.ball_point(d);
      Mat J = m.jacobian(z);
      for (int jj = 1; jj <= d - 1; ++jj) {
        double direct = J.topLeftCorner(jj, jj).determinant();
        double res = std::abs(m.principal_minor(z, jj) - direct);
        worst = std::max(worst, res);
        csv << s << "," << jj << "," << fmt17(res) << "\n";
        if (res >= 1e-10) pass = false;
      }
    }
    j["max_residual"] = worst;
  } else if (check == "cones") {
    BumpProfile profile = calibrate_profile(d, 1.0, seed);
    ModelDeformation m(d, profile, Vec::Ones(d - 1), Vec::Ones(d - 1));
    ConeConstants cc = calibrate_cones(m, 0.1, seed, 40000);
    j["cones"] = to_json(cc);
  } else if (check == "volume") {
    BumpProfile profile = calibrate_profile(d, 1.0, seed);
    double worst = 0.0;
    for (int s = 0; s < 2000; ++s) {
      Vec t(d - 1);
      for (int k = 0; k < d - 1; ++k) t[k] = rng.u01();
      ModelDeformation m(d, profile, Vec::Ones(d - 1), t);
      Vec z = rng.ball_point(d);
      worst = std::max(worst, std::abs(m.jacobian(z).determinant() - 1.0));
    }
    j["max_det_deviation"] = worst;
    pass = worst < 1e-10;
  } else if (check == "majorization") {
    int trials = 2000, bad = 0;
    for (int s = 0; s < trials; ++s) {
      int dim = 2 + static_cast<int>(rng.bits() % 7);
      std::vector<double> v(dim);
      double sum = 0.0;
      for (auto& x : v) {
        x = rng.normal();
        sum += x;
      }
      for (auto& x : v) x -= sum / dim;
      std::sort(v.begin(), v.end(), std::greater<double>());
      OrderedSpectrum spec(v, 1e-9);
      Mat P = Mat::Zero(dim, dim);
      for (int k = 0; k < 10; ++k) {
        std::vector<int> perm(dim);
        for (int i = 0; i < dim; ++i) perm[i] = i;
        for (int i = dim - 1; i > 0; --i)
          std::swap(perm[i], perm[rng.bits() % (i + 1)]);
        for (int i = 0; i < dim; ++i) P(i, perm[i]) += 0.1;
      }
      auto mixed = mix(spec, DoublyStochasticMatrix(P, 1e-9), 1e-9);
      if (compare(spec, mixed, 1e-9) == MajOrder::incomparable) ++bad;
    }
    j["violations"] = bad;
    pass = bad == 0;
  } else {
    throw Error(Errc::invalid_input, "unknown check: " + check);
  }

  j["pass"] = pass;
  out.write_json("verify.json", j);
  std::cout << "verify " << check << ": " << (pass ? "pass" : "FAIL") << "\n";
  return pass ? kOk : kCertificationFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conservative torus dynamics: spectra, deformations, steering"};
  app.require_subcommand(1);

  const char* env_out = std::getenv("ANOSOV_OUT");
  std::string out_dir = env_out ? env_out : "out";
  int threads = 1;
  std::uint64_t seed = 1;
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads, "worker threads for orbit estimation");
  app.add_option("--seed", seed, "global seed");

  // construct-matrix
  auto* cm = app.add_subcommand("construct-matrix", "integer Anosov matrix with given index");
  int cm_d = 2, cm_u = 1, cm_b = 3;
  cm->add_option("--dim", cm_d, "dimension")->required();
  cm->add_option("--index", cm_u, "unstable index")->required();
  cm->add_option("--base", cm_b, "integer base (>= 3)");

  // spectrum
  auto* sp = app.add_subcommand("spectrum", "Lyapunov spectrum of a matrix map");
  std::string sp_matrix;
  EstimatorConfig sp_cfg;
  sp->add_option("--matrix", sp_matrix, "matrix JSON file")->required();
  sp->add_option("--orbits", sp_cfg.orbits, "number of orbits");
  sp->add_option("--length", sp_cfg.length, "orbit length");
  sp->add_option("--burn-in", sp_cfg.burn_in, "discarded alignment steps");

  // q-table
  auto* qt = app.add_subcommand("q-table", "CSV of the deformation cost Q(s)");
  int qt_d = 2, qt_points = 50;
  double qt_amp = 1.0;
  qt->add_option("--dim", qt_d, "dimension");
  qt->add_option("--points", qt_points, "grid points");
  qt->add_option("--amplitude", qt_amp, "bump amplitude before backtracking");

  // deform
  auto* df = app.add_subcommand("deform", "one perturbation round: build, predict, measure");
  std::string df_matrix;
  double df_radius = 0.01, df_nu = 0.2, df_t = 1.0;
  int df_budget = 64, df_tower = 0;
  EstimatorConfig df_cfg;
  df_cfg.orbits = 8;
  df_cfg.length = 400000;
  df->add_option("--matrix", df_matrix, "matrix JSON file")->required();
  df->add_option("--radius", df_radius, "ball radius");
  df->add_option("--budget", df_budget, "ball budget");
  df->add_option("--tower", df_tower, "tower height (raised to N0 if below)");
  df->add_option("--nu", df_nu, "minor-cone tolerance");
  df->add_option("--t", df_t, "deformation parameter in [0,1]");
  df->add_option("--orbits", df_cfg.orbits, "orbits per estimate");
  df->add_option("--length", df_cfg.length, "orbit length");

  // steer / steer-t3
  auto* st = app.add_subcommand("steer", "steer the spectrum to a target");
  auto* st3 = app.add_subcommand("steer-t3", "foliated steering on T^3 (pins lambda_3)");
  std::string st_matrix, st_target, st3_matrix, st3_target;
  SteerConfig st_cfg, st3_cfg;
  st->add_option("--matrix", st_matrix, "matrix JSON file")->required();
  st->add_option("--target", st_target, "comma-separated target spectrum")->required();
  st->add_option("--tol", st_cfg.tol, "final tolerance on spectrum entries");
  st->add_option("--radius", st_cfg.radius, "ball radius for rounds");
  st->add_option("--budget", st_cfg.ball_budget, "ball budget per round");
  st->add_option("--waypoints", st_cfg.waypoints, "waypoint count (0 = auto)");
  st->add_option("--orbits", st_cfg.est.orbits, "orbits per estimate");
  st->add_option("--length", st_cfg.est.length, "orbit length per estimate");
  st3->add_option("--matrix", st3_matrix, "matrix JSON file")->required();
  st3->add_option("--target", st3_target, "comma-separated target spectrum")->required();
  st3->add_option("--tol", st3_cfg.tol, "final tolerance on spectrum entries");
  st3->add_option("--radius", st3_cfg.radius, "ball radius for rounds");
  st3->add_option("--budget", st3_cfg.ball_budget, "ball budget per round");
  st3->add_option("--waypoints", st3_cfg.waypoints, "waypoint count (0 = auto)");
  st3->add_option("--orbits", st3_cfg.est.orbits, "orbits per estimate");
  st3->add_option("--length", st3_cfg.est.length, "orbit length per estimate");

  // verify
  auto* vf = app.add_subcommand("verify", "internal identity and invariant checks");
  std::string vf_check;
  int vf_d = 3;
  vf->add_option("--check", vf_check, "minors|cones|volume|majorization")->required();
  vf->add_option("--dim", vf_d, "dimension");

  CLI11_PARSE(app, argc, argv);

  try {
    Output out(out_dir);
    Json echo;
    echo["seed"] = seed;
    echo["threads"] = threads;
    echo["out"] = out_dir;

    if (cm->parsed()) {
      echo["subcommand"] = "construct-matrix";
      echo["dim"] = cm_d;
      echo["index"] = cm_u;
      echo["base"] = cm_b;
      return cmd_construct_matrix(cm_d, cm_u, cm_b, out, echo);
    }
    if (sp->parsed()) {
      sp_cfg.seed = seed;
      sp_cfg.threads = threads;
      echo["subcommand"] = "spectrum";
      echo["matrix"] = sp_matrix;
      echo["estimator"] = to_json(sp_cfg);
      return cmd_spectrum(sp_matrix, sp_cfg, out, echo);
    }
    if (qt->parsed()) {
      echo["subcommand"] = "q-table";
      echo["dim"] = qt_d;
      echo["points"] = qt_points;
      echo["amplitude"] = qt_amp;
      return cmd_q_table(qt_d, qt_points, qt_amp, out, echo);
    }
    if (df->parsed()) {
      df_cfg.seed = seed;
      df_cfg.threads = threads;
      echo["subcommand"] = "deform";
      echo["matrix"] = df_matrix;
      echo["radius"] = df_radius;
      echo["budget"] = df_budget;
      echo["tower"] = df_tower;
      echo["nu"] = df_nu;
      echo["t"] = df_t;
      echo["estimator"] = to_json(df_cfg);
      return cmd_deform(df_matrix, df_radius, df_budget, df_tower, df_nu, df_t, df_cfg, seed,
                        out, echo);
    }
    if (st->parsed()) {
      st_cfg.seed = seed;
      st_cfg.est.threads = threads;
      echo["subcommand"] = "steer";
      echo["matrix"] = st_matrix;
      echo["target"] = st_target;
      echo["tol"] = st_cfg.tol;
      return run_steer(false, st_matrix, st_target, st_cfg, out, echo);
    }
    if (st3->parsed()) {
      st3_cfg.seed = seed;
      st3_cfg.est.threads = threads;
      echo["subcommand"] = "steer-t3";
      echo["matrix"] = st3_matrix;
      echo["target"] = st3_target;
      echo["tol"] = st3_cfg.tol;
      return run_steer(true, st3_matrix, st3_target, st3_cfg, out, echo);
    }
    if (vf->parsed()) {
      echo["subcommand"] = "verify";
      echo["check"] = vf_check;
      echo["dim"] = vf_d;
      return cmd_verify(vf_check, vf_d, seed, out, echo);
    }
  } catch (const Error& e) {
    emit_error(e);
    return exit_code_for(e);
  } catch (const std::exception& e) {
    Json j{{"error", "unexpected"}, {"message", e.what()}};
    std::cerr << j.dump() << "\n";
    return kNumericFailure;
  }
  return kOk;
}
