#include "anosov/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace anosov {

namespace {

std::vector<double> prefix_sums(const std::vector<double>& v, int upto) {
  std::vector<double> h(upto);
  double acc = 0.0;
  for (int j = 0; j < upto; ++j) {
    acc += v[j];
    h[j] = acc;
  }
  return h;
}

double raw_gap(const std::vector<double>& v, int u) {
  double g = std::min(v[u - 1], -v[u]);
  for (std::size_t i = 0; i + 1 < v.size(); ++i) g = std::min(g, v[i] - v[i + 1]);
  return g;
}

double max_axis_reach(const Mat& M) {
  double r = 0.0;
  for (int a = 0; a < M.rows(); ++a) r = std::max(r, M.row(a).norm());
  return r;
}

struct PlanContext {
  const HyperbolicAutomorphism* L = nullptr;
  const SteerConfig* cfg = nullptr;
  BumpProfile profile{1.0};
  std::optional<QFunction> q;
  ConeConstants cones;
  double sigma_damping = 0.0;
  bool foliated = false;
  std::uint64_t estimation_counter = 0;
  double cur_radius = 0.0;   // shrinks when kicks stop biting
  int degrade_streak = 0;
  double coherence_tol = 0.25;  // relaxed when no coherent territory remains
};

SpectrumEstimate measure(const PerturbedMap& f, PlanContext& ctx) {
  EstimatorConfig ec = ctx.cfg->est;
  ec.seed = ctx.cfg->seed * 1000003ull + (++ctx.estimation_counter) * 7919ull;
  return estimate_spectrum(f, ec);
}

// Chart frames for a round. Certificates run against the base eigenframe;
// accepted centers are then refined to the current map's Oseledets frame,
// and rejected when the direction field is not coherent across the ball
// (kicks landing on incoherent territory produce no systematic shift, so
// such centers are worthless as supports).
std::function<Mat(const Vec&)> make_refine_fn(const PerturbedMap& f, const PlanContext& ctx,
                                              double radius) {
  const int d = f.dim();
  if (f.layers().empty() && !ctx.foliated) return {};
  const Mat V0 = ctx.L->eigenvectors();
  const bool foliated = ctx.foliated;
  const int horizon = ctx.cfg->direction_horizon;
  const double coh_tol = ctx.coherence_tol;  // radians
  const PerturbedMap map = f;  // frames outlive the caller's reference
  return [map, V0, d, foliated, horizon, coh_tol, radius](const Vec& c) -> Mat {
    Mat V(d, d);
    try {
      for (int j = 1; j <= d; ++j) V.col(j - 1) = oseledets_direction(map, c, j, horizon).v;
      if (!map.layers().empty()) {
        // probe the field across the ball; reject incoherent spots
        Rng prng(static_cast<std::uint64_t>(c[0] * 1e9) ^
                 static_cast<std::uint64_t>(c[d - 1] * 1e6));
        for (int probe = 0; probe < 3; ++probe) {
          Vec p = torus_wrap(c + 0.7 * radius * (V0 * prng.unit_vector(d)));
          for (int j = 1; j <= d; ++j) {
            Vec w = oseledets_direction(map, p, j, horizon).v;
            double cosang = std::clamp(std::abs(w.dot(V.col(j - 1))), 0.0, 1.0);
            if (std::acos(cosang) > coh_tol) return Mat::Zero(d, d);
          }
        }
      }
    } catch (const Error&) {
      return Mat::Zero(d, d);
    }
    if (foliated) {
      Mat B = V0.leftCols(2);
      Mat P = B * (B.transpose() * B).inverse() * B.transpose();
      for (int j = 0; j < 2; ++j) {
        Vec w = P * V.col(j);
        double n = w.norm();
        if (n < 1e-6) return Mat::Zero(d, d);
        V.col(j) = w / n;
      }
    }
    return V;
  };
}

struct RoundAttempt {
  bool hit = false;
  std::optional<PerturbedMap> map;
  SpectrumEstimate est;
  Vec t, b;
  double support = 0.0;
  int estimations = 0;
  DampingParameters params;
  std::string note;
};

// One perturbation round driving the summed spectrum toward eta by damped
// per-coordinate secant iteration on t.
RoundAttempt run_round(const PerturbedMap& f_cur, const std::vector<double>& hat_cur,
                       const std::vector<double>& eta, int N, double radius,
                       PlanContext& ctx, RoundMode mode, std::uint64_t seed) {
  const int d = f_cur.dim();
  const int dm1 = d - 1;
  const SteerConfig& cfg = *ctx.cfg;

  Vec need(dm1);
  for (int j = 0; j < dm1; ++j) need[j] = std::max(0.0, hat_cur[j] - eta[j]);
  const double need_max = need.maxCoeff();

  double inflation = 0.0;
  if (N >= 2)
    for (const auto& layer : f_cur.layers())
      for (const auto& b : layer.balls)
        inflation =
            std::max(inflation, 2.0 * b.radius() * b.frame().jacobiSvd().singularValues()[0]);

  const Mat V0 = ctx.L->eigenvectors();
  // smaller balls need proportionally more of them to carry the same support
  const int budget = static_cast<int>(std::min<long long>(
      2500, static_cast<long long>(cfg.ball_budget *
                                   std::pow(cfg.radius / radius, f_cur.dim()))));
  PlacementResult placed;
  try {
    placed = place_balls(*ctx.L, N, radius, budget, seed,
                         [V0](const Vec&) { return V0; }, inflation,
                         make_refine_fn(f_cur, ctx, radius));
  } catch (const Error& e) {
    if (e.code() != Errc::placement_failed) throw;
    RoundAttempt none;
    none.note = "placement failed at this radius";
    return none;  // the caller adapts the schedule
  }
  const double mz = placed.support_measure;
  const bool debug = std::getenv("ANOSOV_DEBUG") != nullptr;
  if (debug)
    std::fprintf(stderr, "[round] layers=%zu mz=%.4f balls=%zu need=%.5f\n",
                 f_cur.layers().size(), mz, placed.balls.size(), need.maxCoeff());

  Vec b(dm1), qtarget(dm1);
  for (int j = 0; j < dm1; ++j) {
    if (ctx.foliated && j > 0) {
      qtarget[j] = 0.0;
      b[j] = 0.0;
      continue;
    }
    qtarget[j] = std::clamp(1.35 * need[j] / mz, 0.0, 0.98 * ctx.q->q1());
    b[j] = ctx.q->inverse_least(qtarget[j]);
  }

  RoundAttempt at;
  at.b = b;
  at.support = mz;
  at.params.cones = ctx.cones;
  at.params.sigma = ctx.sigma_damping;
  at.params.N = N;
  at.params.delta0 = std::max(qtarget.maxCoeff() / 3.0, 1e-12);
  at.params.a = Vec(dm1);
  for (int j = 0; j < dm1; ++j)
    at.params.a[j] = need_max > 0.0 ? need[j] / need_max : (j == 0 ? 1.0 : 0.0);
  at.params.epsilon = radius;

  Vec t(dm1);
  for (int j = 0; j < dm1; ++j) {
    t[j] = 0.0;
    if (b[j] > 0.0 && need[j] > 0.0)
      t[j] = std::clamp(ctx.q->inverse_least(std::min(need[j] / mz, 0.98 * ctx.q->q1())) / b[j],
                        0.0, 1.0);
  }

  Vec t_prev = Vec::Zero(dm1);
  std::vector<double> hat_prev = hat_cur;
  Vec t_cur = t;

  for (int it = 0; it < cfg.max_estimations_per_round; ++it) {
    PerturbedMap f_t = build_round(f_cur, at.params, placed.balls, ctx.profile, b, t_cur);
    SpectrumEstimate est = measure(f_t, ctx);
    ++at.estimations;
    std::vector<double> hat_t(est.summed.begin(), est.summed.begin() + dm1);

    double miss = 0.0;
    for (int j = 0; j < dm1; ++j)
      if (!(ctx.foliated && j > 0)) miss = std::max(miss, std::abs(hat_t[j] - eta[j]));
    if (debug)
      std::fprintf(stderr, "[round]   it=%d t=%.4f hat1=%.6f eta1=%.6f miss=%.2e err=%.1e\n",
                   it, t_cur[0], hat_t[0], eta[0], miss, est.summed_errors[0]);

    at.map = f_t;
    at.est = est;
    at.t = t_cur;
    if (miss <= cfg.step_tol) {
      at.hit = true;
      return at;
    }

    Vec t_next = t_cur;
    bool movable = false;
    for (int j = 0; j < dm1; ++j) {
      if (b[j] <= 0.0) continue;
      const double g_cur = hat_t[j] - eta[j];
      const double denom = hat_t[j] - hat_prev[j];
      double step;
      if (std::abs(denom) > 1e-12 && std::abs(t_cur[j] - t_prev[j]) > 1e-9) {
        step = -g_cur * (t_cur[j] - t_prev[j]) / denom;
      } else {
        step = g_cur > 0.0 ? 0.25 * (1.0 - t_cur[j]) : -0.25 * t_cur[j];
      }
      step = std::clamp(step, -0.5, 0.5);
      double nt = std::clamp(t_cur[j] + step, 0.0, 1.0);
      if (std::abs(nt - t_cur[j]) > 1e-9) movable = true;
      t_next[j] = nt;
    }
    if (!movable) {
      at.note = "secant pinned at the parameter boundary";
      return at;  // not hit; the caller adds another round
    }
    t_prev = t_cur;
    hat_prev = hat_t;
    t_cur = t_next;
  }
  at.note = "estimation budget exhausted";
  return at;
}

void record_step(SteeringPlan& plan, const std::vector<double>& eta, const RoundAttempt& at,
                 int rounds, RoundMode mode, bool certified, int u, double lambda3_ref) {
  SteeringStep st;
  st.eta = eta;
  st.measured = at.est.values;
  st.measured_hat = at.est.summed;
  st.errors = at.est.errors;
  st.t.assign(at.t.data(), at.t.data() + at.t.size());
  st.amplitudes.assign(at.b.data(), at.b.data() + at.b.size());
  st.support = at.support;
  st.rounds = rounds;
  st.estimations = at.estimations;
  st.mode = mode;
  st.certified = certified;
  st.gap = raw_gap(at.est.values, u);
  if (!std::isnan(lambda3_ref)) st.lambda3_drift = at.est.values.back() - lambda3_ref;
  plan.steps.push_back(std::move(st));
}

SteeringPlan steer_impl(const HyperbolicAutomorphism& f0, const OrderedSpectrum& xi,
                        const SteerConfig& cfg, bool foliated) {
  const int d = f0.dim();
  const int dm1 = d - 1;
  const int u = f0.unstable_index();

  if (foliated && d != 3)
    throw Error(Errc::invalid_input, "foliated steering is specific to dimension 3");
  if (xi.dim() != d) throw Error(Errc::invalid_target, "target dimension mismatch");

  const double lambda3_ref = foliated ? f0.spectrum()[2] : std::nan("");
  if (foliated && std::abs(xi[2] - lambda3_ref) > 1e-12)
    throw Error(Errc::invalid_target, "foliated target must pin the third exponent exactly");

  // the trivial target is already realized by the start map
  double start_miss = 0.0;
  for (int i = 0; i < d; ++i) start_miss = std::max(start_miss, std::abs(xi[i] - f0.spectrum()[i]));
  if (start_miss <= cfg.tol) {
    SteeringPlan plan;
    plan.seed = cfg.seed;
    plan.start = f0.spectrum().entries();
    plan.target = xi.entries();
    plan.sigma_path = 0.5 * std::min(gap(f0.spectrum(), u), gap(xi, u));
    plan.reached = true;
    plan.status = "ok";
    plan.final_map = PerturbedMap(f0);
    return plan;
  }

  TargetReport tr = validate_target(xi, f0.spectrum(), u, /*strict=*/!foliated);
  if (!tr.pass)
    throw Error(Errc::invalid_target, "target rejected: " + std::string(tr.ordered_strict
                    ? (tr.sign_pattern_ok ? "majorization fails" : "sign pattern fails")
                    : "ordering fails"));

  SteeringPlan plan;
  plan.seed = cfg.seed;
  plan.start = f0.spectrum().entries();
  plan.target = xi.entries();
  plan.sigma_path = 0.5 * std::min(gap(f0.spectrum(), u), gap(xi, u));

  PlanContext ctx;
  ctx.L = &f0;
  ctx.cfg = &cfg;
  ctx.foliated = foliated;
  ctx.profile = calibrate_profile(d, cfg.profile_amplitude, cfg.seed + 5);
  ctx.q.emplace(ctx.profile, d);
  plan.q1 = ctx.q->q1();
  ctx.sigma_damping = 1.9 * gap(f0.spectrum(), u);
  ctx.cur_radius = cfg.radius;
  {
    Vec ones = Vec::Ones(dm1);
    if (foliated)
      for (int j = 1; j < dm1; ++j) ones[j] = 0.0;
    ModelDeformation worst(d, ctx.profile, ones, Vec::Ones(dm1));
    ctx.cones = calibrate_cones(worst, cfg.nu, cfg.seed + 9, 40000);
  }

  PerturbedMap f_cur{f0};
  std::vector<double> hat0 = prefix_sums(plan.start, dm1);
  std::vector<double> hat_target = prefix_sums(plan.target, dm1);
  std::vector<double> hat_cur = hat0;
  std::vector<double> lambda_cur = plan.start;
  std::vector<double> err_cur(d, 0.0);

  auto check_health = [&](const RoundAttempt& at, const std::vector<double>& hat_before,
                          const std::vector<double>& err_before) -> bool {
    double g = raw_gap(at.est.values, u);
    if (g < plan.sigma_path) {
      plan.status = "aborted-gap-violation";
      return false;
    }
    for (int j = 0; j < dm1; ++j) {
      double tol = 3.0 * (err_before[j] + at.est.summed_errors[j]) + 1e-4;
      if (at.est.summed[j] > hat_before[j] + tol) {
        plan.status = "steering-stalled";  // monotonicity lost beyond noise
        return false;
      }
    }
    return true;
  };

  std::uint64_t round_seed = cfg.seed * 77ull + 13ull;

  // --- first step: rigorous when the certified tower is geometrically feasible
  if (cfg.attempt_rigorous_first) {
    Vec delta(dm1);
    for (int j = 0; j < dm1; ++j) delta[j] = hat0[j] - hat_target[j];
    double dmax = delta.maxCoeff();
    Vec a = delta / dmax;
    double delta0 = std::min(0.4, ctx.q->q1() / 3.06);
    Vec b(dm1);
    for (int j = 0; j < dm1; ++j)
      b[j] = a[j] > 0.0 ? ctx.q->inverse_least(3.0 * delta0 * a[j]) : 0.0;

    ModelDeformation round_def(d, ctx.profile, b.cwiseMax(1e-8), Vec::Ones(dm1));
    ConeConstants cones_r = calibrate_cones(round_def, cfg.nu, cfg.seed + 21, 40000);
    int N0 = damping_horizon(cones_r, ctx.sigma_damping);

    double maxreach = 0.0;
    Mat P = Mat::Identity(d, d);
    for (int n = 0; n < N0; ++n) {
      maxreach = std::max(maxreach, max_axis_reach(P * f0.eigenvectors()));
      P = f0.matrix() * P;
    }
    double r_feas = 0.95 * 2.0 / (2.0 * maxreach);
    double radius = std::min(cfg.radius, r_feas);

    if (radius >= 5e-4) {
      PlacementResult placed =
          place_balls(f0, N0, radius, cfg.ball_budget, cfg.seed + 31, {}, 0.0);
      const double mz = placed.support_measure;
      std::vector<double> eta(dm1);
      for (int j = 0; j < dm1; ++j) eta[j] = hat0[j] - 0.6 * mz * 3.0 * delta0 * a[j];

      DampingParameters params;
      params.cones = cones_r;
      params.sigma = ctx.sigma_damping;
      params.N = N0;
      params.delta0 = delta0;
      params.a = a;
      params.epsilon = radius;
      params.validate(/*rigorous=*/true);

      // secant on the rigorous round, reusing the generic driver's shape
      RoundAttempt at;
      at.b = b;
      at.support = mz;
      at.params = params;
      Vec t = Vec::Zero(dm1);
      for (int j = 0; j < dm1; ++j)
        if (b[j] > 0.0)
          t[j] = std::clamp(
              ctx.q->inverse_least(std::min(0.6 * 3.0 * delta0 * a[j], 0.98 * ctx.q->q1())) / b[j],
              0.0, 1.0);
      Vec t_prev = Vec::Zero(dm1);
      std::vector<double> hat_prev = hat_cur;
      for (int it = 0; it < cfg.max_estimations_per_round; ++it) {
        PerturbedMap f_t = build_round(f_cur, params, placed.balls, ctx.profile, b, t);
        SpectrumEstimate est = measure(f_t, ctx);
        ++at.estimations;
        std::vector<double> hat_t(est.summed.begin(), est.summed.begin() + dm1);
        at.map = f_t;
        at.est = est;
        at.t = t;
        double miss = 0.0;
        for (int j = 0; j < dm1; ++j)
          if (!(foliated && j > 0)) miss = std::max(miss, std::abs(hat_t[j] - eta[j]));
        if (miss <= cfg.step_tol) {
          at.hit = true;
          break;
        }
        for (int j = 0; j < dm1; ++j) {
          if (b[j] <= 0.0) continue;
          double denom = hat_t[j] - hat_prev[j];
          double step = std::abs(denom) > 1e-12 && std::abs(t[j] - t_prev[j]) > 1e-9
                            ? -(hat_t[j] - eta[j]) * (t[j] - t_prev[j]) / denom
                            : (hat_t[j] > eta[j] ? 0.2 : -0.2);
          t_prev[j] = t[j];
          t[j] = std::clamp(t[j] + std::clamp(step, -0.5, 0.5), 0.0, 1.0);
        }
        hat_prev = hat_t;
      }

      if (at.estimations > 0) {
        DampingReport dr = check_damping(*at.map, params, 20000, cfg.seed + 41);
        bool cert = dr.pass;
        if (!check_health(at, hat_cur, std::vector<double>(dm1, 0.0))) {
          record_step(plan, eta, at, 1, RoundMode::rigorous, cert, u, lambda3_ref);
          plan.final_map = *at.map;
          return plan;
        }
        record_step(plan, eta, at, 1, RoundMode::rigorous, cert, u, lambda3_ref);
        f_cur = *at.map;
        lambda_cur = at.est.values;
        hat_cur.assign(at.est.summed.begin(), at.est.summed.begin() + dm1);
        err_cur = at.est.summed_errors;
      }
    }
  }

  // --- empirical waypoints toward the target
  double remaining = 0.0;
  for (int j = 0; j < dm1; ++j) remaining = std::max(remaining, hat_cur[j] - hat_target[j]);
  int n_steps = cfg.waypoints > 0
                    ? cfg.waypoints
                    : std::clamp(static_cast<int>(std::ceil(remaining / cfg.per_step_cap)), 1, 80);
  std::vector<double> hat_anchor = hat_cur;

  for (int i = 1; i <= n_steps; ++i) {
    std::vector<double> eta(dm1);
    for (int j = 0; j < dm1; ++j)
      eta[j] = hat_anchor[j] + (hat_target[j] - hat_anchor[j]) * (double(i) / n_steps);

    int rounds = 0;
    bool hit = false;
    RoundAttempt last;
    while (rounds < cfg.max_rounds_per_step) {
      double miss = 0.0;
      for (int j = 0; j < dm1; ++j)
        if (!(foliated && j > 0)) miss = std::max(miss, std::abs(hat_cur[j] - eta[j]));
      if (miss <= cfg.step_tol && rounds > 0) {
        hit = true;
        break;
      }
      RoundAttempt at = run_round(f_cur, hat_cur, eta, cfg.tower_height, ctx.cur_radius, ctx,
                                  RoundMode::empirical, ++round_seed);
      ++rounds;
      if (at.estimations == 0) {
        // no coherent territory at this scale: shrink, then relax the filter
        if (ctx.cur_radius > 1.6e-3) {
          ctx.cur_radius = std::max(0.5 * ctx.cur_radius, 1.5e-3);
        } else if (ctx.coherence_tol < 1.0) {
          ctx.coherence_tol *= 2.0;
          ctx.cur_radius = 0.25 * cfg.radius;
        } else {
          break;
        }
        if (std::getenv("ANOSOV_DEBUG"))
          std::fprintf(stderr, "[plan] reschedule: radius=%.4f coherence=%.2f\n",
                       ctx.cur_radius, ctx.coherence_tol);
        continue;
      }
      if (!check_health(at, hat_cur, err_cur)) {
        record_step(plan, eta, at, rounds, RoundMode::empirical, false, u, lambda3_ref);
        plan.final_map = *at.map;
        return plan;
      }
      // kicks that stop biting mean the support landed on territory the
      // coherence filter should have excluded at a finer scale; shrink
      {
        double expected = 0.0, actual = 0.0, noise = 0.0;
        for (int j = 0; j < dm1; ++j) {
          if (foliated && j > 0) continue;
          double s_eff = at.b[j] * at.t[j];
          if (s_eff > 0.0)
            expected = std::max(expected, at.support * (*ctx.q)(s_eff));
          actual = std::max(actual, hat_cur[j] - at.est.summed[j]);
          noise = std::max(noise, at.est.summed_errors[j]);
        }
        if (expected > std::max(8.0 * noise, 2e-4)) {
          if (actual < 0.35 * expected)
            ++ctx.degrade_streak;
          else
            ctx.degrade_streak = 0;
          if (ctx.degrade_streak >= 2) {
            ctx.cur_radius = std::max(0.5 * ctx.cur_radius, 1.5e-3);
            ctx.degrade_streak = 0;
            if (std::getenv("ANOSOV_DEBUG"))
              std::fprintf(stderr, "[plan] radius -> %.4f\n", ctx.cur_radius);
          }
        }
      }
      f_cur = *at.map;
      lambda_cur = at.est.values;
      hat_cur.assign(at.est.summed.begin(), at.est.summed.begin() + dm1);
      err_cur = at.est.summed_errors;
      last = at;
      if (at.hit) {
        hit = true;
        break;
      }
    }
    if (last.estimations == 0) {
      plan.status = "steering-stalled";
      plan.final_map = f_cur;
      return plan;
    }

    bool certified = false;
    if (!f_cur.layers().empty()) {
      auto rep = cone_contraction_check(f_cur, 1, ctx.cones.beta, 3 * cfg.tower_height + 4,
                                        cfg.cone_check_samples, ctx.cones.gamma, cfg.tower_height,
                                        cfg.seed + 1000 + i);
      certified = rep.pass;
    }
    record_step(plan, eta, last, rounds, RoundMode::empirical, certified, u, lambda3_ref);
    if (!hit) {
      plan.status = "steering-stalled";
      plan.final_map = f_cur;
      return plan;
    }
  }

  double final_miss = 0.0;
  for (int i = 0; i < d; ++i) final_miss = std::max(final_miss, std::abs(lambda_cur[i] - xi[i]));
  plan.reached = final_miss <= cfg.tol;
  plan.status = plan.reached ? "ok" : "steering-stalled";
  plan.final_map = f_cur;
  return plan;
}

}  // namespace

PerturbedMap build_round(const PerturbedMap& f, const DampingParameters& params,
                         const std::vector<ChartedBall>& balls, const BumpProfile& profile,
                         const Vec& amplitudes, const Vec& t) {
  if (balls.empty()) throw Error(Errc::invalid_input, "round needs at least one ball");
  params.validate(/*rigorous=*/false);
  PerturbationLayer layer{balls, ModelDeformation(f.dim(), profile, amplitudes, t)};
  return f.with_layer(std::move(layer));
}

ShiftPrediction predict_shift(const PerturbationRound& round) {
  const auto& layer = round.map.layers().back();
  const int dm1 = round.map.dim() - 1;
  const double mz = layer.support_measure();
  ShiftPrediction p;
  p.shift.resize(dm1);
  p.band.resize(dm1);
  const BumpProfile& profile = layer.deformation.profile();
  for (int j = 0; j < dm1; ++j) {
    double s = layer.deformation.amplitudes()[j] * layer.deformation.parameters()[j];
    p.shift[j] = s > 0.0 ? -mz * q_of(s, profile, round.map.dim()) : 0.0;
    p.band[j] = mz * round.params.cones.nu;
  }
  return p;
}

MeasuredShift measure_shift(const PerturbedMap& f_base, const PerturbedMap& f_t,
                            const EstimatorConfig& cfg) {
  const int dm1 = f_base.dim() - 1;
  EstimatorConfig cb = cfg;
  cb.seed = cfg.seed + 101;
  SpectrumEstimate e0 = estimate_spectrum(f_base, cb);
  SpectrumEstimate e1 = estimate_spectrum(f_t, cfg);
  MeasuredShift out;
  out.shift.resize(dm1);
  out.error.resize(dm1);
  for (int j = 0; j < dm1; ++j) {
    out.shift[j] = e1.summed[j] - e0.summed[j];
    out.error[j] = std::hypot(e1.summed_errors[j], e0.summed_errors[j]);
  }
  return out;
}

PsiReport psi_check(const PerturbationRound& round, int j, int samples,
                    const EstimatorConfig& est_cfg, int horizon, double epsilon_budget,
                    std::uint64_t seed) {
  const PerturbedMap& f = round.map;
  const int d = f.dim();
  if (j < 1 || j > d - 1) throw Error(Errc::invalid_input, "psi index out of range");
  if (f.layers().size() != 1)
    throw Error(Errc::invalid_input, "psi_check applies to single-round maps");

  const PerturbationLayer& layer = f.layers().back();
  const Mat& V = f.base().eigenvectors();
  const Mat& Vinv = f.base().eigenvectors_inv();
  const auto& lam = f.base().spectrum();
  double sum_lambda = 0.0;
  for (int i = 0; i < j; ++i) sum_lambda += lam[i];

  PsiReport rep;
  rep.nu = round.params.cones.nu;
  rep.epsilon_budget = epsilon_budget;
  Rng rng(seed);

  auto log_psi_at = [&](const Vec& x, bool* ok) -> double {
    Mat W(d, j);
    for (int i = 1; i <= j; ++i) W.col(i - 1) = oseledets_direction(f, x, i, horizon).v;
    Mat Wf = Vinv * W;
    Mat A = Vinv * f.differential(x) * V;
    double den = Wf.topRows(j).determinant();
    double num = (A * Wf).topRows(j).determinant();
    if (!(num * den > 0.0)) {
      *ok = false;
      return 0.0;
    }
    *ok = true;
    return std::log(std::abs(num)) - std::log(std::abs(den));
  };

  // (a) Monte Carlo integral of log psi against the orbit estimate
  KahanSum sum, sumsq;
  int kept = 0;
  rep.max_off_support_dev = 0.0;
  for (int s = 0; s < samples; ++s) {
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = rng.u01();
    bool ok = true;
    double lp = log_psi_at(x, &ok);
    if (!ok) {
      ++rep.transversality_violations;
      continue;
    }
    sum.add(lp);
    sumsq.add(lp * lp);
    ++kept;
    bool on_ball = false;
    for (const auto& ball : layer.balls)
      if (ball.contains(x)) on_ball = true;
    if (!on_ball) rep.max_off_support_dev = std::max(rep.max_off_support_dev,
                                                     std::abs(lp - sum_lambda));
  }
  if (kept < 2) throw Error(Errc::numeric_failure, "psi sampling failed everywhere");
  rep.integral_logpsi = sum.value() / kept;
  double var = std::max(0.0, sumsq.value() / kept - sqr(rep.integral_logpsi));
  rep.integral_err = std::sqrt(var / kept);

  SpectrumEstimate est = estimate_spectrum(f, est_cfg);
  rep.lambda_hat = est.summed[j - 1];
  rep.lambda_hat_err = est.summed_errors[j - 1];
  double combined = 3.0 * std::hypot(rep.integral_err, rep.lambda_hat_err);
  rep.integral_ok = std::abs(rep.integral_logpsi - rep.lambda_hat) <= std::max(combined, 1e-9);
  rep.off_support_ok = rep.max_off_support_dev <= 1e-6;

  // (c) on-ball bound against nu + epsilon budget
  const int per_ball = std::max(4, samples / std::max<int>(8, 8 * layer.balls.size()));
  rep.max_on_ball_slack = 0.0;
  for (const auto& ball : layer.balls) {
    for (int s = 0; s < per_ball; ++s) {
      Vec z = rng.ball_point(d);
      Vec x = ball.chart(z);
      bool ok = true;
      double lp = log_psi_at(x, &ok);
      if (!ok) {
        ++rep.transversality_violations;
        continue;
      }
      double lm = std::log(layer.deformation.principal_minor(ball.chart_inverse(x), j));
      double dev = std::abs(lp - (sum_lambda + lm));
      rep.max_on_ball_slack = std::max(rep.max_on_ball_slack, dev - rep.nu);
      ++rep.on_ball_samples;
    }
  }
  rep.on_ball_ok = rep.max_on_ball_slack <= rep.epsilon_budget;
  rep.pass = rep.integral_ok && rep.off_support_ok && rep.on_ball_ok &&
             rep.transversality_violations == 0;
  return rep;
}

SteeringPlan steer(const HyperbolicAutomorphism& f0, const OrderedSpectrum& xi,
                   const SteerConfig& cfg) {
  return steer_impl(f0, xi, cfg, /*foliated=*/false);
}

SteeringPlan steer_foliated_T3(const HyperbolicAutomorphism& L, const OrderedSpectrum& xi,
                               const SteerConfig& cfg) {
  return steer_impl(L, xi, cfg, /*foliated=*/true);
}

StructuralZeroReport structural_zero_check(const PerturbedMap& f, int samples,
                                           std::uint64_t seed) {
  const int d = f.dim();
  if (d != 3) throw Error(Errc::invalid_input, "structural zero check is for dimension 3");
  const Mat& W = f.base().eigenvectors();
  const Mat& Winv = f.base().eigenvectors_inv();
  const double rate = std::exp(f.base().spectrum()[2]);
  StructuralZeroReport rep;
  Rng rng(seed);
  for (int s = 0; s < samples; ++s) {
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = rng.u01();
    Mat R = Winv * f.differential(x) * W;
    rep.max_offplane_leak =
        std::max({rep.max_offplane_leak, std::abs(R(2, 0)), std::abs(R(2, 1))});
    rep.max_rate_error = std::max(rep.max_rate_error, std::abs(std::abs(R(2, 2)) - rate));
    ++rep.samples;
  }
  rep.pass = rep.max_offplane_leak <= 1e-12 && rep.max_rate_error <= 1e-10;
  return rep;
}

BoundaryReport boundary_check(const SpectrumEstimate& est, const HyperbolicAutomorphism& L) {
  BoundaryReport rep;
  const auto& lam = L.spectrum();
  rep.lambda1 = est.values[0];
  rep.lambda1_err = est.errors[0];
  rep.lambda1_base = lam[0];
  rep.lhat2 = est.dim() >= 2 ? est.summed[1] : 0.0;
  rep.lhat2_err = est.dim() >= 2 ? est.summed_errors[1] : 0.0;
  rep.lhat2_base = est.dim() >= 2 ? lam[0] + lam[1] : 0.0;
  rep.slack1 = rep.lambda1_base + 3.0 * rep.lambda1_err - rep.lambda1;
  rep.slack2 = rep.lhat2_base + 3.0 * rep.lhat2_err - rep.lhat2;
  rep.pass = rep.slack1 >= 0.0 && rep.slack2 >= 0.0;
  return rep;
}

BoundaryReport boundary_check_T3(const PerturbedMap& f_t, const HyperbolicAutomorphism& L,
                                 const EstimatorConfig& cfg) {
  return boundary_check(estimate_spectrum(f_t, cfg), L);
}

}  // namespace anosov
