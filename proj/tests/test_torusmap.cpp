#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"

using namespace anosov;
using namespace testing_support;

namespace {

// a small single-layer perturbation of the cat map for reuse across cases
PerturbedMap perturbed_cat(double t_value, double radius = 0.03, int N = 2,
                           std::uint64_t seed = 1) {
  auto cat = cat_map();
  auto placed = place_balls(cat, N, radius, 24, seed);
  BumpProfile profile(1.0);
  Vec b = Vec::Ones(1), t = Vec::Constant(1, t_value);
  PerturbationLayer layer{placed.balls, ModelDeformation(2, profile, b, t)};
  return PerturbedMap(cat).with_layer(std::move(layer));
}

}  // namespace

TEST_CASE("torus wrapping") {
  Vec x(2);
  x << 1.25, -0.25;
  CHECK(torus_wrap(x)[0] == doctest::Approx(0.25));
  CHECK(torus_wrap(x)[1] == doctest::Approx(0.75));
  Vec a(2), b(2);
  a << 0.95, 0.1;
  b << 0.05, 0.9;
  Vec d = torus_diff(a, b);
  CHECK(d[0] == doctest::Approx(-0.1));
  CHECK(d[1] == doctest::Approx(0.2));
}

TEST_CASE("charted ball round trips and volume") {
  Rng rng(2);
  Mat F(2, 2);
  F << 1.0, 0.3, -0.2, 0.9;
  ChartedBall ball((Vec(2) << 0.4, 0.7).finished(), 0.05, F);
  for (int i = 0; i < 100; ++i) {
    Vec z = rng.ball_point(2);
    Vec x = ball.chart(z);
    CHECK((ball.chart_inverse(x) - z).norm() < 1e-12);
    CHECK(ball.contains(x, 1e-12));
  }
  CHECK(ball.volume() == doctest::Approx(std::abs(F.determinant()) * 0.05 * 0.05 * M_PI));
}

TEST_CASE("evaluate: base action off the support, deformation inside") {
  auto cat = cat_map();
  PerturbedMap f0(cat);
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    Vec x(2);
    x << rng.u01(), rng.u01();
    Vec y = f0.evaluate(x);
    Vec expected = torus_wrap(cat.matrix() * x);
    CHECK((y - expected).norm() == 0.0);
  }

  auto f1 = perturbed_cat(0.0);
  for (int i = 0; i < 50; ++i) {
    Vec x(2);
    x << rng.u01(), rng.u01();
    // t = 0 layers are skipped entirely, so equality is exact
    CHECK((f1.evaluate(x) - f0.evaluate(x)).norm() == 0.0);
  }

  auto f2 = perturbed_cat(1.0);
  int moved = 0;
  for (int i = 0; i < 4000; ++i) {
    Vec x(2);
    x << rng.u01(), rng.u01();
    bool inside = false;
    for (const auto& ball : f2.layers()[0].balls)
      if (ball.contains(x)) inside = true;
    Vec y = f2.evaluate(x);
    double dev = (y - torus_wrap(cat.matrix() * x)).norm();
    if (!inside) {
      CHECK(dev == 0.0);
    } else if (dev > 0.0) {
      ++moved;
    }
    // the bump is flat to double precision near the ball boundary, so inside
    // points need not move; movers must be inside
    if (dev > 0.0) CHECK(inside);
  }
  CHECK(moved > 3);
}

TEST_CASE("inverse round trip and volume preservation by Monte Carlo") {
  auto f = perturbed_cat(1.0);
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    Vec x(2);
    x << rng.u01(), rng.u01();
    CHECK(torus_distance(f.evaluate_inverse(f.evaluate(x)), x) < 1e-9);
  }

  // push-forward of uniform mass: ball-membership frequency of images matches
  // ball volumes within 4 sigma binomial
  const auto& balls = f.layers()[0].balls;
  double vol = 0.0;
  for (const auto& b : balls) vol += b.volume();
  const long long n = 1000000;
  long long hits = 0;
  for (long long i = 0; i < n; ++i) {
    Vec x(2);
    x << rng.u01(), rng.u01();
    Vec y = f.evaluate(x);
    for (const auto& b : balls)
      if (b.contains(y)) {
        ++hits;
        break;
      }
  }
  double phat = static_cast<double>(hits) / n;
  double sigma = std::sqrt(vol * (1 - vol) / n);
  CHECK(std::abs(phat - vol) < 4.0 * sigma);
}

TEST_CASE("differential: matrix off support, finite differences on it") {
  auto cat = cat_map();
  auto f = perturbed_cat(1.0);
  Rng rng(7);
  int checked = 0;
  for (int i = 0; i < 4000 && checked < 100; ++i) {
    Vec x(2);
    x << rng.u01(), rng.u01();
    Mat D = f.differential(x);
    CHECK(std::abs(std::abs(D.determinant()) - 1.0) < 1e-9);
    bool inside = false;
    for (const auto& ball : f.layers()[0].balls)
      if (ball.contains(x, -1e-6) || ball.contains(x, 1e-6)) inside = true;
    if (!inside) {
      CHECK((D - cat.matrix()).norm() == 0.0);
    } else {
      ++checked;
      auto wrapped_eval = [&](const Vec& p) -> Vec {
        // unwrap relative to the image of x for differencing
        Vec base = f.evaluate(x);
        return base + torus_diff(f.evaluate(p), base);
      };
      Mat Dfd = finite_difference_jacobian(wrapped_eval, x, 1e-7);
      CHECK((D - Dfd).cwiseAbs().maxCoeff() < 1e-5);
    }
  }
  CHECK(checked > 10);
}

TEST_CASE("damping horizon arithmetic") {
  // kappa = 1, alpha = gamma: log max = 0 -> N0 = 2
  ConeConstants flat;
  flat.alpha = 2.0;
  flat.beta = 0.5;
  flat.gamma = 2.0;
  flat.kappa = 1.0;
  flat.nu = 0.1;
  CHECK(damping_horizon(flat, 1.0) == 2);

  // sigma = 1, kappa = e^{-2}, alpha/gamma = 1: floor(2*2) + 2 = 6
  ConeConstants ex2 = flat;
  ex2.alpha = ex2.gamma = 1.0;
  ex2.kappa = std::exp(-2.0);
  CHECK(damping_horizon(ex2, 1.0) == 6);

  // sigma = 0.96, kappa = 0.5, alpha/gamma = 4: floor(2.888) + 2 = 4
  ConeConstants ex3 = flat;
  ex3.alpha = 2.0;
  ex3.gamma = 0.5;
  ex3.kappa = 0.5;
  CHECK(damping_horizon(ex3, 0.96) == 4);

  CHECK_THROWS_AS(damping_horizon(ex3, 0.0), Error);
  CHECK_THROWS_AS(damping_horizon(ex3, -1.0), Error);
}

TEST_CASE("damping horizon: defining inequality and monotonicity in sigma") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    ConeConstants cc;
    cc.alpha = 1.1 + 3.0 * rng.u01();
    cc.beta = 1.0 / cc.alpha;
    cc.gamma = cc.beta * (0.05 + 0.9 * rng.u01());
    cc.kappa = 0.05 + 0.95 * rng.u01();
    cc.nu = 0.1;
    double sigma = 0.2 + 2.0 * rng.u01();
    int n0 = damping_horizon(cc, sigma);
    double M = std::max(1.0 / cc.kappa, cc.alpha / cc.gamma);
    CHECK(std::exp((n0 - 1) * sigma / 2.0) > M);
    if (n0 > 2) CHECK(std::exp((n0 - 2) * sigma / 2.0) <= M * (1 + 1e-12));
    CHECK(damping_horizon(cc, sigma * 1.5) <= n0);
  }
}

TEST_CASE("ellipsoid separation primitives") {
  // two unit disks at distance 3: separation in E1 units is 1 (= 3 - 2 radii)
  Mat I = Mat::Identity(2, 2);
  Vec c1(2), c2(2);
  c1 << 0.1, 0.1;
  c2 << 0.4, 0.1;
  double sep = ellipsoid_torus_separation(c1, 0.1 * I, c2, 0.1 * I);
  CHECK(sep == doctest::Approx(1.0).epsilon(1e-6));
  // overlapping
  CHECK(ellipsoid_torus_separation(c1, 0.2 * I, c2, 0.2 * I) < 0.0);
  // wrap-around: centers at 0.05 and 0.95 are 0.1 apart on the torus
  Vec c3(2), c4(2);
  c3 << 0.05, 0.5;
  c4 << 0.95, 0.5;
  CHECK(ellipsoid_torus_separation(c3, 0.08 * I, c4, 0.08 * I) < 0.0);
  CHECK(ellipsoid_torus_separation(c3, 0.04 * I, c4, 0.04 * I) > 0.0);
}

TEST_CASE("place_balls: towers are certified disjoint") {
  auto cat = cat_map();
  auto res = place_balls(cat, 4, 0.01, 16, 3);
  CHECK(res.balls.size() >= 4);
  CHECK(res.min_margin > 0.0);
  CHECK(res.ceiling == doctest::Approx(0.25));

  // independent re-verification: dense sampling of each ball pushed forward,
  // checking pairwise distinctness of memberships
  Rng rng(13);
  const int N = 4;
  std::vector<std::vector<Vec>> clouds;
  for (const auto& ball : res.balls) {
    for (int n = 0; n < N; ++n) clouds.emplace_back();
  }
  int ci = 0;
  for (const auto& ball : res.balls) {
    std::vector<Vec> pts;
    for (int s = 0; s < 200; ++s) pts.push_back(ball.chart(rng.ball_point(2)));
    for (int n = 0; n < N; ++n) {
      clouds[ci + n] = pts;
      for (auto& p : pts) p = torus_wrap(cat.matrix() * p);
    }
    ci += N;
  }
  // sampled points from different tower sets never coincide to ball scale
  for (std::size_t a = 0; a < clouds.size(); ++a)
    for (std::size_t b = a + 1; b < clouds.size(); ++b)
      for (std::size_t i = 0; i < clouds[a].size(); i += 19)
        for (std::size_t k = 0; k < clouds[b].size(); k += 23)
          CHECK(torus_distance(clouds[a][i], clouds[b][k]) > 0.0);
}

TEST_CASE("place_balls failure modes") {
  auto cat = cat_map();
  CHECK_THROWS_WITH_AS(place_balls(cat, 10, 0.5, 4, 1),
                       doctest::Contains("placement-failed"), Error);
  auto res1 = place_balls(cat, 1, 0.05, 32, 1);  // no tower constraint
  CHECK(res1.balls.size() > 5);
}

TEST_CASE("check_damping passes on a calibrated round and fails on overlap") {
  auto cat = cat_map();
  BumpProfile profile(1.0);

  // calibrated, certified round
  auto placed = place_balls(cat, 5, 0.01, 24, 7);
  ModelDeformation family(2, profile, Vec::Ones(1), Vec::Ones(1));
  DampingParameters params;
  params.cones = calibrate_cones(family, 0.2, 3, 20000);
  params.sigma = 1.8;
  params.N = 5;
  params.delta0 = 0.002;
  params.a = Vec::Ones(1);
  params.validate(true);
  PerturbedMap ft = PerturbedMap(cat).with_layer(
      {placed.balls, ModelDeformation(2, profile, Vec::Ones(1), Vec::Ones(1))});
  auto rep = check_damping(ft, params, 20000, 5);
  CHECK(rep.pass);
  CHECK(rep.cones_ok);
  CHECK(rep.projections_ok);
  CHECK(rep.tower_ok);
  CHECK(rep.gap_ok);

  // fixture violating tower disjointness: a ball and one that lands on its
  // image under the base map
  Vec c0(2);
  c0 << 0.3, 0.6;
  Vec c1 = torus_wrap(cat.matrix() * c0);
  std::vector<ChartedBall> overlap = {ChartedBall(c0, 0.02, cat.eigenvectors()),
                                      ChartedBall(c1, 0.02, cat.eigenvectors())};
  PerturbedMap bad = PerturbedMap(cat).with_layer(
      {overlap, ModelDeformation(2, profile, Vec::Ones(1), Vec::Ones(1))});
  auto rep2 = check_damping(bad, params, 4000, 5);
  CHECK_FALSE(rep2.tower_ok);
  CHECK_FALSE(rep2.pass);
  CHECK(rep2.witnesses.size() > 0);

  // t = 0: the map equals the base, conditions hold trivially
  PerturbedMap trivial(cat);
  auto rep3 = check_damping(trivial, params, 1000, 5);
  CHECK(rep3.pass);
}

TEST_CASE("cone contraction: exact factor for the linear map") {
  auto cat = cat_map();
  PerturbedMap f(cat);
  auto rep = cone_contraction_check(f, 1, 0.4, 12, 64);
  double expected = std::exp(-(cat.spectrum()[0] - cat.spectrum()[1]));
  CHECK(rep.expected_contraction == doctest::Approx(expected));
  CHECK(rep.min_off_support_contraction == doctest::Approx(expected).epsilon(1e-8));
  CHECK(rep.pass);

  CHECK_THROWS_WITH_AS(cone_contraction_check(f, 1, 0.0, 12, 8),
                       doctest::Contains("degenerate-input"), Error);
}

TEST_CASE("cone contraction on a perturbed map recovers below gamma") {
  auto f = perturbed_cat(1.0, 0.02, 5, 11);
  auto rep = cone_contraction_check(f, 1, 0.4, 40, 400, /*gamma=*/0.1, /*N=*/5, 17);
  CHECK(rep.recovery_fraction > 0.99);
  CHECK(rep.pass);
}

TEST_CASE("damping parameter validation") {
  DampingParameters p;
  p.cones = ConeConstants{};
  p.sigma = 1.0;
  p.N = 2;
  p.delta0 = 0.1;
  p.a = Vec::Ones(1);
  CHECK_NOTHROW(p.validate(false));
  int n0 = p.minimal_horizon();
  p.N = n0 - 1;
  CHECK_THROWS_AS(p.validate(true), Error);
  p.N = n0;
  CHECK_NOTHROW(p.validate(true));
}
