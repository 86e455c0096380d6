#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"

using namespace anosov;
using namespace testing_support;

namespace {

ModelDeformation make_deformation(int d, Rng& rng, const BumpProfile& profile) {
  Vec b(d - 1), t(d - 1);
  for (int i = 0; i < d - 1; ++i) {
    b[i] = rng.u01();
    t[i] = rng.u01();
  }
  return ModelDeformation(d, profile, b, t);
}

}  // namespace

TEST_CASE("rotation matrices") {
  CHECK((rotation(1, 0.0, 3) - Mat::Identity(3, 3)).norm() == 0.0);
  Mat r = rotation(1, M_PI / 2, 2);
  CHECK(r(0, 0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(r(0, 1) == doctest::Approx(-1.0));
  CHECK(r(1, 0) == doctest::Approx(1.0));
  Mat r3 = rotation(2, 0.7, 3);
  CHECK(r3(0, 0) == 1.0);
  CHECK(r3(1, 1) == doctest::Approx(std::cos(0.7)));
  CHECK(r3.determinant() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("elementary deformation examples") {
  BumpProfile profile(1.0);
  Vec z(2);
  z << 0.3, -0.2;
  CHECK((apply_elementary(1, 0.0, z, profile) - z).norm() == 0.0);

  Vec boundary(2);
  boundary << 0.6, 0.8;  // on the unit sphere, rho vanishes
  CHECK((apply_elementary(1, 0.9, boundary, profile) - boundary).norm() < 1e-15);

  Vec origin = Vec::Zero(2);
  CHECK(apply_elementary(1, 0.5, origin, profile).norm() == 0.0);

  Vec outside(2);
  outside << 1.2, 0.0;
  CHECK_THROWS_WITH_AS(apply_elementary(1, 0.5, outside, profile),
                       doctest::Contains("out-of-domain"), Error);
}

TEST_CASE("apply: identity at t=0, norm preservation, inverse round trip") {
  Rng rng(3);
  for (int d = 2; d <= 5; ++d) {
    BumpProfile profile(1.0);
    ModelDeformation id(d, profile, Vec::Ones(d - 1), Vec::Zero(d - 1));
    Vec z = rng.ball_point(d);
    CHECK((id.apply(z) - z).norm() == 0.0);

    for (int trial = 0; trial < 200; ++trial) {
      auto m = make_deformation(d, rng, profile);
      Vec w = rng.ball_point(d);
      Vec out = m.apply(w);
      CHECK(std::abs(out.norm() - w.norm()) < 1e-13);
      CHECK((m.apply_inverse(out) - w).norm() < 1e-10);
    }
  }
}

TEST_CASE("analytic Jacobian against central finite differences") {
  Rng rng(5);
  BumpProfile profile(1.0);
  for (int d : {2, 3, 4}) {
    for (int trial = 0; trial < 34; ++trial) {
      auto m = make_deformation(d, rng, profile);
      Vec z = 0.9 * rng.ball_point(d);
      Mat J = m.jacobian(z);
      Mat Jfd = finite_difference_jacobian([&](const Vec& p) { return m.apply(p); }, z);
      CHECK((J - Jfd).cwiseAbs().maxCoeff() < 1e-6);
      CHECK(std::abs(J.determinant() - 1.0) < 1e-10);
    }
  }
}

TEST_CASE("one-factor minor formula equals the direct submatrix determinant") {
  Rng rng(7);
  for (int d = 2; d <= 5; ++d) {
    BumpProfile profile(1.0);
    for (int trial = 0; trial < 500; ++trial) {
      auto m = make_deformation(d, rng, profile);
      Vec z = rng.ball_point(d);
      Mat J = m.jacobian(z);
      for (int j = 1; j <= d - 1; ++j) {
        double direct = J.topLeftCorner(j, j).determinant();
        CHECK(std::abs(m.principal_minor(z, j) - direct) < 1e-10);
      }
    }
  }
}

TEST_CASE("delta examples, finite differences, and the cyclic shift identity") {
  BumpProfile profile(1.0);
  Rng rng(9);

  Vec z = rng.ball_point(3);
  CHECK(delta(1, 0.0, z, profile) == doctest::Approx(1.0));
  // at the center the gradient term vanishes, leaving exactly cos(s rho(0))
  CHECK(delta(2, 0.7, Vec::Zero(3), profile) ==
        doctest::Approx(std::cos(0.7 * profile.value(0.0))).epsilon(1e-15));

  for (int trial = 0; trial < 50; ++trial) {
    int d = 2 + rng.bits() % 3;
    Vec w = 0.9 * rng.ball_point(d);
    double s = rng.u01();
    int j = 1 + rng.bits() % (d - 1);
    // finite difference of the rotated j-th coordinate
    auto g = [&](const Vec& p) {
      double th = s * profile.value(p.norm());
      return p[j - 1] * std::cos(th) - p[j] * std::sin(th);
    };
    double h = 1e-6;
    Vec zp = w, zm = w;
    zp[j - 1] += h;
    zm[j - 1] -= h;
    CHECK(delta(j, s, w, profile) == doctest::Approx((g(zp) - g(zm)) / (2 * h)).epsilon(1e-6));
  }

  // rotational symmetry: Delta^(j)(z) = Delta^(1)(cyclic shift of z)
  for (int trial = 0; trial < 50; ++trial) {
    Vec w = rng.ball_point(4);
    double s = rng.u01();
    for (int j = 2; j <= 3; ++j) {
      Vec shifted(4);
      for (int i = 0; i < 4; ++i) shifted[i] = w[(j - 1 + i) % 4];
      CHECK(delta(j, s, w, profile) ==
            doctest::Approx(delta(1, s, shifted, profile)).epsilon(1e-13));
    }
  }
}

TEST_CASE("Q: zero at zero, positive on a grid, and j-independent") {
  BumpProfile profile(1.0);
  CHECK(q_of(0.0, profile, 2) == 0.0);
  for (int i = 1; i <= 50; ++i) {
    double s = i / 50.0;
    CHECK(q_of(s, profile, 2) > 0.0);
  }
  // independence of j for d = 3: reduced route vs direct spherical quadrature
  for (double s : {0.3, 0.8}) {
    double q_reduced = q_of(s, profile, 3);
    double q1 = q_of_direct3(1, s, profile);
    double q2 = q_of_direct3(2, s, profile);
    CHECK(std::abs(q1 - q2) < 1e-8);
    CHECK(std::abs(q_reduced - q1) < 1e-8);
  }
}

TEST_CASE("Q against the Monte Carlo oracle") {
  BumpProfile profile(1.0);
  Rng rng(21);
  for (int d : {2, 3}) {
    double q = q_of(0.5, profile, d);
    auto [mc, se] = q_monte_carlo(0.5, profile, d, 1000000, rng);
    CHECK(std::abs(q - mc) < 3.0 * se + 1e-12);
  }
}

TEST_CASE("ball average of the log minor equals -Q(t_j)") {
  BumpProfile profile(1.0);
  Rng rng(23);
  Vec b(2), t(2);
  b << 1.0, 1.0;
  t << 0.7, 0.4;
  ModelDeformation m(3, profile, b, t);
  for (int j = 1; j <= 2; ++j) {
    KahanSum sum, sumsq;
    const long long n = 400000;
    for (long long i = 0; i < n; ++i) {
      double v = std::log(m.principal_minor(rng.ball_point(3), j));
      sum.add(v);
      sumsq.add(v * v);
    }
    double mean = sum.value() / n;
    double se = std::sqrt(std::max(0.0, sumsq.value() / n - mean * mean) / n);
    CHECK(std::abs(mean + q_of(t[j - 1], profile, 3)) < 3.0 * se + 1e-10);
  }
}

TEST_CASE("calibrate_amplitude finds least preimages") {
  BumpProfile profile(1.0);
  QFunction q(profile, 2);
  CHECK(q.inverse_least(0.0) == 0.0);
  double q03 = q_of(0.3, profile, 2);
  double s = q.inverse_least(q03);
  CHECK(std::abs(q_of(s, profile, 2) - q03) < 1e-9);
  double s1 = q.inverse_least(q.q1());
  CHECK(std::abs(q_of(s1, profile, 2) - q.q1()) < 1e-9);
  CHECK_THROWS_WITH_AS(q.inverse_least(q.q1() * 2.0),
                       doctest::Contains("target-unreachable"), Error);
  CHECK(calibrate_amplitude(q03, profile, 2) == doctest::Approx(s).epsilon(1e-6));
}

TEST_CASE("calibrated profile keeps every minor transversal") {
  Rng rng(25);
  for (int d : {2, 3}) {
    BumpProfile profile = calibrate_profile(d);
    CHECK(profile.amplitude() <= 1.0);
    for (int trial = 0; trial < 3000; ++trial) {
      Vec t(d - 1);
      for (int k = 0; k < d - 1; ++k) t[k] = rng.u01();
      ModelDeformation m(d, profile, Vec::Ones(d - 1), t);
      Vec z = rng.ball_point(d);
      for (int j = 1; j <= d - 1; ++j) CHECK(m.principal_minor(z, j) > 0.0);
    }
  }
}

TEST_CASE("cone constants: identity defaults") {
  BumpProfile profile(1.0);
  ModelDeformation id(3, profile, Vec::Zero(2), Vec::Zero(2));
  auto cc = calibrate_cones(id, 0.01);
  CHECK(cc.alpha == 2.0);
  CHECK(cc.beta == 0.5);
  CHECK(cc.kappa == 0.5);
  CHECK(cc.gamma > 0.0);
  CHECK(cc.gamma < cc.beta);
}

TEST_CASE("cone constants against planar rotation geometry") {
  // d = 2 at small amplitude: the image of the cone boundary under a rotation
  // by theta-bar has opening tan(arctan(beta) + theta-bar)
  BumpProfile profile(0.4);
  Vec b(1), t(1);
  b << 1.0;
  t << 1.0;
  ModelDeformation m(2, profile, b, t);
  auto cc = calibrate_cones(m, 0.05, 11, 20000);
  double theta_bar = profile.sup_value();
  CHECK(cc.alpha >= std::tan(std::atan(cc.beta) + 0.9 * theta_bar));
}

TEST_CASE("calibrated gamma satisfies the minor-cone bound on fresh samples") {
  BumpProfile profile = calibrate_profile(3);
  ModelDeformation m(3, profile, Vec::Ones(2), Vec::Ones(2));
  const double nu = 0.05;
  auto cc = calibrate_cones(m, nu, 31, 20000);
  Rng rng(33);
  for (int trial = 0; trial < 20000; ++trial) {
    Vec t(2);
    t << rng.u01(), rng.u01();
    ModelDeformation vary(3, profile, m.amplitudes(), t);
    Vec z = rng.ball_point(3);
    Mat J = vary.jacobian(z);
    int j = 1 + rng.bits() % 2;
    Mat W(3, j);
    for (int col = 0; col < j; ++col) {
      Vec w(3);
      w.head(j) = rng.unit_vector(j);
      w.tail(3 - j) = cc.gamma * rng.u01() * rng.unit_vector(3 - j);
      W.col(col) = w;
    }
    double den = W.topRows(j).determinant();
    if (std::abs(den) < 1e-8) continue;
    double num = (J * W).topRows(j).determinant();
    REQUIRE(num * den > 0.0);
    double dev = std::abs(std::log(num / den) -
                          std::log(J.topLeftCorner(j, j).determinant()));
    CHECK(dev < nu);
  }
}

TEST_CASE("exterior powers: Cauchy-Binet on principal entries of products") {
  Rng rng(35);
  for (int trial = 0; trial < 200; ++trial) {
    int d = 4 + rng.bits() % 3;
    int j = 1 + rng.bits() % std::min(4, d - 1);
    Mat A(d, d), B(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) {
        A(r, c) = rng.normal();
        B(r, c) = rng.normal();
      }
    // direct principal minor of AB
    double lhs = (A * B).topLeftCorner(j, j).determinant();
    // Cauchy-Binet expansion over all j-subsets I
    std::vector<int> idx(j);
    double rhs = 0.0;
    auto rec = [&](auto&& self, int pos, int start) -> void {
      if (pos == j) {
        Mat AJ(j, j), BJ(j, j);
        for (int r = 0; r < j; ++r)
          for (int c = 0; c < j; ++c) {
            AJ(r, c) = A(r, idx[c]);
            BJ(r, c) = B(idx[r], c);
          }
        rhs += AJ.determinant() * BJ.determinant();
        return;
      }
      for (int i = start; i < d; ++i) {
        idx[pos] = i;
        self(self, pos + 1, i + 1);
      }
    };
    rec(rec, 0, 0);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
  }
}
