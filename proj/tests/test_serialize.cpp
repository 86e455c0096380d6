#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"

using namespace anosov;
using namespace testing_support;

TEST_CASE("spectra serialize as descending arrays") {
  OrderedSpectrum s({0.5, 0.1, -0.6}, 1e-9);
  Json j = to_json(s);
  CHECK(j.is_array());
  auto back = spectrum_from_json(j, 1e-9);
  CHECK(back.entries() == s.entries());
}

TEST_CASE("integer matrices travel as decimal strings") {
  auto h = companion(build_polynomial(default_pattern(4, 2, 4)));
  Json j = to_json(h);
  CHECK(j["matrix"][0][1].is_string());
  auto back = automorphism_from_json(j);
  CHECK(back.data() == h.data());
  for (int i = 0; i < 4; ++i)
    CHECK(back.spectrum()[i] == doctest::Approx(h.spectrum()[i]).epsilon(1e-11));
}

TEST_CASE("deformations and damping parameters round trip") {
  BumpProfile p(0.75);
  Vec b(2), t(2);
  b << 0.5, 0.9;
  t << 0.25, 1.0;
  ModelDeformation m(3, p, b, t);
  auto m2 = deformation_from_json(to_json(m));
  CHECK(m2.amplitudes() == m.amplitudes());
  CHECK(m2.parameters() == m.parameters());
  CHECK(m2.profile().amplitude() == p.amplitude());

  DampingParameters dp;
  dp.cones = ConeConstants{2.0, 0.5, 0.1, 0.4, 0.05};
  dp.sigma = 1.3;
  dp.N = 6;
  dp.delta0 = 0.01;
  dp.a = Vec::Ones(2);
  dp.epsilon = 0.02;
  auto dp2 = damping_from_json(to_json(dp));
  CHECK(dp2.N == dp.N);
  CHECK(dp2.cones.gamma == dp.cones.gamma);
  CHECK(dp2.minimal_horizon() == dp.minimal_horizon());
}

TEST_CASE("estimates carry provenance") {
  PerturbedMap f(cat_map());
  EstimatorConfig cfg;
  cfg.orbits = 2;
  cfg.length = 20000;
  cfg.burn_in = 500;
  cfg.seed = 77;
  auto est = estimate_spectrum(f, cfg);
  Json j = to_json(est);
  CHECK(j["config"]["seed"] == 77);
  CHECK(j["config"]["length"] == 20000);
  CHECK(j["schema_version"] == kSchemaVersion);
  CHECK(j["values"].size() == 2);
}

TEST_CASE("reports serialize with their flags") {
  auto rep = verify_anosov({2, 1, 1, 1}, 2);
  Json j = to_json(rep);
  CHECK(j["pass"] == true);
  CHECK(j["abs_det"] == "1");

  TargetReport tr = validate_target(OrderedSpectrum({0.5, -0.5}, 1e-9),
                                    OrderedSpectrum({0.9, -0.9}, 1e-9), 1, true);
  Json jt = to_json(tr);
  CHECK(jt["pass"] == true);
  CHECK(jt["relation"] == "strictly_majorizes");
}
