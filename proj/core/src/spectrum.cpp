#include "anosov/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>

namespace anosov {

namespace {

// modified Gram-Schmidt; returns false on frame degeneracy
bool qr_inplace(Mat& B, Vec& rdiag) {
  const int d = static_cast<int>(B.rows());
  const int k = static_cast<int>(B.cols());
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < j; ++i) B.col(j) -= B.col(i).dot(B.col(j)) * B.col(i);
    double n = B.col(j).norm();
    if (!(n > 1e-300)) return false;
    if (j < rdiag.size()) rdiag[j] = n;
    B.col(j) /= n;
  }
  return true;
}

std::vector<double> one_orbit(const PerturbedMap& f, const EstimatorConfig& cfg, int orbit) {
  const int d = f.dim();
  Rng rng(cfg.seed * 0x9e37ull + 0x12345ull * (orbit + 1));
  Vec x(d);
  for (int i = 0; i < d; ++i) x[i] = rng.u01();

  Mat Q(d, d);
  for (int i = 0; i < d; ++i) Q.col(i) = rng.gaussian_vector(d);
  Vec rdiag(d);
  if (!qr_inplace(Q, rdiag)) throw Error(Errc::numeric_failure, "degenerate start frame");

  Mat D(d, d);
  std::vector<KahanSum> acc(d);
  long long kept = 0;
  for (long long n = 0; n < cfg.length; ++n) {
    if (cfg.backward)
      f.step_inverse(x, D);
    else
      f.step(x, D);
    Q = D * Q;
    if (!qr_inplace(Q, rdiag))
      throw Error(Errc::numeric_failure, "frame degenerated at step " + std::to_string(n));
    if (n >= cfg.burn_in) {
      for (int j = 0; j < d; ++j) acc[j].add(std::log(rdiag[j]));
      ++kept;
    }
  }
  if (kept <= 0) throw Error(Errc::invalid_input, "length must exceed burn_in");
  std::vector<double> mean(d);
  for (int j = 0; j < d; ++j) mean[j] = acc[j].value() / static_cast<double>(kept);
  return mean;
}

}  // namespace

double SpectrumEstimate::zero_sum_residual() const {
  return std::accumulate(values.begin(), values.end(), 0.0);
}

OrderedSpectrum SpectrumEstimate::spectrum() const {
  double tol = 1e-9;
  for (double e : errors) tol = std::max(tol, 10.0 * e);
  std::vector<double> v = values;
  // re-center: the measured sum differs from 0 by estimator noise only
  double shift = zero_sum_residual() / v.size();
  for (double& x : v) x -= shift;
  return OrderedSpectrum(std::move(v), std::max(tol, 1e3 * std::abs(shift)));
}

ValueWithError SpectrumEstimate::summed_at(int j) const {
  if (j < 1 || j > dim()) throw Error(Errc::invalid_input, "summed index out of range");
  return {summed[j - 1], summed_errors[j - 1]};
}

SpectrumEstimate estimate_spectrum(const PerturbedMap& f, const EstimatorConfig& cfg) {
  if (cfg.orbits < 1) throw Error(Errc::invalid_input, "need at least one orbit");
  if (cfg.length <= cfg.burn_in || cfg.burn_in < 0)
    throw Error(Errc::invalid_input, "need length > burn_in >= 0");
  const int d = f.dim();

  std::vector<std::vector<double>> per_orbit(cfg.orbits);
  const int threads = std::max(1, cfg.threads);
  if (threads == 1) {
    for (int o = 0; o < cfg.orbits; ++o) per_orbit[o] = one_orbit(f, cfg, o);
  } else {
    std::vector<std::future<std::vector<double>>> futs;
    futs.reserve(cfg.orbits);
    for (int o = 0; o < cfg.orbits; ++o)
      futs.push_back(std::async(std::launch::async | std::launch::deferred,
                                [&f, &cfg, o] { return one_orbit(f, cfg, o); }));
    for (int o = 0; o < cfg.orbits; ++o) per_orbit[o] = futs[o].get();
  }

  SpectrumEstimate est;
  est.config = cfg;
  est.per_orbit = per_orbit;
  est.values.assign(d, 0.0);
  est.errors.assign(d, 0.0);
  est.summed.assign(d, 0.0);
  est.summed_errors.assign(d, 0.0);

  for (int j = 0; j < d; ++j) {
    double m = 0.0;
    for (const auto& o : per_orbit) m += o[j];
    m /= cfg.orbits;
    est.values[j] = m;
    if (cfg.orbits > 1) {
      double var = 0.0;
      for (const auto& o : per_orbit) var += sqr(o[j] - m);
      var /= (cfg.orbits - 1);
      est.errors[j] = std::sqrt(var / cfg.orbits);
    }
  }
  for (int j = 0; j < d; ++j) {
    double m = 0.0;
    std::vector<double> hats(cfg.orbits, 0.0);
    for (int o = 0; o < cfg.orbits; ++o) {
      double h = 0.0;
      for (int i = 0; i <= j; ++i) h += per_orbit[o][i];
      hats[o] = h;
      m += h;
    }
    m /= cfg.orbits;
    est.summed[j] = m;
    if (cfg.orbits > 1) {
      double var = 0.0;
      for (double h : hats) var += sqr(h - m);
      var /= (cfg.orbits - 1);
      est.summed_errors[j] = std::sqrt(var / cfg.orbits);
    }
  }
  return est;
}

ValueWithError estimate_summed(const PerturbedMap& f, int j, const EstimatorConfig& cfg) {
  if (j < 1 || j > f.dim()) throw Error(Errc::invalid_input, "summed index out of range");
  return estimate_spectrum(f, cfg).summed_at(j);
}

OseledetsDirection oseledets_direction(const PerturbedMap& f, const Vec& x, int j, int horizon) {
  const int d = f.dim();
  if (j < 1 || j > d) throw Error(Errc::invalid_input, "direction index out of range");
  if (horizon < 1) throw Error(Errc::invalid_input, "horizon must be >= 1");

  // forward flag: push a j-frame from f^{-H}(x) up to x
  Vec y = x;
  for (int n = 0; n < horizon; ++n) y = f.evaluate_inverse(y);
  Mat U = Mat::Identity(d, d).leftCols(j);
  Vec rd(j);
  Mat D(d, d);
  for (int n = 0; n < horizon; ++n) {
    f.step(y, D);
    U = D * U;
    if (!qr_inplace(U, rd)) throw Error(Errc::numeric_failure, "forward flag degenerated");
  }

  // backward flag: pull a (d-j+1)-frame from f^{H}(x) down to x
  Vec z = x;
  for (int n = 0; n < horizon; ++n) z = f.evaluate(z);
  Mat W = Mat::Identity(d, d).rightCols(d - j + 1);
  Vec rd2(d - j + 1);
  for (int n = 0; n < horizon; ++n) {
    f.step_inverse(z, D);
    W = D * W;
    if (!qr_inplace(W, rd2)) throw Error(Errc::numeric_failure, "backward flag degenerated");
  }

  Mat A = U * U.transpose() + W * W.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> es(A);
  double top = es.eigenvalues()[d - 1];
  OseledetsDirection out;
  out.residual = 2.0 - top;
  if (out.residual > 0.2)
    throw Error(Errc::numeric_failure, "flag intersection ill-conditioned");
  out.v = es.eigenvectors().col(d - 1);
  // fix the sign against the base eigenvector for continuity
  if (out.v.dot(f.base().eigenvectors().col(j - 1)) < 0.0) out.v = -out.v;
  return out;
}

ValueWithError integral_exponent(const PerturbedMap& f, int j, int samples, int horizon,
                                 std::uint64_t seed) {
  if (samples < 2) throw Error(Errc::invalid_input, "need at least two samples");
  const int d = f.dim();
  Rng rng(seed);
  KahanSum sum, sumsq;
  for (int s = 0; s < samples; ++s) {
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = rng.u01();
    auto dir = oseledets_direction(f, x, j, horizon);
    double v = std::log((f.differential(x) * dir.v).norm());
    sum.add(v);
    sumsq.add(v * v);
  }
  double m = sum.value() / samples;
  double var = std::max(0.0, sumsq.value() / samples - m * m);
  return {m, std::sqrt(var / samples)};
}

FiniteLyapunovMetric finite_metric(const PerturbedMap& f, int N, int samples,
                                   std::vector<double> reference, int horizon,
                                   std::uint64_t seed) {
  if (N < 1) throw Error(Errc::invalid_input, "N must be >= 1");
  const int d = f.dim();
  const int u = f.base().unstable_index();
  if (reference.empty()) reference = f.base().spectrum().entries();

  FiniteLyapunovMetric m;
  m.N = N;
  m.chi.resize(samples, d);
  m.l1_deviation.assign(d, 0.0);
  Rng rng(seed);
  int violations = 0;

  for (int s = 0; s < samples; ++s) {
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = rng.u01();
    m.points.push_back(x);
    for (int j = 1; j <= d; ++j) {
      Vec v = oseledets_direction(f, x, j, horizon).v;
      Vec y = x;
      Mat D(d, d);
      double acc = 0.0;
      for (int n = 0; n < N; ++n) {
        f.step(y, D);
        v = D * v;
        double nn = v.norm();
        acc += std::log(nn);
        v /= nn;
      }
      m.chi(s, j - 1) = acc / N;
    }
    bool ok = true;
    for (int j = 0; j + 1 < d; ++j)
      if (!(m.chi(s, j) > m.chi(s, j + 1))) ok = false;
    if (!(m.chi(s, u - 1) > 0.0 && m.chi(s, u) < 0.0)) ok = false;
    if (!ok) ++violations;
    for (int j = 0; j < d; ++j) m.l1_deviation[j] += std::abs(m.chi(s, j) - reference[j]);
  }
  for (int j = 0; j < d; ++j) m.l1_deviation[j] /= samples;
  m.violation_fraction = static_cast<double>(violations) / samples;
  m.ordering_ok = violations == 0;
  return m;
}

LengthGrowthResult unstable_length_growth(const PerturbedMap& f, const Vec& x, int horizon,
                                          int direction_horizon, int max_nodes) {
  LengthGrowthResult res;
  if (horizon == 0) return res;
  if (horizon < 0) throw Error(Errc::invalid_input, "horizon must be >= 0");
  const int d = f.dim();
  const Vec v1 = oseledets_direction(f, x, 1, direction_horizon).v;

  struct Node {
    double tau;
    Vec p;
    Vec tdir;
    double logstretch;
  };
  auto seed_node = [&](double tau) {
    Node n;
    n.tau = tau;
    n.p = torus_wrap(x + tau * v1);
    n.tdir = v1;
    n.logstretch = 0.0;
    return n;
  };
  auto advance = [&](Node& n, int steps) {
    Mat D(d, d);
    for (int k = 0; k < steps; ++k) {
      f.step(n.p, D);
      Vec w = D * n.tdir;
      double nn = w.norm();
      n.logstretch += std::log(nn);
      n.tdir = w / nn;
    }
  };

  std::vector<Node> nodes;
  const int n0 = 33;
  for (int i = 0; i < n0; ++i) nodes.push_back(seed_node(-0.5 + i / double(n0 - 1)));

  const double angle_tol = 0.05;   // rad between neighboring tangents
  const double stretch_tol = 0.1;  // nats between neighboring stretches
  for (int n = 1; n <= horizon; ++n) {
    for (auto& node : nodes) advance(node, 1);
    bool refined = true;
    while (refined && static_cast<int>(nodes.size()) < max_nodes) {
      refined = false;
      std::vector<Node> inserted;
      for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        double cosang = std::clamp(nodes[i].tdir.dot(nodes[i + 1].tdir), -1.0, 1.0);
        if (std::acos(cosang) > angle_tol ||
            std::abs(nodes[i].logstretch - nodes[i + 1].logstretch) > stretch_tol) {
          Node mid = seed_node(0.5 * (nodes[i].tau + nodes[i + 1].tau));
          advance(mid, n);
          inserted.push_back(std::move(mid));
          refined = true;
        }
      }
      if (!inserted.empty()) {
        for (auto& nd : inserted) nodes.push_back(std::move(nd));
        std::sort(nodes.begin(), nodes.end(),
                  [](const Node& a, const Node& b) { return a.tau < b.tau; });
      }
      if (static_cast<int>(nodes.size()) >= max_nodes) res.truncated = true;
    }
  }

  // length = integral over tau of the pointwise stretch; trapezoid in
  // log-sum-exp form to survive the dynamic range
  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& nd : nodes) mx = std::max(mx, nd.logstretch);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    double seg = 0.5 * (std::exp(nodes[i].logstretch - mx) + std::exp(nodes[i + 1].logstretch - mx));
    acc += seg * (nodes[i + 1].tau - nodes[i].tau);
  }
  res.rate = (mx + std::log(acc)) / horizon;
  res.nodes = static_cast<int>(nodes.size());
  return res;
}

}  // namespace anosov
