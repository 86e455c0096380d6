#include "anosov/torusmap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SVD>

namespace anosov {

namespace {

constexpr double kMargin = 2.0;        // placement safety factor
constexpr double kReachCap = 2.0;      // per-axis reach cap for certified images
constexpr double kMinFrameDet = 0.03;  // chart conditioning floor

double axis_reach(const Mat& M, int axis) { return M.row(axis).norm(); }

}  // namespace

Vec torus_wrap(Vec x) {
  for (int i = 0; i < x.size(); ++i) {
    x[i] -= std::floor(x[i]);
    if (x[i] >= 1.0) x[i] = 0.0;  // guard against -1e-17 wrapping to 1.0
  }
  return x;
}

Vec torus_diff(const Vec& a, const Vec& b) {
  Vec d = a - b;
  for (int i = 0; i < d.size(); ++i) {
    d[i] -= std::round(d[i]);
    if (d[i] >= 0.5) d[i] -= 1.0;
  }
  return d;
}

double torus_distance(const Vec& a, const Vec& b) { return torus_diff(a, b).norm(); }

ChartedBall::ChartedBall(Vec center, double radius, Mat frame)
    : center_(torus_wrap(std::move(center))), radius_(radius), frame_(std::move(frame)) {
  const int d = static_cast<int>(center_.size());
  if (radius_ <= 0.0) throw Error(Errc::invalid_input, "ball radius must be positive");
  if (frame_.rows() != d || frame_.cols() != d)
    throw Error(Errc::invalid_input, "frame shape mismatch");
  double det = frame_.determinant();
  if (std::abs(det) < 1e-12) throw Error(Errc::invalid_input, "frame is singular");
  frame_inv_ = frame_.inverse();
  volume_ = std::abs(det) * std::pow(radius_, d) * unit_ball_volume(d);
}

Vec ChartedBall::chart(const Vec& z) const { return torus_wrap(center_ + frame_ * (radius_ * z)); }

Vec ChartedBall::chart_inverse(const Vec& x) const {
  return frame_inv_ * torus_diff(x, center_) / radius_;
}

bool ChartedBall::contains(const Vec& x, double pad) const {
  return chart_inverse(x).norm() <= 1.0 + pad;
}

double PerturbationLayer::support_measure() const {
  double s = 0.0;
  for (const auto& b : balls) s += b.volume();
  return s;
}

PerturbedMap::PerturbedMap(HyperbolicAutomorphism base) : base_(std::move(base)) {}

PerturbedMap PerturbedMap::with_layer(PerturbationLayer layer) const {
  if (layer.deformation.dim() != dim())
    throw Error(Errc::invalid_input, "deformation dimension mismatch");
  PerturbedMap out = *this;
  out.layers_.push_back(std::move(layer));
  out.rebuild_indices();
  return out;
}

void PerturbedMap::rebuild_indices() {
  indices_.clear();
  const int d = dim();
  for (const auto& layer : layers_) {
    LayerIndex idx;
    idx.cells_per_axis = 32;
    const int n = idx.cells_per_axis;
    idx.cells.assign(static_cast<std::size_t>(std::pow(n, d)), {});
    for (int bi = 0; bi < static_cast<int>(layer.balls.size()); ++bi) {
      const auto& ball = layer.balls[bi];
      // cover the ball's bounding box, wrapped
      std::vector<std::pair<int, int>> ranges(d);
      for (int a = 0; a < d; ++a) {
        double reach = ball.radius() * axis_reach(ball.frame(), a) + 1e-12;
        int lo = static_cast<int>(std::floor((ball.center()[a] - reach) * n));
        int hi = static_cast<int>(std::floor((ball.center()[a] + reach) * n));
        ranges[a] = {lo, std::min(hi, lo + n - 1)};
      }
      std::vector<int> cur(d);
      auto rec = [&](auto&& self, int axis) -> void {
        if (axis == d) {
          long long flat = 0;
          for (int a = 0; a < d; ++a) flat = flat * n + ((cur[a] % n) + n) % n;
          auto& cell = idx.cells[static_cast<std::size_t>(flat)];
          if (cell.empty() || cell.back() != bi) cell.push_back(bi);
          return;
        }
        for (int c = ranges[axis].first; c <= ranges[axis].second; ++c) {
          cur[axis] = c;
          self(self, axis + 1);
        }
      };
      rec(rec, 0);
    }
    indices_.push_back(std::move(idx));
  }
}

int PerturbedMap::locate_ball(const PerturbationLayer& layer, const LayerIndex& idx,
                              const Vec& x) const {
  const int d = dim();
  const int n = idx.cells_per_axis;
  long long flat = 0;
  for (int a = 0; a < d; ++a) {
    int c = static_cast<int>(std::floor(x[a] * n));
    c = ((c % n) + n) % n;
    flat = flat * n + c;
  }
  for (int bi : idx.cells[static_cast<std::size_t>(flat)])
    if (layer.balls[bi].contains(x)) return bi;
  return -1;
}

double PerturbedMap::support_measure() const {
  return layers_.empty() ? 0.0 : layers_.back().support_measure();
}

Vec PerturbedMap::evaluate(const Vec& x) const {
  Vec y = torus_wrap(x);
  for (int k = static_cast<int>(layers_.size()) - 1; k >= 0; --k) {
    int bi = locate_ball(layers_[k], indices_[k], y);
    if (bi >= 0) {
      const auto& ball = layers_[k].balls[bi];
      y = ball.chart(layers_[k].deformation.apply(ball.chart_inverse(y)));
    }
  }
  return torus_wrap(base_.matrix() * y);
}

Vec PerturbedMap::evaluate_inverse(const Vec& x) const {
  Vec y = torus_wrap(base_.inverse_matrix() * torus_wrap(x));
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    int bi = locate_ball(layers_[k], indices_[k], y);
    if (bi >= 0) {
      const auto& ball = layers_[k].balls[bi];
      y = ball.chart(layers_[k].deformation.apply_inverse(ball.chart_inverse(y)));
    }
  }
  return y;
}

void PerturbedMap::step(Vec& x, Mat& D) const {
  const int d = dim();
  D = Mat::Identity(d, d);
  Vec y = torus_wrap(x);
  for (int k = static_cast<int>(layers_.size()) - 1; k >= 0; --k) {
    int bi = locate_ball(layers_[k], indices_[k], y);
    if (bi >= 0) {
      const auto& ball = layers_[k].balls[bi];
      Vec z = ball.chart_inverse(y);
      D = ball.frame() * layers_[k].deformation.jacobian(z) * ball.frame_inv() * D;
      y = ball.chart(layers_[k].deformation.apply(z));
    }
  }
  D = base_.matrix() * D;
  x = torus_wrap(base_.matrix() * y);
}

void PerturbedMap::step_inverse(Vec& x, Mat& D) const {
  const int d = dim();
  D = base_.inverse_matrix();
  Vec y = torus_wrap(base_.inverse_matrix() * torus_wrap(x));
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    int bi = locate_ball(layers_[k], indices_[k], y);
    if (bi >= 0) {
      const auto& ball = layers_[k].balls[bi];
      Vec z = ball.chart_inverse(y);
      Vec w = layers_[k].deformation.apply_inverse(z);
      D = ball.frame() * layers_[k].deformation.jacobian(w).inverse() * ball.frame_inv() * D;
      y = ball.chart(w);
    }
  }
  x = y;
}

Mat PerturbedMap::differential(const Vec& x) const {
  Vec y = x;
  Mat D;
  step(y, D);
  return D;
}

Mat PerturbedMap::differential_inverse(const Vec& x) const {
  Vec y = x;
  Mat D;
  step_inverse(y, D);
  return D;
}

TorusPoint evaluate(const PerturbedMap& f, const TorusPoint& x) {
  return TorusPoint(f.evaluate(x.coords()));
}

Mat differential(const PerturbedMap& f, const TorusPoint& x) {
  return f.differential(x.coords());
}

int damping_horizon(const ConeConstants& cones, double sigma) {
  if (!(sigma > 0.0)) throw Error(Errc::invalid_input, "sigma must be positive");
  if (!(cones.kappa > 0.0 && cones.alpha > 0.0 && cones.gamma > 0.0))
    throw Error(Errc::invalid_input, "constants must be positive");
  const double lM = std::log(std::max(1.0 / cones.kappa, cones.alpha / cones.gamma));
  int n = std::max(2, static_cast<int>(std::floor((2.0 / sigma) * lM)) + 2);
  while ((n - 1) * sigma / 2.0 <= lM) ++n;              // enforce the strict inequality
  while (n > 2 && (n - 2) * sigma / 2.0 > lM) --n;      // and minimality
  return n;
}

int DampingParameters::minimal_horizon() const { return damping_horizon(cones, sigma); }

void DampingParameters::validate(bool rigorous) const {
  cones.validate();
  if (!(sigma > 0.0)) throw Error(Errc::invalid_input, "sigma must be positive");
  if (N < 1) throw Error(Errc::invalid_input, "N must be >= 1");
  if (!(delta0 > 0.0)) throw Error(Errc::invalid_input, "delta0 must be positive");
  double amax = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    if (a[i] < 0.0) throw Error(Errc::invalid_input, "speeds a_j must be >= 0");
    amax = std::max(amax, a[i]);
  }
  if (a.size() > 0 && !(amax > 0.0))
    throw Error(Errc::invalid_input, "at least one speed a_j must be positive");
  if (rigorous && N < minimal_horizon())
    throw Error(Errc::invalid_input, "rigorous mode needs N >= N0");
}

double ellipsoid_min_norm(const Vec& c, const Mat& M) {
  Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec sv = svd.singularValues();
  const Vec beta = svd.matrixU().transpose() * c;
  const int d = static_cast<int>(c.size());

  // inside iff |M^{-1} c| <= 1
  double inside = 0.0;
  for (int i = 0; i < d; ++i) inside += sqr(beta[i] / sv[i]);
  if (inside <= 1.0) return 0.0;

  auto wnorm2 = [&](double mu) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += sqr(sv[i] * beta[i] / (sv[i] * sv[i] + mu));
    return s;
  };
  double lo = 0.0, hi = 1.0;
  while (wnorm2(hi) > 1.0) hi *= 4.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + hi); ++it) {
    double mid = 0.5 * (lo + hi);
    (wnorm2(mid) > 1.0 ? lo : hi) = mid;
  }
  const double mu = 0.5 * (lo + hi);
  double dist2 = 0.0;
  for (int i = 0; i < d; ++i) dist2 += sqr(beta[i] * mu / (sv[i] * sv[i] + mu));
  return std::sqrt(dist2);
}

double ellipsoid_torus_separation(const Vec& c1, const Mat& M1, const Vec& c2, const Mat& M2) {
  const int d = static_cast<int>(c1.size());
  const Mat M1inv = M1.inverse();
  const Mat A = M1inv * M2;
  const Vec dc = torus_diff(c2, c1);

  const double r1 = M1.jacobiSvd().singularValues()[0];
  const double r2 = M2.jacobiSvd().singularValues()[0];
  const double sig1_min = M1.jacobiSvd().singularValues().minCoeff();

  std::vector<int> K(d);
  for (int a = 0; a < d; ++a) {
    double reach = axis_reach(M1, a) + axis_reach(M2, a);
    K[a] = static_cast<int>(std::ceil(reach + 0.5));
  }

  double sep = std::numeric_limits<double>::infinity();
  std::vector<int> k(d, 0);
  auto rec = [&](auto&& self, int axis) -> void {
    if (axis == d) {
      Vec shift(d);
      for (int a = 0; a < d; ++a) shift[a] = dc[a] + k[a];
      const double amb = shift.norm();
      if (amb > r1 + r2) {
        // cheap certified lower bound in E1 units
        sep = std::min(sep, (amb - (r1 + r2)) / std::max(sig1_min, 1e-300));
        return;
      }
      sep = std::min(sep, ellipsoid_min_norm(M1inv * shift, A) - 1.0);
      return;
    }
    for (int v = -K[axis]; v <= K[axis]; ++v) {
      k[axis] = v;
      self(self, axis + 1);
    }
  };
  rec(rec, 0);
  return sep;
}

PlacementResult place_balls(const HyperbolicAutomorphism& f, int N, double radius, int budget,
                            std::uint64_t seed, std::function<Mat(const Vec&)> frame_fn,
                            double inflation, std::function<Mat(const Vec&)> refine_fn) {
  const int d = f.dim();
  if (N < 1) throw Error(Errc::invalid_input, "N must be >= 1");
  if (!(radius > 0.0)) throw Error(Errc::invalid_input, "radius must be positive");
  if (budget < 1) throw Error(Errc::invalid_input, "budget must be >= 1");
  if (!frame_fn) {
    Mat V = f.eigenvectors();
    frame_fn = [V](const Vec&) { return V; };
  }

  std::vector<Mat> Lpow(N);
  Lpow[0] = Mat::Identity(d, d);
  for (int n = 1; n < N; ++n) Lpow[n] = f.matrix() * Lpow[n - 1];

  // images of the default frame decide geometric feasibility up front
  {
    Mat V0 = frame_fn(Vec::Zero(d));
    const double rr = (radius + inflation) * kMargin;
    for (int n = 0; n < N; ++n)
      for (int a = 0; a < d; ++a)
        if (axis_reach(Lpow[n] * V0, a) * rr > kReachCap)
          throw Error(Errc::placement_failed,
                      "radius too large: iterate " + std::to_string(n) +
                          " of a ball exceeds the certification reach cap");
  }

  struct Blob {
    Vec c;
    Mat M;
    double r_out;
  };
  std::vector<Blob> accepted;
  PlacementResult res;
  res.ceiling = 1.0 / N;
  res.min_margin = std::numeric_limits<double>::infinity();

  Halton seq(d);
  const long long max_attempts = static_cast<long long>(budget) * 400 + 300;
  const long long reject_stop = 6000;
  long long consecutive_rejects = 0;

  for (long long attempt = 0; attempt < max_attempts && consecutive_rejects < reject_stop &&
                              static_cast<int>(res.balls.size()) < budget; ++attempt) {
    ++res.attempts;
    ++consecutive_rejects;
    Vec c = seq.next();
    Mat V = frame_fn(c);
    if (std::abs(V.determinant()) < kMinFrameDet) continue;

    const double rr = (radius + inflation) * kMargin;
    std::vector<Blob> cand(N);
    bool feasible = true;
    Vec cn = c;
    for (int n = 0; n < N; ++n) {
      cand[n].c = cn;
      cand[n].M = Lpow[n] * V * rr;
      cand[n].r_out = cand[n].M.jacobiSvd().singularValues()[0];
      for (int a = 0; a < d; ++a)
        if (axis_reach(cand[n].M, a) > kReachCap) feasible = false;
      cn = torus_wrap(f.matrix() * cn);
    }
    if (!feasible) continue;

    double worst = std::numeric_limits<double>::infinity();
    for (int n = 0; n < N && worst > 0.0; ++n)
      for (int m = n + 1; m < N && worst > 0.0; ++m)
        worst = std::min(worst,
                         ellipsoid_torus_separation(cand[n].c, cand[n].M, cand[m].c, cand[m].M));
    for (int n = 0; n < N && worst > 0.0; ++n)
      for (const auto& blob : accepted) {
        if (torus_distance(cand[n].c, blob.c) > cand[n].r_out + blob.r_out + 0.01) continue;
        worst = std::min(worst, ellipsoid_torus_separation(cand[n].c, cand[n].M, blob.c, blob.M));
        if (worst <= 0.0) break;
      }
    if (worst <= 0.0) continue;

    if (refine_fn) {
      Mat W = refine_fn(c);
      if (W.rows() != d || W.norm() == 0.0) continue;
      if (std::abs(W.determinant()) < kMinFrameDet) continue;
      // the certificates covered 2 E(V); the refined ball must stay inside
      Eigen::JacobiSVD<Mat> drift(V.inverse() * W);
      if (drift.singularValues()[0] > 2.0) continue;
      V = W;
    }
    res.min_margin = std::min(res.min_margin, worst);
    for (auto& blob : cand) accepted.push_back(std::move(blob));
    res.balls.emplace_back(c, radius, V);
    res.support_measure += res.balls.back().volume();
    consecutive_rejects = 0;
  }

  if (res.balls.empty())
    throw Error(Errc::placement_failed, "no ball placeable at the given radius");
  return res;
}

DampingReport check_damping(const PerturbedMap& f, const DampingParameters& p, int samples,
                            std::uint64_t seed) {
  DampingReport rep;
  const int d = f.dim();
  const int u = f.base().unstable_index();
  const ConeConstants& cc = p.cones;
  const Mat& V = f.base().eigenvectors();
  const Mat& Vinv = f.base().eigenvectors_inv();
  Rng rng(seed);

  if (f.layers().empty()) {
    // f equals the base automorphism; all four conditions are vacuous or exact
    rep.cones_ok = rep.projections_ok = rep.tower_ok = true;
    rep.averaged_gap = gap(f.base().spectrum(), u);
    rep.gap_ok = rep.averaged_gap >= p.sigma / 2.0;
    rep.pass = rep.gap_ok;
    return rep;
  }

  const PerturbationLayer& layer = f.layers().back();
  const int nb = static_cast<int>(layer.balls.size());
  const int per_ball = std::max(8, samples / std::max(1, nb));
  rep.worst_opening = 0.0;
  rep.worst_ratio = std::numeric_limits<double>::infinity();
  rep.cones_ok = rep.projections_ok = true;

  auto record_witness = [&](const char* what, const Vec& x, int j, double value) {
    if (rep.witnesses.size() < 8) rep.witnesses.push_back({what, x, j, value});
  };

  for (int bi = 0; bi < nb; ++bi) {
    const auto& ball = layer.balls[bi];
    for (int s = 0; s < per_ball; ++s) {
      Vec z = rng.ball_point(d);
      Vec x = ball.chart(z);
      Mat R = Vinv * f.differential(x) * V;
      Mat Rinv = R.inverse();
      ++rep.samples;

      for (int j = 1; j <= d - 1; ++j) {
        for (int pr = 0; pr < 4; ++pr) {
          Vec v(d);
          v.head(j) = rng.unit_vector(j);
          v.tail(d - j) = cc.beta * rng.unit_vector(d - j);
          Vec w = R * v;
          double open_h = w.tail(d - j).norm() / w.head(j).norm();
          rep.worst_opening = std::max(rep.worst_opening, open_h);
          if (!(open_h <= cc.alpha)) {
            rep.cones_ok = false;
            record_witness("horizontal cone escapes", x, j, open_h);
          }
          Vec vv(d);
          vv.tail(d - j) = rng.unit_vector(d - j);
          vv.head(j) = cc.beta * rng.unit_vector(j);
          Vec wv = Rinv * vv;
          double open_v = wv.head(j).norm() / wv.tail(d - j).norm();
          rep.worst_opening = std::max(rep.worst_opening, open_v);
          if (!(open_v <= cc.alpha)) {
            rep.cones_ok = false;
            record_witness("vertical cone escapes", x, j, open_v);
          }
        }
      }

      for (int pr = 0; pr < 4; ++pr) {
        Vec v(d);
        v.head(u) = rng.unit_vector(u);
        v.tail(d - u) = cc.beta * rng.u01() * rng.unit_vector(d - u);
        double ratio = (R * v).head(u).norm() / v.head(u).norm();
        rep.worst_ratio = std::min(rep.worst_ratio, ratio);
        if (!(ratio >= cc.kappa)) {
          rep.projections_ok = false;
          record_witness("unstable projection bound fails", x, u, ratio);
        }
        Vec vv(d);
        vv.tail(d - u) = rng.unit_vector(d - u);
        vv.head(u) = cc.beta * rng.u01() * rng.unit_vector(u);
        double ratio_s = (Rinv * vv).tail(d - u).norm() / vv.tail(d - u).norm();
        rep.worst_ratio = std::min(rep.worst_ratio, ratio_s);
        if (!(ratio_s >= cc.kappa)) {
          rep.projections_ok = false;
          record_witness("stable projection bound fails", x, u, ratio_s);
        }
      }
    }
  }

  // condition (iii): disjointness of the tower over the previous-stage map.
  // For a single layer the ellipsoidal images under the linear base are exact;
  // earlier layers only displace points within their own balls, which an
  // inflation radius absorbs.
  double inflation = 0.0;
  for (std::size_t k = 0; k + 1 < f.layers().size(); ++k)
    for (const auto& b : f.layers()[k].balls)
      inflation = std::max(inflation, 2.0 * b.radius() *
                                          b.frame().jacobiSvd().singularValues()[0]);
  {
    const int N = p.N;
    std::vector<Mat> Lpow(N);
    Lpow[0] = Mat::Identity(d, d);
    for (int n = 1; n < N; ++n) Lpow[n] = f.base().matrix() * Lpow[n - 1];
    rep.tower_margin = std::numeric_limits<double>::infinity();
    rep.tower_ok = true;
    struct Img {
      Vec c;
      Mat M;
    };
    std::vector<Img> imgs;
    bool capped = false;
    for (const auto& ball : layer.balls) {
      Vec cn = ball.center();
      for (int n = 0; n < N; ++n) {
        Mat M = Lpow[n] * ball.frame() * (ball.radius() + inflation);
        for (int a = 0; a < d; ++a)
          if (axis_reach(M, a) > kReachCap) capped = true;
        imgs.push_back({cn, M});
        cn = torus_wrap(f.base().matrix() * cn);
      }
    }
    if (capped) {
      rep.tower_ok = false;
      rep.tower_margin = -std::numeric_limits<double>::infinity();
      record_witness("tower images exceed certification reach", layer.balls[0].center(), 0, 0.0);
    } else {
      const int nimg = static_cast<int>(imgs.size());
      for (int i = 0; i < nimg && rep.tower_ok; ++i)
        for (int jj = i + 1; jj < nimg; ++jj) {
          double s = ellipsoid_torus_separation(imgs[i].c, imgs[i].M, imgs[jj].c, imgs[jj].M);
          rep.tower_margin = std::min(rep.tower_margin, s);
          if (s <= 0.0) {
            rep.tower_ok = false;
            record_witness("tower overlap", imgs[i].c, i, s);
            break;
          }
        }
    }
  }

  // condition (iv): constant expansion functions for the linear base reduce
  // the averaged gap to the exact spectrum gap.
  rep.averaged_gap = gap(f.base().spectrum(), u);
  rep.gap_ok = rep.averaged_gap >= p.sigma / 2.0;
  if (!rep.gap_ok) record_witness("averaged gap below sigma/2", Vec::Zero(d), u, rep.averaged_gap);

  rep.pass = rep.cones_ok && rep.projections_ok && rep.tower_ok && rep.gap_ok;
  return rep;
}

ConeContractionReport cone_contraction_check(const PerturbedMap& f, int j, double tau_in,
                                             int horizon, int samples, double gamma, int N,
                                             std::uint64_t seed) {
  const int d = f.dim();
  if (j < 1 || j > d - 1) throw Error(Errc::invalid_input, "cone index out of range");
  if (!(tau_in > 0.0)) throw Error(Errc::degenerate_input, "tau_in must be positive");
  if (horizon < 1) throw Error(Errc::invalid_input, "horizon must be >= 1");

  ConeContractionReport rep;
  const auto& spec = f.base().spectrum();
  rep.expected_contraction = std::exp(-(spec[j - 1] - spec[j]));
  const Mat& V = f.base().eigenvectors();
  const Mat& Vinv = f.base().eigenvectors_inv();
  Rng rng(seed);

  auto in_support = [&](const Vec& x) {
    for (const auto& layer : f.layers())
      for (const auto& ball : layer.balls)
        if (ball.contains(x)) return true;
    return false;
  };

  rep.min_off_support_contraction = 0.0;
  int recovered = 0, recovery_possible = 0;
  for (int s = 0; s < samples; ++s) {
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = rng.u01();
    Vec v(d);
    if (s % 2 == 0) {
      // boundary probe concentrated on the (j, j+1) plane: worst case
      v.setZero();
      v[j - 1] = 1.0;
      v[j] = tau_in;
    } else {
      v.head(j) = rng.unit_vector(j);
      v.tail(d - j) = tau_in * rng.unit_vector(d - j);
    }
    double opening = tau_in;
    int consecutive_out = 0;
    bool recovered_this = false, had_window = false;
    for (int n = 0; n < horizon; ++n) {
      bool inside = in_support(x);
      Mat R = Vinv * f.differential(x) * V;
      v = R * v;
      x = f.evaluate(x);
      double next = v.tail(d - j).norm() / v.head(j).norm();
      if (!inside) {
        ++consecutive_out;
        if (opening > 1e-6)
          rep.min_off_support_contraction =
              std::max(rep.min_off_support_contraction, next / opening);
      } else {
        consecutive_out = 0;
      }
      if (N > 0 && gamma > 0.0 && consecutive_out >= N) {
        had_window = true;
        if (next <= gamma) recovered_this = true;
      }
      opening = next;
    }
    rep.max_final_opening = std::max(rep.max_final_opening, opening);
    if (had_window) {
      ++recovery_possible;
      if (recovered_this) ++recovered;
    }
    ++rep.samples;
  }
  rep.recovery_fraction =
      recovery_possible > 0 ? static_cast<double>(recovered) / recovery_possible : 1.0;

  const bool rate_ok = rep.min_off_support_contraction <= rep.expected_contraction * 1.10;
  const bool recovery_ok = (N <= 0 || gamma <= 0.0) || rep.recovery_fraction >= 0.99;
  rep.pass = rate_ok && recovery_ok;
  if (!rate_ok) rep.detail = "off-support contraction slower than the spectral gap";
  if (!recovery_ok) rep.detail = "cone fails to re-enter gamma within N off-support steps";
  return rep;
}

}  // namespace anosov
