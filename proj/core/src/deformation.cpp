#include "anosov/deformation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace anosov {

namespace {

constexpr double kDomainTol = 1e-12;
constexpr double kTransversalityFloor = 1e-2;

// Gauss-Legendre nodes and weights on [-1,1] by Newton iteration on the
// three-term recurrence.
void legendre_rule(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double p0 = 0.0, p1 = 0.0, dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      p0 = 1.0;
      p1 = t;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      double step = p1 / dp;
      t -= step;
      if (std::abs(step) < 1e-15) break;
    }
    x[i] = t;
    w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
}

struct QuadGrid {
  std::vector<double> r, wr;      // radial nodes on [0,1]
  std::vector<double> phi, wphi;  // polar nodes on [0,pi/2] (d >= 3)
  int npsi = 0;                   // equispaced angular nodes on [0,2pi)
};

QuadGrid make_grid(int nr, int nphi, int npsi) {
  QuadGrid g;
  std::vector<double> x, w;
  legendre_rule(nr, x, w);
  g.r.resize(nr);
  g.wr.resize(nr);
  for (int i = 0; i < nr; ++i) {
    g.r[i] = 0.5 * (x[i] + 1.0);
    g.wr[i] = 0.5 * w[i];
  }
  if (nphi > 0) {
    legendre_rule(nphi, x, w);
    g.phi.resize(nphi);
    g.wphi.resize(nphi);
    for (int i = 0; i < nphi; ++i) {
      g.phi[i] = 0.25 * M_PI * (x[i] + 1.0);
      g.wphi[i] = 0.25 * M_PI * w[i];
    }
  }
  g.npsi = npsi;
  return g;
}

// One quadrature pass of the reduced integrand. The integrand for
// Q depends on z only through (r, u, psi) where u is the fraction of the
// radius carried by the rotation plane.
double q_pass(double s, const BumpProfile& rho, int d, const QuadGrid& g) {
  KahanSum num, den;
  const double dpsi = 2.0 * M_PI / g.npsi;
  for (std::size_t ir = 0; ir < g.r.size(); ++ir) {
    const double r = g.r[ir];
    const double wr = g.wr[ir] * std::pow(r, d - 1);
    const double rv = rho.value(r);
    const double rd = rho.derivative(r);
    const double th = s * rv;
    const double c = std::cos(th), sn = std::sin(th);
    const int nu = (d == 2) ? 1 : static_cast<int>(g.phi.size());
    for (int iu = 0; iu < nu; ++iu) {
      double u = 1.0, wu = 1.0;
      if (d >= 3) {
        u = std::sin(g.phi[iu]);
        wu = g.wphi[iu] * u * std::pow(std::cos(g.phi[iu]), d - 3);
      }
      const double a = s * rd * r * u * u;
      for (int ip = 0; ip < g.npsi; ++ip) {
        const double psi = dpsi * ip;
        // Delta = cos(s rho) - s rho' r u^2 cos(psi) sin(psi + s rho)
        const double delta = c - a * std::cos(psi) * (std::sin(psi) * c + std::cos(psi) * sn);
        if (!(delta > 0.0))
          throw Error(Errc::numeric_failure, "minor vanished during quadrature");
        const double w = wr * wu * dpsi;
        num.add(w * std::log(delta));
        den.add(w);
      }
    }
  }
  return -num.value() / den.value();
}

double frame_pairing_log_ratio(const Mat& J, const Mat& W, int j, bool* ok) {
  const int d = static_cast<int>(J.rows());
  Mat JW = J * W;
  double den = W.topRows(j).determinant();
  double num = JW.topRows(j).determinant();
  (void)d;
  if (!(num * den > 0.0) || std::abs(den) < 1e-200) {
    *ok = false;
    return 0.0;
  }
  *ok = true;
  return std::log(std::abs(num)) - std::log(std::abs(den));
}

}  // namespace

BumpProfile::BumpProfile(double amplitude) : c_(amplitude) {
  if (!(amplitude >= 0.0)) throw Error(Errc::invalid_input, "profile amplitude must be >= 0");
  // extrema located numerically once; both functions vanish at r >= 1
  sup_value_ = value(0.0);
  sup_derivative_ = 0.0;
  for (int i = 0; i <= 4096; ++i) {
    double r = i / 4096.0;
    sup_value_ = std::max(sup_value_, std::abs(value(r)));
    sup_derivative_ = std::max(sup_derivative_, std::abs(derivative(r)));
  }
}

double BumpProfile::value(double r) const {
  if (r >= 1.0) return 0.0;
  return c_ * std::exp(-1.0 / (1.0 - r * r));
}

double BumpProfile::derivative(double r) const {
  if (r >= 1.0) return 0.0;
  const double q = 1.0 - r * r;
  return value(r) * (-2.0 * r / (q * q));
}

void ConeConstants::validate() const {
  if (!(alpha > beta && beta > gamma && gamma > 0.0))
    throw Error(Errc::invalid_input, "need alpha > beta > gamma > 0");
  if (!(kappa > 0.0 && kappa <= 1.0)) throw Error(Errc::invalid_input, "kappa must be in (0,1]");
  if (!(nu > 0.0)) throw Error(Errc::invalid_input, "nu must be positive");
}

Mat rotation(int j, double theta, int d) {
  if (j < 1 || j > d - 1) throw Error(Errc::invalid_input, "rotation index out of range");
  Mat m = Mat::Identity(d, d);
  const double c = std::cos(theta), s = std::sin(theta);
  m(j - 1, j - 1) = c;
  m(j - 1, j) = -s;
  m(j, j - 1) = s;
  m(j, j) = c;
  return m;
}

Vec apply_elementary(int j, double s, const Vec& z, const BumpProfile& profile) {
  const int d = static_cast<int>(z.size());
  if (j < 1 || j > d - 1) throw Error(Errc::invalid_input, "elementary index out of range");
  const double r = z.norm();
  if (r > 1.0 + kDomainTol) throw Error(Errc::out_of_domain, "|z| > 1");
  const double th = s * profile.value(r);
  const double c = std::cos(th), sn = std::sin(th);
  Vec out = z;
  out[j - 1] = c * z[j - 1] - sn * z[j];
  out[j] = sn * z[j - 1] + c * z[j];
  return out;
}

double delta(int j, double s, const Vec& z, const BumpProfile& profile) {
  const int d = static_cast<int>(z.size());
  if (j < 1 || j > d - 1) throw Error(Errc::invalid_input, "minor index out of range");
  const double r = z.norm();
  if (r > 1.0 + kDomainTol) throw Error(Errc::out_of_domain, "|z| > 1");
  const double th = s * profile.value(r);
  const double dj = r > 0.0 ? profile.derivative(r) * z[j - 1] / r : 0.0;
  return std::cos(th) - s * dj * (z[j - 1] * std::sin(th) + z[j] * std::cos(th));
}

Mat elementary_jacobian(int j, double s, const Vec& z, const BumpProfile& profile) {
  const int d = static_cast<int>(z.size());
  const double r = z.norm();
  if (r > 1.0 + kDomainTol) throw Error(Errc::out_of_domain, "|z| > 1");
  const double th = s * profile.value(r);
  const double c = std::cos(th), sn = std::sin(th);
  Mat m = rotation(j, th, d);
  if (r > 0.0) {
    Vec grad = (profile.derivative(r) / r) * z;
    Vec w = Vec::Zero(d);
    w[j - 1] = -(z[j - 1] * sn + z[j] * c);
    w[j] = z[j - 1] * c - z[j] * sn;
    m += s * w * grad.transpose();
  }
  return m;
}

ModelDeformation::ModelDeformation(int dim, BumpProfile profile, Vec amplitudes, Vec parameters)
    : d_(dim), profile_(std::move(profile)), b_(std::move(amplitudes)), t_(std::move(parameters)) {
  if (d_ < 2) throw Error(Errc::invalid_input, "dimension must be >= 2");
  if (b_.size() != d_ - 1 || t_.size() != d_ - 1)
    throw Error(Errc::invalid_input, "need d-1 amplitudes and parameters");
  for (int i = 0; i < d_ - 1; ++i)
    if (b_[i] < 0.0 || b_[i] > 1.0 || t_[i] < 0.0 || t_[i] > 1.0)
      throw Error(Errc::invalid_input, "amplitudes and parameters live in [0,1]");
}

bool ModelDeformation::is_identity() const {
  for (int i = 0; i < d_ - 1; ++i)
    if (b_[i] * t_[i] != 0.0) return false;
  return true;
}

void ModelDeformation::check_domain(const Vec& z) const {
  if (z.size() != d_) throw Error(Errc::invalid_input, "point dimension mismatch");
  if (z.norm() > 1.0 + kDomainTol) throw Error(Errc::out_of_domain, "|z| > 1");
}

Vec ModelDeformation::apply(const Vec& z) const {
  check_domain(z);
  Vec w = z;
  for (int j = 1; j <= d_ - 1; ++j) w = apply_elementary(j, effective(j), w, profile_);
  return w;
}

Vec ModelDeformation::apply_inverse(const Vec& z) const {
  check_domain(z);
  // each elementary factor preserves |z|, so rho is known at the image and
  // the inverse is the rotation by the negated angle
  Vec w = z;
  for (int j = d_ - 1; j >= 1; --j) w = apply_elementary(j, -effective(j), w, profile_);
  return w;
}

Mat ModelDeformation::jacobian(const Vec& z) const {
  check_domain(z);
  Mat J = Mat::Identity(d_, d_);
  Vec w = z;
  for (int j = 1; j <= d_ - 1; ++j) {
    J = elementary_jacobian(j, effective(j), w, profile_) * J;
    w = apply_elementary(j, effective(j), w, profile_);
  }
  return J;
}

double ModelDeformation::principal_minor(const Vec& z, int j) const {
  check_domain(z);
  if (j < 1 || j > d_ - 1) throw Error(Errc::invalid_input, "minor index out of range");
  Vec w = z;
  for (int k = 1; k < j; ++k) w = apply_elementary(k, effective(k), w, profile_);
  return delta(j, effective(j), w, profile_);
}

double q_of(double s, const BumpProfile& profile, int dim, double tol) {
  if (s < 0.0 || s > 1.0) throw Error(Errc::invalid_input, "s must be in [0,1]");
  if (dim < 2) throw Error(Errc::invalid_input, "dimension must be >= 2");
  if (s == 0.0 || profile.amplitude() == 0.0) return 0.0;
  double prev = 0.0;
  bool have_prev = false;
  for (int level = 0; level < 7; ++level) {
    const int nr = 16 << level;
    const int nphi = (dim >= 3) ? (8 << level) : 0;
    const int npsi = 16 << level;
    const double q = q_pass(s, profile, dim, make_grid(nr, nphi, npsi));
    if (have_prev && std::abs(q - prev) < tol) return q;
    prev = q;
    have_prev = true;
  }
  throw Error(Errc::numeric_failure, "quadrature did not converge for Q");
}

double q_of_direct3(int j, double s, const BumpProfile& profile, double tol) {
  if (j < 1 || j > 2) throw Error(Errc::invalid_input, "j must be 1 or 2 for d = 3");
  if (s == 0.0) return 0.0;
  double prev = 0.0;
  bool have_prev = false;
  for (int level = 0; level < 6; ++level) {
    const int nr = 16 << level, nth = 16 << level, npsi = 16 << level;
    std::vector<double> xr, wr, xt, wt;
    legendre_rule(nr, xr, wr);
    legendre_rule(nth, xt, wt);
    const double dpsi = 2.0 * M_PI / npsi;
    KahanSum num, den;
    Vec z(3);
    for (int ir = 0; ir < nr; ++ir) {
      const double r = 0.5 * (xr[ir] + 1.0);
      const double w_r = 0.5 * wr[ir] * r * r;
      for (int it = 0; it < nth; ++it) {
        const double th = 0.5 * M_PI * (xt[it] + 1.0);
        const double w_t = 0.5 * M_PI * wt[it] * std::sin(th);
        for (int ip = 0; ip < npsi; ++ip) {
          const double psi = dpsi * ip;
          z[0] = r * std::sin(th) * std::cos(psi);
          z[1] = r * std::sin(th) * std::sin(psi);
          z[2] = r * std::cos(th);
          const double dl = delta(j, s, z, profile);
          if (!(dl > 0.0)) throw Error(Errc::numeric_failure, "minor vanished");
          const double w = w_r * w_t * dpsi;
          num.add(w * std::log(dl));
          den.add(w);
        }
      }
    }
    const double q = -num.value() / den.value();
    if (have_prev && std::abs(q - prev) < tol) return q;
    prev = q;
    have_prev = true;
  }
  throw Error(Errc::numeric_failure, "quadrature did not converge for Q (direct)");
}

QFunction::QFunction(const BumpProfile& profile, int dim, double tol)
    : profile_(profile), dim_(dim), tol_(tol) {
  grid_.resize(201);
  for (int i = 0; i <= 200; ++i) grid_[i] = q_of(i / 200.0, profile_, dim_, tol_);
  q1_ = grid_[200];
  for (int i = 0; i + 1 <= 200; ++i)
    if (grid_[i + 1] < grid_[i] - tol_) monotone_ = false;
}

double QFunction::operator()(double s) const { return q_of(s, profile_, dim_, tol_); }

double QFunction::inverse_least(double target, double inv_tol) const {
  if (target < -inv_tol) throw Error(Errc::invalid_input, "target must be >= 0");
  if (target <= inv_tol * 1e-3 && target <= 0.0) return 0.0;
  if (target > q1_ + inv_tol)
    throw Error(Errc::target_unreachable,
                "target exceeds Q(1); shrink the requested shift");
  if (target <= 0.0) return 0.0;
  // leftmost grid cell crossing the target, then bisection inside it
  int cell = -1;
  for (int i = 0; i + 1 <= 200; ++i) {
    if ((grid_[i] - target) * (grid_[i + 1] - target) <= 0.0 && grid_[i + 1] != grid_[i]) {
      cell = i;
      break;
    }
  }
  if (cell < 0) cell = 199;
  double lo = cell / 200.0, hi = (cell + 1) / 200.0;
  double qlo = grid_[cell];
  for (int it = 0; it < 80; ++it) {
    double mid = 0.5 * (lo + hi);
    double qm = q_of(mid, profile_, dim_, tol_);
    if (std::abs(qm - target) <= inv_tol) return mid;
    if ((qlo - target) * (qm - target) <= 0.0)
      hi = mid;
    else {
      lo = mid;
      qlo = qm;
    }
  }
  return 0.5 * (lo + hi);
}

double calibrate_amplitude(double target, const BumpProfile& profile, int dim) {
  QFunction q(profile, dim);
  return q.inverse_least(target);
}

BumpProfile calibrate_profile(int dim, double c_start, std::uint64_t seed) {
  Rng rng(seed);
  for (double c = c_start; c > 1e-6; c *= 0.5) {
    BumpProfile profile(c);
    bool ok = true;
    // corners of the parameter cube plus random draws; minors through the
    // one-factor formula
    std::vector<Vec> ts;
    const int corners = 1 << (dim - 1);
    for (int mask = 0; mask < corners; ++mask) {
      Vec t(dim - 1);
      for (int i = 0; i < dim - 1; ++i) t[i] = (mask >> i) & 1 ? 1.0 : 0.0;
      ts.push_back(t);
    }
    for (int i = 0; i < 32; ++i) {
      Vec t(dim - 1);
      for (int k = 0; k < dim - 1; ++k) t[k] = rng.u01();
      ts.push_back(t);
    }
    for (const Vec& t : ts) {
      ModelDeformation m(dim, profile, Vec::Ones(dim - 1), t);
      for (int i = 0; i < 600 && ok; ++i) {
        Vec z = rng.ball_point(dim);
        for (int j = 1; j <= dim - 1 && ok; ++j)
          if (m.principal_minor(z, j) < kTransversalityFloor) ok = false;
      }
      if (!ok) break;
    }
    if (ok) return profile;
  }
  throw Error(Errc::calibration_failed, "no transversal amplitude found");
}

ConeConstants calibrate_cones(const ModelDeformation& m, double nu, std::uint64_t seed,
                              int frame_samples) {
  if (!(nu > 0.0)) throw Error(Errc::invalid_input, "nu must be positive");
  const int d = m.dim();
  ConeConstants cc;
  cc.nu = nu;
  if (m.is_identity()) {
    cc.alpha = 2.0;
    cc.beta = 0.5;
    cc.kappa = 0.5;
    cc.gamma = 0.25;
    return cc;
  }

  Rng rng(seed);
  // precompute Jacobians over a sample of (z, t') with t' ranging over the
  // whole parameter cube at the deformation's own amplitudes
  const int n_zt = 1500;
  std::vector<Mat> jacs, jacs_inv;
  std::vector<Vec> zs, ts;
  jacs.reserve(n_zt);
  for (int i = 0; i < n_zt; ++i) {
    Vec z = rng.ball_point(d);
    Vec t(d - 1);
    for (int k = 0; k < d - 1; ++k) t[k] = (i % 7 == 0) ? 1.0 : rng.u01();
    ModelDeformation vary(d, m.profile(), m.amplitudes(), t);
    Mat J = vary.jacobian(z);
    jacs.push_back(J);
    jacs_inv.push_back(J.inverse());
    zs.push_back(z);
    ts.push_back(t);
  }

  auto boundary_vector = [&](int j, double opening) {
    Vec head = rng.unit_vector(j), tail = rng.unit_vector(d - j);
    Vec v(d);
    v.head(j) = head;
    v.tail(d - j) = opening * tail;
    return v;
  };
  auto h_opening = [&](const Vec& v, int j) {
    double h = v.head(j).norm(), t = v.tail(d - j).norm();
    return h > 0.0 ? t / h : std::numeric_limits<double>::infinity();
  };
  auto v_opening = [&](const Vec& v, int j) {
    double h = v.head(j).norm(), t = v.tail(d - j).norm();
    return t > 0.0 ? h / t : std::numeric_limits<double>::infinity();
  };

  const int probes = 12;
  auto max_image_opening = [&](double beta) {
    double worst = 0.0;
    for (int i = 0; i < n_zt; ++i)
      for (int j = 1; j <= d - 1; ++j)
        for (int p = 0; p < probes; ++p) {
          Vec v = boundary_vector(j, beta);
          worst = std::max(worst, h_opening(jacs[i] * v, j));
          Vec u(d);
          u.tail(d - j) = rng.unit_vector(d - j);
          u.head(j) = beta * rng.unit_vector(j);
          worst = std::max(worst, v_opening(jacs_inv[i] * u, j));
        }
    return worst;
  };

  // alpha -> 2 A(1/alpha) is decreasing, so the admissible set is an interval;
  // bisect for its left edge
  auto admissible = [&](double alpha) { return 2.0 * max_image_opening(1.0 / alpha) <= alpha; };
  double hi = 1.05;
  while (hi < 64.0 && !admissible(hi)) hi *= 1.5;
  if (!admissible(hi))
    throw Error(Errc::calibration_failed, "no admissible cone opening below 64");
  double lo = hi / 1.5;
  for (int it = 0; it < 24 && hi - lo > 1e-3 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    (admissible(mid) ? hi : lo) = mid;
  }
  cc.alpha = hi;
  cc.beta = 1.0 / hi;

  double ratio_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_zt; ++i)
    for (int j = 1; j <= d - 1; ++j)
      for (int p = 0; p < probes; ++p) {
        Vec v = boundary_vector(j, cc.beta * rng.u01());
        double r1 = (jacs[i] * v).head(j).norm() / v.head(j).norm();
        Vec u(d);
        u.tail(d - j) = rng.unit_vector(d - j);
        u.head(j) = cc.beta * rng.u01() * rng.unit_vector(j);
        double r2 = (jacs_inv[i] * u).tail(d - j).norm() / u.tail(d - j).norm();
        ratio_min = std::min(ratio_min, std::min(r1, r2));
      }
  if (!(ratio_min > 0.0)) {
    std::ostringstream os;
    os << "projection bound vanished";
    throw Error(Errc::calibration_failed, os.str());
  }
  cc.kappa = std::min(1.0, 0.5 * ratio_min);

  // gamma: halve until the minor-cone deviation fits in nu with margin 2
  const int frames_per_zt = std::max(1, frame_samples / n_zt);
  for (double gamma = 0.5 * cc.beta; gamma > 1e-9; gamma *= 0.5) {
    double dev_max = 0.0;
    bool sign_ok = true;
    for (int i = 0; i < n_zt && sign_ok; ++i) {
      for (int f = 0; f < frames_per_zt && sign_ok; ++f) {
        int j = 1 + static_cast<int>(rng.bits() % (d - 1));
        Mat W(d, j);
        for (int col = 0; col < j; ++col) {
          Vec w(d);
          w.head(j) = rng.unit_vector(j);
          w.tail(d - j) = gamma * rng.u01() * rng.unit_vector(d - j);
          W.col(col) = w;
        }
        if (std::abs(W.topRows(j).determinant()) < 1e-8) {
          --f;  // nearly dependent heads; resample
          continue;
        }
        bool ok = false;
        double lr = frame_pairing_log_ratio(jacs[i], W, j, &ok);
        if (!ok) {
          sign_ok = false;
          break;
        }
        double md = jacs[i].topLeftCorner(j, j).determinant();
        dev_max = std::max(dev_max, std::abs(lr - std::log(std::abs(md))));
      }
    }
    if (sign_ok && dev_max <= 0.5 * nu) {
      cc.gamma = gamma;
      cc.validate();
      return cc;
    }
  }
  throw Error(Errc::calibration_failed, "no gamma satisfies the minor-cone bound");
}

}  // namespace anosov
