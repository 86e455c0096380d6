#include "anosov/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

namespace anosov {

namespace {

constexpr double kUnitCircleMargin = 1e-9;
constexpr double kSimplicityMargin = 1e-9;

// Faddeev-LeVerrier over exact integers: returns the monic characteristic
// polynomial (ascending) and, through *aux, the matrix M_d with
// adj(A) = (-1)^{d+1} M_d. All divisions are exact for integer input.
std::vector<BigInt> faddeev(const std::vector<long long>& m, int d,
                            std::vector<BigInt>* aux) {
  std::vector<BigInt> A(d * d);
  for (int i = 0; i < d * d; ++i) A[i] = m[i];

  std::vector<BigInt> M(d * d, 0), AM(d * d);
  for (int i = 0; i < d; ++i) M[i * d + i] = 1;  // M_1 = I

  std::vector<BigInt> c(d + 1);
  c[d] = 1;
  for (int k = 1; k <= d; ++k) {
    // AM = A * M
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        BigInt s = 0;
        for (int l = 0; l < d; ++l) s += A[i * d + l] * M[l * d + j];
        AM[i * d + j] = s;
      }
    BigInt tr = 0;
    for (int i = 0; i < d; ++i) tr += AM[i * d + i];
    if (tr % k != 0)
      throw Error(Errc::numeric_failure, "Faddeev-LeVerrier divisibility broken");
    c[d - k] = -tr / k;
    if (k == d) {
      if (aux) *aux = M;  // M_d (before the final update)
      break;
    }
    M = AM;
    for (int i = 0; i < d; ++i) M[i * d + i] += c[d - k];
  }
  return c;
}

double horner_longdouble(const std::vector<BigInt>& coeffs, double x) {
  long double acc = 0.0L;
  for (int k = static_cast<int>(coeffs.size()) - 1; k >= 0; --k)
    acc = acc * x + static_cast<long double>(coeffs[k]);
  return static_cast<double>(acc);
}

double horner_derivative(const std::vector<BigInt>& coeffs, double x) {
  long double acc = 0.0L;
  for (int k = static_cast<int>(coeffs.size()) - 1; k >= 1; --k)
    acc = acc * x + static_cast<long double>(k) * static_cast<long double>(coeffs[k]);
  return static_cast<double>(acc);
}

double newton_polish(const std::vector<BigInt>& coeffs, double x0) {
  double x = x0;
  for (int it = 0; it < 60; ++it) {
    double p = horner_longdouble(coeffs, x);
    double dp = horner_derivative(coeffs, x);
    if (dp == 0.0) break;
    double step = p / dp;
    x -= step;
    if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(x))) break;
  }
  return x;
}

// Sign of sum_i s_i * b^{E_i} evaluated stably through log-magnitudes; the
// dominant term controls the sign, so exp underflow of the others is harmless.
int stable_power_sum_sign(const std::vector<int>& sgn, const std::vector<double>& expnt,
                          double log_b) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double e : expnt) mx = std::max(mx, e * log_b);
  double s = 0.0;
  for (std::size_t i = 0; i < sgn.size(); ++i)
    s += sgn[i] * std::exp(expnt[i] * log_b - mx);
  return (s > 0) - (s < 0);
}

bool is_companion_form(const std::vector<long long>& m, int d) {
  for (int i = 0; i + 1 < d; ++i)
    for (int j = 0; j < d; ++j)
      if (m[i * d + j] != (j == i + 1 ? 1 : 0)) return false;
  return true;
}

}  // namespace

void ExponentPattern::validate() const {
  const int d = dim();
  if (d < 2 || u < 1 || u > d - 1) throw Error(Errc::invalid_input, "bad pattern shape");
  if (b < 3) throw Error(Errc::invalid_input, "base must be >= 3");
  long long sum = 0;
  for (int i = 0; i < d; ++i) {
    sum += a[i];
    if (i < u && a[i] <= 0) throw Error(Errc::invalid_input, "a_i must be positive for i <= u");
    if (i >= u && a[i] >= 0) throw Error(Errc::invalid_input, "a_i must be negative for i > u");
    if (i + 1 < d && a[i] - a[i + 1] < 2)
      throw Error(Errc::invalid_input, "consecutive gaps must be >= 2");
  }
  if (sum != 0) throw Error(Errc::invalid_input, "pattern must sum to zero");
}

ExponentPattern default_pattern(int d, int u, int b) {
  if (!(d > u && u > 0)) throw Error(Errc::invalid_input, "need d > u > 0");
  // Exhaustive search over admissible patterns with entries bounded by
  // max_abs, growing the bound until a candidate exists. Candidates at the
  // minimal bound are compared lexicographically.
  for (long long max_abs = 1; max_abs <= 8LL * d + 8; ++max_abs) {
    std::vector<std::vector<long long>> found;
    std::vector<long long> cur(d);
    auto rec = [&](auto&& self, int idx, long long partial) -> void {
      if (idx == d) {
        if (partial == 0) found.push_back(cur);
        return;
      }
      long long hi = (idx == 0) ? max_abs : cur[idx - 1] - 2;
      long long lo = -max_abs;
      if (idx < u) lo = std::max(lo, 1LL);  // positive block
      if (idx >= u) hi = std::min(hi, -1LL);
      for (long long v = hi; v >= lo; --v) {
        cur[idx] = v;
        self(self, idx + 1, partial + v);
      }
    };
    rec(rec, 0, 0);
    if (!found.empty()) {
      std::sort(found.begin(), found.end());
      ExponentPattern p{found.front(), u, b};
      p.validate();
      return p;
    }
  }
  throw Error(Errc::construction_failed, "no pattern found");
}

LatticePolynomial build_polynomial(const ExponentPattern& p) {
  p.validate();
  const int d = p.dim();
  std::vector<BigInt> prefix(d + 1);
  prefix[0] = 0;
  long long acc = 0;
  for (int i = 1; i <= d; ++i) {
    acc += p.a[i - 1];
    if (acc < 0) throw Error(Errc::invalid_input, "prefix sums must stay nonnegative");
    prefix[i] = acc;
  }

  LatticePolynomial poly;
  poly.coeffs.assign(d + 1, 0);
  BigInt base = p.b;
  for (int i = 0; i <= d; ++i) {
    BigInt coeff = boost::multiprecision::pow(base, static_cast<unsigned>(prefix[i].convert_to<long long>()));
    if (i % 2 == 1) coeff = -coeff;
    poly.coeffs[d - i] = coeff;
  }
  poly.pattern = p;
  return poly;
}

int sign_at_power(const LatticePolynomial& poly, int b, long long n) {
  if (poly.pattern) {
    for (long long ai : poly.pattern->a)
      if (ai == n)
        throw Error(Errc::invalid_input, "n coincides with a pattern exponent");
  }
  const int d = poly.degree();
  // Clear denominators for negative n: sign(P(b^n)) = sign(sum_k c_k b^{nk + |n| d}).
  const long long shift = n < 0 ? -n * static_cast<long long>(d) : 0;
  BigInt total = 0;
  BigInt base = b;
  for (int k = 0; k <= d; ++k) {
    long long e = n * k + shift;
    total += poly.coeffs[k] * boost::multiprecision::pow(base, static_cast<unsigned>(e));
  }
  if (total == 0) throw Error(Errc::invalid_input, "polynomial vanishes at b^n");
  return total > 0 ? 1 : -1;
}

void HyperbolicAutomorphism::finish(std::vector<double> eigenvalues) {
  const int d = d_;
  // sort by descending log-modulus
  std::vector<int> order(d);
  for (int i = 0; i < d; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
    return std::abs(eigenvalues[i]) > std::abs(eigenvalues[j]);
  });
  eig_.resize(d);
  for (int i = 0; i < d; ++i) eig_[i] = eigenvalues[order[i]];

  std::vector<double> logs(d);
  for (int i = 0; i < d; ++i) {
    logs[i] = std::log(std::abs(eig_[i]));
    if (std::abs(logs[i]) < kUnitCircleMargin)
      throw Error(Errc::construction_failed, "eigenvalue too close to the unit circle");
  }
  for (int i = 0; i + 1 < d; ++i)
    if (logs[i] - logs[i + 1] < kSimplicityMargin)
      throw Error(Errc::construction_failed, "log-moduli not simple");

  u_ = 0;
  for (double l : logs)
    if (l > 0) ++u_;
  if (u_ == 0 || u_ == d)
    throw Error(Errc::construction_failed, "matrix is not of mixed index");

  md_.resize(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) md_(i, j) = static_cast<double>(m_[i * d + j]);

  // eigenvectors: Vandermonde columns for companion matrices, generic solver
  // otherwise; either way polished against the integer matrix.
  vecs_.resize(d, d);
  if (is_companion_form(m_, d)) {
    for (int j = 0; j < d; ++j) {
      double mu = eig_[j];
      Vec v(d);
      double p = 1.0;
      for (int i = 0; i < d; ++i) {
        v[i] = p;
        p *= mu;
      }
      vecs_.col(j) = v / v.norm();
    }
  } else {
    Eigen::EigenSolver<Mat> es(md_);
    if (es.info() != Eigen::Success)
      throw Error(Errc::construction_failed, "eigensolver failed");
    // match solver eigenvalues to ours by modulus
    std::vector<bool> used(d, false);
    for (int j = 0; j < d; ++j) {
      int best = -1;
      double bestdiff = std::numeric_limits<double>::infinity();
      for (int k = 0; k < d; ++k) {
        if (used[k]) continue;
        double diff = std::abs(es.eigenvalues()[k].real() - eig_[j]) +
                      std::abs(es.eigenvalues()[k].imag());
        if (diff < bestdiff) {
          bestdiff = diff;
          best = k;
        }
      }
      used[best] = true;
      Vec v = es.eigenvectors().col(best).real();
      vecs_.col(j) = v / v.norm();
    }
  }
  vecs_inv_ = vecs_.inverse();

  minvd_.resize(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) minvd_(i, j) = static_cast<double>(minv_[i * d + j]);

  spectrum_.emplace(logs, 1e-10);
}

std::vector<BigInt> char_poly_exact(const std::vector<long long>& m, int d) {
  return faddeev(m, d, nullptr);
}

BigInt det_exact(const std::vector<long long>& m, int d) {
  auto c = faddeev(m, d, nullptr);
  BigInt det = c[0];
  if (d % 2 == 1) det = -det;  // det = (-1)^d c_0
  return det;
}

std::vector<long long> inverse_exact_unimodular(const std::vector<long long>& m, int d) {
  std::vector<BigInt> Md;
  auto c = faddeev(m, d, &Md);
  if (c[0] != 1 && c[0] != -1)
    throw Error(Errc::construction_failed, "matrix is not unimodular");
  // A^{-1} = -M_d / c_0
  std::vector<long long> inv(d * d);
  for (int i = 0; i < d * d; ++i) {
    BigInt v = -Md[i] / c[0];
    if (v > std::numeric_limits<long long>::max() || v < std::numeric_limits<long long>::min())
      throw Error(Errc::construction_failed, "inverse entries overflow 64-bit range");
    inv[i] = v.convert_to<long long>();
  }
  return inv;
}

HyperbolicAutomorphism companion(const LatticePolynomial& poly) {
  const int d = poly.degree();
  if (d < 2) throw Error(Errc::invalid_input, "degree must be >= 2");
  if (poly.coeffs[d] != 1) throw Error(Errc::invalid_input, "polynomial must be monic");
  if (poly.coeffs[0] != 1 && poly.coeffs[0] != -1)
    throw Error(Errc::construction_failed, "constant term must be +-1");

  const BigInt cap = BigInt(1) << 52;
  for (const auto& c : poly.coeffs)
    if (abs(c) >= cap)
      throw Error(Errc::construction_failed,
                  "coefficients exceed 2^52; eigen-data would lose precision");

  HyperbolicAutomorphism h;
  h.d_ = d;
  h.m_.assign(d * d, 0);
  for (int i = 0; i + 1 < d; ++i) h.m_[i * d + i + 1] = 1;
  for (int j = 0; j < d; ++j) h.m_[(d - 1) * d + j] = -poly.coeffs[j].convert_to<long long>();
  h.minv_ = inverse_exact_unimodular(h.m_, d);

  std::vector<double> roots;
  if (poly.pattern) {
    // One root per bracket (b^{n-1}, b^{n+1}) around each pattern exponent n;
    // bisection runs on y = log_b(x) with an overflow-safe sign evaluation.
    const ExponentPattern& p = *poly.pattern;
    const double log_b = std::log(static_cast<double>(p.b));
    std::vector<long long> ahat(d + 1, 0);
    for (int i = 1; i <= d; ++i) ahat[i] = ahat[i - 1] + p.a[i - 1];

    auto sign_at_y = [&](double y) {
      std::vector<int> sgn(d + 1);
      std::vector<double> expnt(d + 1);
      for (int i = 0; i <= d; ++i) {
        sgn[i] = (i % 2 == 0) ? 1 : -1;
        expnt[i] = static_cast<double>(ahat[i]) + y * static_cast<double>(d - i);
      }
      return stable_power_sum_sign(sgn, expnt, log_b);
    };

    for (int j = 0; j < d; ++j) {
      double lo = static_cast<double>(p.a[j]) - 1.0, hi = static_cast<double>(p.a[j]) + 1.0;
      int slo = sign_at_y(lo), shi = sign_at_y(hi);
      if (slo == shi)
        throw Error(Errc::construction_failed, "sign-claim bracket failed");
      for (int it = 0; it < 200 && hi - lo > 1e-16 * std::max(1.0, std::abs(lo)); ++it) {
        double mid = 0.5 * (lo + hi);
        if (sign_at_y(mid) == slo)
          lo = mid;
        else
          hi = mid;
      }
      double y = 0.5 * (lo + hi);
      roots.push_back(std::exp(y * log_b));
    }
  } else {
    Eigen::MatrixXd md(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) md(i, j) = static_cast<double>(h.m_[i * d + j]);
    Eigen::EigenSolver<Mat> es(md);
    double scale = md.cwiseAbs().maxCoeff();
    for (int k = 0; k < d; ++k) {
      auto mu = es.eigenvalues()[k];
      if (std::abs(mu.imag()) > 1e-8 * (1.0 + scale))
        throw Error(Errc::construction_failed, "complex eigenvalue");
      roots.push_back(newton_polish(poly.coeffs, mu.real()));
    }
  }
  h.finish(std::move(roots));
  return h;
}

HyperbolicAutomorphism HyperbolicAutomorphism::from_matrix(std::vector<long long> m, int d) {
  if (d < 2 || static_cast<int>(m.size()) != d * d)
    throw Error(Errc::invalid_input, "bad matrix shape");
  AnosovReport rep = verify_anosov(m, d);
  if (!rep.pass)
    throw Error(Errc::construction_failed, "not a hyperbolic automorphism: " + rep.detail);

  HyperbolicAutomorphism h;
  h.d_ = d;
  h.m_ = std::move(m);
  h.minv_ = inverse_exact_unimodular(h.m_, d);

  auto coeffs = char_poly_exact(h.m_, d);
  Eigen::MatrixXd md(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) md(i, j) = static_cast<double>(h.m_[i * d + j]);
  Eigen::EigenSolver<Mat> es(md);
  std::vector<double> roots;
  for (int k = 0; k < d; ++k)
    roots.push_back(newton_polish(coeffs, es.eigenvalues()[k].real()));
  h.finish(std::move(roots));
  return h;
}

AnosovReport verify_anosov(const std::vector<long long>& m, int d) {
  AnosovReport r;
  if (d < 2 || static_cast<int>(m.size()) != d * d) {
    r.detail = "bad matrix shape";
    return r;
  }

  BigInt det = det_exact(m, d);
  BigInt adet = abs(det);
  r.abs_det = adet.str();
  r.det_ok = (adet == 1);

  Eigen::MatrixXd md(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) md(i, j) = static_cast<double>(m[i * d + j]);
  Eigen::EigenSolver<Mat> es(md);
  if (es.info() != Eigen::Success) {
    r.detail = "eigensolver failed";
    return r;
  }
  double scale = std::max(1.0, md.cwiseAbs().maxCoeff());

  auto coeffs = char_poly_exact(m, d);
  r.all_real = true;
  std::vector<double> logs;
  for (int k = 0; k < d; ++k) {
    auto mu = es.eigenvalues()[k];
    if (std::abs(mu.imag()) > 1e-8 * scale) r.all_real = false;
    double re = r.all_real ? newton_polish(coeffs, mu.real()) : mu.real();
    double modulus = std::hypot(re, r.all_real ? 0.0 : mu.imag());
    r.moduli.push_back(modulus);
    logs.push_back(std::log(std::max(modulus, 1e-300)));
  }
  std::sort(r.moduli.begin(), r.moduli.end(), std::greater<double>());
  std::sort(logs.begin(), logs.end(), std::greater<double>());
  r.log_moduli = logs;

  r.min_unit_distance = std::numeric_limits<double>::infinity();
  for (double l : logs) r.min_unit_distance = std::min(r.min_unit_distance, std::abs(l));
  r.off_unit_circle = r.min_unit_distance > kUnitCircleMargin;

  r.min_log_gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i + 1 < d; ++i) r.min_log_gap = std::min(r.min_log_gap, logs[i] - logs[i + 1]);
  r.all_simple = r.all_real && r.min_log_gap > kSimplicityMargin;

  r.unstable_index = 0;
  for (double l : logs)
    if (l > 0) ++r.unstable_index;

  r.pass = r.det_ok && r.all_real && r.all_simple && r.off_unit_circle &&
           r.unstable_index > 0 && r.unstable_index < d;
  if (!r.pass) {
    if (!r.det_ok) r.detail = "|det| = " + r.abs_det;
    else if (!r.all_real) r.detail = "complex eigenvalues";
    else if (!r.off_unit_circle) r.detail = "eigenvalue on or near the unit circle";
    else if (!r.all_simple) r.detail = "repeated log-moduli";
    else r.detail = "index is 0 or d";
  }
  return r;
}

}  // namespace anosov
