#pragma once

// Hyperbolic unimodular integer matrices with prescribed dimension and
// unstable index, built from an explicit integer polynomial whose roots are
// certified real and simple by exact sign evaluations at powers of the base.

#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "anosov/common.hpp"
#include "anosov/majorization.hpp"

namespace anosov {

using BigInt = boost::multiprecision::cpp_int;

// Integer exponent data a_1 > ... > a_u > 0 > a_{u+1} > ... > a_d with zero
// sum and consecutive gaps >= 2, together with the base b >= 3.
struct ExponentPattern {
  std::vector<long long> a;
  int u = 0;
  int b = 3;

  int dim() const { return static_cast<int>(a.size()); }
  void validate() const;
};

// Monic integer polynomial with constant term +-1. Coefficients are stored
// ascending: coeffs[k] is the coefficient of x^k.
struct LatticePolynomial {
  std::vector<BigInt> coeffs;
  std::optional<ExponentPattern> pattern;  // present when built from a pattern

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }
};

struct AnosovReport {
  bool pass = false;
  std::string abs_det;                 // exact, decimal string
  bool det_ok = false;
  bool all_real = false;
  bool all_simple = false;
  bool off_unit_circle = false;
  int unstable_index = 0;
  std::vector<double> moduli;          // descending
  std::vector<double> log_moduli;      // descending
  double min_log_gap = 0.0;            // min pairwise log-modulus gap
  double min_unit_distance = 0.0;      // min | log|mu| |
  std::string detail;
};

// Integer d x d matrix with |det| = 1 and simple real spectrum off the unit
// circle, with cached eigen-data and spectrum of log-moduli.
class HyperbolicAutomorphism {
 public:
  static HyperbolicAutomorphism from_matrix(std::vector<long long> m, int d);

  int dim() const { return d_; }
  long long entry(int i, int j) const { return m_[i * d_ + j]; }
  const std::vector<long long>& data() const { return m_; }
  const std::vector<long long>& inverse_data() const { return minv_; }

  const Mat& matrix() const { return md_; }
  const Mat& inverse_matrix() const { return minvd_; }

  // eigen-data, sorted by descending log-modulus
  const std::vector<double>& eigenvalues() const { return eig_; }
  const Mat& eigenvectors() const { return vecs_; }       // unit columns
  const Mat& eigenvectors_inv() const { return vecs_inv_; }
  int unstable_index() const { return u_; }
  const OrderedSpectrum& spectrum() const { return *spectrum_; }

 private:
  HyperbolicAutomorphism() = default;
  friend HyperbolicAutomorphism companion(const LatticePolynomial& poly);
  void finish(std::vector<double> eigenvalues);  // sorts, builds V, checks

  int d_ = 0;
  std::vector<long long> m_, minv_;
  Mat md_, minvd_;
  std::vector<double> eig_;
  Mat vecs_, vecs_inv_;
  int u_ = 0;
  std::optional<OrderedSpectrum> spectrum_;
};

// Canonical pattern: minimizes max|a_i| subject to the invariants, ties
// broken lexicographically; base defaults to 3.
ExponentPattern default_pattern(int d, int u, int b = 3);

// P(x) = sum_i (-1)^i b^{ahat_i} x^{d-i} with ahat_i the prefix sums of a.
LatticePolynomial build_polynomial(const ExponentPattern& p);

// Exact sign of P(b^n) (n may be negative). Throws if the value is zero or if
// n is one of the pattern exponents (where the sign claim is vacuous).
int sign_at_power(const LatticePolynomial& poly, int b, long long n);

// Companion matrix of P (bottom-row convention); eigenvalues recovered by
// bisection inside the sign-certified brackets (b^{n-1}, b^{n+1}) when the
// polynomial carries its pattern, by the generic route otherwise.
HyperbolicAutomorphism companion(const LatticePolynomial& poly);

// Structured report on the HyperbolicAutomorphism invariants for an arbitrary
// square integer matrix. Never throws.
AnosovReport verify_anosov(const std::vector<long long>& m, int d);

// --- exact-arithmetic helpers (shared with tests) ---

// char poly (ascending, monic) and exact inverse via Faddeev-LeVerrier;
// throws construction-failed when |det| != 1 while inverting.
std::vector<BigInt> char_poly_exact(const std::vector<long long>& m, int d);
BigInt det_exact(const std::vector<long long>& m, int d);
std::vector<long long> inverse_exact_unimodular(const std::vector<long long>& m, int d);

}  // namespace anosov
