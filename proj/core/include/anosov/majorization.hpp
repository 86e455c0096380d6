#pragma once

// Ordered zero-sum spectra, the prefix-sum transform, the gap function, and
// the majorization partial order with its doubly-stochastic characterization.

#include <optional>
#include <string>
#include <vector>

#include "anosov/common.hpp"

namespace anosov {

// Default tolerance for analytically constructed spectra. Estimated spectra
// carry Monte Carlo error far above machine epsilon, so every check accepts
// a caller-supplied tolerance as well.
inline constexpr double kSpectrumTol = 1e-12;

// Descending real d-vector of log-scale exponents (nats per iterate),
// summing to zero.
class OrderedSpectrum {
 public:
  OrderedSpectrum(std::vector<double> entries, double tol = kSpectrumTol);

  int dim() const { return static_cast<int>(entries_.size()); }
  double operator[](int i) const { return entries_.at(i); }
  const std::vector<double>& entries() const { return entries_; }
  double tolerance() const { return tol_; }

  bool operator==(const OrderedSpectrum& o) const { return entries_ == o.entries_; }

 private:
  std::vector<double> entries_;
  double tol_;
};

// (d-1)-vector of prefix sums; extended by 0 at both ends it is concave
// exactly when the source spectrum is ordered.
class SummedSpectrum {
 public:
  explicit SummedSpectrum(std::vector<double> entries);

  int dim() const { return static_cast<int>(entries_.size()) + 1; }
  double operator[](int j) const { return entries_.at(j); }
  const std::vector<double>& entries() const { return entries_; }

 private:
  std::vector<double> entries_;
};

class DoublyStochasticMatrix {
 public:
  DoublyStochasticMatrix(Mat m, double tol = kSpectrumTol);
  const Mat& matrix() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }

 private:
  Mat m_;
};

enum class MajOrder { strictly_majorizes, majorizes, incomparable };

inline const char* to_string(MajOrder m) {
  switch (m) {
    case MajOrder::strictly_majorizes: return "strictly_majorizes";
    case MajOrder::majorizes:          return "majorizes";
    case MajOrder::incomparable:       return "incomparable";
  }
  return "?";
}

SummedSpectrum to_summed(const OrderedSpectrum& s);

// Inverse of to_summed on the zero-sum hyperplane. Throws not-a-spectrum if
// the reconstructed differences are not non-increasing.
OrderedSpectrum from_summed(const SummedSpectrum& h, double tol = kSpectrumTol);

// Values within tol are treated as equal, so "strict" requires margin > tol.
MajOrder compare(const OrderedSpectrum& a, const OrderedSpectrum& b,
                 double tol = kSpectrumTol);

// min of all consecutive differences, s_u, and -s_{u+1}; positive exactly for
// strictly ordered spectra whose sign change sits at position u. u is 1-based.
double gap(const OrderedSpectrum& s, int u);

// sorted(P*s); always majorized by s.
OrderedSpectrum mix(const OrderedSpectrum& s, const DoublyStochasticMatrix& p,
                    double tol = kSpectrumTol);

struct TargetReport {
  bool ordered_strict = false;      // xi_1 > ... > xi_d
  bool sign_pattern_ok = false;     // xi_u > 0 > xi_{u+1}
  MajOrder relation = MajOrder::incomparable;  // base vs xi
  bool majorization_ok = false;     // requested relation holds
  bool entropy_ok = false;          // sum_{i<=u} xi_i <= sum_{i<=u} base_i
  bool pass = false;
  std::vector<int> offending;       // indices of failed prefix inequalities
  std::string detail;
};

// Checks the admissibility of a target spectrum relative to a base spectrum:
// strict ordering, the sign pattern at u, the (strict) majorization relation,
// and, separately, the weaker entropy condition.
TargetReport validate_target(const OrderedSpectrum& xi, const OrderedSpectrum& base,
                             int u, bool strict, double tol = kSpectrumTol);

}  // namespace anosov
