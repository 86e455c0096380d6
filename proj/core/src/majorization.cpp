#include "anosov/majorization.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace anosov {

OrderedSpectrum::OrderedSpectrum(std::vector<double> entries, double tol)
    : entries_(std::move(entries)), tol_(tol) {
  if (entries_.size() < 2)
    throw Error(Errc::invalid_input, "spectrum needs dimension >= 2");
  for (std::size_t i = 0; i + 1 < entries_.size(); ++i)
    if (entries_[i] < entries_[i + 1] - tol_)
      throw Error(Errc::not_a_spectrum,
                  "entries not non-increasing at index " + std::to_string(i));
  double s = std::accumulate(entries_.begin(), entries_.end(), 0.0);
  if (std::abs(s) > tol_ * std::max<double>(1.0, entries_.size()))
    throw Error(Errc::invalid_input, "entries sum to " + std::to_string(s) + ", not 0");
}

SummedSpectrum::SummedSpectrum(std::vector<double> entries) : entries_(std::move(entries)) {
  if (entries_.empty())
    throw Error(Errc::invalid_input, "summed spectrum needs dimension >= 2");
}

DoublyStochasticMatrix::DoublyStochasticMatrix(Mat m, double tol) : m_(std::move(m)) {
  if (m_.rows() != m_.cols() || m_.rows() < 1)
    throw Error(Errc::invalid_input, "doubly stochastic matrix must be square");
  for (int i = 0; i < m_.rows(); ++i)
    for (int j = 0; j < m_.cols(); ++j)
      if (m_(i, j) < -tol)
        throw Error(Errc::invalid_input, "negative entry in doubly stochastic matrix");
  for (int i = 0; i < m_.rows(); ++i) {
    if (std::abs(m_.row(i).sum() - 1.0) > tol * m_.rows())
      throw Error(Errc::invalid_input, "row " + std::to_string(i) + " does not sum to 1");
    if (std::abs(m_.col(i).sum() - 1.0) > tol * m_.rows())
      throw Error(Errc::invalid_input, "column " + std::to_string(i) + " does not sum to 1");
  }
}

SummedSpectrum to_summed(const OrderedSpectrum& s) {
  std::vector<double> h(s.dim() - 1);
  double acc = 0.0;
  for (int j = 0; j + 1 < s.dim(); ++j) {
    acc += s[j];
    h[j] = acc;
  }
  return SummedSpectrum(std::move(h));
}

OrderedSpectrum from_summed(const SummedSpectrum& h, double tol) {
  const int d = h.dim();
  std::vector<double> s(d);
  s[0] = h[0];
  for (int j = 1; j + 1 < d; ++j) s[j] = h[j] - h[j - 1];
  s[d - 1] = -h[d - 2];
  for (int i = 0; i + 1 < d; ++i)
    if (s[i] < s[i + 1] - tol)
      throw Error(Errc::not_a_spectrum,
                  "differences increase at index " + std::to_string(i));
  return OrderedSpectrum(std::move(s), tol);
}

MajOrder compare(const OrderedSpectrum& a, const OrderedSpectrum& b, double tol) {
  if (a.dim() != b.dim())
    throw Error(Errc::invalid_input, "dimension mismatch in compare");
  // Both spectra sum to zero by construction; their prefix sums are directly
  // comparable.
  bool all_strict = true, all_weak = true;
  double pa = 0.0, pb = 0.0;
  for (int j = 0; j + 1 < a.dim(); ++j) {
    pa += a[j];
    pb += b[j];
    if (pa - pb <= tol) all_strict = false;
    if (pa - pb < -tol) all_weak = false;
  }
  if (all_strict) return MajOrder::strictly_majorizes;
  if (all_weak) return MajOrder::majorizes;
  return MajOrder::incomparable;
}

double gap(const OrderedSpectrum& s, int u) {
  if (u < 1 || u > s.dim() - 1)
    throw Error(Errc::invalid_input, "gap index u out of range");
  double g = std::min(s[u - 1], -s[u]);
  for (int i = 0; i + 1 < s.dim(); ++i) g = std::min(g, s[i] - s[i + 1]);
  return g;
}

OrderedSpectrum mix(const OrderedSpectrum& s, const DoublyStochasticMatrix& p, double tol) {
  if (p.dim() != s.dim())
    throw Error(Errc::invalid_input, "dimension mismatch in mix");
  Vec v(s.dim());
  for (int i = 0; i < s.dim(); ++i) v[i] = s[i];
  Vec w = p.matrix() * v;
  std::vector<double> out(w.data(), w.data() + w.size());
  std::stable_sort(out.begin(), out.end(), std::greater<double>());
  // P*s can pick up rounding in the last place; a doubly stochastic mix
  // preserves the total exactly in exact arithmetic.
  return OrderedSpectrum(std::move(out), std::max(tol, 64 * kSpectrumTol));
}

TargetReport validate_target(const OrderedSpectrum& xi, const OrderedSpectrum& base,
                             int u, bool strict, double tol) {
  TargetReport r;
  if (xi.dim() != base.dim() || u < 1 || u > xi.dim() - 1) {
    r.detail = "dimension or index mismatch";
    return r;
  }
  const int d = xi.dim();

  r.ordered_strict = true;
  for (int i = 0; i + 1 < d; ++i)
    if (xi[i] <= xi[i + 1] + tol) {
      r.ordered_strict = false;
      break;
    }

  r.sign_pattern_ok = xi[u - 1] > tol && xi[u] < -tol;

  r.relation = compare(base, xi, tol);
  r.majorization_ok = strict ? (r.relation == MajOrder::strictly_majorizes)
                             : (r.relation != MajOrder::incomparable);

  double px = 0.0, pb = 0.0;
  for (int i = 0; i < u; ++i) {
    px += xi[i];
    pb += base[i];
  }
  r.entropy_ok = px <= pb + tol;

  double pxj = 0.0, pbj = 0.0;
  for (int j = 0; j + 1 < d; ++j) {
    pxj += xi[j];
    pbj += base[j];
    bool ok = strict ? (pbj - pxj > tol) : (pbj - pxj >= -tol);
    if (!ok) r.offending.push_back(j + 1);
  }

  r.pass = r.ordered_strict && r.sign_pattern_ok && r.majorization_ok;
  return r;
}

}  // namespace anosov
