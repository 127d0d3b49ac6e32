#include "metagam/spline.hpp"

#include <algorithm>
#include <cmath>

#include "metagam/stats.hpp"

namespace metagam {

namespace {

constexpr int kOrder = 4;  // cubic B-splines throughout
constexpr int kDegree = 3;

std::vector<double> full_knots(const KnotSequence& ks) {
  std::vector<double> t;
  t.reserve(ks.interior.size() + 2 * kOrder);
  for (int i = 0; i < kOrder; ++i) t.push_back(ks.low);
  t.insert(t.end(), ks.interior.begin(), ks.interior.end());
  for (int i = 0; i < kOrder; ++i) t.push_back(ks.high);
  return t;
}

// Span index i with t[i] <= x < t[i+1], clamped to the closed domain so the
// right boundary evaluates in the last nonempty span.
int find_span(const std::vector<double>& t, int num_basis, double x) {
  if (x >= t[num_basis]) return num_basis - 1;
  if (x <= t[kDegree]) return kDegree;
  int lo = kDegree, hi = num_basis;
  while (hi - lo > 1) {
    int mid = (lo + hi) / 2;
    if (x < t[mid]) hi = mid;
    else lo = mid;
  }
  return lo;
}

// Piegl & Tiller "DersBasisFuns": values and derivatives up to order n of the
// four basis functions that may be nonzero at x (indices span-3 .. span).
void ders_basis_funs(const std::vector<double>& t, int span, double x, int n,
                     double ders[3][kOrder]) {
  double ndu[kOrder][kOrder];
  double left[kOrder], right[kOrder];
  ndu[0][0] = 1.0;
  for (int j = 1; j <= kDegree; ++j) {
    left[j] = x - t[span + 1 - j];
    right[j] = t[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      double temp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }
  for (int j = 0; j <= kDegree; ++j) ders[0][j] = ndu[j][kDegree];

  double a[2][kOrder];
  for (int r = 0; r <= kDegree; ++r) {
    int s1 = 0, s2 = 1;
    a[0][0] = 1.0;
    for (int k = 1; k <= n; ++k) {
      double d = 0.0;
      int rk = r - k, pk = kDegree - k;
      if (r >= k) {
        a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
        d = a[s2][0] * ndu[rk][pk];
      }
      int j1 = (rk >= -1) ? 1 : -rk;
      int j2 = (r - 1 <= pk) ? k - 1 : kDegree - r;
      for (int j = j1; j <= j2; ++j) {
        a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
        d += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
        d += a[s2][k] * ndu[r][pk];
      }
      ders[k][r] = d;
      std::swap(s1, s2);
    }
  }
  double factor = kDegree;
  for (int k = 1; k <= n; ++k) {
    for (int j = 0; j <= kDegree; ++j) ders[k][j] *= factor;
    factor *= kDegree - k;
  }
}

// Writes the dense length-K row of values (or derivatives) at x, using the
// linear extension of the spline outside [low, high].
void basis_row(const KnotSequence& ks, const std::vector<double>& t, double x, int derivative,
               Eigen::RowVectorXd& row) {
  const int K = ks.basis_dim();
  row.setZero(K);
  double ders[3][kOrder];
  if (x >= ks.low && x <= ks.high) {
    int span = find_span(t, K, x);
    ders_basis_funs(t, span, x, derivative > 0 ? derivative : 0, ders);
    for (int j = 0; j <= kDegree; ++j) row[span - kDegree + j] = ders[derivative][j];
    return;
  }
  const double b = (x < ks.low) ? ks.low : ks.high;
  int span = find_span(t, K, b);
  ders_basis_funs(t, span, b, std::max(derivative, 1), ders);
  for (int j = 0; j <= kDegree; ++j) {
    int col = span - kDegree + j;
    if (derivative == 0) row[col] = ders[0][j] + ders[1][j] * (x - b);
    else if (derivative == 1) row[col] = ders[1][j];
    // second derivative of the linear extension is zero
  }
}

void check_finite(const std::vector<double>& x, const char* what) {
  for (double v : x) {
    if (!std::isfinite(v)) throw NonFiniteInput(std::string(what) + " contains a non-finite value");
  }
}

}  // namespace

void KnotSequence::validate() const {
  if (!(low < high)) throw InvalidSpec("knot boundary must satisfy low < high");
  for (std::size_t i = 0; i < interior.size(); ++i) {
    if (!std::isfinite(interior[i])) throw NonFiniteInput("non-finite interior knot");
    if (i > 0 && !(interior[i - 1] < interior[i])) {
      throw InvalidSpec("interior knots must be strictly increasing");
    }
  }
  if (!interior.empty() && !(low < interior.front() && interior.back() < high)) {
    throw InvalidSpec("interior knots must lie strictly inside the boundary");
  }
}

void SmoothSpec::validate() const {
  if (basis_dim < 4) throw InvalidSpec("basis_dim must be at least 4 for term '" + id + "'");
  if (penalty_order != 2) throw InvalidSpec("only second-derivative penalties are supported");
  knots.validate();
  if (knots.basis_dim() != basis_dim) {
    throw InvalidSpec("term '" + id + "': knot sequence implies basis dimension " +
                      std::to_string(knots.basis_dim()) + ", spec says " +
                      std::to_string(basis_dim));
  }
}

KnotSequence place_knots(const std::vector<double>& x, int basis_dim, KnotRule rule) {
  if (x.empty()) throw EmptyInput("place_knots: empty covariate");
  if (basis_dim < 4) throw InvalidSpec("place_knots: basis_dim must be at least 4");
  if (rule == KnotRule::explicit_rule) {
    throw InvalidSpec("place_knots: explicit rule requires caller-supplied knots");
  }
  check_finite(x, "place_knots covariate");

  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());

  KnotSequence ks;
  ks.low = sorted.front();
  ks.high = sorted.back();
  ks.rule = rule;
  const int m = basis_dim - 4;

  if (rule == KnotRule::uniform) {
    if (!(ks.high > ks.low)) {
      throw TooFewDistinctValues("place_knots: covariate has a single distinct value");
    }
    for (int i = 1; i <= m; ++i) {
      ks.interior.push_back(ks.low + (ks.high - ks.low) * i / (m + 1.0));
    }
  } else {
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (static_cast<int>(sorted.size()) < basis_dim) {
      throw TooFewDistinctValues("place_knots: " + std::to_string(sorted.size()) +
                                 " distinct values < basis_dim " + std::to_string(basis_dim));
    }
    for (int i = 1; i <= m; ++i) {
      double q = stats::quantile_sorted(sorted.data(), sorted.size(), i / (m + 1.0));
      if (ks.interior.empty() || q > ks.interior.back()) ks.interior.push_back(q);
    }
    // collisions cannot occur when the distinct-count precondition holds;
    // the dedup above is a guard, so recheck the resulting dimension
    if (static_cast<int>(ks.interior.size()) != m) {
      throw TooFewDistinctValues("place_knots: quantile knots collapsed after deduplication");
    }
  }
  ks.validate();
  return ks;
}

Eigen::MatrixXd bspline_matrix(const KnotSequence& knots, const std::vector<double>& x,
                               int derivative) {
  knots.validate();
  check_finite(x, "basis evaluation points");
  if (derivative < 0 || derivative > 2) throw InvalidSpec("derivative order must be 0..2");
  const std::vector<double> t = full_knots(knots);
  const int K = knots.basis_dim();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(x.size()), K);
  Eigen::RowVectorXd row(K);
  for (std::size_t i = 0; i < x.size(); ++i) {
    basis_row(knots, t, x[i], derivative, row);
    out.row(static_cast<Eigen::Index>(i)) = row;
  }
  return out;
}

Eigen::MatrixXd second_derivative_gram(const KnotSequence& knots) {
  knots.validate();
  const std::vector<double> t = full_knots(knots);
  const int K = knots.basis_dim();
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(K, K);

  std::vector<double> breaks;
  breaks.push_back(knots.low);
  breaks.insert(breaks.end(), knots.interior.begin(), knots.interior.end());
  breaks.push_back(knots.high);

  // second derivatives are piecewise linear, so the integrand is piecewise
  // quadratic and two Gauss-Legendre nodes per interval integrate it exactly
  const double node_offset = 0.5 / std::sqrt(3.0);
  Eigen::RowVectorXd row(K);
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double a = breaks[i], b = breaks[i + 1];
    const double mid = 0.5 * (a + b), half = b - a;
    for (double u : {mid - node_offset * half, mid + node_offset * half}) {
      basis_row(knots, t, u, 2, row);
      const double w = 0.5 * half;
      // only four entries of the row are nonzero; rank-1 update is cheap
      S.selfadjointView<Eigen::Lower>().rankUpdate(row.transpose(), w);
    }
  }
  S.triangularView<Eigen::StrictlyUpper>() = S.transpose();
  return S;
}

Eigen::MatrixXd constraint_transform(const SmoothSpec& spec, const std::vector<double>& data_x) {
  spec.validate();
  const int K = spec.basis_dim;
  if (spec.constraint.kind == ConstraintKind::none) {
    return Eigen::MatrixXd::Identity(K, K);
  }
  Eigen::VectorXd c(K);
  if (spec.constraint.kind == ConstraintKind::sum_to_zero) {
    const std::vector<double>& ref =
        spec.constraint.reference ? *spec.constraint.reference : data_x;
    if (ref.empty()) throw EmptyInput("sum-to-zero constraint needs observed data");
    c = bspline_matrix(spec.knots, ref).colwise().sum().transpose();
  } else {
    c = bspline_matrix(spec.knots, {spec.constraint.x0}).row(0).transpose();
  }
  if (c.norm() <= 0.0) throw InvalidSpec("degenerate constraint vector for term '" + spec.id + "'");
  // Householder QR of c: the trailing K-1 columns of Q span the null space
  // of c^T and are orthonormal.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(c);
  Eigen::MatrixXd q = qr.householderQ();
  return q.rightCols(K - 1);
}

BasisMatrix eval_basis(const SmoothSpec& spec, const std::vector<double>& x,
                       const Eigen::MatrixXd& transform) {
  spec.validate();
  if (transform.rows() != spec.basis_dim) {
    throw LengthMismatch("constraint transform has " + std::to_string(transform.rows()) +
                         " rows, basis has " + std::to_string(spec.basis_dim));
  }
  BasisMatrix out;
  out.transform = transform;
  out.values = bspline_matrix(spec.knots, x) * transform;
  Eigen::MatrixXd S = second_derivative_gram(spec.knots);
  out.penalty = transform.transpose() * S * transform;
  out.penalty = 0.5 * (out.penalty + out.penalty.transpose()).eval();
  return out;
}

BasisMatrix eval_basis(const SmoothSpec& spec, const std::vector<double>& x) {
  return eval_basis(spec, x, constraint_transform(spec, x));
}

BasisMatrix expand_by(const BasisMatrix& basis, const std::vector<double>& by) {
  if (static_cast<Eigen::Index>(by.size()) != basis.values.rows()) {
    throw LengthMismatch("by-variable length " + std::to_string(by.size()) +
                         " does not match basis rows " + std::to_string(basis.values.rows()));
  }
  check_finite(by, "by variable");
  BasisMatrix out = basis;
  out.values.array().colwise() *=
      Eigen::Map<const Eigen::ArrayXd>(by.data(), static_cast<Eigen::Index>(by.size()));
  return out;
}

}  // namespace metagam
