#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "metagam/errors.hpp"

namespace metagam {

enum class KnotRule { quantile, uniform, explicit_rule };

/// Knot layout of a cubic B-spline basis. A basis of dimension K has
/// K - 4 interior knots plus fourfold-clamped boundary knots.
struct KnotSequence {
  std::vector<double> interior;  // strictly increasing, inside (low, high)
  double low = 0.0;
  double high = 1.0;
  KnotRule rule = KnotRule::explicit_rule;

  int basis_dim() const { return static_cast<int>(interior.size()) + 4; }
  void validate() const;
};

enum class ConstraintKind { sum_to_zero, point, none };

struct Constraint {
  ConstraintKind kind = ConstraintKind::sum_to_zero;
  double x0 = 0.0;  // only used by point constraints
  // sum-to-zero is taken over the observed data unless a fixed reference set
  // is given; a shared reference makes terms directly comparable across
  // cohorts with different covariate ranges
  std::optional<std::vector<double>> reference;

  static Constraint sum_to_zero() { return {ConstraintKind::sum_to_zero, 0.0, std::nullopt}; }
  static Constraint sum_to_zero_over(std::vector<double> ref) {
    return {ConstraintKind::sum_to_zero, 0.0, std::move(ref)};
  }
  static Constraint point(double x0) { return {ConstraintKind::point, x0, std::nullopt}; }
  static Constraint none() { return {ConstraintKind::none, 0.0, std::nullopt}; }
};

/// Specification of one smooth model term.
struct SmoothSpec {
  std::string id;         // term label, e.g. "s(Age)"
  std::string covariate;  // column name
  int basis_dim = 10;
  KnotSequence knots;
  Constraint constraint = Constraint::sum_to_zero();
  std::optional<std::string> by;  // varying-coefficient multiplier column
  int penalty_order = 2;

  void validate() const;
};

/// Evaluated (constrained) basis: values is n x k, penalty is k x k, and
/// transform is the K x k map from constrained to unconstrained coefficients.
struct BasisMatrix {
  Eigen::MatrixXd values;
  Eigen::MatrixXd penalty;
  Eigen::MatrixXd transform;
};

/// Place knots for a cubic B-spline basis of the requested dimension.
/// quantile: interior knots at equally spaced type-7 quantiles of the
/// distinct values of x; uniform: equally spaced in (min, max).
KnotSequence place_knots(const std::vector<double>& x, int basis_dim, KnotRule rule);

/// Unconstrained cubic B-spline design matrix (n x K). Points outside
/// [low, high] use the linear extension of the spline, continuous in value
/// and first derivative at the boundary.
Eigen::MatrixXd bspline_matrix(const KnotSequence& knots, const std::vector<double>& x,
                               int derivative = 0);

/// Exact second-derivative Gram matrix S, S(j,k) = integral of b_j'' b_k''
/// over [low, high], via per-interval Gauss-Legendre quadrature (the
/// integrand is piecewise quadratic, so two nodes are exact).
Eigen::MatrixXd second_derivative_gram(const KnotSequence& knots);

/// Orthonormal-column transform Z (K x k) whose range is the constraint
/// subspace; k = K - 1 for sum-to-zero and point constraints, K for none.
/// Sum-to-zero uses the column sums of the basis over data_x.
Eigen::MatrixXd constraint_transform(const SmoothSpec& spec, const std::vector<double>& data_x);

/// Evaluate the constrained basis with a precomputed transform.
BasisMatrix eval_basis(const SmoothSpec& spec, const std::vector<double>& x,
                       const Eigen::MatrixXd& transform);

/// Evaluate the constrained basis, deriving the sum-to-zero transform from
/// x itself (the spec-level entry point: x is the observed data).
BasisMatrix eval_basis(const SmoothSpec& spec, const std::vector<double>& x);

/// Scale each basis row by the matching entry of `by`; the penalty and the
/// constraint transform are unchanged.
BasisMatrix expand_by(const BasisMatrix& basis, const std::vector<double>& by);

}  // namespace metagam
