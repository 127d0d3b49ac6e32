#pragma once

#include <Eigen/Dense>

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "metagam/formula.hpp"
#include "metagam/spline.hpp"
#include "metagam/table.hpp"

namespace metagam {

/// Aggregate location summary of one covariate: range plus interior deciles.
struct CovariateStats {
  double min = 0.0;
  double max = 0.0;
  std::array<double, 9> deciles{};
};

/// A smooth term bound to its fitted basis: resolved knots, constraint
/// transform, and the coefficient block it occupies.
struct TermFit {
  SmoothSpec spec;
  Eigen::MatrixXd transform;  // basis_dim x col_count
  int col_start = 0;
  int col_count = 0;
  double lambda = 0.0;
  double edf = 0.0;
  double pvalue = 1.0;
};

struct LinearTermFit {
  std::string column;
  std::vector<std::string> levels;  // empty: numeric column, one coefficient
  int col_start = 0;
  int col_count = 0;
};

struct RandomInterceptFit {
  std::string column;
  std::vector<std::string> levels;  // sorted group labels; empty once stripped
  int col_start = 0;
  int col_count = 0;
  double lambda = 0.0;
  double edf = 0.0;
};

/// Fitted penalized additive model. Holds only aggregate quantities; no
/// individual observations survive the fit.
struct FittedGam {
  std::string response;
  std::vector<TermFit> smooths;
  std::vector<LinearTermFit> linears;
  std::optional<RandomInterceptFit> random_intercept;

  Eigen::VectorXd coefficients;  // [intercept | linear | smooth blocks | ridge block]
  Eigen::MatrixXd covariance;    // Bayesian posterior covariance, scale * A^-1
  double scale = 1.0;            // residual variance estimate
  double edf_total = 0.0;
  double rss = 0.0;
  double r2_adj = 0.0;
  long n = 0;
  std::optional<long> n_subjects;
  std::map<std::string, CovariateStats> covariate_stats;

  int n_coef() const { return static_cast<int>(coefficients.size()); }
  const TermFit& term(const std::string& term_id) const;
  bool has_term(const std::string& term_id) const;
};

struct PenaltyBlock {
  int start = 0;
  int size = 0;
  Eigen::MatrixXd S;
  std::string label;
};

struct FitOptions {
  std::vector<double> lambda_grid;                   // searched per penalized block
  std::optional<std::vector<double>> fixed_lambdas;  // bypasses GCV when set
  int sweeps = 2;

  static FitOptions defaults();
};

/// Fit the penalized least-squares problem with per-block smoothing
/// parameters chosen by GCV grid search (coordinate descent over blocks).
/// Throws RankDeficientDesign when a basis function has no data support or
/// unpenalized directions are collinear.
FittedGam fit_gam(const ColumnTable& data, const ModelFormula& formula,
                  const FitOptions& opts = FitOptions::defaults());

/// GCV(lambda) = n * RSS / (n - EDF)^2 minimized by per-block grid search
/// with coordinate descent; numerically tied values resolve toward heavier
/// smoothing. Exposed for testing and reuse on a preassembled design.
std::vector<double> select_lambda_gcv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                      const std::vector<PenaltyBlock>& blocks,
                                      const std::vector<double>& lambda_grid, int sweeps = 2);

struct TermPrediction {
  Eigen::VectorXd fit;
  Eigen::VectorXd se;
  bool includes_intercept = false;
};

/// Evaluate one smooth term on a grid. With include_intercept the intercept
/// estimate is added to the fit and its variance and cross-covariance enter
/// the standard errors. Works identically on stripped models.
TermPrediction predict_term(const FittedGam& model, const std::string& term_id,
                            const ColumnTable& grid, bool include_intercept);

/// Wald-type significance test of a smooth term evaluated at the stored
/// covariate deciles, with rank = rounded EDF pseudoinverse.
double term_pvalue(const FittedGam& model, const std::string& term_id);

CovariateStats covariate_stats_of(const std::vector<double>& values);

}  // namespace metagam
