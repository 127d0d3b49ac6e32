#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "metagam/strip.hpp"

namespace metagam {

enum class PoolMethod { FE, DL };

/// One cohort's term prediction on the shared grid, plus what pooling needs
/// to know about it: the grid axis, the per-point range flags, and n.
struct CohortPrediction {
  std::string label;
  TermPrediction pred;
  std::string grid_var;        // primary covariate of the term
  Eigen::VectorXd grid_x;      // its grid values (for grid-identity checks)
  std::vector<char> in_range;  // point within the cohort's observed range
  long n = 0;
};

/// Evaluate a stripped model on the grid and flag points outside the
/// cohort's observed covariate range.
CohortPrediction predict_for_meta(const StrippedModel& sm, const std::string& term_id,
                                  const ColumnTable& grid, bool include_intercept);

/// Pointwise pooled fit. Grid points where fewer than two cohorts remain are
/// marked invalid and carry NaN estimates.
struct MetaFit {
  PoolMethod method = PoolMethod::FE;
  std::string term_id;
  bool includes_intercept = false;
  std::vector<std::string> cohort_labels;
  std::string grid_var;
  Eigen::VectorXd grid_x;
  Eigen::VectorXd pooled_fit;
  Eigen::VectorXd pooled_se;
  Eigen::VectorXd tau2;        // zero vector under FE
  Eigen::MatrixXd weights;     // M x n, normalized; zero when excluded
  Eigen::MatrixXd cohort_fit;  // M x n
  Eigen::MatrixXd cohort_var;  // M x n
  std::vector<char> in_range;  // M*n, column-major like the matrices
  std::vector<char> valid;     // per point: >= 2 cohorts contributed
  bool zero_se_warning = false;
};

MetaFit pool_pointwise(const std::vector<CohortPrediction>& predictions, PoolMethod method,
                       bool range_restrict);

/// Pointwise normal confidence band around the pooled fit.
std::pair<Eigen::VectorXd, Eigen::VectorXd> confidence_band(const MetaFit& meta, double alpha);

struct HeterogeneityCurve {
  Eigen::VectorXd grid_x;
  Eigen::VectorXd q;
  int df = 0;
  Eigen::VectorXd ci_low;   // interval for Q - df, normal approximation
  Eigen::VectorXd ci_high;  // with variance 2 * df
};

HeterogeneityCurve cochran_q(const std::vector<CohortPrediction>& predictions);

struct DominanceCurve {
  std::vector<std::string> cohort_labels;
  Eigen::VectorXd grid_x;
  Eigen::MatrixXd fractions;  // M x n, columns sum to one at valid points
};

DominanceCurve dominance(const MetaFit& meta);

enum class PValueMethod { stouffer, tippett, fisher, edgington, wilkinson_max, logitp };

PValueMethod pvalue_method_from_string(const std::string& name);
std::string pvalue_method_name(PValueMethod method);
std::vector<PValueMethod> all_pvalue_methods();

/// Combine per-cohort p-values. Weights enter Stouffer's method only; when
/// absent, equal weights are used (the meta workflow passes sqrt(n_m)).
double combine_pvalues(const std::vector<double>& p, PValueMethod method,
                       const std::optional<std::vector<double>>& weights = std::nullopt);

}  // namespace metagam
