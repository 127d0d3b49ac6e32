#pragma once

#include <optional>
#include <string>
#include <vector>

#include "metagam/spline.hpp"

namespace metagam {

/// One smooth term as written in a formula; knots are resolved from the data
/// at fit time unless given explicitly.
struct FormulaSmooth {
  std::string id;  // "s(Age)" or "s(Age):PSQI" for varying-coefficient terms
  std::string covariate;
  int basis_dim = 10;
  std::optional<std::string> by;
  Constraint constraint = Constraint::sum_to_zero();
  KnotRule knot_rule = KnotRule::quantile;
  std::optional<KnotSequence> knots;
};

struct ModelFormula {
  std::string response;
  std::vector<FormulaSmooth> smooth_terms;
  std::vector<std::string> linear_terms;
  std::optional<std::string> random_intercept;

  void validate() const;
};

/// Parse the formula mini-language:
///   response ~ s(var, k=N) + s(var, by=other, k=N) + var + (1|group)
ModelFormula parse_formula(const std::string& text);

/// Inverse of parse_formula, used when echoing a model summary.
std::string format_formula(const ModelFormula& formula);

}  // namespace metagam
