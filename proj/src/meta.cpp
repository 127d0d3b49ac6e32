#include "metagam/meta.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "metagam/stats.hpp"

namespace metagam {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_same_grids(const std::vector<CohortPrediction>& preds) {
  if (preds.size() < 2) throw TooFewCohorts("pooling needs at least 2 cohorts");
  const CohortPrediction& first = preds.front();
  for (const CohortPrediction& p : preds) {
    if (p.grid_var != first.grid_var || p.grid_x.size() != first.grid_x.size() ||
        p.grid_x != first.grid_x) {
      throw GridMismatch("cohort '" + p.label + "' was predicted on a different grid than '" +
                         first.label + "'");
    }
    if (p.pred.fit.size() != first.grid_x.size() || p.pred.se.size() != first.grid_x.size() ||
        static_cast<Eigen::Index>(p.in_range.size()) != first.grid_x.size()) {
      throw GridMismatch("cohort '" + p.label + "' prediction length does not match its grid");
    }
    if (p.pred.includes_intercept != first.pred.includes_intercept) {
      throw GridMismatch("cohorts disagree on include_intercept");
    }
  }
}

}  // namespace

CohortPrediction predict_for_meta(const StrippedModel& sm, const std::string& term_id,
                                  const ColumnTable& grid, bool include_intercept) {
  const TermFit& t = sm.model.term(term_id);
  CohortPrediction out;
  out.label = sm.cohort_label;
  out.n = sm.model.n;
  out.pred = predict_term(sm.model, term_id, grid, include_intercept);
  out.grid_var = t.spec.covariate;
  const auto& gx = grid.numeric(t.spec.covariate);
  out.grid_x = Eigen::Map<const Eigen::VectorXd>(gx.data(), static_cast<Eigen::Index>(gx.size()));

  out.in_range.assign(gx.size(), 1);
  auto apply_range = [&](const std::string& var) {
    auto it = sm.model.covariate_stats.find(var);
    if (it == sm.model.covariate_stats.end() || !grid.has(var) || !grid.is_numeric(var)) return;
    const auto& v = grid.numeric(var);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] < it->second.min || v[i] > it->second.max) out.in_range[i] = 0;
    }
  };
  apply_range(t.spec.covariate);
  if (t.spec.by) apply_range(*t.spec.by);
  return out;
}

MetaFit pool_pointwise(const std::vector<CohortPrediction>& predictions, PoolMethod method,
                       bool range_restrict) {
  check_same_grids(predictions);
  const auto M = static_cast<Eigen::Index>(predictions.size());
  const Eigen::Index n = predictions.front().grid_x.size();

  MetaFit meta;
  meta.method = method;
  meta.includes_intercept = predictions.front().pred.includes_intercept;
  meta.grid_var = predictions.front().grid_var;
  meta.grid_x = predictions.front().grid_x;
  meta.pooled_fit.setConstant(n, kNaN);
  meta.pooled_se.setConstant(n, kNaN);
  meta.tau2.setZero(n);
  meta.weights.setZero(M, n);
  meta.cohort_fit.setZero(M, n);
  meta.cohort_var.setZero(M, n);
  meta.in_range.assign(static_cast<std::size_t>(M * n), 1);
  meta.valid.assign(static_cast<std::size_t>(n), 0);
  for (const CohortPrediction& p : predictions) meta.cohort_labels.push_back(p.label);

  std::vector<Eigen::Index> used;
  used.reserve(static_cast<std::size_t>(M));
  for (Eigen::Index t = 0; t < n; ++t) {
    used.clear();
    for (Eigen::Index m = 0; m < M; ++m) {
      const CohortPrediction& p = predictions[static_cast<std::size_t>(m)];
      const double f = p.pred.fit[t];
      const double se = p.pred.se[t];
      meta.cohort_fit(m, t) = f;
      meta.cohort_var(m, t) = se * se;
      meta.in_range[static_cast<std::size_t>(m * n + t)] = p.in_range[static_cast<std::size_t>(t)];
      if (range_restrict && !p.in_range[static_cast<std::size_t>(t)]) continue;
      if (!std::isfinite(f) || !std::isfinite(se)) continue;
      if (!(se > 0.0)) {
        // a zero standard error signals a degenerate fit at this point
        meta.zero_se_warning = true;
        continue;
      }
      used.push_back(m);
    }
    if (used.size() < 2) continue;

    double sw = 0.0, swf = 0.0, sw2 = 0.0;
    for (Eigen::Index m : used) {
      const double w = 1.0 / meta.cohort_var(m, t);
      sw += w;
      swf += w * meta.cohort_fit(m, t);
      sw2 += w * w;
    }
    const double fbar = swf / sw;

    double tau2 = 0.0;
    if (method == PoolMethod::DL) {
      double q = 0.0;
      for (Eigen::Index m : used) {
        const double d = meta.cohort_fit(m, t) - fbar;
        q += d * d / meta.cohort_var(m, t);
      }
      const double c = sw - sw2 / sw;
      const double df = static_cast<double>(used.size()) - 1.0;
      if (c > 0.0) tau2 = std::max(0.0, (q - df) / c);
    }

    double s = 0.0, sf = 0.0;
    for (Eigen::Index m : used) {
      const double w = 1.0 / (meta.cohort_var(m, t) + tau2);
      meta.weights(m, t) = w;
      s += w;
      sf += w * meta.cohort_fit(m, t);
    }
    meta.weights.col(t) /= s;
    meta.tau2[t] = tau2;
    meta.pooled_fit[t] = sf / s;
    meta.pooled_se[t] = 1.0 / std::sqrt(s);
    meta.valid[static_cast<std::size_t>(t)] = 1;
  }
  return meta;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> confidence_band(const MetaFit& meta, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw BadAlpha("alpha must be in (0, 1)");
  const double zlo = stats::norm_quantile(alpha / 2.0);
  const double zhi = stats::norm_quantile(1.0 - alpha / 2.0);
  return {meta.pooled_fit + zlo * meta.pooled_se, meta.pooled_fit + zhi * meta.pooled_se};
}

HeterogeneityCurve cochran_q(const std::vector<CohortPrediction>& predictions) {
  check_same_grids(predictions);
  const auto M = static_cast<Eigen::Index>(predictions.size());
  const Eigen::Index n = predictions.front().grid_x.size();

  HeterogeneityCurve out;
  out.grid_x = predictions.front().grid_x;
  out.df = static_cast<int>(M) - 1;
  out.q.setConstant(n, kNaN);
  for (Eigen::Index t = 0; t < n; ++t) {
    double sw = 0.0, swf = 0.0;
    bool ok = true;
    for (const CohortPrediction& p : predictions) {
      const double se = p.pred.se[t];
      if (!std::isfinite(p.pred.fit[t]) || !(se > 0.0) || !std::isfinite(se)) {
        ok = false;
        break;
      }
      const double w = 1.0 / (se * se);
      sw += w;
      swf += w * p.pred.fit[t];
    }
    if (!ok) continue;
    const double fbar = swf / sw;
    double q = 0.0;
    for (const CohortPrediction& p : predictions) {
      const double d = p.pred.fit[t] - fbar;
      q += d * d / (p.pred.se[t] * p.pred.se[t]);
    }
    out.q[t] = q;
  }
  const double halfwidth = stats::norm_quantile(0.975) * std::sqrt(2.0 * out.df);
  out.ci_low = out.q.array() - out.df - halfwidth;
  out.ci_high = out.q.array() - out.df + halfwidth;
  return out;
}

DominanceCurve dominance(const MetaFit& meta) {
  DominanceCurve out;
  out.cohort_labels = meta.cohort_labels;
  out.grid_x = meta.grid_x;
  out.fractions = meta.weights;
  return out;
}

PValueMethod pvalue_method_from_string(const std::string& name) {
  if (name == "stouffer") return PValueMethod::stouffer;
  if (name == "tippett") return PValueMethod::tippett;
  if (name == "fisher") return PValueMethod::fisher;
  if (name == "edgington") return PValueMethod::edgington;
  if (name == "wilkinson_max") return PValueMethod::wilkinson_max;
  if (name == "logitp") return PValueMethod::logitp;
  throw InvalidSpec("unknown p-value combination method '" + name + "'");
}

std::string pvalue_method_name(PValueMethod method) {
  switch (method) {
    case PValueMethod::stouffer: return "stouffer";
    case PValueMethod::tippett: return "tippett";
    case PValueMethod::fisher: return "fisher";
    case PValueMethod::edgington: return "edgington";
    case PValueMethod::wilkinson_max: return "wilkinson_max";
    case PValueMethod::logitp: return "logitp";
  }
  throw InvalidSpec("bad p-value method");
}

std::vector<PValueMethod> all_pvalue_methods() {
  return {PValueMethod::stouffer, PValueMethod::tippett,  PValueMethod::fisher,
          PValueMethod::edgington, PValueMethod::wilkinson_max, PValueMethod::logitp};
}

double combine_pvalues(const std::vector<double>& p, PValueMethod method,
                       const std::optional<std::vector<double>>& weights) {
  if (p.empty()) throw EmptyInput("no p-values to combine");
  const auto M = static_cast<int>(p.size());
  for (double v : p) {
    if (!(v > 0.0 && v <= 1.0)) {
      throw OutOfRangeP("p-values must lie in (0, 1], got " + std::to_string(v));
    }
  }
  std::vector<double> w(p.size(), 1.0);
  if (weights) {
    if (weights->size() != p.size()) {
      throw LengthMismatch("weights length does not match p-values");
    }
    for (double v : *weights) {
      if (!(v > 0.0) || !std::isfinite(v)) throw InvalidSpec("weights must be positive");
    }
    w = *weights;
  }

  switch (method) {
    case PValueMethod::stouffer: {
      double num = 0.0, den = 0.0;
      for (int m = 0; m < M; ++m) {
        num += w[static_cast<std::size_t>(m)] * (-stats::norm_quantile(p[static_cast<std::size_t>(m)]));
        den += w[static_cast<std::size_t>(m)] * w[static_cast<std::size_t>(m)];
      }
      const double z = num / std::sqrt(den);
      return stats::norm_cdf(-z);
    }
    case PValueMethod::tippett: {
      const double pmin = *std::min_element(p.begin(), p.end());
      return -std::expm1(static_cast<double>(M) * std::log1p(-pmin));
    }
    case PValueMethod::fisher: {
      double stat = 0.0;
      for (double v : p) stat -= 2.0 * std::log(v);
      return stats::chi2_sf(stat, 2.0 * M);
    }
    case PValueMethod::edgington: {
      double s = 0.0;
      for (double v : p) s += v;
      return stats::irwin_hall_cdf(s, M);
    }
    case PValueMethod::wilkinson_max: {
      const double pmax = *std::max_element(p.begin(), p.end());
      return std::pow(pmax, M);
    }
    case PValueMethod::logitp: {
      double stat = 0.0;
      for (double v : p) {
        stat -= std::log(v) - std::log1p(-v);  // -logit(p); p == 1 gives -inf
      }
      const double pi = std::numbers::pi;
      const double df = 5.0 * M + 4.0;
      const double scale = std::sqrt(M * pi * pi * (5.0 * M + 2.0) / (3.0 * df));
      return stats::student_t_sf(stat / scale, df);
    }
  }
  throw InvalidSpec("bad p-value method");
}

}  // namespace metagam
