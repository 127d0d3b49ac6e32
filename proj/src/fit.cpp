#include "metagam/fit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "metagam/stats.hpp"

namespace metagam {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string label_of(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> group_labels(const ColumnTable& data, const std::string& column) {
  std::vector<std::string> labels(data.nrows());
  if (data.is_numeric(column)) {
    const auto& v = data.numeric(column);
    for (std::size_t i = 0; i < v.size(); ++i) labels[i] = label_of(v[i]);
  } else {
    labels = data.factor(column);
  }
  return labels;
}

std::vector<std::string> sorted_levels(const std::vector<std::string>& labels) {
  std::set<std::string> s(labels.begin(), labels.end());
  return {s.begin(), s.end()};
}

void check_column_finite(const std::vector<double>& v, const std::string& name) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw NonFiniteData("column '" + name + "' has a non-finite value at row " +
                          std::to_string(i));
    }
  }
}

struct Assembled {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<PenaltyBlock> blocks;  // smooth blocks, then the optional ridge
  FittedGam shell;                   // metadata with column ranges resolved
};

Assembled assemble(const ColumnTable& data, const ModelFormula& formula) {
  formula.validate();
  const std::size_t n = data.nrows();
  if (n < 10) throw InvalidSpec("need at least 10 observations, got " + std::to_string(n));
  if (!data.has(formula.response)) {
    throw UnknownColumn("response column '" + formula.response + "' not in data");
  }

  Assembled a;
  a.shell.response = formula.response;
  a.shell.n = static_cast<long>(n);
  const auto& yv = data.numeric(formula.response);
  check_column_finite(yv, formula.response);
  a.y = Eigen::Map<const Eigen::VectorXd>(yv.data(), static_cast<Eigen::Index>(n));

  auto record_stats = [&](const std::string& col) {
    if (a.shell.covariate_stats.count(col)) return;
    const auto& v = data.numeric(col);
    check_column_finite(v, col);
    a.shell.covariate_stats.emplace(col, covariate_stats_of(v));
  };

  // resolve layout: intercept, linear terms, smooth blocks, ridge block
  int col = 1;
  for (const std::string& lin : formula.linear_terms) {
    if (!data.has(lin)) throw UnknownColumn("linear term column '" + lin + "' not in data");
    LinearTermFit lt;
    lt.column = lin;
    lt.col_start = col;
    if (data.is_numeric(lin)) {
      record_stats(lin);
      lt.col_count = 1;
    } else {
      lt.levels = sorted_levels(data.factor(lin));
      if (lt.levels.size() < 2) {
        throw InvalidSpec("factor column '" + lin + "' has a single level");
      }
      lt.col_count = static_cast<int>(lt.levels.size()) - 1;  // first level is reference
    }
    col += lt.col_count;
    a.shell.linears.push_back(std::move(lt));
  }

  struct PendingSmooth {
    TermFit fit;
    Eigen::MatrixXd values;  // constrained, by-scaled design block
  };
  std::vector<PendingSmooth> pending;
  for (const FormulaSmooth& fs : formula.smooth_terms) {
    if (!data.has(fs.covariate)) {
      throw UnknownColumn("smooth covariate '" + fs.covariate + "' not in data");
    }
    const auto& xv = data.numeric(fs.covariate);
    record_stats(fs.covariate);

    TermFit tf;
    tf.spec.id = fs.id;
    tf.spec.covariate = fs.covariate;
    tf.spec.basis_dim = fs.basis_dim;
    tf.spec.constraint = fs.constraint;
    tf.spec.by = fs.by;
    tf.spec.knots = fs.knots ? *fs.knots : place_knots(xv, fs.basis_dim, fs.knot_rule);
    tf.spec.validate();

    Eigen::MatrixXd raw = bspline_matrix(tf.spec.knots, xv);
    std::vector<double> byv;
    if (fs.by) {
      if (!data.has(*fs.by)) throw UnknownColumn("by-variable '" + *fs.by + "' not in data");
      byv = data.numeric(*fs.by);
      record_stats(*fs.by);
      raw.array().colwise() *=
          Eigen::Map<const Eigen::ArrayXd>(byv.data(), static_cast<Eigen::Index>(n));
    }
    // a basis function with no data support cannot be identified; this is
    // exactly what forcing common knots onto a cohort with a narrower
    // covariate range produces
    for (int k = 0; k < raw.cols(); ++k) {
      if (raw.col(k).cwiseAbs().maxCoeff() < 1e-10) {
        throw RankDeficientDesign("term '" + fs.id + "': basis function " + std::to_string(k) +
                                  " has no support on the observed data; knots do not match "
                                  "the covariate distribution");
      }
    }

    tf.transform = constraint_transform(tf.spec, xv);
    tf.col_start = col;
    tf.col_count = static_cast<int>(tf.transform.cols());
    col += tf.col_count;

    // natural parameterization: rotate the block so the penalty is exactly
    // diagonal with exact zeros on its null space; forming G + lambda*S then
    // stays accurate even for extreme lambda
    Eigen::MatrixXd S = second_derivative_gram(tf.spec.knots);
    Eigen::MatrixXd Sc = tf.transform.transpose() * S * tf.transform;
    Sc = 0.5 * (Sc + Sc.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sc);
    Eigen::VectorXd evals = es.eigenvalues().cwiseMax(0.0);
    const double maxev = evals.maxCoeff();
    for (Eigen::Index i = 0; i < evals.size(); ++i) {
      if (evals[i] <= 1e-12 * maxev) evals[i] = 0.0;
    }
    tf.transform = (tf.transform * es.eigenvectors()).eval();

    PendingSmooth ps;
    ps.values = raw * tf.transform;
    a.blocks.push_back({tf.col_start, tf.col_count, Eigen::MatrixXd(evals.asDiagonal()), fs.id});
    ps.fit = std::move(tf);
    pending.push_back(std::move(ps));
  }

  std::optional<RandomInterceptFit> ri;
  std::vector<std::string> glabels;
  if (formula.random_intercept) {
    const std::string& gcol = *formula.random_intercept;
    if (!data.has(gcol)) throw UnknownColumn("grouping column '" + gcol + "' not in data");
    glabels = group_labels(data, gcol);
    RandomInterceptFit r;
    r.column = gcol;
    r.levels = sorted_levels(glabels);
    if (r.levels.size() < 2) throw SingleGroup("grouping column '" + gcol + "' has one level");
    r.col_start = col;
    r.col_count = static_cast<int>(r.levels.size());
    col += r.col_count;
    a.blocks.push_back({r.col_start, r.col_count,
                        Eigen::MatrixXd::Identity(r.col_count, r.col_count), "(1|" + gcol + ")"});
    a.shell.n_subjects = static_cast<long>(r.levels.size());
    ri = std::move(r);
  }

  const int p = col;
  a.X.setZero(static_cast<Eigen::Index>(n), p);
  a.X.col(0).setOnes();
  for (const LinearTermFit& lt : a.shell.linears) {
    if (lt.levels.empty()) {
      const auto& v = data.numeric(lt.column);
      a.X.col(lt.col_start) = Eigen::Map<const Eigen::VectorXd>(v.data(), a.X.rows());
    } else {
      const auto& labels = data.factor(lt.column);
      for (std::size_t i = 0; i < n; ++i) {
        for (int l = 1; l < static_cast<int>(lt.levels.size()); ++l) {
          if (labels[i] == lt.levels[l]) {
            a.X(static_cast<Eigen::Index>(i), lt.col_start + l - 1) = 1.0;
            break;
          }
        }
      }
    }
  }
  for (PendingSmooth& ps : pending) {
    a.X.middleCols(ps.fit.col_start, ps.fit.col_count) = ps.values;
    a.shell.smooths.push_back(std::move(ps.fit));
  }
  if (ri) {
    for (std::size_t i = 0; i < n; ++i) {
      auto it = std::lower_bound(ri->levels.begin(), ri->levels.end(), glabels[i]);
      a.X(static_cast<Eigen::Index>(i),
          ri->col_start + static_cast<int>(it - ri->levels.begin())) = 1.0;
    }
    a.shell.random_intercept = std::move(ri);
  }
  return a;
}

// Unpenalized directions (intercept, linear columns, and each penalty's null
// space) must be identifiable from the data alone. Projecting the design onto
// those directions and checking its rank catches collinear unpenalized
// columns without being fooled by the ridge/penalty regularization.
void check_unpenalized_rank(const Assembled& a) {
  const int p = static_cast<int>(a.X.cols());
  std::vector<Eigen::VectorXd> dirs;
  std::vector<char> penalized(p, 0);
  for (const PenaltyBlock& blk : a.blocks) {
    for (int i = 0; i < blk.size; ++i) penalized[blk.start + i] = 1;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(blk.S);
    const double maxev = es.eigenvalues().cwiseAbs().maxCoeff();
    if (maxev <= 0.0) continue;
    for (int i = 0; i < blk.size; ++i) {
      if (es.eigenvalues()[i] <= 1e-10 * maxev) {
        Eigen::VectorXd d = Eigen::VectorXd::Zero(p);
        d.segment(blk.start, blk.size) = es.eigenvectors().col(i);
        dirs.push_back(std::move(d));
      }
    }
  }
  for (int i = 0; i < p; ++i) {
    if (!penalized[i]) {
      Eigen::VectorXd d = Eigen::VectorXd::Zero(p);
      d[i] = 1.0;
      dirs.push_back(std::move(d));
    }
  }
  if (dirs.empty()) return;
  Eigen::MatrixXd N(p, static_cast<Eigen::Index>(dirs.size()));
  for (std::size_t i = 0; i < dirs.size(); ++i) N.col(static_cast<Eigen::Index>(i)) = dirs[i];
  Eigen::MatrixXd XN = a.X * N;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(XN);
  if (qr.rank() < N.cols()) {
    throw RankDeficientDesign(
        "unpenalized model directions are collinear (" + std::to_string(qr.rank()) + " of " +
        std::to_string(N.cols()) +
        " identifiable); the model cannot be fit as specified");
  }
}

struct GramGcv {
  Eigen::MatrixXd G;
  Eigen::VectorXd b;
  double yy = 0.0;
  double n = 0.0;
  const std::vector<PenaltyBlock>* blocks = nullptr;

  GramGcv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
          const std::vector<PenaltyBlock>& blk)
      : G(X.transpose() * X), b(X.transpose() * y), yy(y.squaredNorm()),
        n(static_cast<double>(y.size())), blocks(&blk) {}

  Eigen::MatrixXd penalized(const std::vector<double>& lam) const {
    Eigen::MatrixXd A = G;
    for (std::size_t j = 0; j < blocks->size(); ++j) {
      const PenaltyBlock& blk = (*blocks)[j];
      A.block(blk.start, blk.start, blk.size, blk.size) += lam[j] * blk.S;
    }
    return A;
  }

  struct Eval {
    bool ok = false;
    double gcv = kInf;
    double rss = 0.0;
    double edf = 0.0;
  };

  Eval evaluate(const std::vector<double>& lam) const {
    Eval out;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(penalized(lam));
    if (ldlt.info() != Eigen::Success) return out;
    Eigen::VectorXd beta = ldlt.solve(b);
    out.rss = std::max(0.0, yy - 2.0 * beta.dot(b) + beta.dot(G * beta));
    out.edf = ldlt.solve(G).trace();
    const double denom = n - out.edf;
    if (!(denom > 0.5)) return out;
    out.gcv = n * out.rss / (denom * denom);
    out.ok = std::isfinite(out.gcv);
    return out;
  }
};

std::vector<double> gcv_descent(const GramGcv& w, std::size_t nblocks,
                                const std::vector<double>& grid, int sweeps) {
  std::vector<double> lam(nblocks, 1.0);
  GramGcv::Eval cur = w.evaluate(lam);
  double best = cur.ok ? cur.gcv : kInf;
  for (int s = 0; s < sweeps; ++s) {
    for (std::size_t j = 0; j < nblocks; ++j) {
      double best_lam = lam[j];
      for (double cand : grid) {
        lam[j] = cand;
        GramGcv::Eval e = w.evaluate(lam);
        if (!e.ok) continue;
        // ties (within numerical noise) resolve toward heavier smoothing
        const bool better = e.gcv < best * (1.0 - 1e-9);
        const bool tied = e.gcv <= best * (1.0 + 1e-9) && cand > best_lam;
        if (better || tied || !std::isfinite(best)) {
          best = e.gcv;
          best_lam = cand;
        }
      }
      lam[j] = best_lam;
    }
  }
  return lam;
}

}  // namespace

FitOptions FitOptions::defaults() {
  FitOptions o;
  o.lambda_grid.reserve(30);
  for (int i = 0; i < 30; ++i) {
    o.lambda_grid.push_back(std::pow(10.0, -6.0 + 12.0 * i / 29.0));
  }
  return o;
}

const TermFit& FittedGam::term(const std::string& term_id) const {
  for (const TermFit& t : smooths) {
    if (t.spec.id == term_id) return t;
  }
  throw UnknownTerm("no smooth term '" + term_id + "' in model");
}

bool FittedGam::has_term(const std::string& term_id) const {
  for (const TermFit& t : smooths) {
    if (t.spec.id == term_id) return true;
  }
  return false;
}

CovariateStats covariate_stats_of(const std::vector<double>& values) {
  if (values.empty()) throw EmptyInput("covariate_stats_of: empty column");
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  CovariateStats cs;
  cs.min = sorted.front();
  cs.max = sorted.back();
  for (int d = 1; d <= 9; ++d) {
    cs.deciles[d - 1] = stats::quantile_sorted(sorted.data(), sorted.size(), d / 10.0);
  }
  return cs;
}

std::vector<double> select_lambda_gcv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                      const std::vector<PenaltyBlock>& blocks,
                                      const std::vector<double>& lambda_grid, int sweeps) {
  if (blocks.empty()) return {};
  if (lambda_grid.empty()) throw InvalidSpec("empty lambda grid");
  GramGcv w(X, y, blocks);
  return gcv_descent(w, blocks.size(), lambda_grid, sweeps);
}

FittedGam fit_gam(const ColumnTable& data, const ModelFormula& formula, const FitOptions& opts) {
  Assembled a = assemble(data, formula);
  check_unpenalized_rank(a);

  const double n = static_cast<double>(a.y.size());
  GramGcv w(a.X, a.y, a.blocks);

  std::vector<double> lam;
  if (opts.fixed_lambdas) {
    lam = *opts.fixed_lambdas;
    if (lam.size() != a.blocks.size()) {
      throw InvalidSpec("fixed_lambdas has " + std::to_string(lam.size()) + " entries, model has " +
                        std::to_string(a.blocks.size()) + " penalized blocks");
    }
    for (double l : lam) {
      if (!(l >= 0.0) || !std::isfinite(l)) throw InvalidSpec("smoothing parameters must be >= 0");
    }
  } else if (!a.blocks.empty()) {
    if (opts.lambda_grid.empty()) throw InvalidSpec("empty lambda grid");
    lam = gcv_descent(w, a.blocks.size(), opts.lambda_grid, opts.sweeps);
  }

  Eigen::LDLT<Eigen::MatrixXd> ldlt(w.penalized(lam));
  if (ldlt.info() != Eigen::Success) {
    throw RankDeficientDesign("penalized normal equations could not be factorized");
  }
  const int p = static_cast<int>(a.X.cols());
  Eigen::VectorXd beta = ldlt.solve(w.b);
  Eigen::MatrixXd Ainv = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
  Eigen::MatrixXd M = Ainv * w.G;  // influence matrix in coefficient space

  FittedGam m = std::move(a.shell);
  m.coefficients = beta;
  m.edf_total = M.trace();
  m.rss = std::max(0.0, w.yy - 2.0 * beta.dot(w.b) + beta.dot(w.G * beta));
  const double dof = std::max(1.0, n - m.edf_total);
  m.scale = std::max(m.rss / dof, 1e-300);
  m.covariance = (m.scale * 0.5) * (Ainv + Ainv.transpose());

  const double ybar = a.y.mean();
  const double tss = (a.y.array() - ybar).square().sum();
  m.r2_adj = tss > 0.0 ? 1.0 - (m.rss / dof) / (tss / (n - 1.0)) : 0.0;

  for (std::size_t j = 0; j < a.blocks.size(); ++j) {
    const PenaltyBlock& blk = a.blocks[j];
    const double block_edf = M.diagonal().segment(blk.start, blk.size).sum();
    bool matched = false;
    for (TermFit& t : m.smooths) {
      if (t.col_start == blk.start) {
        t.lambda = lam[j];
        t.edf = block_edf;
        matched = true;
        break;
      }
    }
    if (!matched && m.random_intercept && m.random_intercept->col_start == blk.start) {
      m.random_intercept->lambda = lam[j];
      m.random_intercept->edf = block_edf;
    }
  }
  for (TermFit& t : m.smooths) t.pvalue = term_pvalue(m, t.spec.id);
  return m;
}

TermPrediction predict_term(const FittedGam& model, const std::string& term_id,
                            const ColumnTable& grid, bool include_intercept) {
  const TermFit& t = model.term(term_id);
  if (!grid.has(t.spec.covariate)) {
    throw UnknownColumn("grid lacks covariate '" + t.spec.covariate + "'");
  }
  const auto& gx = grid.numeric(t.spec.covariate);
  Eigen::MatrixXd rows = bspline_matrix(t.spec.knots, gx) * t.transform;
  if (t.spec.by) {
    if (!grid.has(*t.spec.by)) throw UnknownColumn("grid lacks by-variable '" + *t.spec.by + "'");
    const auto& byv = grid.numeric(*t.spec.by);
    rows.array().colwise() *=
        Eigen::Map<const Eigen::ArrayXd>(byv.data(), static_cast<Eigen::Index>(byv.size()));
  }

  const Eigen::VectorXd gamma = model.coefficients.segment(t.col_start, t.col_count);
  const Eigen::MatrixXd vss = model.covariance.block(t.col_start, t.col_start, t.col_count,
                                                     t.col_count);
  TermPrediction out;
  out.includes_intercept = include_intercept;
  out.fit = rows * gamma;
  Eigen::VectorXd var = (rows * vss).cwiseProduct(rows).rowwise().sum();
  if (include_intercept) {
    out.fit.array() += model.coefficients[0];
    const Eigen::VectorXd cross = model.covariance.block(0, t.col_start, 1, t.col_count).transpose();
    var.array() += model.covariance(0, 0) + 2.0 * (rows * cross).array();
  }
  out.se = var.cwiseMax(0.0).cwiseSqrt();
  return out;
}

double term_pvalue(const FittedGam& model, const std::string& term_id) {
  const TermFit& t = model.term(term_id);
  auto it = model.covariate_stats.find(t.spec.covariate);
  if (it == model.covariate_stats.end()) {
    throw UnknownTerm("model has no stored deciles for covariate '" + t.spec.covariate + "'");
  }
  const std::vector<double> dec(it->second.deciles.begin(), it->second.deciles.end());
  // the test targets the smooth itself, so the by multiplier is not applied
  Eigen::MatrixXd rows = bspline_matrix(t.spec.knots, dec) * t.transform;
  const Eigen::VectorXd f = rows * model.coefficients.segment(t.col_start, t.col_count);
  Eigen::MatrixXd vf =
      rows * model.covariance.block(t.col_start, t.col_start, t.col_count, t.col_count) *
      rows.transpose();
  vf = 0.5 * (vf + vf.transpose()).eval();

  const int grid_size = static_cast<int>(dec.size());
  const int rank = static_cast<int>(
      std::clamp<long>(std::lround(t.edf), 1L, std::min(t.col_count, grid_size)));

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(vf);
  const double maxev = es.eigenvalues().maxCoeff();
  if (!(maxev > 0.0)) return 1.0;
  double stat = 0.0;
  for (int i = 0; i < rank; ++i) {
    const int idx = grid_size - 1 - i;  // eigenvalues ascend in Eigen
    const double ev = es.eigenvalues()[idx];
    if (ev <= 1e-12 * maxev) break;
    const double proj = es.eigenvectors().col(idx).dot(f);
    stat += proj * proj / ev;
  }
  return stats::chi2_sf(stat, rank);
}

}  // namespace metagam
