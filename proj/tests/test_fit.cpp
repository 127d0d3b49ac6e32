#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "metagam/fit.hpp"
#include "metagam/stats.hpp"

using namespace metagam;

namespace {

std::mt19937_64 rng_for(unsigned seed) { return std::mt19937_64(seed); }

std::vector<double> uniform_draws(std::size_t n, std::mt19937_64& rng, double lo = 0.0,
                                  double hi = 1.0) {
  std::uniform_real_distribution<double> unif(lo, hi);
  std::vector<double> x(n);
  for (double& v : x) v = unif(rng);
  return x;
}

ModelFormula one_smooth(int k) {
  ModelFormula f;
  f.response = "y";
  FormulaSmooth s;
  s.covariate = "x";
  s.id = "s(x)";
  s.basis_dim = k;
  f.smooth_terms.push_back(s);
  return f;
}

// independently assembled design for a single sum-to-zero smooth: [1 | B Z]
struct DenseDesign {
  Eigen::MatrixXd x;
  Eigen::MatrixXd penalty;  // embedded at the smooth block
  SmoothSpec spec;
  Eigen::MatrixXd transform;
};

DenseDesign dense_design(const std::vector<double>& xv, int k) {
  DenseDesign d;
  d.spec.id = "s(x)";
  d.spec.covariate = "x";
  d.spec.basis_dim = k;
  d.spec.knots = place_knots(xv, k, KnotRule::quantile);
  d.spec.constraint = Constraint::sum_to_zero();
  d.transform = constraint_transform(d.spec, xv);
  BasisMatrix b = eval_basis(d.spec, xv, d.transform);
  const auto n = static_cast<Eigen::Index>(xv.size());
  d.x.setZero(n, 1 + b.values.cols());
  d.x.col(0).setOnes();
  d.x.rightCols(b.values.cols()) = b.values;
  d.penalty.setZero(d.x.cols(), d.x.cols());
  d.penalty.bottomRightCorner(b.penalty.rows(), b.penalty.cols()) = b.penalty;
  return d;
}

}  // namespace

TEST_CASE("noiseless line is reproduced with a nearly linear smooth") {
  auto rng = rng_for(21);
  const std::vector<double> x = uniform_draws(120, rng);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = 2.0 + 3.0 * x[i];
  ColumnTable data;
  data.add_numeric("x", x);
  data.add_numeric("y", y);

  FittedGam m = fit_gam(data, one_smooth(8));
  ColumnTable grid;
  grid.add_numeric("x", x);
  TermPrediction p = predict_term(m, "s(x)", grid, true);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(p.fit[static_cast<Eigen::Index>(i)] == doctest::Approx(y[i]).epsilon(1e-6));
  }
  CHECK(m.term("s(x)").edf <= 2.05);
}

TEST_CASE("infinite smoothing collapses to least squares on the penalty null space") {
  auto rng = rng_for(22);
  const std::vector<double> x = uniform_draws(200, rng);
  std::normal_distribution<double> gauss;
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::sin(6.0 * x[i]) + 0.3 * gauss(rng);
  }
  ColumnTable data;
  data.add_numeric("x", x);
  data.add_numeric("y", y);

  FitOptions opts = FitOptions::defaults();
  opts.fixed_lambdas = std::vector<double>{1e12};
  FittedGam m = fit_gam(data, one_smooth(10), opts);

  // OLS on {1, x} via an independent normal-equations solve
  Eigen::MatrixXd xm(static_cast<Eigen::Index>(x.size()), 2);
  Eigen::VectorXd yv(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    xm(static_cast<Eigen::Index>(i), 0) = 1.0;
    xm(static_cast<Eigen::Index>(i), 1) = x[i];
    yv[static_cast<Eigen::Index>(i)] = y[i];
  }
  Eigen::VectorXd ols = (xm.transpose() * xm).fullPivLu().solve(xm.transpose() * yv);

  ColumnTable grid;
  grid.add_numeric("x", x);
  TermPrediction p = predict_term(m, "s(x)", grid, true);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double expect = ols[0] + ols[1] * x[i];
    CHECK(p.fit[static_cast<Eigen::Index>(i)] == doctest::Approx(expect).epsilon(1e-4));
  }
}

TEST_CASE("penalized solve matches the dense normal-equations oracle") {
  for (unsigned seed : {31u, 32u, 33u, 34u, 35u}) {
    auto rng = rng_for(seed);
    const int n = 60 + static_cast<int>(seed % 3) * 70;
    const int k = 6 + static_cast<int>(seed % 4) * 4;
    const std::vector<double> x = uniform_draws(static_cast<std::size_t>(n), rng);
    std::normal_distribution<double> gauss;
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      y[i] = std::sin(5.0 * x[i]) + 0.5 * gauss(rng);
    }
    const double lambda = std::pow(10.0, -2.0 + 4.0 * (seed % 5) / 4.0);

    ColumnTable data;
    data.add_numeric("x", x);
    data.add_numeric("y", y);
    FitOptions opts = FitOptions::defaults();
    opts.fixed_lambdas = std::vector<double>{lambda};
    FittedGam m = fit_gam(data, one_smooth(k), opts);

    // rebuild the design in the model's own constrained basis, then solve
    // the normal equations with an unrelated dense factorization
    const TermFit& t = m.term("s(x)");
    Eigen::MatrixXd xd(n, 1 + t.col_count);
    xd.col(0).setOnes();
    xd.rightCols(t.col_count) = bspline_matrix(t.spec.knots, x) * t.transform;
    Eigen::MatrixXd pen = Eigen::MatrixXd::Zero(xd.cols(), xd.cols());
    pen.bottomRightCorner(t.col_count, t.col_count) =
        t.transform.transpose() * second_derivative_gram(t.spec.knots) * t.transform;
    Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(n));
    Eigen::MatrixXd a = xd.transpose() * xd + lambda * pen;
    Eigen::VectorXd oracle = a.fullPivLu().solve(xd.transpose() * yv);
    const double rel = (m.coefficients - oracle).cwiseAbs().maxCoeff() /
                       std::max(1.0, oracle.cwiseAbs().maxCoeff());
    CHECK(rel < 1e-8);

    // covariance consistency: V = scale * A^-1
    Eigen::MatrixXd v_expected = m.scale * a.fullPivLu().inverse();
    CHECK((m.covariance - v_expected).cwiseAbs().maxCoeff() / v_expected.cwiseAbs().maxCoeff() <
          1e-8);

    // stationarity: X'(y - X beta) = lambda * S * beta
    Eigen::VectorXd lhs = xd.transpose() * (yv - xd * m.coefficients);
    Eigen::VectorXd rhs = lambda * (pen * m.coefficients);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, rhs.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("adding a constant to the response shifts only the intercept") {
  auto rng = rng_for(5);
  const std::vector<double> x = uniform_draws(150, rng);
  std::normal_distribution<double> gauss;
  std::vector<double> y(x.size()), y_shift(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::cos(4.0 * x[i]) + 0.4 * gauss(rng);
    y_shift[i] = y[i] + 17.25;
  }
  ColumnTable d1, d2;
  d1.add_numeric("x", x);
  d1.add_numeric("y", y);
  d2.add_numeric("x", x);
  d2.add_numeric("y", y_shift);
  FittedGam m1 = fit_gam(d1, one_smooth(10));
  FittedGam m2 = fit_gam(d2, one_smooth(10));
  CHECK(m2.coefficients[0] - m1.coefficients[0] == doctest::Approx(17.25).epsilon(1e-9));
  CHECK((m2.coefficients.tail(m2.n_coef() - 1) - m1.coefficients.tail(m1.n_coef() - 1))
            .cwiseAbs()
            .maxCoeff() < 1e-9);
  CHECK(m1.term("s(x)").lambda == m2.term("s(x)").lambda);
}

TEST_CASE("GCV on pure noise smooths hard; strong signal keeps degrees of freedom") {
  int heavy = 0;
  for (unsigned seed = 0; seed < 50; ++seed) {
    auto rng = rng_for(100 + seed);
    const std::vector<double> x = uniform_draws(120, rng);
    std::normal_distribution<double> gauss;
    std::vector<double> y(x.size());
    for (double& v : y) v = gauss(rng);
    ColumnTable data;
    data.add_numeric("x", x);
    data.add_numeric("y", y);
    FittedGam m = fit_gam(data, one_smooth(10));
    if (m.term("s(x)").edf <= 3.0) ++heavy;
  }
  CHECK(heavy >= 40);  // majority rule over 50 seeds

  auto rng = rng_for(77);
  const std::vector<double> x = uniform_draws(1000, rng);
  std::normal_distribution<double> gauss;
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::sin(4.0 * std::numbers::pi * x[i]) + 0.05 * gauss(rng);
  }
  ColumnTable data;
  data.add_numeric("x", x);
  data.add_numeric("y", y);
  FittedGam m = fit_gam(data, one_smooth(12));
  CHECK(m.term("s(x)").edf >= 6.0);
}

TEST_CASE("select_lambda_gcv returns the searched minimum") {
  auto rng = rng_for(9);
  const std::vector<double> x = uniform_draws(150, rng);
  std::normal_distribution<double> gauss;
  std::vector<double> yv(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) yv[i] = std::sin(7.0 * x[i]) + 0.6 * gauss(rng);

  DenseDesign d = dense_design(x, 9);
  Eigen::VectorXd y =
      Eigen::Map<const Eigen::VectorXd>(yv.data(), static_cast<Eigen::Index>(yv.size()));
  const Eigen::MatrixXd sc = d.penalty.bottomRightCorner(8, 8);
  std::vector<PenaltyBlock> blocks{{1, 8, sc, "s(x)"}};
  std::vector<double> grid;
  for (int i = 0; i < 12; ++i) grid.push_back(std::pow(10.0, -4.0 + 8.0 * i / 11.0));

  const std::vector<double> lam = select_lambda_gcv(d.x, y, blocks, grid);
  REQUIRE(lam.size() == 1);

  // oracle GCV via the hat-matrix trace, independent of the fit internals
  auto gcv_at = [&](double l) {
    Eigen::MatrixXd a = d.x.transpose() * d.x + l * d.penalty;
    Eigen::MatrixXd ai = a.fullPivLu().inverse();
    Eigen::MatrixXd hat = d.x * ai * d.x.transpose();
    const double edf = hat.trace();
    const double n = static_cast<double>(y.size());
    const double rss = (y - hat * y).squaredNorm();
    return n * rss / ((n - edf) * (n - edf));
  };
  const double returned = gcv_at(lam[0]);
  for (double g : grid) {
    CHECK(returned <= gcv_at(g) * (1.0 + 1e-6));
  }
}

TEST_CASE("term p-value: zero curve gives p = 1, null is calibrated, signal shrinks p") {
  auto rng = rng_for(50);
  const std::vector<double> x = uniform_draws(150, rng);
  std::normal_distribution<double> gauss;
  std::vector<double> y(x.size());
  for (double& v : y) v = gauss(rng);
  ColumnTable data;
  data.add_numeric("x", x);
  data.add_numeric("y", y);
  FittedGam m = fit_gam(data, one_smooth(8));
  m.coefficients.segment(m.term("s(x)").col_start, m.term("s(x)").col_count).setZero();
  CHECK(term_pvalue(m, "s(x)") == 1.0);

  // Monte Carlo calibration under the null, 500 replications
  int rejected = 0;
  const int reps = 500;
  for (int rep = 0; rep < reps; ++rep) {
    auto r = rng_for(1000 + static_cast<unsigned>(rep));
    const std::vector<double> xs = uniform_draws(150, r);
    std::normal_distribution<double> g;
    std::vector<double> ys(xs.size());
    for (double& v : ys) v = g(r);
    ColumnTable d;
    d.add_numeric("x", xs);
    d.add_numeric("y", ys);
    FittedGam fit = fit_gam(d, one_smooth(8));
    if (fit.term("s(x)").pvalue < 0.05) ++rejected;
  }
  const double rate = static_cast<double>(rejected) / reps;
  CHECK(rate >= 0.02);
  CHECK(rate <= 0.10);

  // monotonicity in the signal strength, averaged over seeds
  double mean_weak = 0.0, mean_strong = 0.0;
  const int mreps = 40;
  for (int rep = 0; rep < mreps; ++rep) {
    auto r = rng_for(9000 + static_cast<unsigned>(rep));
    const std::vector<double> xs = uniform_draws(200, r);
    std::normal_distribution<double> g;
    std::vector<double> noise(xs.size());
    for (double& v : noise) v = g(r);
    for (double amp : {0.15, 0.6}) {
      std::vector<double> ys(xs.size());
      for (std::size_t i = 0; i < xs.size(); ++i) {
        ys[i] = amp * std::sin(5.0 * xs[i]) + noise[i];
      }
      ColumnTable d;
      d.add_numeric("x", xs);
      d.add_numeric("y", ys);
      FittedGam fit = fit_gam(d, one_smooth(8));
      (amp < 0.5 ? mean_weak : mean_strong) += fit.term("s(x)").pvalue / mreps;
    }
  }
  CHECK(mean_strong < mean_weak);
}

TEST_CASE("random intercepts shrink group effects and match the dense oracle") {
  // two groups offset by a constant, noiseless
  const int n = 40;
  std::vector<double> y(n);
  std::vector<std::string> g(n);
  std::vector<double> x(n);
  auto rng = rng_for(60);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double delta = 2.0;
  for (int i = 0; i < n; ++i) {
    x[static_cast<std::size_t>(i)] = unif(rng);
    const bool second = i % 2 == 1;
    g[static_cast<std::size_t>(i)] = second ? "B" : "A";
    y[static_cast<std::size_t>(i)] = second ? delta : 0.0;
  }
  ColumnTable data;
  data.add_numeric("x", x);
  data.add_numeric("y", y);
  data.add_factor("g", g);

  ModelFormula f = one_smooth(6);
  f.random_intercept = "g";
  FitOptions opts = FitOptions::defaults();
  opts.fixed_lambdas = std::vector<double>{1e6, 5.0};  // smooth flat, ridge moderate
  FittedGam m = fit_gam(data, f, opts);
  REQUIRE(m.random_intercept.has_value());
  REQUIRE(m.random_intercept->col_count == 2);
  const double b_first = m.coefficients[m.random_intercept->col_start];
  const double b_second = m.coefficients[m.random_intercept->col_start + 1];
  const double shrink = (b_second - b_first) / delta;
  CHECK(shrink > 0.0);
  CHECK(shrink < 1.0);
  CHECK(m.n_subjects == 2);

  // dense-oracle equivalence with a fixed ridge penalty, in the model basis
  const TermFit& t = m.term("s(x)");
  Eigen::MatrixXd xfull = Eigen::MatrixXd::Zero(n, 1 + t.col_count + 2);
  xfull.col(0).setOnes();
  xfull.middleCols(1, t.col_count) = bspline_matrix(t.spec.knots, x) * t.transform;
  for (int i = 0; i < n; ++i) xfull(i, 1 + t.col_count + (i % 2)) = 1.0;
  Eigen::MatrixXd pen = Eigen::MatrixXd::Zero(xfull.cols(), xfull.cols());
  pen.block(1, 1, t.col_count, t.col_count) =
      1e6 * (t.transform.transpose() * second_derivative_gram(t.spec.knots) * t.transform);
  pen.bottomRightCorner(2, 2) = 5.0 * Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  Eigen::VectorXd oracle =
      (xfull.transpose() * xfull + pen).fullPivLu().solve(xfull.transpose() * yv);
  CHECK((m.coefficients - oracle).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("heavily penalized singleton groups reduce to the no-random-intercept fit") {
  auto rng = rng_for(61);
  const int n = 30;
  const std::vector<double> x = uniform_draws(n, rng);
  std::normal_distribution<double> gauss;
  std::vector<double> y(x.size());
  std::vector<std::string> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::sin(3.0 * x[i]) + 0.2 * gauss(rng);
    g[i] = "id" + std::to_string(i);
  }
  ColumnTable with_g, without_g;
  with_g.add_numeric("x", x);
  with_g.add_numeric("y", y);
  with_g.add_factor("g", g);
  without_g.add_numeric("x", x);
  without_g.add_numeric("y", y);

  ModelFormula f = one_smooth(6);
  f.random_intercept = "g";
  FitOptions opts = FitOptions::defaults();
  opts.fixed_lambdas = std::vector<double>{1.0, 1e12};
  FittedGam m_ri = fit_gam(with_g, f, opts);

  FitOptions opts2 = FitOptions::defaults();
  opts2.fixed_lambdas = std::vector<double>{1.0};
  FittedGam m_plain = fit_gam(without_g, one_smooth(6), opts2);

  CHECK((m_ri.coefficients.head(m_plain.n_coef()) - m_plain.coefficients).cwiseAbs().maxCoeff() <
        1e-4);

  ModelFormula f_single = one_smooth(6);
  f_single.random_intercept = "g";
  ColumnTable single_level;
  single_level.add_numeric("x", x);
  single_level.add_numeric("y", y);
  single_level.add_factor("g", std::vector<std::string>(x.size(), "only"));
  CHECK_THROWS_AS(fit_gam(single_level, f_single), SingleGroup);
}

TEST_CASE("prediction standard errors match the quadratic-form oracle") {
  auto rng = rng_for(70);
  const std::vector<double> x = uniform_draws(200, rng);
  std::normal_distribution<double> gauss;
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::sin(5.0 * x[i]) + 0.5 * gauss(rng);
  ColumnTable data;
  data.add_numeric("x", x);
  data.add_numeric("y", y);
  FittedGam m = fit_gam(data, one_smooth(9));

  const std::vector<double> gridx = {0.05, 0.3, 0.77};
  ColumnTable grid;
  grid.add_numeric("x", gridx);
  const TermFit& t = m.term("s(x)");
  Eigen::MatrixXd rows = bspline_matrix(t.spec.knots, gridx) * t.transform;

  for (bool with_intercept : {false, true}) {
    TermPrediction p = predict_term(m, "s(x)", grid, with_intercept);
    for (int i = 0; i < 3; ++i) {
      Eigen::VectorXd full = Eigen::VectorXd::Zero(m.n_coef());
      full.segment(t.col_start, t.col_count) = rows.row(i).transpose();
      if (with_intercept) full[0] = 1.0;
      const double var = full.dot(m.covariance * full);
      CHECK(p.se[i] * p.se[i] == doctest::Approx(var).epsilon(1e-10));
    }
  }
  CHECK_THROWS_AS(predict_term(m, "s(zzz)", grid, false), UnknownTerm);
}

TEST_CASE("point-constrained smooth predicts exactly zero at the anchor") {
  auto rng = rng_for(71);
  const std::vector<double> x = uniform_draws(150, rng);
  std::normal_distribution<double> gauss;
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::sin(5.0 * x[i]) + 0.3 * gauss(rng);
  ColumnTable data;
  data.add_numeric("x", x);
  data.add_numeric("y", y);
  ModelFormula f = one_smooth(9);
  f.smooth_terms[0].constraint = Constraint::point(0.5);
  FittedGam m = fit_gam(data, f);

  ColumnTable grid;
  grid.add_numeric("x", std::vector<double>{0.5});
  TermPrediction p = predict_term(m, "s(x)", grid, false);
  CHECK(std::abs(p.fit[0]) < 1e-10);
}

TEST_CASE("disjoint covariate ranges with forced common knots are rejected") {
  auto rng = rng_for(80);
  std::vector<double> x_low = uniform_draws(120, rng, 0.0, 0.35);
  std::vector<double> x_high = uniform_draws(120, rng, 0.65, 1.0);
  std::vector<double> pooled = x_low;
  pooled.insert(pooled.end(), x_high.begin(), x_high.end());
  const KnotSequence shared = place_knots(pooled, 10, KnotRule::quantile);

  std::normal_distribution<double> gauss;
  auto make_table = [&](const std::vector<double>& xs) {
    std::vector<double> ys(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = std::sin(4.0 * xs[i]) + 0.3 * gauss(rng);
    ColumnTable t;
    t.add_numeric("x", xs);
    t.add_numeric("y", ys);
    return t;
  };

  ModelFormula forced = one_smooth(10);
  forced.smooth_terms[0].knots = shared;  // the shared-knot failure mode
  CHECK_THROWS_AS(fit_gam(make_table(x_low), forced), RankDeficientDesign);

  // per-cohort knots fit cleanly on the same data
  CHECK_NOTHROW(fit_gam(make_table(x_low), one_smooth(10)));
  CHECK_NOTHROW(fit_gam(make_table(x_high), one_smooth(10)));
}

TEST_CASE("collinear unpenalized columns are rejected, not silently solved") {
  auto rng = rng_for(81);
  const std::vector<double> x = uniform_draws(60, rng);
  std::normal_distribution<double> gauss;
  std::vector<double> y(x.size()), xcopy = x;
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + 0.1 * gauss(rng);
  ColumnTable data;
  data.add_numeric("x", x);
  data.add_numeric("x2", xcopy);  // exact duplicate linear column
  data.add_numeric("y", y);
  ModelFormula f;
  f.response = "y";
  f.linear_terms = {"x", "x2"};
  CHECK_THROWS_AS(fit_gam(data, f), RankDeficientDesign);
}

TEST_CASE("input validation errors") {
  ColumnTable tiny;
  tiny.add_numeric("x", {1, 2, 3});
  tiny.add_numeric("y", {1, 2, 3});
  CHECK_THROWS_AS(fit_gam(tiny, one_smooth(4)), InvalidSpec);  // n < 10

  auto rng = rng_for(82);
  std::vector<double> x = uniform_draws(30, rng);
  std::vector<double> y(x.size(), 1.0);
  y[3] = std::numeric_limits<double>::quiet_NaN();
  ColumnTable data;
  data.add_numeric("x", x);
  data.add_numeric("y", y);
  CHECK_THROWS_AS(fit_gam(data, one_smooth(5)), NonFiniteData);

  ColumnTable missing;
  missing.add_numeric("y", std::vector<double>(30, 1.0));
  CHECK_THROWS_AS(fit_gam(missing, one_smooth(5)), UnknownColumn);
}
