#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "metagam/meta.hpp"
#include "metagam/stats.hpp"

using namespace metagam;

namespace {

CohortPrediction cohort(const std::string& label, std::vector<double> fit, std::vector<double> se,
                        long n = 100) {
  CohortPrediction c;
  c.label = label;
  c.n = n;
  c.grid_var = "x";
  const auto len = static_cast<Eigen::Index>(fit.size());
  c.grid_x.setLinSpaced(len, 0.0, 1.0);
  c.pred.fit = Eigen::Map<const Eigen::VectorXd>(fit.data(), len);
  c.pred.se = Eigen::Map<const Eigen::VectorXd>(se.data(), len);
  c.pred.includes_intercept = false;
  c.in_range.assign(fit.size(), 1);
  return c;
}

}  // namespace

TEST_CASE("FE pooling of identical cohorts averages exactly") {
  const int m_count = 4;
  std::vector<CohortPrediction> preds;
  for (int m = 0; m < m_count; ++m) {
    preds.push_back(cohort("c" + std::to_string(m), {1.5, -0.25, 3.75}, {0.4, 0.8, 1.6}));
  }
  MetaFit meta = pool_pointwise(preds, PoolMethod::FE, false);
  for (int t = 0; t < 3; ++t) {
    CHECK(std::abs(meta.pooled_fit[t] - preds[0].pred.fit[t]) < 1e-12);
    CHECK(std::abs(meta.pooled_se[t] - preds[0].pred.se[t] / 2.0) < 1e-12);  // se / sqrt(4)
    CHECK(std::abs(meta.weights.col(t).sum() - 1.0) < 1e-12);
    CHECK(meta.tau2[t] == 0.0);
  }
}

TEST_CASE("the DerSimonian-Laird two-cohort hand example") {
  std::vector<CohortPrediction> preds = {cohort("a", {0.0}, {1.0}), cohort("b", {2.0}, {1.0})};
  MetaFit meta = pool_pointwise(preds, PoolMethod::DL, false);
  // Q = 2, C = 1, tau2 = 1, weights 1/2 each, pooled se = 1
  CHECK(std::abs(meta.tau2[0] - 1.0) < 1e-12);
  CHECK(std::abs(meta.pooled_fit[0] - 1.0) < 1e-12);
  CHECK(std::abs(meta.pooled_se[0] - 1.0) < 1e-12);

  HeterogeneityCurve het = cochran_q(preds);
  CHECK(het.df == 1);
  CHECK(std::abs(het.q[0] - 2.0) < 1e-12);

  // identical fits truncate tau2 at zero and reduce DL to FE
  std::vector<CohortPrediction> same = {cohort("a", {0.7}, {0.3}), cohort("b", {0.7}, {0.5})};
  MetaFit dl = pool_pointwise(same, PoolMethod::DL, false);
  MetaFit fe = pool_pointwise(same, PoolMethod::FE, false);
  CHECK(dl.tau2[0] == 0.0);
  CHECK(dl.pooled_fit[0] == doctest::Approx(fe.pooled_fit[0]).epsilon(1e-14));
  CHECK(dl.pooled_se[0] == doctest::Approx(fe.pooled_se[0]).epsilon(1e-14));
}

TEST_CASE("pooled information never decreases and DL never beats FE") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> unif(0.2, 2.0);
  std::normal_distribution<double> gauss;
  for (int rep = 0; rep < 25; ++rep) {
    std::vector<CohortPrediction> preds;
    const int m_count = 2 + static_cast<int>(rng() % 5);
    for (int m = 0; m < m_count; ++m) {
      std::vector<double> fit(6), se(6);
      for (int t = 0; t < 6; ++t) {
        fit[static_cast<std::size_t>(t)] = gauss(rng);
        se[static_cast<std::size_t>(t)] = unif(rng);
      }
      preds.push_back(cohort("c" + std::to_string(m), fit, se));
    }
    MetaFit fe = pool_pointwise(preds, PoolMethod::FE, false);
    MetaFit dl = pool_pointwise(preds, PoolMethod::DL, false);
    for (int t = 0; t < 6; ++t) {
      double min_se = 1e300;
      for (const auto& p : preds) min_se = std::min(min_se, p.pred.se[t]);
      CHECK(fe.pooled_se[t] <= min_se + 1e-12);
      CHECK(dl.pooled_se[t] + 1e-12 >= fe.pooled_se[t]);
      CHECK(dl.tau2[t] >= 0.0);
    }

    // permutation invariance under cohort relabeling
    std::vector<CohortPrediction> shuffled = preds;
    std::reverse(shuffled.begin(), shuffled.end());
    MetaFit fe2 = pool_pointwise(shuffled, PoolMethod::FE, false);
    MetaFit dl2 = pool_pointwise(shuffled, PoolMethod::DL, false);
    CHECK((fe.pooled_fit - fe2.pooled_fit).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((dl.pooled_se - dl2.pooled_se).cwiseAbs().maxCoeff() < 1e-12);
    HeterogeneityCurve q1 = cochran_q(preds);
    HeterogeneityCurve q2 = cochran_q(shuffled);
    CHECK((q1.q - q2.q).cwiseAbs().maxCoeff() < 1e-12);

    // scale equivariance: multiplying fits and ses by c scales the pool by c
    const double c = 3.7;
    std::vector<CohortPrediction> scaled = preds;
    for (auto& p : scaled) {
      p.pred.fit *= c;
      p.pred.se *= c;
    }
    MetaFit fes = pool_pointwise(scaled, PoolMethod::FE, false);
    MetaFit dls = pool_pointwise(scaled, PoolMethod::DL, false);
    CHECK((fes.pooled_fit - c * fe.pooled_fit).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((fes.pooled_se - c * fe.pooled_se).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((dls.pooled_fit - c * dl.pooled_fit).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((dls.pooled_se - c * dl.pooled_se).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("confidence bands use standard normal quantiles") {
  std::vector<CohortPrediction> preds = {cohort("a", {0.0, 0.0}, {std::sqrt(2.0), std::sqrt(2.0)}),
                                         cohort("b", {0.0, 0.0}, {std::sqrt(2.0), std::sqrt(2.0)})};
  MetaFit meta = pool_pointwise(preds, PoolMethod::FE, false);
  REQUIRE(meta.pooled_se[0] == doctest::Approx(1.0).epsilon(1e-12));

  auto [lo, hi] = confidence_band(meta, 0.05);
  CHECK(lo[0] == doctest::Approx(-1.95996).epsilon(1e-5));
  CHECK(hi[0] == doctest::Approx(1.95996).epsilon(1e-5));

  auto [lo2, hi2] = confidence_band(meta, 0.5);
  CHECK(hi2[0] == doctest::Approx(0.674490).epsilon(1e-5));
  for (int t = 0; t < 2; ++t) {
    CHECK(lo[t] <= meta.pooled_fit[t]);
    CHECK(hi[t] >= meta.pooled_fit[t]);
  }
  CHECK_THROWS_AS(confidence_band(meta, 0.0), BadAlpha);
  CHECK_THROWS_AS(confidence_band(meta, 1.0), BadAlpha);
}

TEST_CASE("dominance fractions are normalized inverse-variance weights") {
  std::vector<CohortPrediction> preds;
  for (int m = 0; m < 5; ++m) {
    preds.push_back(cohort("c" + std::to_string(m), {1.0, 2.0}, {0.5, 0.8}));
  }
  MetaFit meta = pool_pointwise(preds, PoolMethod::FE, false);
  DominanceCurve dom = dominance(meta);
  for (int t = 0; t < 2; ++t) {
    for (int m = 0; m < 5; ++m) CHECK(dom.fractions(m, t) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(dom.fractions.col(t).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }

  // a near-infinite-variance cohort contributes nothing
  preds[0] = cohort("c0", {1.0, 2.0}, {1e8, 1e8});
  MetaFit meta2 = pool_pointwise(preds, PoolMethod::FE, false);
  DominanceCurve dom2 = dominance(meta2);
  CHECK(dom2.fractions(0, 0) < 1e-10);
  CHECK(dom2.fractions.col(0).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("range restriction drops cohorts pointwise and can invalidate points") {
  CohortPrediction a = cohort("a", {1.0, 1.0, 1.0}, {1.0, 1.0, 1.0});
  CohortPrediction b = cohort("b", {2.0, 2.0, 2.0}, {1.0, 1.0, 1.0});
  CohortPrediction c = cohort("c", {3.0, 3.0, 3.0}, {1.0, 1.0, 1.0});
  b.in_range = {1, 0, 0};
  c.in_range = {1, 1, 0};
  MetaFit meta = pool_pointwise({a, b, c}, PoolMethod::FE, true);
  CHECK(meta.valid[0] == 1);
  CHECK(meta.pooled_fit[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(meta.valid[1] == 1);
  CHECK(meta.pooled_fit[1] == doctest::Approx(2.0).epsilon(1e-12));  // a and c remain
  CHECK(meta.valid[2] == 0);  // only cohort a left
  CHECK(std::isnan(meta.pooled_fit[2]));
  CHECK(meta.weights(1, 1) == 0.0);

  // without restriction every point pools all three cohorts
  MetaFit full = pool_pointwise({a, b, c}, PoolMethod::FE, false);
  CHECK(full.valid[2] == 1);
  CHECK(full.pooled_fit[2] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("degenerate zero standard errors are dropped with a warning") {
  CohortPrediction a = cohort("a", {1.0}, {0.0});
  CohortPrediction b = cohort("b", {2.0}, {1.0});
  CohortPrediction c = cohort("c", {4.0}, {1.0});
  MetaFit meta = pool_pointwise({a, b, c}, PoolMethod::FE, false);
  CHECK(meta.zero_se_warning);
  CHECK(meta.pooled_fit[0] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("pooling input validation") {
  CohortPrediction a = cohort("a", {1.0, 2.0}, {1.0, 1.0});
  CHECK_THROWS_AS(pool_pointwise({a}, PoolMethod::FE, false), TooFewCohorts);

  CohortPrediction b = cohort("b", {1.0, 2.0, 3.0}, {1.0, 1.0, 1.0});
  CHECK_THROWS_AS(pool_pointwise({a, b}, PoolMethod::FE, false), GridMismatch);

  CohortPrediction c = cohort("c", {1.0, 2.0}, {1.0, 1.0});
  c.grid_x[1] = 0.75;
  CHECK_THROWS_AS(pool_pointwise({a, c}, PoolMethod::FE, false), GridMismatch);
}

TEST_CASE("p-value combination closed forms") {
  // Stouffer at the median point
  CHECK(combine_pvalues({0.5, 0.5}, PValueMethod::stouffer) ==
        doctest::Approx(0.5).epsilon(1e-12));
  // weighted Stouffer with sqrt(n) weights: Z = 2.32617, p = 0.01002
  const double p = combine_pvalues({0.05, 0.05}, PValueMethod::stouffer,
                                   std::vector<double>{10.0, 10.0});
  CHECK(p == doctest::Approx(0.01002).epsilon(1e-2));
  CHECK(std::abs(p - 0.01002) < 1e-4);

  CHECK(combine_pvalues({1.0, 1.0, 1.0}, PValueMethod::fisher) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(combine_pvalues({0.1234}, PValueMethod::tippett) ==
        doctest::Approx(0.1234).epsilon(1e-12));
  CHECK(combine_pvalues({0.3, 0.6, 0.9}, PValueMethod::wilkinson_max) ==
        doctest::Approx(std::pow(0.9, 3)).epsilon(1e-12));
  // Irwin-Hall tail by hand: P(U1 + U2 <= 0.3) = 0.3^2 / 2
  CHECK(combine_pvalues({0.1, 0.2}, PValueMethod::edgington) ==
        doctest::Approx(0.045).epsilon(1e-10));
  CHECK(combine_pvalues({0.5, 0.5, 0.5}, PValueMethod::logitp) ==
        doctest::Approx(0.5).epsilon(1e-12));

  CHECK_THROWS_AS(combine_pvalues({0.5, 0.0}, PValueMethod::fisher), OutOfRangeP);
  CHECK_THROWS_AS(combine_pvalues({0.5, 1.2}, PValueMethod::fisher), OutOfRangeP);
  CHECK_THROWS_AS(combine_pvalues({}, PValueMethod::fisher), EmptyInput);
  CHECK_THROWS_AS(
      combine_pvalues({0.5, 0.5}, PValueMethod::stouffer, std::vector<double>{1.0}),
      LengthMismatch);
}

TEST_CASE("all six combiners are uniform under the null") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int draws = 10000, m_count = 6;
  std::map<PValueMethod, std::vector<double>> combined;
  for (int d = 0; d < draws; ++d) {
    std::vector<double> p(m_count);
    for (double& v : p) v = unif(rng);
    for (PValueMethod method : all_pvalue_methods()) {
      combined[method].push_back(combine_pvalues(p, method));
    }
  }
  for (PValueMethod method : all_pvalue_methods()) {
    const double ks = stats::ks_distance_uniform(combined[method].data(),
                                                 combined[method].size());
    INFO("method ", pvalue_method_name(method), " KS ", ks);
    CHECK(ks < 0.05);
  }
}

TEST_CASE("combiners are monotone: lowering any p never raises the combination") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    const int m_count = 2 + static_cast<int>(rng() % 6);
    std::vector<double> p(static_cast<std::size_t>(m_count));
    for (double& v : p) v = 0.02 + 0.97 * unif(rng);
    const std::size_t j = rng() % p.size();
    std::vector<double> p_lower = p;
    p_lower[j] = p[j] * (0.1 + 0.8 * unif(rng));
    for (PValueMethod method : all_pvalue_methods()) {
      const double before = combine_pvalues(p, method);
      const double after = combine_pvalues(p_lower, method);
      INFO("method ", pvalue_method_name(method));
      CHECK(after <= before + 1e-12);
    }
  }
}

TEST_CASE("combiners are invariant under permutation") {
  std::vector<double> p = {0.03, 0.4, 0.77, 0.12, 0.9};
  std::vector<double> q = {0.9, 0.12, 0.03, 0.77, 0.4};
  for (PValueMethod method : all_pvalue_methods()) {
    CHECK(combine_pvalues(p, method) == doctest::Approx(combine_pvalues(q, method)).epsilon(1e-13));
  }
}
