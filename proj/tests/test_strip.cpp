#include <doctest.h>

#include <cmath>
#include <random>

#include "metagam/strip.hpp"

using namespace metagam;
using nlohmann::json;

namespace {

ColumnTable make_data(std::size_t n, unsigned seed, bool with_groups = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss;
  std::vector<double> x(n), z(n), y(n);
  std::vector<std::string> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = unif(rng);
    z[i] = unif(rng) < 0.5 ? 0.0 : 1.0;
    y[i] = std::sin(5.0 * x[i]) + 0.5 * z[i] + 0.4 * gauss(rng);
    g[i] = "subj" + std::to_string(i % 25);
  }
  ColumnTable t;
  t.add_numeric("x", x);
  t.add_numeric("z", z);
  t.add_numeric("y", y);
  if (with_groups) t.add_factor("g", g);
  return t;
}

ModelFormula make_formula(bool with_groups = false) {
  ModelFormula f;
  f.response = "y";
  FormulaSmooth s;
  s.covariate = "x";
  s.id = "s(x)";
  s.basis_dim = 9;
  f.smooth_terms.push_back(s);
  f.linear_terms.push_back("z");
  if (with_groups) f.random_intercept = "g";
  return f;
}

void collect_array_lengths(const json& doc, std::vector<std::size_t>& out) {
  if (doc.is_array()) out.push_back(doc.size());
  if (doc.is_array() || doc.is_object()) {
    for (const auto& child : doc) collect_array_lengths(child, out);
  }
}

}  // namespace

TEST_CASE("stripping is lossless for prediction, including extrapolation") {
  FittedGam m = fit_gam(make_data(800, 1), make_formula());
  StrippedModel sm = strip_rawdata(m, "siteA");
  CHECK(sm.cohort_label == "siteA");
  CHECK(sm.format_version == 1);

  ColumnTable grid;
  grid.add_numeric("x", {-0.2, 0.05, 0.31, 0.77, 0.995, 1.4});
  for (bool intercept : {false, true}) {
    TermPrediction a = predict_term(m, "s(x)", grid, intercept);
    TermPrediction b = predict_term(sm.model, "s(x)", grid, intercept);
    CHECK((a.fit - b.fit).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.se - b.se).cwiseAbs().maxCoeff() < 1e-12);
  }

  // knots, deciles, and ranges preserved exactly
  CHECK(sm.model.term("s(x)").spec.knots.interior == m.term("s(x)").spec.knots.interior);
  CHECK(sm.model.covariate_stats.at("x").deciles == m.covariate_stats.at("x").deciles);
  CHECK(sm.model.covariate_stats.at("x").min == m.covariate_stats.at("x").min);
  CHECK(sm.model.covariate_stats.at("x").max == m.covariate_stats.at("x").max);
}

TEST_CASE("serialized stripped models carry no length-n arrays") {
  FittedGam m = fit_gam(make_data(800, 2), make_formula());
  StrippedModel sm = strip_rawdata(m, "siteB");
  json doc = stripped_to_json(sm);
  std::vector<std::size_t> lengths;
  collect_array_lengths(doc, lengths);
  for (std::size_t len : lengths) CHECK(len != 800);
  CHECK_NOTHROW(privacy_audit(doc, 800, std::nullopt));
}

TEST_CASE("random-intercept block is removed by stripping") {
  FittedGam m = fit_gam(make_data(400, 3, true), make_formula(true));
  REQUIRE(m.random_intercept.has_value());
  REQUIRE(m.n_subjects == 25);
  const int full_coefs = m.n_coef();
  StrippedModel sm = strip_rawdata(m, "siteC");
  CHECK(sm.model.n_coef() == full_coefs - 25);
  CHECK(sm.model.covariance.rows() == sm.model.n_coef());
  REQUIRE(sm.model.random_intercept.has_value());
  CHECK(sm.model.random_intercept->levels.empty());
  CHECK(sm.model.random_intercept->lambda == m.random_intercept->lambda);

  // population-level predictions agree exactly
  ColumnTable grid;
  grid.add_numeric("x", {0.1, 0.5, 0.9});
  TermPrediction a = predict_term(m, "s(x)", grid, true);
  TermPrediction b = predict_term(sm.model, "s(x)", grid, true);
  CHECK((a.fit - b.fit).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.se - b.se).cwiseAbs().maxCoeff() < 1e-12);

  // the audit also guards the subject count
  json doc = stripped_to_json(sm);
  CHECK_NOTHROW(privacy_audit(doc, sm.model.n, sm.model.n_subjects));
}

TEST_CASE("canonical serialization is byte-idempotent and structurally faithful") {
  FittedGam m = fit_gam(make_data(300, 4), make_formula());
  StrippedModel sm = strip_rawdata(m, "siteD");
  const std::string s1 = serialize(sm);
  StrippedModel back = deserialize(s1);
  const std::string s2 = serialize(back);
  CHECK(s1 == s2);
  CHECK(back.cohort_label == "siteD");
  CHECK(back.model.n == sm.model.n);
  CHECK(back.model.coefficients == sm.model.coefficients);
  CHECK(back.model.covariance == sm.model.covariance);
  CHECK(back.model.term("s(x)").transform == sm.model.term("s(x)").transform);
}

TEST_CASE("schema violations carry JSON-pointer paths") {
  FittedGam m = fit_gam(make_data(120, 5), make_formula());
  StrippedModel sm = strip_rawdata(m, "siteE");
  json doc = stripped_to_json(sm);

  json no_cov = doc;
  no_cov.erase("covariance");
  try {
    deserialize(no_cov.dump());
    FAIL("expected SchemaViolation");
  } catch (const SchemaViolation& e) {
    CHECK(e.pointer == "/covariance");
  }

  json bad_version = doc;
  bad_version["format_version"] = 99;
  CHECK_THROWS_AS(deserialize(bad_version.dump()), VersionMismatch);

  json ragged = doc;
  ragged["covariance"][0].erase(0);
  CHECK_THROWS_AS(deserialize(ragged.dump()), SchemaViolation);

  json bad_scale = doc;
  bad_scale["scale"] = -1.0;
  CHECK_THROWS_AS(deserialize(bad_scale.dump()), SchemaViolation);

  CHECK_THROWS_AS(deserialize("not json at all"), SchemaViolation);
}

TEST_CASE("prediction equivalence holds across random models and grids") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (unsigned rep = 0; rep < 10; ++rep) {
    FittedGam m = fit_gam(make_data(150 + 30 * rep, 100 + rep), make_formula());
    StrippedModel sm = deserialize(serialize(strip_rawdata(m, "site" + std::to_string(rep))));
    std::vector<double> gx(17);
    for (double& v : gx) v = -0.1 + 1.2 * unif(rng);
    ColumnTable grid;
    grid.add_numeric("x", gx);
    TermPrediction a = predict_term(m, "s(x)", grid, rep % 2 == 0);
    TermPrediction b = predict_term(sm.model, "s(x)", grid, rep % 2 == 0);
    CHECK((a.fit - b.fit).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.se - b.se).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("local fit files round-trip exactly") {
  FittedGam m = fit_gam(make_data(200, 6, true), make_formula(true));
  FittedGam back = deserialize_local(serialize_local(m));
  CHECK(back.coefficients == m.coefficients);
  CHECK(back.covariance == m.covariance);
  CHECK(back.scale == m.scale);
  CHECK(back.random_intercept->levels == m.random_intercept->levels);
  CHECK(back.rss == m.rss);

  // a stripped reader must reject the local artifact
  CHECK_THROWS_AS(deserialize(serialize_local(m)), SchemaViolation);
}
