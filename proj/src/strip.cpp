#include "metagam/strip.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace metagam {

using nlohmann::json;

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json knots_to_json(const KnotSequence& ks) {
  json j;
  j["low"] = ks.low;
  j["high"] = ks.high;
  j["interior"] = ks.interior;
  switch (ks.rule) {
    case KnotRule::quantile: j["rule"] = "quantile"; break;
    case KnotRule::uniform: j["rule"] = "uniform"; break;
    case KnotRule::explicit_rule: j["rule"] = "explicit"; break;
  }
  return j;
}

json smooth_to_json(const TermFit& t) {
  json j;
  j["id"] = t.spec.id;
  j["covariate"] = t.spec.covariate;
  j["basis_dim"] = t.spec.basis_dim;
  if (t.spec.by) j["by"] = *t.spec.by;
  json c;
  switch (t.spec.constraint.kind) {
    case ConstraintKind::sum_to_zero: c["kind"] = "sum_to_zero"; break;
    case ConstraintKind::point:
      c["kind"] = "point";
      c["x0"] = t.spec.constraint.x0;
      break;
    case ConstraintKind::none: c["kind"] = "none"; break;
  }
  j["constraint"] = c;
  j["knots"] = knots_to_json(t.spec.knots);
  j["transform"] = matrix_to_json(t.transform);
  j["col_start"] = t.col_start;
  j["col_count"] = t.col_count;
  j["lambda"] = t.lambda;
  j["edf"] = t.edf;
  j["pvalue"] = t.pvalue;
  return j;
}

json model_to_json(const FittedGam& m, bool local) {
  json j;
  j["artifact"] = local ? "metagam-fit" : "metagam-stripped";
  j["response"] = m.response;
  j["n"] = m.n;
  if (m.n_subjects) j["n_subjects"] = *m.n_subjects;
  j["coefficients"] = vector_to_json(m.coefficients);
  j["covariance"] = matrix_to_json(m.covariance);
  j["scale"] = m.scale;
  j["edf_total"] = m.edf_total;
  if (local) {
    j["rss"] = m.rss;
    j["r2_adj"] = m.r2_adj;
  }
  json smooths = json::array();
  for (const TermFit& t : m.smooths) smooths.push_back(smooth_to_json(t));
  j["smooth_terms"] = std::move(smooths);
  json linears = json::array();
  for (const LinearTermFit& lt : m.linears) {
    json l;
    l["column"] = lt.column;
    l["levels"] = lt.levels;
    l["col_start"] = lt.col_start;
    l["col_count"] = lt.col_count;
    linears.push_back(std::move(l));
  }
  j["linear_terms"] = std::move(linears);
  if (m.random_intercept) {
    const RandomInterceptFit& r = *m.random_intercept;
    json ri;
    ri["column"] = r.column;
    ri["lambda"] = r.lambda;
    ri["edf"] = r.edf;
    if (local) {
      ri["levels"] = r.levels;
      ri["col_start"] = r.col_start;
      ri["col_count"] = r.col_count;
    }
    j["random_intercept"] = std::move(ri);
  }
  json stats = json::object();
  for (const auto& [name, cs] : m.covariate_stats) {
    json s;
    s["min"] = cs.min;
    s["max"] = cs.max;
    s["deciles"] = std::vector<double>(cs.deciles.begin(), cs.deciles.end());
    stats[name] = std::move(s);
  }
  j["covariate_stats"] = std::move(stats);
  return j;
}

// ---- validation -----------------------------------------------------------

[[noreturn]] void bad(const std::string& what, const std::string& pointer) {
  throw SchemaViolation(what, pointer);
}

const json& need(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) bad("expected object", path.empty() ? "/" : path);
  auto it = j.find(key);
  if (it == j.end()) bad("missing required field", path + "/" + key);
  return *it;
}

double need_number(const json& j, const char* key, const std::string& path) {
  const json& v = need(j, key, path);
  if (!v.is_number()) bad("expected number", path + "/" + key);
  return v.get<double>();
}

long need_integer(const json& j, const char* key, const std::string& path) {
  const json& v = need(j, key, path);
  if (!v.is_number_integer()) bad("expected integer", path + "/" + key);
  return v.get<long>();
}

std::string need_string(const json& j, const char* key, const std::string& path) {
  const json& v = need(j, key, path);
  if (!v.is_string()) bad("expected string", path + "/" + key);
  return v.get<std::string>();
}

std::vector<double> number_array(const json& v, const std::string& path) {
  if (!v.is_array()) bad("expected array of numbers", path);
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) bad("expected number", path + "/" + std::to_string(i));
    out.push_back(v[i].get<double>());
  }
  return out;
}

Eigen::VectorXd need_vector(const json& j, const char* key, const std::string& path) {
  std::vector<double> v = number_array(need(j, key, path), path + "/" + key);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd need_matrix(const json& j, const char* key, const std::string& path) {
  const json& v = need(j, key, path);
  const std::string p = path + "/" + key;
  if (!v.is_array()) bad("expected matrix (array of arrays)", p);
  const std::size_t rows = v.size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), rows ? 0 : 0);
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<double> row = number_array(v[i], p + "/" + std::to_string(i));
    if (i == 0) out.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(row.size()));
    if (static_cast<Eigen::Index>(row.size()) != out.cols()) bad("ragged matrix", p);
    for (std::size_t c = 0; c < row.size(); ++c) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c];
    }
  }
  return out;
}

KnotSequence knots_from_json(const json& j, const std::string& path) {
  KnotSequence ks;
  ks.low = need_number(j, "low", path);
  ks.high = need_number(j, "high", path);
  std::vector<double> interior = number_array(need(j, "interior", path), path + "/interior");
  ks.interior = std::move(interior);
  const std::string rule = need_string(j, "rule", path);
  if (rule == "quantile") ks.rule = KnotRule::quantile;
  else if (rule == "uniform") ks.rule = KnotRule::uniform;
  else if (rule == "explicit") ks.rule = KnotRule::explicit_rule;
  else bad("unknown knot rule '" + rule + "'", path + "/rule");
  return ks;
}

TermFit smooth_from_json(const json& j, const std::string& path) {
  TermFit t;
  t.spec.id = need_string(j, "id", path);
  t.spec.covariate = need_string(j, "covariate", path);
  t.spec.basis_dim = static_cast<int>(need_integer(j, "basis_dim", path));
  if (j.contains("by")) {
    if (!j["by"].is_string()) bad("expected string", path + "/by");
    t.spec.by = j["by"].get<std::string>();
  }
  const json& c = need(j, "constraint", path);
  const std::string kind = need_string(c, "kind", path + "/constraint");
  if (kind == "sum_to_zero") t.spec.constraint = Constraint::sum_to_zero();
  else if (kind == "point") t.spec.constraint = Constraint::point(need_number(c, "x0", path + "/constraint"));
  else if (kind == "none") t.spec.constraint = Constraint::none();
  else bad("unknown constraint kind '" + kind + "'", path + "/constraint/kind");
  t.spec.knots = knots_from_json(need(j, "knots", path), path + "/knots");
  t.transform = need_matrix(j, "transform", path);
  t.col_start = static_cast<int>(need_integer(j, "col_start", path));
  t.col_count = static_cast<int>(need_integer(j, "col_count", path));
  t.lambda = need_number(j, "lambda", path);
  t.edf = need_number(j, "edf", path);
  t.pvalue = need_number(j, "pvalue", path);
  t.spec.validate();
  if (t.transform.rows() != t.spec.basis_dim || t.transform.cols() != t.col_count) {
    bad("transform dimensions do not match basis_dim/col_count", path + "/transform");
  }
  return t;
}

FittedGam model_from_json(const json& j, bool local) {
  const std::string path;
  const std::string artifact = need_string(j, "artifact", path);
  const char* expected = local ? "metagam-fit" : "metagam-stripped";
  if (artifact != expected) {
    bad("artifact is '" + artifact + "', expected '" + expected + "'", "/artifact");
  }
  FittedGam m;
  m.response = need_string(j, "response", path);
  m.n = need_integer(j, "n", path);
  if (m.n < 0) bad("n must be nonnegative", "/n");
  if (j.contains("n_subjects")) {
    if (!j["n_subjects"].is_number_integer()) bad("expected integer", "/n_subjects");
    m.n_subjects = j["n_subjects"].get<long>();
  }
  m.coefficients = need_vector(j, "coefficients", path);
  m.covariance = need_matrix(j, "covariance", path);
  if (m.covariance.rows() != m.covariance.cols() ||
      m.covariance.rows() != m.coefficients.size()) {
    bad("covariance dimension does not match coefficient count", "/covariance");
  }
  m.scale = need_number(j, "scale", path);
  if (!(m.scale > 0.0)) bad("scale must be positive", "/scale");
  m.edf_total = need_number(j, "edf_total", path);
  if (local) {
    m.rss = need_number(j, "rss", path);
    m.r2_adj = need_number(j, "r2_adj", path);
  }

  const json& smooths = need(j, "smooth_terms", path);
  if (!smooths.is_array()) bad("expected array", "/smooth_terms");
  for (std::size_t i = 0; i < smooths.size(); ++i) {
    m.smooths.push_back(smooth_from_json(smooths[i], "/smooth_terms/" + std::to_string(i)));
  }
  const json& linears = need(j, "linear_terms", path);
  if (!linears.is_array()) bad("expected array", "/linear_terms");
  for (std::size_t i = 0; i < linears.size(); ++i) {
    const std::string p = "/linear_terms/" + std::to_string(i);
    LinearTermFit lt;
    lt.column = need_string(linears[i], "column", p);
    const json& lv = need(linears[i], "levels", p);
    if (!lv.is_array()) bad("expected array", p + "/levels");
    for (const auto& s : lv) {
      if (!s.is_string()) bad("expected string", p + "/levels");
      lt.levels.push_back(s.get<std::string>());
    }
    lt.col_start = static_cast<int>(need_integer(linears[i], "col_start", p));
    lt.col_count = static_cast<int>(need_integer(linears[i], "col_count", p));
    m.linears.push_back(std::move(lt));
  }
  if (j.contains("random_intercept")) {
    const json& ri = j["random_intercept"];
    const std::string p = "/random_intercept";
    RandomInterceptFit r;
    r.column = need_string(ri, "column", p);
    r.lambda = need_number(ri, "lambda", p);
    r.edf = need_number(ri, "edf", p);
    if (local) {
      const json& lv = need(ri, "levels", p);
      if (!lv.is_array()) bad("expected array", p + "/levels");
      for (const auto& s : lv) r.levels.push_back(s.get<std::string>());
      r.col_start = static_cast<int>(need_integer(ri, "col_start", p));
      r.col_count = static_cast<int>(need_integer(ri, "col_count", p));
    }
    m.random_intercept = std::move(r);
  }
  const json& stats = need(j, "covariate_stats", path);
  if (!stats.is_object()) bad("expected object", "/covariate_stats");
  for (auto it = stats.begin(); it != stats.end(); ++it) {
    const std::string p = "/covariate_stats/" + it.key();
    CovariateStats cs;
    cs.min = need_number(*it, "min", p);
    cs.max = need_number(*it, "max", p);
    std::vector<double> dec = number_array(need(*it, "deciles", p), p + "/deciles");
    if (dec.size() != 9) bad("deciles must have 9 entries", p + "/deciles");
    std::copy(dec.begin(), dec.end(), cs.deciles.begin());
    m.covariate_stats.emplace(it.key(), cs);
  }
  return m;
}

void check_all_finite(const json& j, const std::string& path) {
  if (j.is_number_float()) {
    if (!std::isfinite(j.get<double>())) bad("non-finite number cannot be serialized", path);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) {
      check_all_finite(j[i], path + "/" + std::to_string(i));
    }
  } else if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) check_all_finite(*it, path + "/" + it.key());
  }
}

std::string dump_canonical(const json& j) {
  check_all_finite(j, "");
  return j.dump();
}

json parse_or_throw(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) bad("document is not valid JSON", "");
  return j;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
  if (!out) throw Error("failed writing '" + path + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void privacy_audit(const json& doc, long n, std::optional<long> n_subjects) {
  if (doc.is_array()) {
    const long len = static_cast<long>(doc.size());
    if (len == n) {
      throw PrivacyAuditFailure("array of length n=" + std::to_string(n) +
                                " found in stripped model");
    }
    if (n_subjects && len == *n_subjects) {
      throw PrivacyAuditFailure("array of length n_subjects=" + std::to_string(*n_subjects) +
                                " found in stripped model");
    }
  }
  if (doc.is_array() || doc.is_object()) {
    for (const auto& child : doc) privacy_audit(child, n, n_subjects);
  }
}

StrippedModel strip_rawdata(const FittedGam& fit, std::string cohort_label) {
  StrippedModel sm;
  sm.model = fit;
  sm.cohort_label = std::move(cohort_label);
  if (fit.random_intercept) {
    // drop the per-subject coefficient block; population-level predictions
    // never use it
    const int keep = fit.random_intercept->col_start;
    sm.model.coefficients = fit.coefficients.head(keep).eval();
    sm.model.covariance = fit.covariance.topLeftCorner(keep, keep).eval();
    sm.model.random_intercept->levels.clear();
    sm.model.random_intercept->col_start = 0;
    sm.model.random_intercept->col_count = 0;
  }
  sm.model.rss = 0.0;
  sm.model.r2_adj = 0.0;
  privacy_audit(stripped_to_json(sm), sm.model.n, sm.model.n_subjects);
  return sm;
}

json stripped_to_json(const StrippedModel& sm) {
  json j = model_to_json(sm.model, /*local=*/false);
  j["format_version"] = sm.format_version;
  j["cohort_label"] = sm.cohort_label;
  return j;
}

std::string serialize(const StrippedModel& sm) { return dump_canonical(stripped_to_json(sm)); }

StrippedModel deserialize(const std::string& text) {
  json j = parse_or_throw(text);
  if (!j.is_object()) bad("expected top-level object", "");
  const long version = need_integer(j, "format_version", "");
  if (version != kStrippedFormatVersion) {
    throw VersionMismatch("unsupported format_version " + std::to_string(version) +
                          " (this build reads version " +
                          std::to_string(kStrippedFormatVersion) + ")");
  }
  StrippedModel sm;
  sm.format_version = static_cast<int>(version);
  sm.cohort_label = need_string(j, "cohort_label", "");
  sm.model = model_from_json(j, /*local=*/false);
  return sm;
}

void save_stripped(const StrippedModel& sm, const std::string& path) {
  write_file(path, serialize(sm));
}

StrippedModel load_stripped(const std::string& path) { return deserialize(read_file(path)); }

std::string serialize_local(const FittedGam& fit) {
  json j = model_to_json(fit, /*local=*/true);
  j["format_version"] = kStrippedFormatVersion;
  return dump_canonical(j);
}

FittedGam deserialize_local(const std::string& text) {
  json j = parse_or_throw(text);
  if (!j.is_object()) bad("expected top-level object", "");
  const long version = need_integer(j, "format_version", "");
  if (version != kStrippedFormatVersion) {
    throw VersionMismatch("unsupported format_version " + std::to_string(version));
  }
  return model_from_json(j, /*local=*/true);
}

void save_local(const FittedGam& fit, const std::string& path) {
  write_file(path, serialize_local(fit));
}

FittedGam load_local(const std::string& path) { return deserialize_local(read_file(path)); }

}  // namespace metagam
