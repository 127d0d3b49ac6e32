#include "metagam/formula.hpp"

#include <cctype>
#include <set>
#include <sstream>

namespace metagam {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// split on '+' at depth zero (so "s(x, k=5)" stays intact)
std::vector<std::string> split_terms(const std::string& rhs) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : rhs) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == '+' && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_' || s[0] == '.')) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
  }
  return true;
}

FormulaSmooth parse_smooth(const std::string& term) {
  // term looks like s(var[, k=N][, by=other])
  auto open = term.find('(');
  auto close = term.rfind(')');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw InvalidSpec("malformed smooth term '" + term + "'");
  }
  std::string inner = term.substr(open + 1, close - open - 1);
  std::vector<std::string> args;
  {
    std::string cur;
    std::istringstream ss(inner);
    while (std::getline(ss, cur, ',')) args.push_back(trim(cur));
  }
  if (args.empty() || args[0].empty()) throw InvalidSpec("smooth term '" + term + "' has no covariate");

  FormulaSmooth s;
  s.covariate = args[0];
  if (!valid_name(s.covariate)) throw InvalidSpec("bad covariate name '" + s.covariate + "'");
  for (std::size_t i = 1; i < args.size(); ++i) {
    auto eq = args[i].find('=');
    if (eq == std::string::npos) throw InvalidSpec("bad smooth argument '" + args[i] + "'");
    std::string key = trim(args[i].substr(0, eq));
    std::string val = trim(args[i].substr(eq + 1));
    if (key == "k") {
      try {
        s.basis_dim = std::stoi(val);
      } catch (const std::exception&) {
        throw InvalidSpec("bad basis dimension '" + val + "' in '" + term + "'");
      }
      if (s.basis_dim < 4) throw InvalidSpec("k must be at least 4 in '" + term + "'");
    } else if (key == "by") {
      if (!valid_name(val)) throw InvalidSpec("bad by-variable name '" + val + "'");
      s.by = val;
    } else {
      throw InvalidSpec("unknown smooth argument '" + key + "' in '" + term + "'");
    }
  }
  s.id = "s(" + s.covariate + ")";
  if (s.by) s.id += ":" + *s.by;
  return s;
}

}  // namespace

void ModelFormula::validate() const {
  if (!valid_name(response)) throw InvalidSpec("bad response name '" + response + "'");
  std::set<std::string> ids;
  for (const FormulaSmooth& s : smooth_terms) {
    if (!ids.insert(s.id).second) throw InvalidSpec("duplicate term id '" + s.id + "'");
    if (s.covariate == response) throw InvalidSpec("response used as a smooth covariate");
    if (s.by && *s.by == response) throw InvalidSpec("response used as a by-variable");
    if (s.basis_dim < 4) throw InvalidSpec("basis_dim must be at least 4");
  }
  for (const std::string& lin : linear_terms) {
    if (!ids.insert(lin).second) throw InvalidSpec("duplicate term '" + lin + "'");
    if (lin == response) throw InvalidSpec("response used as a linear term");
  }
  if (random_intercept && *random_intercept == response) {
    throw InvalidSpec("response used as a grouping column");
  }
}

ModelFormula parse_formula(const std::string& text) {
  auto tilde = text.find('~');
  if (tilde == std::string::npos) throw InvalidSpec("formula needs '~': '" + text + "'");
  ModelFormula f;
  f.response = trim(text.substr(0, tilde));
  for (const std::string& term : split_terms(text.substr(tilde + 1))) {
    if (term.empty()) throw InvalidSpec("empty term in formula '" + text + "'");
    if (term == "1") continue;  // intercept is always present
    if (term.rfind("s(", 0) == 0) {
      f.smooth_terms.push_back(parse_smooth(term));
    } else if (term.front() == '(') {
      // random intercept (1|group)
      std::string inner = trim(term.substr(1, term.size() - 2));
      auto bar = inner.find('|');
      if (bar == std::string::npos || trim(inner.substr(0, bar)) != "1") {
        throw InvalidSpec("only random intercepts of the form (1|group) are supported: '" +
                          term + "'");
      }
      std::string group = trim(inner.substr(bar + 1));
      if (!valid_name(group)) throw InvalidSpec("bad grouping column '" + group + "'");
      if (f.random_intercept) throw InvalidSpec("multiple random intercepts");
      f.random_intercept = group;
    } else {
      if (!valid_name(term)) throw InvalidSpec("bad linear term '" + term + "'");
      f.linear_terms.push_back(term);
    }
  }
  f.validate();
  return f;
}

std::string format_formula(const ModelFormula& f) {
  std::ostringstream out;
  out << f.response << " ~ ";
  bool first = true;
  auto sep = [&] {
    if (!first) out << " + ";
    first = false;
  };
  for (const FormulaSmooth& s : f.smooth_terms) {
    sep();
    out << "s(" << s.covariate;
    if (s.by) out << ", by=" << *s.by;
    out << ", k=" << s.basis_dim << ")";
  }
  for (const std::string& lin : f.linear_terms) {
    sep();
    out << lin;
  }
  if (f.random_intercept) {
    sep();
    out << "(1|" << *f.random_intercept << ")";
  }
  return out.str();
}

}  // namespace metagam
