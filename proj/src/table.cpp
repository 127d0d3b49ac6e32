#include "metagam/table.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace metagam {

void ColumnTable::check_length(const std::string& name, std::size_t n) {
  if (!order_.empty() && n != nrows_) {
    throw LengthMismatch("column '" + name + "' has " + std::to_string(n) +
                         " rows, table has " + std::to_string(nrows_));
  }
  if (columns_.count(name) > 0) {
    throw InvalidSpec("duplicate column '" + name + "'");
  }
  nrows_ = n;
}

void ColumnTable::add_numeric(const std::string& name, std::vector<double> values) {
  check_length(name, values.size());
  columns_.emplace(name, std::move(values));
  order_.push_back(name);
}

void ColumnTable::add_factor(const std::string& name, std::vector<std::string> values) {
  check_length(name, values.size());
  columns_.emplace(name, std::move(values));
  order_.push_back(name);
}

bool ColumnTable::is_numeric(const std::string& name) const {
  auto it = columns_.find(name);
  if (it == columns_.end()) throw UnknownColumn("no column named '" + name + "'");
  return std::holds_alternative<std::vector<double>>(it->second);
}

const std::vector<double>& ColumnTable::numeric(const std::string& name) const {
  auto it = columns_.find(name);
  if (it == columns_.end()) throw UnknownColumn("no column named '" + name + "'");
  if (!std::holds_alternative<std::vector<double>>(it->second)) {
    throw InvalidSpec("column '" + name + "' is not numeric");
  }
  return std::get<std::vector<double>>(it->second);
}

const std::vector<std::string>& ColumnTable::factor(const std::string& name) const {
  auto it = columns_.find(name);
  if (it == columns_.end()) throw UnknownColumn("no column named '" + name + "'");
  if (!std::holds_alternative<std::vector<std::string>>(it->second)) {
    throw InvalidSpec("column '" + name + "' is not a factor");
  }
  return std::get<std::vector<std::string>>(it->second);
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, delim)) out.push_back(trim(cur));
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

bool parse_number(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool is_missing_marker(const std::string& s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "NULL";
}

}  // namespace

ColumnTable parse_csv(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw CsvError(origin + ": empty file", 0);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split(line, ',');
  if (header.empty()) throw CsvError(origin + ": empty header", 1);

  std::vector<std::vector<std::string>> cells(header.size());
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> row = split(line, ',');
    if (row.size() != header.size()) {
      throw CsvError(origin + ": line " + std::to_string(lineno) + " has " +
                         std::to_string(row.size()) + " fields, expected " +
                         std::to_string(header.size()),
                     lineno);
    }
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (is_missing_marker(row[c])) {
        throw CsvError(origin + ": missing value in column '" + header[c] +
                           "' at line " + std::to_string(lineno),
                       lineno, static_cast<long>(c));
      }
      cells[c].push_back(std::move(row[c]));
    }
  }

  ColumnTable table;
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::vector<double> nums(cells[c].size());
    bool numeric = true;
    for (std::size_t r = 0; r < cells[c].size(); ++r) {
      if (!parse_number(cells[c][r], nums[r])) {
        numeric = false;
        break;
      }
    }
    if (numeric) {
      table.add_numeric(header[c], std::move(nums));
    } else {
      table.add_factor(header[c], std::move(cells[c]));
    }
  }
  return table;
}

ColumnTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError("cannot open '" + path + "'", 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), path);
}

ColumnTable parse_grid_spec(const std::string& spec) {
  struct Entry {
    std::string name;
    bool ramp = false;
    double from = 0, to = 0, step = 0;
    std::string value;  // non-ramp raw value
  };
  std::vector<Entry> entries;
  for (const std::string& part : split(spec, ',')) {
    if (part.empty()) continue;
    auto eq = part.find('=');
    if (eq == std::string::npos) {
      throw InvalidSpec("grid entry '" + part + "' is not of the form var=value");
    }
    Entry e;
    e.name = trim(part.substr(0, eq));
    std::string rhs = trim(part.substr(eq + 1));
    std::vector<std::string> pieces = split(rhs, ':');
    if (pieces.size() == 3) {
      if (!parse_number(pieces[0], e.from) || !parse_number(pieces[1], e.to) ||
          !parse_number(pieces[2], e.step) || e.step <= 0) {
        throw InvalidSpec("bad grid range '" + rhs + "' (want from:to:step, step > 0)");
      }
      if (e.to < e.from) throw InvalidSpec("grid range '" + rhs + "' has to < from");
      e.ramp = true;
    } else if (pieces.size() == 1) {
      e.value = rhs;
    } else {
      throw InvalidSpec("bad grid entry '" + part + "'");
    }
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw InvalidSpec("empty grid specification");

  std::size_t n = 1;
  for (const Entry& e : entries) {
    if (!e.ramp) continue;
    // half-open rounding guard so 20:90:0.1 lands exactly on 701 points
    std::size_t len = static_cast<std::size_t>(std::floor((e.to - e.from) / e.step + 1e-9)) + 1;
    if (n != 1 && len != n) {
      throw InvalidSpec("grid has ramps of different lengths");
    }
    n = len;
  }

  ColumnTable grid;
  for (const Entry& e : entries) {
    if (e.ramp) {
      std::vector<double> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = e.from + static_cast<double>(i) * e.step;
      grid.add_numeric(e.name, std::move(v));
    } else {
      double num;
      if (parse_number(e.value, num)) {
        grid.add_numeric(e.name, std::vector<double>(n, num));
      } else {
        grid.add_factor(e.name, std::vector<std::string>(n, e.value));
      }
    }
  }
  return grid;
}

}  // namespace metagam
