#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "metagam/errors.hpp"

namespace metagam {

/// Column-major data table. Columns are either numeric or factor (string
/// labels). Immutable once built; all model code takes it by const reference.
class ColumnTable {
public:
  ColumnTable() = default;

  void add_numeric(const std::string& name, std::vector<double> values);
  void add_factor(const std::string& name, std::vector<std::string> values);

  bool has(const std::string& name) const { return columns_.count(name) > 0; }
  bool is_numeric(const std::string& name) const;

  const std::vector<double>& numeric(const std::string& name) const;
  const std::vector<std::string>& factor(const std::string& name) const;

  std::size_t nrows() const { return nrows_; }
  std::size_t ncols() const { return order_.size(); }
  const std::vector<std::string>& names() const { return order_; }

private:
  using Column = std::variant<std::vector<double>, std::vector<std::string>>;
  void check_length(const std::string& name, std::size_t n);

  std::map<std::string, Column> columns_;
  std::vector<std::string> order_;
  std::size_t nrows_ = 0;
};

/// Read a CSV file with a header row, UTF-8, '.' decimal separator.
/// Columns where every cell parses as a number become numeric; anything else
/// becomes a factor. Empty cells and NA/NaN markers are rejected with a
/// row-indexed CsvError.
ColumnTable read_csv(const std::string& path);
ColumnTable parse_csv(const std::string& text, const std::string& origin = "<string>");

/// Parse a grid specification of the form
///   "Age=20:90:0.1,PSQI=1,Sex=Female"
/// Range entries (from:to:step) become numeric ramps; single numbers become
/// constant numeric columns; anything else becomes a constant factor column.
/// All columns are expanded to the length of the (single) ramp, or length 1
/// if no ramp is present.
ColumnTable parse_grid_spec(const std::string& spec);

}  // namespace metagam
