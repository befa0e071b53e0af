#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace jmrp::csv {

// Dialect: UTF-8, comma separated, header row required, '.' decimal, no quoting.

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name, or nullopt.
  std::optional<std::size_t> find(std::string_view name) const;
  /// Column index by name; throws SchemaError naming the column when absent.
  std::size_t require(std::string_view name) const;
};

/// Throws IoError when the file cannot be opened, SchemaError on ragged rows.
Table read(const std::string& path);
Table parse(std::istream& in, const std::string& source_name);

std::vector<std::string> split_line(std::string_view line);

/// Shortest round-trip representation ("NA" for NaN).
std::string format(double value);
std::string format(std::size_t value);

double parse_double(std::string_view text, std::string_view context);
long long parse_int(std::string_view text, std::string_view context);

/// Opens for writing; throws IoError on failure.
void write_file(const std::string& path, const std::string& contents);

std::string join(const std::vector<std::string>& fields);

}  // namespace jmrp::csv
