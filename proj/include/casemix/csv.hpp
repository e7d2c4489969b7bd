#pragma once
// CSV reading/writing. The cohort layout is one row per patient:
//   id, age_years, los_days, total_cost, tbsa_pct, theatre_visits,
//   site_01_area..site_27_area, site_01_depth..site_27_depth, <extras...>
// An empty cell means missing. Numbers are written in shortest
// round-trip form, so write -> read -> write is byte-identical.

#include "casemix/core.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace casemix::csv {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

using Row = std::vector<std::string>;

/// RFC 4180 style: quoted fields may contain commas, quotes ("") and newlines.
std::vector<Row> read_rows(std::istream& in);
void write_row(std::ostream& out, const Row& row);

std::string format_double(double v);
std::optional<double> parse_double(std::string_view s);

std::string site_area_column(int site);   // 0-based site -> "site_01_area"
std::string site_depth_column(int site);  // 0-based site -> "site_01_depth"

Dataset read_cohort(std::istream& in);
void write_cohort(std::ostream& out, const Dataset& ds);

Dataset read_cohort_file(const std::string& path);
void write_cohort_file(const std::string& path, const Dataset& ds);

}  // namespace casemix::csv
