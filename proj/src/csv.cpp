#include "casemix/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace casemix::csv {

namespace {

const std::vector<std::string>& core_columns() {
  static const std::vector<std::string> cols = {"id",         "age_years",      "los_days",
                                                "total_cost", "tbsa_pct",       "theatre_visits"};
  return cols;
}

bool needs_quotes(std::string_view s) {
  return s.find_first_of(",\"\r\n") != std::string_view::npos;
}

std::string opt_num(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::optional<double> cell_num(const std::string& cell, std::size_t line, const std::string& col) {
  if (cell.empty()) return std::nullopt;
  auto v = parse_double(cell);
  if (!v) throw ParseError(line, "column " + col + ": not a number: '" + cell + "'");
  return v;
}

}  // namespace

std::vector<Row> read_rows(std::istream& in) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  char c;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) throw ParseError(line, "unexpected quote inside field");
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        ++line;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw ParseError(line, "unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

void write_row(std::ostream& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    const auto& f = row[i];
    if (needs_quotes(f)) {
      out << '"';
      for (char c : f) {
        if (c == '"') out << '"';
        out << c;
      }
      out << '"';
    } else {
      out << f;
    }
  }
  out << '\n';
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string site_area_column(int site) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "site_%02d_area", site + 1);
  return buf;
}

std::string site_depth_column(int site) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "site_%02d_depth", site + 1);
  return buf;
}

Dataset read_cohort(std::istream& in) {
  auto rows = read_rows(in);
  if (rows.empty()) throw ParseError(1, "missing header row");
  const Row& header = rows.front();

  std::vector<std::string> expected = core_columns();
  for (int s = 0; s < kBurnSiteCount; ++s) expected.push_back(site_area_column(s));
  for (int s = 0; s < kBurnSiteCount; ++s) expected.push_back(site_depth_column(s));
  if (header.size() < expected.size()) throw ParseError(1, "header has too few columns");
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (header[i] != expected[i]) {
      throw ParseError(1, "expected column '" + expected[i] + "', found '" + header[i] + "'");
    }
  }
  const std::size_t n_fixed = expected.size();
  std::set<std::string> seen(header.begin(), header.end());
  if (seen.size() != header.size()) throw ParseError(1, "duplicate column names");

  Dataset ds;
  // Extras are numeric unless some non-empty cell fails to parse.
  for (std::size_t c = n_fixed; c < header.size(); ++c) {
    FeatureSpec spec{header[c], FeatureKind::numeric};
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (c < rows[r].size() && !rows[r][c].empty() && !parse_double(rows[r][c])) {
        spec.kind = FeatureKind::categorical;
        break;
      }
    }
    ds.extra_schema.push_back(std::move(spec));
  }

  ds.records.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const Row& row = rows[r];
    const std::size_t line = r + 1;
    if (row.size() != header.size()) {
      throw ParseError(line, "expected " + std::to_string(header.size()) + " fields, found " +
                                 std::to_string(row.size()));
    }
    PatientRecord rec;
    rec.id = row[0];
    rec.age_years = cell_num(row[1], line, header[1]);
    rec.los_days = cell_num(row[2], line, header[2]);
    rec.total_cost = cell_num(row[3], line, header[3]);
    rec.tbsa_pct = cell_num(row[4], line, header[4]);
    if (auto tv = cell_num(row[5], line, header[5])) {
      if (*tv != std::floor(*tv)) throw ParseError(line, "theatre_visits must be an integer");
      rec.theatre_visits = static_cast<int>(*tv);
    }
    rec.burn_sites = empty_burn_sites();
    for (int s = 0; s < kBurnSiteCount; ++s) {
      const std::size_t ac = core_columns().size() + s;
      const std::size_t dc = core_columns().size() + kBurnSiteCount + s;
      rec.burn_sites[s].area_pct = cell_num(row[ac], line, header[ac]);
      if (!row[dc].empty()) {
        auto d = parse_depth(row[dc]);
        if (!d) throw ParseError(line, "column " + header[dc] + ": unknown depth '" + row[dc] + "'");
        rec.burn_sites[s].depth = *d;
      }
    }
    for (std::size_t c = n_fixed; c < header.size(); ++c) {
      const auto& cell = row[c];
      if (cell.empty()) continue;
      const auto& spec = ds.extra_schema[c - n_fixed];
      if (spec.kind == FeatureKind::numeric) {
        rec.extra_features.emplace(spec.name, *parse_double(cell));
      } else {
        rec.extra_features.emplace(spec.name, cell);
      }
    }
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

void write_cohort(std::ostream& out, const Dataset& ds) {
  Row header = core_columns();
  for (int s = 0; s < kBurnSiteCount; ++s) header.push_back(site_area_column(s));
  for (int s = 0; s < kBurnSiteCount; ++s) header.push_back(site_depth_column(s));
  for (const auto& spec : ds.extra_schema) header.push_back(spec.name);
  write_row(out, header);

  Row row;
  for (const auto& rec : ds.records) {
    if (rec.burn_sites.size() != kBurnSiteCount) {
      throw std::invalid_argument("record " + rec.id + " does not have 27 burn sites");
    }
    row.clear();
    row.push_back(rec.id);
    row.push_back(opt_num(rec.age_years));
    row.push_back(opt_num(rec.los_days));
    row.push_back(opt_num(rec.total_cost));
    row.push_back(opt_num(rec.tbsa_pct));
    row.push_back(rec.theatre_visits ? std::to_string(*rec.theatre_visits) : std::string());
    for (const auto& s : rec.burn_sites) row.push_back(opt_num(s.area_pct));
    for (const auto& s : rec.burn_sites) {
      row.push_back(s.depth ? std::string(to_string(*s.depth)) : std::string());
    }
    for (const auto& spec : ds.extra_schema) {
      auto it = rec.extra_features.find(spec.name);
      if (it == rec.extra_features.end()) {
        row.emplace_back();
      } else if (const double* d = std::get_if<double>(&it->second)) {
        row.push_back(format_double(*d));
      } else {
        row.push_back(std::get<std::string>(it->second));
      }
    }
    write_row(out, row);
  }
}

Dataset read_cohort_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open " + path);
  return read_cohort(in);
}

void write_cohort_file(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write " + path);
  write_cohort(out, ds);
  if (!out) throw std::ios_base::failure("write failed for " + path);
}

}  // namespace casemix::csv
