#pragma once
// Shared fixtures for the unit tests.

#include "casemix/core.hpp"
#include "casemix/features.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace casemix::testing {

/// 27 sites; the whole TBSA sits on site 0 with partial depth.
inline PatientRecord make_record(std::string id, double tbsa, double los, double cost, int theatre = 0,
                                 double age = 5.0) {
  PatientRecord r;
  r.id = std::move(id);
  r.age_years = age;
  r.los_days = los;
  r.total_cost = cost;
  r.tbsa_pct = tbsa;
  r.theatre_visits = theatre;
  r.burn_sites = empty_burn_sites();
  for (auto& s : r.burn_sites) {
    s.area_pct = 0.0;
    s.depth = BurnDepth::none;
  }
  if (tbsa > 0) {
    r.burn_sites[0].area_pct = tbsa;
    r.burn_sites[0].depth = BurnDepth::partial;
  }
  return r;
}

inline FeatureTable numeric_table(const Eigen::MatrixXd& values, std::vector<std::string> names = {}) {
  FeatureTable t;
  t.values = values;
  for (Eigen::Index c = 0; c < values.cols(); ++c) {
    t.schema.push_back({c < static_cast<Eigen::Index>(names.size()) ? names[c] : "x" + std::to_string(c + 1),
                        FeatureKind::numeric, {}});
  }
  return t;
}

inline std::filesystem::path temp_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() /
           ("casemix_test_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

struct CliRun {
  int code = -1;
  std::string output;  // stdout and stderr
};

inline CliRun run_cli(const std::string& args) {
  CliRun r;
  const std::string cmd = std::string("\"") + CASEMIX_CLI + "\" " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, got);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace casemix::testing
