#pragma once

#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "levyfv/csv.hpp"

namespace levyfv {

struct CheckReport {
  std::string check;
  std::string fixture;
  std::string params;
  double lhs = 0.0;
  double rhs = 0.0;
  double se_lhs = 0.0;
  double se_rhs = 0.0;
  double distance = 0.0;
  double budget = 0.0;
  bool pass = false;
  std::uint64_t n = 0;
  std::string note;
};

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string params_hash(const std::string& params) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(params)));
  return buf;
}

inline void write_reports_csv(const std::vector<CheckReport>& reps, std::ostream& os) {
  CsvWriter w(os);
  w.header({"check", "params", "lhs", "rhs", "se_lhs", "se_rhs", "budget", "pass"});
  for (const auto& r : reps) w.row(r.check, r.params, r.lhs, r.rhs, r.se_lhs, r.se_rhs, r.budget, r.pass);
}

inline std::string summary_line(const CheckReport& r) {
  return r.check + " " + r.fixture + " N=" + std::to_string(r.n) + " distance=" + fmt(r.distance) +
         " budget=" + fmt(r.budget) + (r.pass ? " PASS" : " FAIL") + (r.note.empty() ? "" : " (" + r.note + ")");
}

}  // namespace levyfv
