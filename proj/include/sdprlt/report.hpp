#pragma once

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "symmat.hpp"

namespace sdprlt {

// One solver run, in the column layout of the result tables.
struct RunRecord {
  std::string problem;
  std::string solver = "sdprlt";
  std::string relax;
  int alm_iters = 0;
  int rgd_iters = 0;
  int pg_steps = 0;
  int rank = 0;
  double rmax = 0.0;
  double objective = 0.0;
  double time = 0.0;
  double pg_time = 0.0;
  std::string status = "converged";  // converged | time_limit | failed

  bool operator==(const RunRecord&) const = default;
};

inline const char* run_record_header() {
  return "problem,solver,relax,alm_iters,rgd_iters,pg_steps,rank,rmax,objective,time,pg_time,status";
}

namespace detail {

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') cur += '"', ++i;
      else if (c == '"') quoted = false;
      else cur += c;
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

inline double parse_double(const std::string& s, int lineno) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ParseError("line " + std::to_string(lineno) + ": bad number '" + s + "'");
}

inline int parse_int(const std::string& s, int lineno) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ParseError("line " + std::to_string(lineno) + ": bad integer '" + s + "'");
}

}  // namespace detail

inline void write_run_csv_row(const RunRecord& r, std::ostream& os) {
  using detail::fmt_double;
  os << detail::csv_quote(r.problem) << "," << detail::csv_quote(r.solver) << "," << detail::csv_quote(r.relax) << ","
     << r.alm_iters << "," << r.rgd_iters << "," << r.pg_steps << "," << r.rank << "," << fmt_double(r.rmax) << ","
     << fmt_double(r.objective) << "," << fmt_double(r.time) << "," << fmt_double(r.pg_time) << ","
     << detail::csv_quote(r.status) << "\n";
}

inline void write_run_csv(const std::vector<RunRecord>& rs, std::ostream& os) {
  os << run_record_header() << "\n";
  for (const auto& r : rs) write_run_csv_row(r, os);
}

inline std::vector<RunRecord> read_run_csv(std::istream& is) {
  std::vector<RunRecord> out;
  std::string line;
  int lineno = 0;
  if (!std::getline(is, line)) return out;
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != run_record_header()) throw ParseError("line 1: unexpected header");
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::csv_split(line);
    if (f.size() != 12) throw ParseError("line " + std::to_string(lineno) + ": expected 12 fields");
    RunRecord r;
    r.problem = f[0];
    r.solver = f[1];
    r.relax = f[2];
    r.alm_iters = detail::parse_int(f[3], lineno);
    r.rgd_iters = detail::parse_int(f[4], lineno);
    r.pg_steps = detail::parse_int(f[5], lineno);
    r.rank = detail::parse_int(f[6], lineno);
    r.rmax = detail::parse_double(f[7], lineno);
    r.objective = detail::parse_double(f[8], lineno);
    r.time = detail::parse_double(f[9], lineno);
    r.pg_time = detail::parse_double(f[10], lineno);
    r.status = f[11];
    out.push_back(std::move(r));
  }
  return out;
}

// ---- Dolan-More performance profiles ----
// T(p, s) is the time of solver s on problem p; failures are +inf.
// r(p, s) = T(p, s) / min_s' T(p, s'), f_s(tau) = #{p : r(p, s) <= tau} / #problems.

inline Mat perf_ratios(const Mat& T) {
  Mat r(T.rows(), T.cols());
  for (Eigen::Index p = 0; p < T.rows(); ++p) {
    const double best = T.row(p).minCoeff();
    for (Eigen::Index s = 0; s < T.cols(); ++s) {
      double v = std::numeric_limits<double>::infinity();
      if (std::isfinite(T(p, s))) v = best > 0 ? T(p, s) / best : (T(p, s) == 0 ? 1.0 : v);
      r(p, s) = v;
    }
  }
  return r;
}

inline Vec perf_profile(const Mat& ratios, double tau) {
  Vec f(ratios.cols());
  for (Eigen::Index s = 0; s < ratios.cols(); ++s)
    f(s) = static_cast<double>((ratios.col(s).array() <= tau).count()) / static_cast<double>(ratios.rows());
  return f;
}

struct TimeTable {
  std::vector<std::string> problems, solvers;
  Mat T;
};

// Pivots run records into a problem x solver time matrix; non-converged runs count as failures.
inline TimeTable time_table(const std::vector<RunRecord>& rs) {
  TimeTable t;
  std::map<std::string, int> pi, si;
  for (const auto& r : rs) {
    const std::string solver = r.solver + (r.relax.empty() ? "" : "/" + r.relax);
    if (!pi.count(r.problem)) pi[r.problem] = static_cast<int>(t.problems.size()), t.problems.push_back(r.problem);
    if (!si.count(solver)) si[solver] = static_cast<int>(t.solvers.size()), t.solvers.push_back(solver);
  }
  t.T = Mat::Constant(t.problems.size(), t.solvers.size(), std::numeric_limits<double>::infinity());
  for (const auto& r : rs) {
    const std::string solver = r.solver + (r.relax.empty() ? "" : "/" + r.relax);
    if (r.status == "converged") t.T(pi[r.problem], si[solver]) = r.time;
  }
  return t;
}

}  // namespace sdprlt
