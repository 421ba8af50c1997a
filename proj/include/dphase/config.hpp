#pragma once

// Run configuration: flat "key = value" lines grouped under [section]
// headers, '#' or ';' comments. Top-level keys (before any section) are
// `command` and `seed`.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dphase/errors.hpp"
#include "dphase/expression.hpp"
#include "dphase/io.hpp"
#include "dphase/mesh.hpp"
#include "dphase/operator_core.hpp"
#include "dphase/problem.hpp"
#include "dphase/variational.hpp"
#include "dphase/viscosity.hpp"

namespace dphase {

struct Diagnostic {
  int line = 0;  // 0 when the problem is not tied to one line
  std::string key;
  std::string reason;

  std::string str() const {
    std::string s = line > 0 ? "line " + std::to_string(line) : "config";
    if (!key.empty()) s += ", key '" + key + "'";
    return s + ": " + reason;
  }
};

class ConfigError : public Error {
 public:
  ConfigError(ErrorCode code, std::vector<Diagnostic> diags) : Error(code, join(diags)), diags_(std::move(diags)) {}
  const std::vector<Diagnostic>& diagnostics() const { return diags_; }

 private:
  static std::string join(const std::vector<Diagnostic>& d) {
    std::string s;
    for (size_t i = 0; i < d.size(); ++i) s += (i ? "; " : "") + d[i].str();
    return s;
  }
  std::vector<Diagnostic> diags_;
};

struct ProblemConfig {
  int dimension = 1;
  std::vector<double> extents{1.0};
  std::vector<double> origin{0.0};
  std::vector<int> nodes{33};
  double p = 2.0, q = 2.0, alpha = 1.0;
  std::string coefficient = "0";
  double epsilon = 0.0;
  std::string boundary = "0";
  std::optional<std::string> obstacle;
  std::optional<std::string> target;
  bool strict_validation = false;
};

struct StudyConfig {
  int refinements = 3;
  int trials = 100;
  int cutoffs = 50;
  int levels = 4;
  int touches = 100;
  std::vector<double> epsilons{1e-1, 1e-2, 1e-3, 1e-4};
  bool allow_variable_coefficient = false;
};

struct OutputConfig {
  std::string directory = "out";
  std::string prefix = "dphase";
};

struct RunConfig {
  std::string command;  // may be empty; the CLI supplies it
  std::string study;
  ProblemConfig problem;
  NewtonOptions newton;
  ViscosityOptions viscosity;
  StudyConfig studies;
  OutputConfig output;
  std::uint64_t seed = 0;
  std::string source;  // verbatim text, hashed into every CSV
  std::map<std::string, int> key_lines;
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Entry {
  int line;
  std::string value;
};

class ConfigReader {
 public:
  ConfigReader(std::map<std::string, Entry> entries, std::vector<Diagnostic>& diags)
      : entries_(std::move(entries)), diags_(diags) {}

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  int line(const std::string& key) const { return has(key) ? entries_.at(key).line : 0; }

  template <class T>
  void get(const std::string& key, T& out) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return;
    used_.push_back(key);
    convert(it->second, key, out);
  }

  void unknown_keys() const {
    for (const auto& [key, e] : entries_) {
      if (std::find(used_.begin(), used_.end(), key) == used_.end()) diags_.push_back({e.line, key, "unknown key"});
    }
  }

 private:
  void bad(const Entry& e, const std::string& key, const std::string& what) {
    diags_.push_back({e.line, key, "expected " + what + ", got '" + e.value + "'"});
  }
  void convert(const Entry& e, const std::string& key, std::string& out) { out = e.value; }
  void convert(const Entry& e, const std::string& key, std::optional<std::string>& out) { out = e.value; }
  void convert(const Entry& e, const std::string& key, double& out) {
    std::istringstream is(e.value);
    double v;
    if (!(is >> v) || !(is >> std::ws).eof()) return bad(e, key, "a number");
    out = v;
  }
  void convert(const Entry& e, const std::string& key, long& out) {
    std::istringstream is(e.value);
    long v;
    if (!(is >> v) || !(is >> std::ws).eof()) return bad(e, key, "an integer");
    out = v;
  }
  void convert(const Entry& e, const std::string& key, int& out) {
    long v = out;
    convert(e, key, v);
    out = static_cast<int>(v);
  }
  void convert(const Entry& e, const std::string& key, std::uint64_t& out) {
    std::istringstream is(e.value);
    unsigned long long v;
    if (e.value.find('-') != std::string::npos || !(is >> v) || !(is >> std::ws).eof()) {
      return bad(e, key, "a non-negative integer");
    }
    out = v;
  }
  void convert(const Entry& e, const std::string& key, bool& out) {
    if (e.value == "true" || e.value == "1" || e.value == "yes") {
      out = true;
    } else if (e.value == "false" || e.value == "0" || e.value == "no") {
      out = false;
    } else {
      bad(e, key, "true or false");
    }
  }
  template <class T>
  void convert(const Entry& e, const std::string& key, std::vector<T>& out) {
    std::vector<T> vals;
    std::string cell;
    std::istringstream ss(e.value);
    const size_t before = diags_.size();
    while (std::getline(ss, cell, ',')) {
      T v{};
      convert(Entry{e.line, trim(cell)}, key, v);
      vals.push_back(v);
    }
    if (diags_.size() == before) out = std::move(vals);
  }

  std::map<std::string, Entry> entries_;
  std::vector<Diagnostic>& diags_;
  std::vector<std::string> used_;
};

}  // namespace detail

/// Domain-level checks that need the grid and the expressions.
inline void validate_config(const RunConfig& cfg);

inline RunConfig parse_config(const std::string& text) {
  static const std::vector<std::string> sections = {"", "problem", "tolerances", "output", "study"};
  std::map<std::string, detail::Entry> entries;  // "section.key"
  std::vector<Diagnostic> diags;
  std::string section;
  std::istringstream is(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    std::string line = detail::trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        diags.push_back({lineno, "", "unterminated section header"});
        continue;
      }
      section = detail::trim(line.substr(1, line.size() - 2));
      if (std::find(sections.begin(), sections.end(), section) == sections.end()) {
        diags.push_back({lineno, section, "unknown section"});
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      diags.push_back({lineno, "", "expected 'key = value'"});
      continue;
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    if (key.empty()) diags.push_back({lineno, "", "empty key"});
    if (entries.count(full)) diags.push_back({lineno, full, "duplicate key (first on line " +
                                                                std::to_string(entries[full].line) + ")"});
    entries[full] = {lineno, value};
  }

  RunConfig cfg;
  cfg.source = text;
  for (const auto& [key, e] : entries) cfg.key_lines[key] = e.line;
  detail::ConfigReader r(entries, diags);
  r.get("command", cfg.command);
  r.get("seed", cfg.seed);

  ProblemConfig& pc = cfg.problem;
  r.get("problem.dimension", pc.dimension);
  if (pc.dimension == 2) {
    pc.extents = {1.0, 1.0};
    pc.origin = {0.0, 0.0};
    pc.nodes = {17, 17};
  }
  r.get("problem.extents", pc.extents);
  r.get("problem.origin", pc.origin);
  r.get("problem.nodes", pc.nodes);
  r.get("problem.p", pc.p);
  r.get("problem.q", pc.q);
  r.get("problem.alpha", pc.alpha);
  r.get("problem.coefficient", pc.coefficient);
  r.get("problem.epsilon", pc.epsilon);
  r.get("problem.boundary", pc.boundary);
  r.get("problem.obstacle", pc.obstacle);
  r.get("problem.target", pc.target);
  r.get("problem.strict_validation", pc.strict_validation);

  r.get("tolerances.residual_tol", cfg.newton.residual_tol);
  r.get("tolerances.max_iterations", cfg.newton.max_iterations_per_stage);
  r.get("tolerances.max_active_set_cycles", cfg.newton.max_active_set_cycles);
  r.get("tolerances.delta_schedule", cfg.newton.delta_schedule);
  r.get("tolerances.viscosity_tol", cfg.viscosity.tolerance);
  r.get("tolerances.max_sweeps", cfg.viscosity.max_sweeps);

  r.get("output.directory", cfg.output.directory);
  r.get("output.prefix", cfg.output.prefix);

  r.get("study.name", cfg.study);
  r.get("study.refinements", cfg.studies.refinements);
  r.get("study.trials", cfg.studies.trials);
  r.get("study.cutoffs", cfg.studies.cutoffs);
  r.get("study.levels", cfg.studies.levels);
  r.get("study.touches", cfg.studies.touches);
  r.get("study.epsilons", cfg.studies.epsilons);
  r.get("study.allow_variable_coefficient", cfg.studies.allow_variable_coefficient);
  cfg.viscosity.allow_variable_coefficient = cfg.studies.allow_variable_coefficient;
  r.unknown_keys();

  if (!diags.empty()) throw ConfigError(ErrorCode::ParseError, std::move(diags));
  validate_config(cfg);
  return cfg;
}

/// Grid described by the problem block.
inline GridPtr make_grid(const ProblemConfig& pc) {
  if (pc.dimension == 1) return Grid::line(pc.nodes[0], pc.extents[0], pc.origin[0]);
  return Grid::rectangle(pc.nodes[0], pc.nodes[1], pc.extents[0], pc.extents[1], pc.origin[0], pc.origin[1]);
}

inline CoefficientField make_coefficient(const std::string& text) {
  const Expression e = Expression::parse(text);
  if (e.is_constant()) return CoefficientField::constant(e(Point{}));
  return CoefficientField::analytic([e](const Point& x) { return e(x); },
                                    [e](const Point& x, int dim) { return e.gradient(x, dim); });
}

inline ProblemSpec make_problem(const RunConfig& cfg) {
  const ProblemConfig& pc = cfg.problem;
  GridPtr grid = make_grid(pc);
  DoublePhaseParams params(pc.p, pc.q, pc.alpha, make_coefficient(pc.coefficient));
  const Expression g = Expression::parse(pc.boundary);
  ProblemSpec spec{grid, params, BoundaryData::from_function([g](const Point& x) { return g(x); }), pc.epsilon,
                   std::nullopt, pc.strict_validation};
  if (pc.obstacle) {
    const Expression psi = Expression::parse(*pc.obstacle);
    spec.obstacle = interpolate(grid, [psi](const Point& x) { return psi(x); });
  }
  return spec;
}

inline void validate_config(const RunConfig& cfg) {
  std::vector<Diagnostic> diags;
  const ProblemConfig& pc = cfg.problem;
  auto at = [&](const std::string& key, const std::string& reason) {
    const auto it = cfg.key_lines.find(key);
    diags.push_back({it == cfg.key_lines.end() ? 0 : it->second, key, reason});
  };
  bool grid_ok = true;
  if (pc.dimension != 1 && pc.dimension != 2) {
    at("problem.dimension", "dimension must be 1 or 2");
    grid_ok = false;
  } else {
    const size_t n = static_cast<size_t>(pc.dimension);
    if (pc.extents.size() != n) at("problem.extents", "need one extent per axis"), grid_ok = false;
    if (pc.origin.size() != n) at("problem.origin", "need one origin coordinate per axis"), grid_ok = false;
    if (pc.nodes.size() != n) at("problem.nodes", "need one node count per axis"), grid_ok = false;
    for (double e : pc.extents) {
      if (!(e > 0.0)) at("problem.extents", "extents must be strictly positive"), grid_ok = false;
    }
    for (int k : pc.nodes) {
      if (k < 3) at("problem.nodes", "need at least 3 nodes per axis"), grid_ok = false;
    }
  }
  if (!(pc.p > 1.0)) at("problem.p", "invariant 1 < p <= q violated: p must exceed 1");
  if (!(pc.p <= pc.q)) {
    at("problem.q", "invariant 1 < p <= q violated: p = " + format_double(pc.p) + " > q = " + format_double(pc.q));
  }
  if (!std::isfinite(pc.q)) at("problem.q", "q must be finite");
  if (!(pc.alpha > 0.0 && pc.alpha <= 1.0)) at("problem.alpha", "alpha must lie in (0, 1]");
  if (!(pc.epsilon >= 0.0) || !std::isfinite(pc.epsilon)) at("problem.epsilon", "epsilon must be >= 0");
  if (!(cfg.newton.residual_tol > 0.0)) at("tolerances.residual_tol", "must be positive");
  if (cfg.newton.max_iterations_per_stage < 1) at("tolerances.max_iterations", "must be at least 1");
  if (cfg.newton.max_active_set_cycles < 1) at("tolerances.max_active_set_cycles", "must be at least 1");
  if (cfg.newton.delta_schedule.empty()) at("tolerances.delta_schedule", "must not be empty");
  for (double d : cfg.newton.delta_schedule) {
    if (!(d >= 0.0)) at("tolerances.delta_schedule", "entries must be >= 0");
  }
  if (!(cfg.viscosity.tolerance > 0.0)) at("tolerances.viscosity_tol", "must be positive");
  if (cfg.viscosity.max_sweeps < 1) at("tolerances.max_sweeps", "must be at least 1");
  if (cfg.output.prefix.empty() || cfg.output.prefix.find('/') != std::string::npos) {
    at("output.prefix", "must be a non-empty file name without '/'");
  }
  const StudyConfig& sc = cfg.studies;
  if (sc.refinements < 2) at("study.refinements", "need at least 2 levels");
  if (sc.trials < 1) at("study.trials", "must be at least 1");
  if (sc.cutoffs < 1) at("study.cutoffs", "must be at least 1");
  if (sc.levels < 1) at("study.levels", "must be at least 1");
  if (sc.touches < 1) at("study.touches", "must be at least 1");
  for (double e : sc.epsilons) {
    if (!(e >= 0.0)) at("study.epsilons", "entries must be >= 0");
  }
  for (size_t i = 1; i < sc.epsilons.size(); ++i) {
    if (!(sc.epsilons[i] < sc.epsilons[i - 1])) at("study.epsilons", "list must be strictly decreasing");
  }

  if (grid_ok) {
    try {
      const GridPtr grid = make_grid(pc);
      auto check_expr = [&](const std::string& key, const std::string& text, bool boundary_only,
                            bool nonnegative) -> void {
        Expression e;
        try {
          e = Expression::parse(text);
        } catch (const Error& err) {
          at(key, err.what());
          return;
        }
        std::vector<Point> pts;
        if (boundary_only) {
          for (int k : grid->boundary_nodes()) pts.push_back(grid->node(k));
        } else {
          for (int k = 0; k < grid->node_count(); ++k) pts.push_back(grid->node(k));
          for (const auto& el : grid->elements()) pts.push_back(el.barycenter);
        }
        for (const Point& x : pts) {
          double v;
          try {
            v = e(x);
          } catch (const Error& err) {
            at(key, err.what());
            return;
          }
          if (nonnegative && v < 0.0) {
            at(key, "a(x) >= 0 violated: a(" + format_double(x.x) + ", " + format_double(x.y) +
                        ") = " + format_double(v));
            return;
          }
        }
      };
      check_expr("problem.coefficient", pc.coefficient, false, true);
      check_expr("problem.boundary", pc.boundary, true, false);
      if (pc.obstacle) check_expr("problem.obstacle", *pc.obstacle, false, false);
      if (pc.target) check_expr("problem.target", *pc.target, false, false);
    } catch (const Error& err) {
      at("problem", err.what());
    }
  }
  if (diags.empty() && pc.strict_validation) {
    DoublePhaseParams params(pc.p, pc.q, pc.alpha, CoefficientField::constant(0.0));
    const auto v = validate_exponents(params, pc.dimension, ExponentMode::Standard);
    if (!v.ok) at("problem.strict_validation", v.explanation);
  }
  if (!diags.empty()) throw ConfigError(ErrorCode::ValidationError, std::move(diags));
}

}  // namespace dphase
