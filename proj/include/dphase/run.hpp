#pragma once

// Command dispatch: solve-var, solve-visc, solve-obstacle, study <name>.
// Exit codes: 0 success, 1 solver non-convergence, 2 configuration or
// precondition error, 3 study verdict fail.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "dphase/config.hpp"
#include "dphase/errors.hpp"
#include "dphase/io.hpp"
#include "dphase/studies.hpp"
#include "dphase/variational.hpp"
#include "dphase/version.hpp"
#include "dphase/viscosity.hpp"

namespace dphase {

enum ExitCode : int { kExitOk = 0, kExitNonConvergence = 1, kExitConfig = 2, kExitVerdictFail = 3 };

inline const std::vector<std::string>& study_names() {
  static const std::vector<std::string> names = {"equivalence", "comparison",  "caccioppoli",
                                                 "regularization", "obstacle-approximation", "touch"};
  return names;
}

/// First CSV line: version, config hash and seed.
inline std::string provenance(const RunConfig& cfg) {
  return std::string("dphase ") + kVersion + " config_hash=" + hex64(fnv1a(cfg.source)) +
         " seed=" + std::to_string(cfg.seed);
}

inline std::string report_csv(const RunConfig& cfg, const SolveReport& r) {
  std::ostringstream os;
  os << "# " << provenance(cfg) << '\n';
  os << "converged,iterations,residual_norm,energy,active_set_size,outer_cycles,experimental\n";
  os << (r.converged ? 1 : 0) << ',' << r.iterations << ',' << format_double(r.residual_norm) << ','
     << format_double(r.energy) << ',' << r.active_set_size << ',' << r.outer_cycles << ','
     << (r.experimental ? 1 : 0) << '\n';
  return os.str();
}

namespace detail {

inline int exit_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::NonConvergence:
    case ErrorCode::LinearSolveFailure: return kExitNonConvergence;
    default: return kExitConfig;
  }
}

inline StudyTable run_study(const RunConfig& cfg, const ProblemSpec& spec) {
  StudyOptions opts;
  opts.newton = cfg.newton;
  opts.viscosity = cfg.viscosity;
  opts.seed = cfg.seed;
  const StudyConfig& sc = cfg.studies;
  StudyTable t;
  if (cfg.study == "equivalence") {
    t = equivalence_study(spec, sc.refinements, opts);
  } else if (cfg.study == "comparison") {
    t = comparison_study(spec, sc.trials, opts);
  } else if (cfg.study == "caccioppoli") {
    t = caccioppoli_study(spec, sc.cutoffs, opts);
  } else if (cfg.study == "regularization") {
    t = regularization_study(spec, sc.epsilons, opts);
  } else if (cfg.study == "obstacle-approximation") {
    if (!cfg.problem.target) {
      throw ConfigError(ErrorCode::ValidationError, {{0, "problem.target", "obstacle-approximation needs a target"}});
    }
    const Expression target = Expression::parse(*cfg.problem.target);
    t = obstacle_approximation_study(spec, [target](const Point& x) { return target(x); }, sc.levels, opts);
  } else if (cfg.study == "touch") {
    t = touch_study(spec, sc.touches, opts);
  } else {
    throw ConfigError(ErrorCode::ValidationError, {{0, "study.name", "unknown study '" + cfg.study + "'"}});
  }
  t.metadata["seed"] = std::to_string(cfg.seed);
  t.metadata["params"] = "p=" + format_double(spec.params.p) + " q=" + format_double(spec.params.q) +
                         " alpha=" + format_double(spec.params.alpha) + " a=" + cfg.problem.coefficient;
  return t;
}

}  // namespace detail

/// Runs one command; all diagnostics go to `err`.
inline int run(const RunConfig& cfg, std::ostream& err = std::cerr) {
  namespace fs = std::filesystem;
  const fs::path dir = cfg.output.directory;
  const std::string& prefix = cfg.output.prefix;
  try {
    const ProblemSpec spec = make_problem(cfg);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

    auto emit = [&](const std::string& tag, const Solution& sol) {
      write_field(sol.field, dir / (prefix + "_" + tag + ".field"));
      write_file_atomic(dir / (prefix + "_" + tag + "_report.csv"), report_csv(cfg, sol.report));
    };

    if (cfg.command == "solve-var") {
      if (spec.obstacle) err << "note: obstacle ignored by solve-var\n";
      ProblemSpec plain = spec;
      plain.obstacle.reset();
      emit("var", solve_dirichlet(plain, cfg.newton));
    } else if (cfg.command == "solve-visc") {
      ProblemSpec plain = spec;
      plain.obstacle.reset();
      const auto sol = solve_viscosity(plain, cfg.viscosity);
      if (sol.report.experimental) err << "warning: variable coefficient, viscosity result is experimental\n";
      emit("visc", sol);
    } else if (cfg.command == "solve-obstacle") {
      if (!spec.obstacle) {
        throw ConfigError(ErrorCode::ValidationError, {{0, "problem.obstacle", "solve-obstacle needs an obstacle"}});
      }
      emit("obstacle", solve_obstacle(spec, cfg.newton));
    } else if (cfg.command == "study") {
      const StudyTable t = detail::run_study(cfg, spec);
      write_file_atomic(dir / (prefix + "_" + t.name + ".csv"), study_to_csv(t, provenance(cfg)));
      err << "study " << t.name << ": " << (t.verdict ? "PASS" : "FAIL") << " (" << t.detail << ")\n";
      return t.verdict ? kExitOk : kExitVerdictFail;
    } else {
      throw ConfigError(ErrorCode::ValidationError, {{0, "command", "unknown command '" + cfg.command + "'"}});
    }
    return kExitOk;
  } catch (const SolveFailure& e) {
    err << "error: " << e.what() << " (after " << e.report().iterations << " iterations)\n";
    return detail::exit_for(e);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return detail::exit_for(e);
  }
}

/// Reads the config file, applies command-line overrides and runs.
inline int run_file(const std::string& command, const std::string& study, const std::string& config_path,
                    const std::optional<std::string>& out_dir, const std::optional<std::uint64_t>& seed,
                    std::ostream& err = std::cerr) {
  std::ifstream in(config_path, std::ios::binary);
  if (!in) {
    err << "error: cannot read config '" << config_path << "'\n";
    return kExitConfig;
  }
  std::ostringstream text;
  text << in.rdbuf();
  RunConfig cfg;
  try {
    cfg = parse_config(text.str());
  } catch (const ConfigError& e) {
    for (const auto& d : e.diagnostics()) err << config_path << ": " << d.str() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    err << config_path << ": " << e.what() << '\n';
    return kExitConfig;
  }
  cfg.command = command;
  if (!study.empty()) cfg.study = study;
  if (out_dir) cfg.output.directory = *out_dir;
  if (seed) cfg.seed = *seed;
  if (command == "study" && cfg.study.empty()) {
    err << "error: study name missing\n";
    return kExitConfig;
  }
  return run(cfg, err);
}

}  // namespace dphase
