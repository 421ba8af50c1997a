#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dphase/errors.hpp"
#include "dphase/mesh.hpp"
#include "dphase/operator_core.hpp"

namespace dphase {

/// Everything a solve needs: grid, constitutive law, Dirichlet data, the
/// constant source eps >= 0 and an optional obstacle psi.
struct ProblemSpec {
  GridPtr grid;
  DoublePhaseParams params;
  BoundaryData boundary;
  double epsilon = 0.0;
  std::optional<NodalField> obstacle;
  bool strict_validation = false;

  void validate() const {
    if (!grid) throw Error(ErrorCode::InvalidParams, "problem has no grid");
    params.validate();
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw Error(ErrorCode::InvalidParams, "epsilon must be >= 0");
    if (obstacle) require_same_grid(obstacle->grid(), *grid);
  }
};

struct SolveReport {
  bool converged = false;
  int iterations = 0;
  double residual_norm = 0.0;
  double energy = 0.0;
  std::vector<double> delta_schedule;
  std::vector<double> residual_history;
  // Smoothed energy before and after each accepted Newton step, with its delta stage.
  std::vector<double> step_energy_before;
  std::vector<double> step_energy_after;
  std::vector<int> step_stage;
  int active_set_size = 0;
  int outer_cycles = 0;
  bool experimental = false;
};

/// Solver failure carrying whatever progress was made.
class SolveFailure : public Error {
 public:
  SolveFailure(ErrorCode code, const std::string& message, SolveReport report)
      : Error(code, message), report_(std::move(report)) {}
  const SolveReport& report() const { return report_; }

 private:
  SolveReport report_;
};

}  // namespace dphase
