#pragma once

// Distributional side: minimizes
//
//   E(u) = int (1/p)|Du|^p + (a(x)/q)|Du|^q - eps u dx
//
// over P1 fields with Dirichlet data, optionally subject to u >= psi.
// Damped Newton with Armijo backtracking on E, warm-started through a fixed
// delta-continuation of the flux; obstacles via a primal active-set loop.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "dphase/errors.hpp"
#include "dphase/mesh.hpp"
#include "dphase/operator_core.hpp"
#include "dphase/problem.hpp"

namespace dphase {

struct NewtonOptions {
  std::vector<double> delta_schedule{1e-2, 1e-4, 1e-6, 1e-8};
  double residual_tol = 1e-9;
  int max_iterations_per_stage = 200;
  int max_active_set_cycles = 50;
  double armijo_c = 1e-4;
  int max_backtracks = 60;
};

namespace detail {

inline std::vector<double> element_coefficients(const Grid& grid, const DoublePhaseParams& params) {
  std::vector<double> a(grid.elements().size());
  for (size_t e = 0; e < a.size(); ++e) a[e] = params.coeff.value(grid.elements()[e].barycenter);
  return a;
}

inline double energy_impl(const Grid& grid, const DoublePhaseParams& params, const std::vector<double>& coeff,
                          double epsilon, std::span<const double> u) {
  double sum = 0.0;
  for (size_t e = 0; e < grid.elements().size(); ++e) {
    const Element& el = grid.elements()[e];
    GradVec g = GradVec::zero(grid.dim());
    double mean = 0.0;
    for (int k = 0; k < el.count; ++k) {
      g += u[el.nodes[k]] * el.basis_grad[k];
      mean += u[el.nodes[k]];
    }
    sum += el.measure * (energy_density(params, coeff[e], g.norm()) - epsilon * mean / el.count);
  }
  return sum;
}

// Full-length residual vector; boundary entries are left at 0.
inline std::vector<double> residual_impl(const Grid& grid, const DoublePhaseParams& params,
                                         const std::vector<double>& coeff, double epsilon,
                                         std::span<const double> u) {
  std::vector<double> r(grid.node_count(), 0.0);
  for (size_t e = 0; e < grid.elements().size(); ++e) {
    const Element& el = grid.elements()[e];
    GradVec g = GradVec::zero(grid.dim());
    for (int k = 0; k < el.count; ++k) g += u[el.nodes[k]] * el.basis_grad[k];
    const GradVec flux = a_flux(params, coeff[e], g);
    const double load = epsilon * el.measure / el.count;
    for (int k = 0; k < el.count; ++k) r[el.nodes[k]] += el.measure * flux.dot(el.basis_grad[k]) - load;
  }
  for (int k : grid.boundary_nodes()) r[k] = 0.0;
  return r;
}

/// Newton iterations on the free nodes for one regularization level.
class NewtonStage {
 public:
  NewtonStage(const Grid& grid, const DoublePhaseParams& params, const std::vector<double>& coeff, double epsilon,
              const std::vector<char>& is_free, const NewtonOptions& opts, int stage = 0)
      : grid_(grid), params_(params), coeff_(coeff), eps_(epsilon), opts_(opts), stage_(stage),
        dof_(grid.node_count(), -1) {
    for (int k = 0; k < grid.node_count(); ++k) {
      if (is_free[k]) {
        dof_[k] = static_cast<int>(free_nodes_.size());
        free_nodes_.push_back(k);
      }
    }
  }

  // Returns true on convergence; u is updated in place.
  bool run(std::vector<double>& u, SolveReport& report) {
    const int n = static_cast<int>(free_nodes_.size());
    if (n == 0) {
      report.residual_norm = 0.0;
      return true;
    }
    Eigen::VectorXd rhs(n), step(n);
    std::vector<double> trial(u.size());
    for (int it = 0; it <= opts_.max_iterations_per_stage; ++it) {
      const auto r = residual_impl(grid_, params_, coeff_, eps_, u);
      double rn = 0.0;
      for (int i = 0; i < n; ++i) {
        rhs[i] = -r[free_nodes_[i]];
        rn = std::max(rn, std::abs(rhs[i]));
      }
      report.residual_history.push_back(rn);
      report.residual_norm = rn;
      if (!std::isfinite(rn)) return false;
      if (rn <= opts_.residual_tol) return true;
      if (it == opts_.max_iterations_per_stage) return false;

      assemble_jacobian(u);
      if (!analyzed_) {
        solver_.analyzePattern(jac_);
        analyzed_ = true;
      }
      solver_.factorize(jac_);
      if (solver_.info() != Eigen::Success) {
        throw SolveFailure(ErrorCode::LinearSolveFailure, "Newton system factorization failed", report);
      }
      step = solver_.solve(rhs);
      if (solver_.info() != Eigen::Success || !step.allFinite()) {
        throw SolveFailure(ErrorCode::LinearSolveFailure, "Newton system solve failed", report);
      }

      const double e0 = energy_impl(grid_, params_, coeff_, eps_, u);
      const double slope = -rhs.dot(step);  // directional derivative of E along step
      // Below this the energy difference is rounding noise and only the residual is informative.
      const double noise = 1e-13 * (1.0 + std::abs(e0));
      double t = 1.0;
      bool accepted = false;
      for (int b = 0; b <= opts_.max_backtracks; ++b) {
        trial = u;
        for (int i = 0; i < n; ++i) trial[free_nodes_[i]] += t * step[i];
        const double e1 = energy_impl(grid_, params_, coeff_, eps_, trial);
        if (std::isfinite(e1) && e1 <= e0 + opts_.armijo_c * t * slope + noise) {
          accepted = true;
          report.step_energy_before.push_back(e0);
          report.step_energy_after.push_back(e1);
          report.step_stage.push_back(stage_);
          break;
        }
        t *= 0.5;
      }
      if (!accepted) return false;
      u.swap(trial);
      ++report.iterations;
    }
    return false;
  }

 private:
  void assemble_jacobian(std::span<const double> u) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(grid_.elements().size() * 9);
    for (size_t e = 0; e < grid_.elements().size(); ++e) {
      const Element& el = grid_.elements()[e];
      GradVec g = GradVec::zero(grid_.dim());
      for (int k = 0; k < el.count; ++k) g += u[el.nodes[k]] * el.basis_grad[k];
      const SymMat j = a_flux_jacobian(params_, coeff_[e], g);
      for (int k = 0; k < el.count; ++k) {
        const int rk = dof_[el.nodes[k]];
        if (rk < 0) continue;
        const GradVec jg = j.apply(el.basis_grad[k]);
        for (int l = 0; l < el.count; ++l) {
          const int cl = dof_[el.nodes[l]];
          if (cl < 0) continue;
          trip.emplace_back(rk, cl, el.measure * jg.dot(el.basis_grad[l]));
        }
      }
    }
    const int n = static_cast<int>(free_nodes_.size());
    jac_.resize(n, n);
    jac_.setFromTriplets(trip.begin(), trip.end());
  }

  const Grid& grid_;
  const DoublePhaseParams& params_;
  const std::vector<double>& coeff_;
  double eps_;
  const NewtonOptions& opts_;
  int stage_;
  std::vector<int> dof_;
  std::vector<int> free_nodes_;
  Eigen::SparseMatrix<double> jac_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
  bool analyzed_ = false;
};

inline void check_strict(const ProblemSpec& spec) {
  if (!spec.strict_validation) return;
  const auto v = validate_exponents(spec.params, spec.grid->dim(), ExponentMode::Standard);
  if (!v.ok) throw Error(ErrorCode::ExponentBoundViolated, v.explanation);
}

// Runs the whole delta schedule on the free set; throws on failure.
inline void continuation(const ProblemSpec& spec, const std::vector<double>& coeff, const std::vector<char>& is_free,
                         const NewtonOptions& opts, std::vector<double>& u, SolveReport& report) {
  for (size_t s = 0; s < opts.delta_schedule.size(); ++s) {
    const double delta = opts.delta_schedule[s];
    const DoublePhaseParams stage_params = spec.params.with_delta(delta);
    NewtonStage stage(*spec.grid, stage_params, coeff, spec.epsilon, is_free, opts, static_cast<int>(s));
    if (!stage.run(u, report)) {
      report.converged = false;
      throw SolveFailure(ErrorCode::NonConvergence,
                         "Newton did not converge at delta = " + std::to_string(delta) +
                             " (residual " + std::to_string(report.residual_norm) + ")",
                         report);
    }
  }
}

}  // namespace detail

/// Energy with the unregularized density (delta = 0).
inline double energy(const NodalField& field, const ProblemSpec& spec) {
  require_same_grid(field.grid(), *spec.grid);
  const DoublePhaseParams p0 = spec.params.with_delta(0.0);
  return detail::energy_impl(*spec.grid, p0, detail::element_coefficients(*spec.grid, p0), spec.epsilon,
                             field.values());
}

/// Energy with the delta-smoothed density at the given delta.
inline double smoothed_energy(const NodalField& field, const ProblemSpec& spec, double delta) {
  require_same_grid(field.grid(), *spec.grid);
  const DoublePhaseParams pd = spec.params.with_delta(delta);
  return detail::energy_impl(*spec.grid, pd, detail::element_coefficients(*spec.grid, pd), spec.epsilon,
                             field.values());
}

/// Weak-form residual sum_e <A(Du), D phi_i>|e| - eps int phi_i over interior
/// nodes, ordered as grid.interior_nodes(); uses spec.params.delta.
inline std::vector<double> residual(const NodalField& field, const ProblemSpec& spec) {
  require_same_grid(field.grid(), *spec.grid);
  const auto full = detail::residual_impl(*spec.grid, spec.params, detail::element_coefficients(*spec.grid, spec.params),
                                          spec.epsilon, field.values());
  std::vector<double> out;
  out.reserve(spec.grid->interior_nodes().size());
  for (int k : spec.grid->interior_nodes()) out.push_back(full[k]);
  return out;
}

inline std::vector<double> nodal_residual(const NodalField& field, const ProblemSpec& spec) {
  require_same_grid(field.grid(), *spec.grid);
  return detail::residual_impl(*spec.grid, spec.params, detail::element_coefficients(*spec.grid, spec.params),
                               spec.epsilon, field.values());
}

struct Solution {
  NodalField field;
  SolveReport report;
};

inline Solution solve_dirichlet(const ProblemSpec& spec, const NewtonOptions& opts = {},
                                const std::optional<NodalField>& initial_guess = std::nullopt) {
  spec.validate();
  if (spec.obstacle) throw Error(ErrorCode::PreconditionViolated, "solve_dirichlet called with an obstacle");
  detail::check_strict(spec);
  const Grid& grid = *spec.grid;
  const auto bvals = spec.boundary.nodal_values(grid);
  std::vector<double> u;
  if (initial_guess) {
    require_same_grid(initial_guess->grid(), grid);
    u.assign(initial_guess->values().begin(), initial_guess->values().end());
    for (int k : grid.boundary_nodes()) u[k] = bvals[k];
  } else {
    u = boundary_extension(grid, bvals);
  }

  SolveReport report;
  report.delta_schedule = opts.delta_schedule;
  std::vector<char> is_free(grid.node_count(), 0);
  for (int k : grid.interior_nodes()) is_free[k] = 1;
  const auto coeff = detail::element_coefficients(grid, spec.params);
  detail::continuation(spec, coeff, is_free, opts, u, report);

  report.converged = true;
  NodalField field(spec.grid, std::move(u));
  report.energy = energy(field, spec);
  return {std::move(field), std::move(report)};
}

/// Scale-aware contact tolerance 1e-7 (1 + max|psi|).
inline double contact_tolerance(const NodalField& psi) { return 1e-7 * (1.0 + psi.max_abs()); }

inline Solution solve_obstacle(const ProblemSpec& spec, const NewtonOptions& opts = {}) {
  spec.validate();
  if (!spec.obstacle) throw Error(ErrorCode::PreconditionViolated, "solve_obstacle needs an obstacle");
  detail::check_strict(spec);
  const Grid& grid = *spec.grid;
  const NodalField& psi = *spec.obstacle;
  const auto bvals = spec.boundary.nodal_values(grid);
  const double tol_c = contact_tolerance(psi);
  for (int k : grid.boundary_nodes()) {
    if (psi[k] > bvals[k] + tol_c) {
      throw Error(ErrorCode::InfeasibleObstacle, "obstacle exceeds the boundary datum at node " + std::to_string(k));
    }
  }

  std::vector<double> u = boundary_extension(grid, bvals);
  std::vector<char> active(grid.node_count(), 0);
  for (int k : grid.interior_nodes()) active[k] = u[k] <= psi[k];

  SolveReport report;
  report.delta_schedule = opts.delta_schedule;
  const auto coeff = detail::element_coefficients(grid, spec.params);
  const DoublePhaseParams final_params = spec.params.with_delta(opts.delta_schedule.back());
  bool settled = false;
  for (int cycle = 0; cycle < opts.max_active_set_cycles && !settled; ++cycle) {
    report.outer_cycles = cycle + 1;
    std::vector<char> is_free(grid.node_count(), 0);
    for (int k : grid.interior_nodes()) {
      if (active[k]) {
        u[k] = psi[k];
      } else {
        is_free[k] = 1;
      }
    }
    detail::continuation(spec, coeff, is_free, opts, u, report);

    // Enter on violation of u >= psi; leave when the multiplier (the residual
    // at a contact node) turns negative.
    const auto r = detail::residual_impl(grid, final_params, coeff, spec.epsilon, u);
    settled = true;
    for (int k : grid.interior_nodes()) {
      if (!active[k] && u[k] < psi[k]) {
        active[k] = 1;
        settled = false;
      } else if (active[k] && r[k] < -opts.residual_tol) {
        active[k] = 0;
        settled = false;
      }
    }
  }
  if (!settled) {
    report.converged = false;
    throw SolveFailure(ErrorCode::NonConvergence, "active set did not settle", report);
  }

  report.converged = true;
  report.active_set_size = static_cast<int>(std::count(active.begin(), active.end(), 1));
  NodalField field(spec.grid, std::move(u));
  ProblemSpec plain = spec;
  plain.obstacle.reset();
  report.energy = energy(field, plain);
  return {std::move(field), std::move(report)};
}

struct ApproximationLevel {
  NodalField obstacle;
  NodalField solution;
  SolveReport report;
};

/// Inf-convolution lower envelope min_k ( target_k + |x - x_k|^2 / (2 lambda) ).
/// Never exceeds the target and increases as lambda decreases.
inline NodalField inf_convolution(const NodalField& target, double lambda) {
  const Grid& g = target.grid();
  std::vector<double> out(g.node_count());
  for (int i = 0; i < g.node_count(); ++i) {
    const Point xi = g.node(i);
    double best = target[i];
    for (int k = 0; k < g.node_count(); ++k) {
      const Point xk = g.node(k);
      const double d2 = (xi.x - xk.x) * (xi.x - xk.x) + (xi.y - xk.y) * (xi.y - xk.y);
      best = std::min(best, target[k] + d2 / (2.0 * lambda));
    }
    out[i] = best;
  }
  return NodalField(target.grid_ptr(), std::move(out));
}

/// Increasing obstacles psi_1 <= ... <= psi_k <= target and their obstacle
/// solutions, each taking boundary values from its own obstacle. Radii
/// lambda_j = diam^2 / 4^j.
inline std::vector<ApproximationLevel> approximation_sequence(const ProblemSpec& spec, const ScalarFunction& target,
                                                              int levels, const NewtonOptions& opts = {}) {
  if (levels < 1) throw Error(ErrorCode::PreconditionViolated, "need at least one level");
  const NodalField target_field = interpolate(spec.grid, target);
  const double diam = spec.grid->diameter();
  std::vector<ApproximationLevel> out;
  for (int j = 1; j <= levels; ++j) {
    const double lambda = diam * diam / std::pow(4.0, j);
    NodalField psi = inf_convolution(target_field, lambda);
    ProblemSpec level_spec{spec.grid, spec.params, BoundaryData::from_field(psi), spec.epsilon, psi,
                           spec.strict_validation};
    auto sol = solve_obstacle(level_spec, opts);
    out.push_back({std::move(psi), std::move(sol.field), std::move(sol.report)});
  }
  return out;
}

}  // namespace dphase
