#pragma once

// Viscosity side. The expanded operator is
//
//   F(x, eta, X) = -|eta|^{p-2} (tr X + (p-2) <X e, e>)
//                  - a(x) |eta|^{q-2} (tr X + (q-2) <X e, e>)
//                  - |eta|^{q-2} eta . Da(x),          e = eta / |eta|,
//
// i.e. F = -div A(x, D phi) on smooth phi. The grid solver is a nonlinear
// Gauss-Seidel sweep over a 9-point scheme whose mixed derivative is taken
// along the diagonal that keeps all neighbour weights nonnegative for frozen
// coefficients (roughly 1.17 <= p <= q <= 6.8). The weights follow the central
// gradient, so on rough data the nonlinear update is not monotone.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "dphase/errors.hpp"
#include "dphase/mesh.hpp"
#include "dphase/operator_core.hpp"
#include "dphase/problem.hpp"
#include "dphase/variational.hpp"

namespace dphase {

struct SecondOrderJet {
  Point x;
  GradVec eta;
  SymMat hessian;
};

/// Value of F at a jet. For p < 2 a gradient with |eta| <= degenerate_threshold
/// (or exactly zero) has no defined value and raises DegenerateGradient.
inline double nondiv_eval(const DoublePhaseParams& params, const SecondOrderJet& jet,
                          double degenerate_threshold = 0.0) {
  const double r = jet.eta.norm();
  if (params.p < 2.0 && (r == 0.0 || r <= degenerate_threshold)) {
    throw Error(ErrorCode::DegenerateGradient, "|eta| too small for p < 2");
  }
  const double a = params.coeff.value(jet.x);
  const GradVec da = params.coeff.gradient(jet.x, jet.eta.dim());
  const double tr = jet.hessian.trace();
  if (r == 0.0) {
    // p >= 2: degenerate factors vanish, p = 2 (or q = 2) keeps the Laplacian.
    return -(params.p == 2.0 ? tr : 0.0) - a * (params.q == 2.0 ? tr : 0.0);
  }
  const double dir = jet.hessian.quadratic_form(jet.eta) / (r * r);
  const double f1 = -std::pow(r, params.p - 2.0) * (tr + (params.p - 2.0) * dir);
  const double f2 = -a * std::pow(r, params.q - 2.0) * (tr + (params.q - 2.0) * dir);
  const double f3 = -std::pow(r, params.q - 2.0) * jet.eta.dot(da);
  return f1 + f2 + f3;
}

/// C^2 test function given by value, gradient and Hessian closures.
struct SmoothFunction {
  std::function<double(const Point&)> value;
  std::function<GradVec(const Point&)> gradient;
  std::function<SymMat(const Point&)> hessian;

  SecondOrderJet jet(const Point& x) const { return {x, gradient(x), hessian(x)}; }

  /// c + b.(x - x0) + 1/2 (x - x0)^T Q (x - x0)
  static SmoothFunction quadratic(double c, GradVec b, SymMat Q, Point x0) {
    SmoothFunction f;
    const int n = b.dim();
    f.value = [=](const Point& x) {
      const GradVec d = to_vec(x, n) - to_vec(x0, n);
      return c + b.dot(d) + 0.5 * Q.quadratic_form(d);
    };
    f.gradient = [=](const Point& x) { return b + Q.apply(to_vec(x, n) - to_vec(x0, n)); };
    f.hessian = [=](const Point&) { return Q; };
    return f;
  }
};

struct ConsistencyResult {
  double divergence_form = 0.0;
  double nondiv = 0.0;
  double gap = 0.0;  // |difference| / (1 + |nondiv|)
};

/// Compares -div A(x, D phi) from fourth-order central differences of the
/// flux field against F on the exact jet of phi.
inline ConsistencyResult consistency_check(const DoublePhaseParams& params, const SmoothFunction& phi, const Point& x,
                                           double step = 1e-3) {
  const GradVec g0 = phi.gradient(x);
  const int n = g0.dim();
  if (g0.norm() == 0.0) throw Error(ErrorCode::DegenerateGradient, "consistency check needs D phi(x) != 0");
  auto flux_component = [&](const Point& y, int k) { return a_flux(params, y, phi.gradient(y))[k]; };
  double div = 0.0;
  for (int k = 0; k < n; ++k) {
    auto shifted = [&](double t) {
      Point y = x;
      (k == 0 ? y.x : y.y) += t;
      return flux_component(y, k);
    };
    div += (-shifted(2 * step) + 8 * shifted(step) - 8 * shifted(-step) + shifted(-2 * step)) / (12 * step);
  }
  ConsistencyResult out;
  out.divergence_form = -div;
  out.nondiv = nondiv_eval(params, phi.jet(x));
  out.gap = std::abs(out.divergence_form - out.nondiv) / (1.0 + std::abs(out.nondiv));
  return out;
}

struct ViscosityOptions {
  double tolerance = 1e-10;  // on the max nodal update of one sweep
  long max_sweeps = 100000;
  double relaxation = 1.0;
  bool allow_variable_coefficient = false;
  std::optional<double> gradient_floor;  // defaults to the grid spacing h
};

namespace detail {

/// Local 9-point (3-point in 1D) discretization at one interior node.
class ViscosityStencil {
 public:
  ViscosityStencil(const ProblemSpec& spec, double gradient_floor)
      : grid_(*spec.grid), params_(spec.params), eps_(spec.epsilon), floor_(gradient_floor) {
    coeff_.resize(grid_.node_count());
    coeff_grad_.resize(grid_.node_count());
    for (int k = 0; k < grid_.node_count(); ++k) {
      coeff_[k] = params_.coeff.value(grid_.node(k));
      coeff_grad_[k] = params_.coeff.gradient(grid_.node(k), grid_.dim());
    }
  }

  /// Value of u_k that solves the local equation F_h = eps with neighbours fixed.
  double target(std::span<const double> u, int k) const {
    const int i = grid_.ix(k), j = grid_.iy(k);
    const double hx = grid_.hx();
    if (grid_.dim() == 1) {
      const double ue = u[k + 1], uw = u[k - 1];
      const GradVec eta((ue - uw) / (2 * hx));
      const double r = std::max(eta.norm(), floor_);
      const double c = (params_.p - 1.0) * std::pow(r, params_.p - 2.0) +
                       coeff_[k] * (params_.q - 1.0) * std::pow(r, params_.q - 2.0);
      const double w = c / (hx * hx);
      const double drift = std::pow(r, params_.q - 2.0) * eta.dot(coeff_grad_[k]);
      return (w * (ue + uw) + eps_ + drift) / (2 * w);
    }
    const double hy = grid_.hy();
    auto at = [&](int di, int dj) { return u[grid_.index(i + di, j + dj)]; };
    const GradVec eta((at(1, 0) - at(-1, 0)) / (2 * hx), (at(0, 1) - at(0, -1)) / (2 * hy));
    const double rn = eta.norm();
    const double r = std::max(rn, floor_);
    // Direction projector; isotropic average when the direction is undefined.
    const SymMat proj = rn > 0.0 ? (1.0 / (rn * rn)) * SymMat::outer(eta) : 0.5 * SymMat::identity(2);
    auto part = [&](double e, double weight) {
      SymMat m = SymMat::identity(2);
      m += (e - 2.0) * proj;
      return (weight * std::pow(r, e - 2.0)) * m;
    };
    SymMat m = part(params_.p, 1.0);
    if (coeff_[k] != 0.0) m += part(params_.q, coeff_[k]);
    const double m12 = m(0, 1);
    const double cd = std::abs(m12) / (hx * hy);
    const double ce = m(0, 0) / (hx * hx) - cd;
    const double cn = m(1, 1) / (hy * hy) - cd;
    const double diag_pair = m12 >= 0.0 ? at(1, 1) + at(-1, -1) : at(-1, 1) + at(1, -1);
    const GradVec eta_floor = rn > 0.0 ? eta : GradVec(0.0, 0.0);
    const double drift = std::pow(r, params_.q - 2.0) * eta_floor.dot(coeff_grad_[k]);
    const double num = ce * (at(1, 0) + at(-1, 0)) + cn * (at(0, 1) + at(0, -1)) + cd * diag_pair + eps_ + drift;
    return num / (2.0 * (ce + cn + cd));
  }

 private:
  const Grid& grid_;
  const DoublePhaseParams& params_;
  double eps_;
  double floor_;
  std::vector<double> coeff_;
  std::vector<GradVec> coeff_grad_;
};

inline void require_viscosity_preconditions(const ProblemSpec& spec, const ViscosityOptions& opts) {
  spec.validate();
  if (spec.obstacle) throw Error(ErrorCode::PreconditionViolated, "the viscosity solver does not handle obstacles");
  if (!spec.params.coeff.is_constant() && !opts.allow_variable_coefficient) {
    throw Error(ErrorCode::ConstantCoefficientRequired,
                "the viscosity route is well-posed only for a constant coefficient a(x) (comparison is proven "
                "only for a(x) == const); set allow_variable_coefficient to run it experimentally");
  }
  if (!spec.params.coeff.has_gradient()) {
    throw Error(ErrorCode::InvalidParams, "the viscosity solver needs the coefficient gradient");
  }
}

}  // namespace detail

/// Scheme's local update target at node k given the other values of u.
inline double viscosity_local_target(const NodalField& u, const ProblemSpec& spec, int k,
                                     const ViscosityOptions& opts = {}) {
  require_same_grid(u.grid(), *spec.grid);
  if (spec.grid->is_boundary(k)) throw Error(ErrorCode::PreconditionViolated, "local target needs an interior node");
  detail::ViscosityStencil stencil(spec, opts.gradient_floor.value_or(spec.grid->h()));
  return stencil.target(u.values(), k);
}

inline Solution solve_viscosity(const ProblemSpec& spec, const ViscosityOptions& opts = {},
                                const std::optional<NodalField>& initial_guess = std::nullopt) {
  detail::require_viscosity_preconditions(spec, opts);
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

  detail::ViscosityStencil stencil(spec, opts.gradient_floor.value_or(grid.h()));
  SolveReport report;
  report.experimental = !spec.params.coeff.is_constant();
  const auto& interior = grid.interior_nodes();
  for (long sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    double max_update = 0.0;
    for (int k : interior) {
      const double du = opts.relaxation * (stencil.target(u, k) - u[k]);
      u[k] += du;
      max_update = std::max(max_update, std::abs(du));
    }
    report.iterations = static_cast<int>(sweep);
    report.residual_norm = max_update;
    if (!std::isfinite(max_update)) break;
    if (max_update <= opts.tolerance) {
      report.converged = true;
      break;
    }
  }
  if (!report.converged) {
    throw SolveFailure(ErrorCode::NonConvergence,
                       "Gauss-Seidel did not converge (last update " + std::to_string(report.residual_norm) + ")",
                       report);
  }
  NodalField field(spec.grid, std::move(u));
  report.energy = energy(field, spec);
  return {std::move(field), std::move(report)};
}

/// phi(x) = u(x0) + b.(x - x0) - (K/2)|x - x0|^2, touching u from below at x0.
struct TouchingQuadratic {
  int node = -1;
  Point x0;
  double value = 0.0;
  GradVec slope;
  double curvature = 0.0;  // K >= 0
  double margin = 0.0;     // min over other nodes of u - phi

  SmoothFunction as_function() const {
    return SmoothFunction::quadratic(value, slope, -curvature * SymMat::identity(slope.dim()), x0);
  }
  double operator()(const Point& x) const {
    const GradVec d = to_vec(x, slope.dim()) - to_vec(x0, slope.dim());
    return value + slope.dot(d) - 0.5 * curvature * d.squared_norm();
  }
};

namespace detail {

inline TouchingQuadratic fit_curvature(const NodalField& u, int node, const GradVec& b) {
  const Grid& g = u.grid();
  const Point x0 = g.node(node);
  const int n = g.dim();
  double k_needed = 0.0;
  double d2_min = std::numeric_limits<double>::infinity();
  for (int k = 0; k < g.node_count(); ++k) {
    if (k == node) continue;
    const GradVec d = to_vec(g.node(k), n) - to_vec(x0, n);
    const double d2 = d.squared_norm();
    d2_min = std::min(d2_min, d2);
    k_needed = std::max(k_needed, 2.0 * (u[node] + b.dot(d) - u[k]) / d2);
  }
  TouchingQuadratic t{node, x0, u[node], b, 0.0, 0.0};
  double kappa = 4e-12 / d2_min;
  for (int attempt = 0; attempt < 60; ++attempt, kappa *= 2.0) {
    t.curvature = k_needed + kappa;
    double margin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < g.node_count(); ++k) {
      if (k != node) margin = std::min(margin, u[k] - t(g.node(k)));
    }
    t.margin = margin;
    if (margin >= 1e-12) return t;
  }
  throw Error(ErrorCode::NoTouchFound, "could not separate the quadratic from the field");
}

}  // namespace detail

/// Quadratics touching the discrete field from below at an interior node.
/// Slopes are drawn from the box spanned by the one-sided difference
/// quotients (the discrete subgradient range); the first one is its centre.
inline std::vector<TouchingQuadratic> generate_touching_quadratics(const NodalField& u, int node, int count,
                                                                   std::uint64_t seed = 0) {
  const Grid& g = u.grid();
  if (g.is_boundary(node)) throw Error(ErrorCode::PreconditionViolated, "touch node must be interior");
  const int i = g.ix(node), j = g.iy(node);
  double lo[2], hi[2];
  {
    const double fwd = (u[g.index(i + 1, j)] - u[node]) / g.hx();
    const double bwd = (u[node] - u[g.index(i - 1, j)]) / g.hx();
    lo[0] = std::min(fwd, bwd);
    hi[0] = std::max(fwd, bwd);
  }
  if (g.dim() == 2) {
    const double fwd = (u[g.index(i, j + 1)] - u[node]) / g.hy();
    const double bwd = (u[node] - u[g.index(i, j - 1)]) / g.hy();
    lo[1] = std::min(fwd, bwd);
    hi[1] = std::max(fwd, bwd);
  }
  auto make = [&](double sx, double sy) {
    return g.dim() == 1 ? GradVec(lo[0] + sx * (hi[0] - lo[0]))
                        : GradVec(lo[0] + sx * (hi[0] - lo[0]), lo[1] + sy * (hi[1] - lo[1]));
  };
  const double scale = std::max({std::abs(lo[0]), std::abs(hi[0]), g.dim() == 2 ? std::abs(lo[1]) : 0.0,
                                 g.dim() == 2 ? std::abs(hi[1]) : 0.0});
  const double zero_tol = 1e-12 * (1.0 + u.max_abs());
  if (scale <= zero_tol) throw Error(ErrorCode::NoTouchFound, "flat field at touch node");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<TouchingQuadratic> out;
  int attempts = 0;
  while (static_cast<int>(out.size()) < count && attempts < 50 * count) {
    const bool centre = attempts == 0;
    const GradVec b = centre ? make(0.5, 0.5) : make(unit(rng), unit(rng));
    ++attempts;
    if (b.norm() <= zero_tol) continue;
    out.push_back(detail::fit_curvature(u, node, b));
  }
  if (out.empty()) throw Error(ErrorCode::NoTouchFound, "no nonzero slope in the subgradient box");
  return out;
}

struct TouchReport {
  Point x0;
  int node = -1;
  GradVec slope;
  double curvature = 0.0;
  double gradient_norm = 0.0;  // |D phi(x0)|
  double operator_value = 0.0;  // max over the punctured 1-ring of -div A(x, D phi(x))
  double tolerance = 0.0;       // C_tol h
  double threshold = 0.0;       // eps - tolerance
  bool pass = false;
};

struct TouchOptions {
  int per_node = 5;
  std::uint64_t seed = 0;
};

/// Samples interior nodes and touching quadratics from below, and checks
/// max_{x in 1-ring, x != x0} (-div A(x, D phi(x))) >= eps - C_tol h with
/// C_tol = 10 (1 + max|u|).
inline std::vector<TouchReport> touch_test(const NodalField& u, const DoublePhaseParams& params, double epsilon,
                                           int count, const TouchOptions& opts = {}) {
  const Grid& g = u.grid();
  const double tol = 10.0 * (1.0 + u.max_abs()) * g.h();
  std::mt19937_64 rng(opts.seed);
  const auto& interior = g.interior_nodes();
  std::uniform_int_distribution<size_t> pick(0, interior.size() - 1);
  std::vector<TouchReport> out;
  int guard = 0;
  while (static_cast<int>(out.size()) < count && guard++ < 100 * count) {
    const int node = interior[pick(rng)];
    const int want = std::min(opts.per_node, count - static_cast<int>(out.size()));
    std::vector<TouchingQuadratic> quads;
    try {
      quads = generate_touching_quadratics(u, node, want, rng());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NoTouchFound) continue;
      throw;
    }
    for (const auto& tq : quads) {
      const SmoothFunction phi = tq.as_function();
      double best = -std::numeric_limits<double>::infinity();
      for (int nb : g.one_ring(node)) {
        try {
          best = std::max(best, nondiv_eval(params, phi.jet(g.node(nb))));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::DegenerateGradient) throw;
        }
      }
      TouchReport rep;
      rep.x0 = tq.x0;
      rep.node = node;
      rep.slope = tq.slope;
      rep.curvature = tq.curvature;
      rep.gradient_norm = tq.slope.norm();
      rep.operator_value = best;
      rep.tolerance = tol;
      rep.threshold = epsilon - tol;
      rep.pass = best >= rep.threshold;
      out.push_back(rep);
    }
  }
  return out;
}

inline double pass_rate(const std::vector<TouchReport>& reports) {
  if (reports.empty()) return 0.0;
  const auto n = std::count_if(reports.begin(), reports.end(), [](const TouchReport& r) { return r.pass; });
  return static_cast<double>(n) / reports.size();
}

struct PenaltyResult {
  int x_node = -1;
  int y_node = -1;
  Point x;
  Point y;
  double psi_max = 0.0;
  double distance = 0.0;
  double scaled_distance = 0.0;               // j |x_j - y_j|^{s-1}
  std::vector<double> scaled_distance_sigma;  // j |x_j - y_j|^{s-1+sigma}, per sigma
};

/// Smallest admissible penalty exponent max{2, p/(p-1), q/(q-1)} (exclusive).
inline double penalty_exponent_floor(const DoublePhaseParams& params) {
  return std::max({2.0, params.p / (params.p - 1.0), params.q / (params.q - 1.0)});
}

/// Exhaustive maximization of u(x) - v(y) - (j/s)|x - y|^s over node pairs;
/// ties go to the lexicographically smallest (x index, y index).
inline PenaltyResult doubling_penalty(const NodalField& u, const NodalField& v, const DoublePhaseParams& params,
                                      double j, double s, const std::vector<double>& sigmas = {}) {
  require_same_grid(u.grid(), v.grid());
  if (!(s > penalty_exponent_floor(params))) {
    throw Error(ErrorCode::InvalidExponent, "penalty exponent s must exceed max{2, p/(p-1), q/(q-1)} = " +
                                                std::to_string(penalty_exponent_floor(params)));
  }
  for (double sg : sigmas) {
    if (!(sg > 0.0)) throw Error(ErrorCode::InvalidExponent, "sigma must be positive");
  }
  const Grid& g = u.grid();
  const int n = g.node_count();
  std::vector<Point> pts(n);
  for (int k = 0; k < n; ++k) pts[k] = g.node(k);
  PenaltyResult best;
  best.psi_max = -std::numeric_limits<double>::infinity();
  const double half_s = 0.5 * s;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const double dx = pts[a].x - pts[b].x, dy = pts[a].y - pts[b].y;
      const double d2 = dx * dx + dy * dy;
      const double pen = d2 == 0.0 ? 0.0 : (j / s) * std::pow(d2, half_s);
      const double val = u[a] - v[b] - pen;
      if (val > best.psi_max) {
        best.psi_max = val;
        best.x_node = a;
        best.y_node = b;
      }
    }
  }
  best.x = pts[best.x_node];
  best.y = pts[best.y_node];
  best.distance = distance(best.x, best.y);
  best.scaled_distance = best.distance == 0.0 ? 0.0 : j * std::pow(best.distance, s - 1.0);
  for (double sg : sigmas) {
    best.scaled_distance_sigma.push_back(best.distance == 0.0 ? 0.0 : j * std::pow(best.distance, s - 1.0 + sg));
  }
  return best;
}

/// max over node pairs of |v(x) - v(y)| / |x - y|.
inline double discrete_lipschitz_constant(const NodalField& v) {
  const Grid& g = v.grid();
  double lip = 0.0;
  for (int a = 0; a < g.node_count(); ++a) {
    for (int b = a + 1; b < g.node_count(); ++b) {
      lip = std::max(lip, std::abs(v[a] - v[b]) / distance(g.node(a), g.node(b)));
    }
  }
  return lip;
}

}  // namespace dphase
