#pragma once

// Verification studies over both solvers. Every study emits a StudyTable
// whose verdict is recomputable from its rows alone (see reverify()).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dphase/errors.hpp"
#include "dphase/io.hpp"
#include "dphase/mesh.hpp"
#include "dphase/orlicz.hpp"
#include "dphase/problem.hpp"
#include "dphase/variational.hpp"
#include "dphase/viscosity.hpp"

namespace dphase {

struct StudyTable {
  std::string name;
  std::vector<std::string> columns;  // columns[0] == "h"
  std::vector<std::vector<double>> rows;
  bool verdict = false;
  std::string detail;
  std::map<std::string, std::string> metadata;

  int column(const std::string& c) const {
    for (size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == c) return static_cast<int>(i);
    }
    throw Error(ErrorCode::PreconditionViolated, "study table has no column '" + c + "'");
  }
  std::vector<double> col(const std::string& c) const {
    const int i = column(c);
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r[i]);
    return out;
  }
};

struct StudyOptions {
  NewtonOptions newton;
  ViscosityOptions viscosity;
  std::uint64_t seed = 0;
};

struct Verdict {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Random smooth data

/// Truncated trigonometric series in the normalized coordinates of a grid,
/// sum over m + n <= degree of c_mn cos(pi m s + a_mn) cos(pi n t + b_mn).
class TrigSeries {
 public:
  TrigSeries(const Grid& grid, std::mt19937_64& rng, int degree = 4, double amplitude = 1.0)
      : ox_(grid.ox()), oy_(grid.oy()), lx_(grid.lx()), ly_(grid.dim() == 2 ? grid.ly() : 1.0), dim_(grid.dim()) {
    std::uniform_real_distribution<double> coef(-1.0, 1.0), phase(0.0, 2.0 * M_PI);
    for (int m = 0; m <= degree; ++m) {
      for (int n = 0; n <= (dim_ == 2 ? degree - m : 0); ++n) {
        terms_.push_back({m, n, amplitude * coef(rng) / (1.0 + m + n), phase(rng), phase(rng)});
      }
    }
  }

  double operator()(const Point& x) const {
    const double s = (x.x - ox_) / lx_, t = dim_ == 2 ? (x.y - oy_) / ly_ : 0.0;
    double sum = 0.0;
    for (const auto& tm : terms_) sum += tm.c * std::cos(M_PI * tm.m * s + tm.a) * std::cos(M_PI * tm.n * t + tm.b);
    return sum;
  }

 private:
  struct Term {
    int m, n;
    double c, a, b;
  };
  double ox_, oy_, lx_, ly_;
  int dim_;
  std::vector<Term> terms_;
};

/// Product of polynomial bumps (1 - t^2)^2 on a box kept 10% away from the
/// boundary; values in [0, 1], peak 1.
struct Cutoff {
  Point centre;
  double rx = 1.0, ry = 1.0;
  int dim = 1;
  bool zero = false;

  static Cutoff random(const Grid& g, std::mt19937_64& rng) {
    Cutoff c;
    c.dim = g.dim();
    auto axis = [&](double o, double len, double& centre, double& radius) {
      std::uniform_real_distribution<double> rad(0.15 * len, 0.4 * len);
      radius = rad(rng);
      const double lo = o + 0.1 * len + radius, hi = o + 0.9 * len - radius;
      std::uniform_real_distribution<double> pos(lo, std::max(lo, hi));
      centre = pos(rng);
    };
    axis(g.ox(), g.lx(), c.centre.x, c.rx);
    if (c.dim == 2) axis(g.oy(), g.ly(), c.centre.y, c.ry);
    return c;
  }
  static Cutoff none(int dim) {
    Cutoff c;
    c.dim = dim;
    c.zero = true;
    return c;
  }

  double value(const Point& x) const {
    if (zero) return 0.0;
    double v = bump((x.x - centre.x) / rx);
    if (dim == 2) v *= bump((x.y - centre.y) / ry);
    return v;
  }
  GradVec gradient(const Point& x) const {
    if (zero) return GradVec::zero(dim);
    const double tx = (x.x - centre.x) / rx;
    if (dim == 1) return GradVec(dbump(tx) / rx);
    const double ty = (x.y - centre.y) / ry;
    return GradVec(dbump(tx) / rx * bump(ty), bump(tx) * dbump(ty) / ry);
  }

 private:
  static double bump(double t) { return std::abs(t) < 1.0 ? (1 - t * t) * (1 - t * t) : 0.0; }
  static double dbump(double t) { return std::abs(t) < 1.0 ? -4.0 * t * (1 - t * t) : 0.0; }
};

struct CaccioppoliSides {
  double lhs = 0.0;  // int zeta^q H(x, Du)
  double rhs = 0.0;  // int H(x, u D zeta)
};

inline CaccioppoliSides caccioppoli_sides(const NodalField& u, const DoublePhaseParams& params, const Cutoff& zeta) {
  CaccioppoliSides s;
  for (const Element& el : u.grid().elements()) {
    const Point x = el.barycenter;
    const double a = params.coeff.value(x);
    double ub = 0.0;
    for (int k = 0; k < el.count; ++k) ub += u[el.nodes[k]];
    ub /= el.count;
    const double z = zeta.value(x);
    s.lhs += el.measure * std::pow(z, params.q) * h_eval(params, a, p1_gradient(u, el).norm());
    s.rhs += el.measure * h_eval(params, a, std::abs(ub) * zeta.gradient(x).norm());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Verdicts (pure functions of the rows)

inline Verdict equivalence_verdict(const StudyTable& t) {
  const auto d = t.col("max_diff");
  if (d.size() < 2) return {false, "need at least two refinement levels"};
  for (size_t i = 1; i < d.size(); ++i) {
    if (!(d[i] < d[i - 1])) return {false, "max |u_var - u_visc| not strictly decreasing at row " + std::to_string(i)};
  }
  if (!(d.back() <= 0.5 * d.front())) return {false, "finest difference exceeds half the coarsest"};
  return {true, "difference strictly decreasing, finest/coarsest = " + format_double(d.back() / d.front())};
}

// Equivalence with exact (or near-exact) agreement at every level.
inline Verdict equivalence_exact_verdict(const StudyTable& t, double tol) {
  for (double d : t.col("max_diff")) {
    if (!(d <= tol)) return {false, "difference " + format_double(d) + " above " + format_double(tol)};
  }
  return {true, "both solvers agree to " + format_double(tol)};
}

inline Verdict comparison_verdict(const StudyTable& t) {
  const auto var = t.col("var_violation");
  const auto visc = t.col("visc_violation");
  int bad = 0;
  for (size_t i = 0; i < var.size(); ++i) {
    if (!(var[i] <= 1e-9)) ++bad;
    if (!std::isnan(visc[i]) && !(visc[i] <= 1e-9)) ++bad;
  }
  if (bad) return {false, std::to_string(bad) + " ordering violations beyond 1e-9"};
  return {true, "no ordering violations in " + std::to_string(var.size()) + " trials"};
}

inline Verdict caccioppoli_verdict(const StudyTable& t) {
  const auto h = t.col("h");
  const auto ratio = t.col("ratio");
  if (h.empty()) return {false, "no rows"};
  std::map<double, double, std::greater<>> max_by_h;
  for (size_t i = 0; i < h.size(); ++i) {
    if (!std::isfinite(ratio[i])) return {false, "non-finite ratio at row " + std::to_string(i)};
    auto [it, inserted] = max_by_h.emplace(h[i], ratio[i]);
    if (!inserted) it->second = std::max(it->second, ratio[i]);
  }
  if (max_by_h.size() < 2) return {false, "need two grid levels"};
  const double coarse = max_by_h.begin()->second, fine = std::next(max_by_h.begin())->second;
  const double change = std::max(coarse / fine, fine / coarse);
  if (!(change < 2.0)) return {false, "max ratio changed by factor " + format_double(change)};
  return {true, "max ratio " + format_double(coarse) + " -> " + format_double(fine)};
}

inline Verdict regularization_verdict(const StudyTable& t) {
  const auto dist = t.col("sup_distance");
  const auto mono = t.col("monotonicity_violation");
  for (size_t i = 0; i < mono.size(); ++i) {
    if (!(mono[i] <= 1e-9)) return {false, "u_eps not monotone in eps at row " + std::to_string(i)};
  }
  for (size_t i = 1; i < dist.size(); ++i) {
    if (!(dist[i] < dist[i - 1])) return {false, "sup-distance not strictly decreasing at row " + std::to_string(i)};
  }
  return {true, "monotone in eps with strictly decreasing interior sup-distance"};
}

inline Verdict obstacle_approximation_verdict(const StudyTable& t) {
  const auto mono = t.col("monotonicity_violation");
  const auto above = t.col("target_violation");
  const auto gm = t.col("gradient_modular");
  const auto dist = t.col("interior_modular_distance");
  for (size_t i = 0; i < mono.size(); ++i) {
    if (!(mono[i] <= 1e-9)) return {false, "u_j not nondecreasing at level " + std::to_string(i + 1)};
    if (!(above[i] <= 1e-9)) return {false, "u_j exceeds the target at level " + std::to_string(i + 1)};
  }
  std::vector<double> sorted = gm;
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  if (!(sorted.back() <= 10.0 * median)) return {false, "gradient modulars not uniformly bounded"};
  for (size_t i = 1; i < dist.size(); ++i) {
    if (!(dist[i] <= dist[i - 1] * (1.0 + 1e-9) + 1e-14)) {
      return {false, "interior modular distance increased at level " + std::to_string(i + 1)};
    }
  }
  return {true, "monotone sequence, bounded modulars, nonincreasing modular distance"};
}

inline Verdict touch_verdict(const StudyTable& t) {
  const auto pass = t.col("pass");
  if (pass.empty()) return {false, "no touching quadratics"};
  double n = 0;
  for (double v : pass) n += v;
  const double rate = n / pass.size();
  if (!(rate >= 0.95)) return {false, "pass rate " + format_double(rate) + " below 0.95"};
  return {true, "pass rate " + format_double(rate)};
}

inline Verdict reverify(const StudyTable& t) {
  if (t.name == "touch") return touch_verdict(t);
  if (t.name == "equivalence") return equivalence_verdict(t);
  if (t.name == "comparison") return comparison_verdict(t);
  if (t.name == "caccioppoli") return caccioppoli_verdict(t);
  if (t.name == "regularization") return regularization_verdict(t);
  if (t.name == "obstacle-approximation") return obstacle_approximation_verdict(t);
  throw Error(ErrorCode::PreconditionViolated, "unknown study '" + t.name + "'");
}

inline void finish(StudyTable& t, const Verdict& v) {
  t.verdict = v.pass;
  t.detail = v.detail;
}

// ---------------------------------------------------------------------------
// Studies

namespace detail {

inline ProblemSpec with_grid(const ProblemSpec& spec, GridPtr grid) {
  ProblemSpec s = spec;
  s.grid = std::move(grid);
  if (s.obstacle) s.obstacle.reset();
  return s;
}

inline double max_excess(const NodalField& a, const NodalField& b) {
  require_same_grid(a.grid(), b.grid());
  double m = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < a.size(); ++k) m = std::max(m, a[k] - b[k]);
  return m;
}

inline double interior_sup_distance(const NodalField& a, const NodalField& b, int min_depth) {
  double m = 0.0;
  for (int k = 0; k < a.size(); ++k) {
    if (a.grid().depth(k) >= min_depth) m = std::max(m, std::abs(a[k] - b[k]));
  }
  return m;
}

}  // namespace detail

/// D(h) = max nodal |u_var - u_visc| over h, h/2, ... (refinements levels).
inline StudyTable equivalence_study(const ProblemSpec& spec, int refinements, const StudyOptions& opts = {}) {
  if (!spec.params.coeff.is_constant() && !opts.viscosity.allow_variable_coefficient) {
    throw Error(ErrorCode::ConstantCoefficientRequired,
                "equivalence study needs a constant coefficient a(x) (comparison for the viscosity route is proven "
                "only for a(x) == const)");
  }
  StudyTable t;
  t.name = "equivalence";
  t.columns = {"h", "max_diff", "var_iterations", "visc_sweeps"};
  GridPtr grid = spec.grid;
  std::optional<NodalField> visc_guess;
  for (int level = 0; level < refinements; ++level) {
    const ProblemSpec s = detail::with_grid(spec, grid);
    const auto var = solve_dirichlet(s, opts.newton);
    std::optional<NodalField> guess;
    if (visc_guess) guess = NodalField(grid, prolongate(*visc_guess, *grid));
    const auto visc = solve_viscosity(s, opts.viscosity, guess);
    t.rows.push_back({grid->h(), max_abs_difference(var.field, visc.field), double(var.report.iterations),
                      double(visc.report.iterations)});
    visc_guess = visc.field;
    grid = grid->refined();
  }
  finish(t, equivalence_verdict(t));
  return t;
}

/// Random ordered boundary pairs g1 <= g2; the solutions must stay ordered.
inline StudyTable comparison_study(const ProblemSpec& spec, int trials, const StudyOptions& opts = {}) {
  StudyTable t;
  t.name = "comparison";
  t.columns = {"h", "trial", "shift", "var_violation", "visc_violation"};
  t.metadata["seed"] = std::to_string(opts.seed);
  const Grid& g = *spec.grid;
  std::mt19937_64 rng(opts.seed);
  const bool with_visc = spec.params.coeff.is_constant() || opts.viscosity.allow_variable_coefficient;
  for (int trial = 0; trial < trials; ++trial) {
    const TrigSeries h1(g, rng), h2(g, rng);
    std::uniform_real_distribution<double> gap(0.05, 0.5);
    double lift = -std::numeric_limits<double>::infinity();
    for (int k : g.boundary_nodes()) lift = std::max(lift, h1(g.node(k)) - h2(g.node(k)));
    const double shift = lift + gap(rng);
    ProblemSpec s1 = detail::with_grid(spec, spec.grid);
    ProblemSpec s2 = s1;
    s1.boundary = BoundaryData::from_function(h1);
    s2.boundary = BoundaryData::from_function([h2, shift](const Point& x) { return h2(x) + shift; });
    const auto u1 = solve_dirichlet(s1, opts.newton);
    const auto u2 = solve_dirichlet(s2, opts.newton);
    double visc_violation = std::nan("");
    if (with_visc) {
      const auto v1 = solve_viscosity(s1, opts.viscosity);
      const auto v2 = solve_viscosity(s2, opts.viscosity);
      visc_violation = detail::max_excess(v1.field, v2.field);
    }
    t.rows.push_back({g.h(), double(trial), shift, detail::max_excess(u1.field, u2.field), visc_violation});
  }
  finish(t, comparison_verdict(t));
  return t;
}

/// Ratio int zeta^q H(Du) / int H(u D zeta) for random cutoffs, on the
/// problem grid and one refinement.
inline StudyTable caccioppoli_study(const ProblemSpec& spec, int cutoffs, const StudyOptions& opts = {}) {
  StudyTable t;
  t.name = "caccioppoli";
  t.columns = {"h", "cutoff", "lhs", "rhs", "ratio"};
  t.metadata["seed"] = std::to_string(opts.seed);
  std::mt19937_64 rng(opts.seed);
  std::vector<Cutoff> zetas;
  for (int i = 0; i < cutoffs; ++i) zetas.push_back(Cutoff::random(*spec.grid, rng));
  ProblemSpec base = detail::with_grid(spec, spec.grid);
  base.epsilon = 0.0;
  for (GridPtr grid : {spec.grid, spec.grid->refined()}) {
    base.grid = grid;
    const auto sol = solve_dirichlet(base, opts.newton);
    for (int i = 0; i < cutoffs; ++i) {
      const auto s = caccioppoli_sides(sol.field, spec.params, zetas[i]);
      const double ratio = s.rhs > 0.0 ? s.lhs / s.rhs : (s.lhs == 0.0 ? 0.0 : INFINITY);
      t.rows.push_back({grid->h(), double(i), s.lhs, s.rhs, ratio});
    }
  }
  finish(t, caccioppoli_verdict(t));
  return t;
}

/// u_eps for a decreasing list of eps against the eps = 0 solution with the
/// same boundary data; distances on nodes at depth >= 2.
inline StudyTable regularization_study(const ProblemSpec& spec, const std::vector<double>& epsilons,
                                       const StudyOptions& opts = {}) {
  const auto v = validate_exponents(spec.params, spec.grid->dim(), ExponentMode::RegularizedLimit);
  if (!v.ok) throw Error(ErrorCode::ExponentBoundViolated, v.explanation);
  for (size_t i = 1; i < epsilons.size(); ++i) {
    if (!(epsilons[i] < epsilons[i - 1])) {
      throw Error(ErrorCode::PreconditionViolated, "epsilons must be strictly decreasing");
    }
  }
  StudyTable t;
  t.name = "regularization";
  t.columns = {"h", "epsilon", "sup_distance", "gradient_modular_distance", "monotonicity_violation"};
  ProblemSpec s = detail::with_grid(spec, spec.grid);
  s.epsilon = 0.0;
  const auto ref = solve_dirichlet(s, opts.newton);
  std::optional<NodalField> previous;
  for (double eps : epsilons) {
    s.epsilon = eps;
    const auto sol = solve_dirichlet(s, opts.newton);
    // Larger source, larger solution: the previous (larger eps) field must dominate.
    const double violation = previous ? detail::max_excess(sol.field, *previous) : detail::max_excess(ref.field, sol.field);
    t.rows.push_back({spec.grid->h(), eps, detail::interior_sup_distance(sol.field, ref.field, 2),
                      gradient_modular(ref.field - sol.field, spec.params).value, violation});
    previous = sol.field;
  }
  if (previous) {
    // The eps = 0 solution sits below every u_eps.
    t.rows.back()[4] = std::max(t.rows.back()[4], detail::max_excess(ref.field, *previous));
  }
  finish(t, regularization_verdict(t));
  if (t.rows.size() >= 2) {
    const auto eps = t.col("epsilon");
    const auto dist = t.col("sup_distance");
    const double rate = std::log(dist[dist.size() - 2] / dist.back()) / std::log(eps[eps.size() - 2] / eps.back());
    t.metadata["empirical_rate"] = format_double(rate);
  }
  return t;
}

/// Monotone obstacle approximation of a target from below.
inline StudyTable obstacle_approximation_study(const ProblemSpec& spec, const ScalarFunction& target, int levels,
                                               const StudyOptions& opts = {}) {
  StudyTable t;
  t.name = "obstacle-approximation";
  t.columns = {"h",        "level", "lambda", "monotonicity_violation", "target_violation", "gradient_modular",
               "interior_modular_distance", "active_set"};
  const auto seq = approximation_sequence(detail::with_grid(spec, spec.grid), target, levels, opts.newton);
  const NodalField target_field = interpolate(spec.grid, target);
  const ElementMask interior = interior_element_mask(*spec.grid, 2);
  const double diam = spec.grid->diameter();
  for (size_t j = 0; j < seq.size(); ++j) {
    const NodalField& u = seq[j].solution;
    const double mono = j == 0 ? 0.0 : std::max(0.0, detail::max_excess(seq[j - 1].solution, u));
    t.rows.push_back({spec.grid->h(), double(j + 1), diam * diam / std::pow(4.0, double(j + 1)), mono,
                      std::max(0.0, detail::max_excess(u, target_field)), gradient_modular(u, spec.params).value,
                      gradient_modular(target_field - u, spec.params, interior).value,
                      double(seq[j].report.active_set_size)});
  }
  finish(t, obstacle_approximation_verdict(t));
  return t;
}

/// Touching quadratics from below at sampled nodes of the variational solution.
inline StudyTable touch_study(const ProblemSpec& spec, int count, const StudyOptions& opts = {}) {
  StudyTable t;
  t.name = "touch";
  t.columns = {"h", "node", "gradient_norm", "curvature", "operator_value", "threshold", "pass"};
  t.metadata["seed"] = std::to_string(opts.seed);
  const auto sol = solve_dirichlet(detail::with_grid(spec, spec.grid), opts.newton);
  TouchOptions topts;
  topts.seed = opts.seed;
  for (const auto& r : touch_test(sol.field, spec.params, spec.epsilon, count, topts)) {
    t.rows.push_back({spec.grid->h(), double(r.node), r.gradient_norm, r.curvature, r.operator_value, r.threshold,
                      r.pass ? 1.0 : 0.0});
  }
  finish(t, touch_verdict(t));
  return t;
}

// ---------------------------------------------------------------------------
// CSV form

/// Header row, one row per line. Study name, verdict and metadata go into
/// '# key=value' comment lines after the caller-supplied first comment.
inline std::string study_to_csv(const StudyTable& t, const std::string& first_comment) {
  std::ostringstream os;
  if (!first_comment.empty()) os << "# " << first_comment << '\n';
  os << "# study=" << t.name << '\n';
  os << "# verdict=" << (t.verdict ? "pass" : "fail") << '\n';
  for (const auto& [k, v] : t.metadata) os << "# " << k << '=' << v << '\n';
  for (size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << '\n';
  for (const auto& r : t.rows) {
    for (size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << format_double(r[i]);
    os << '\n';
  }
  return os.str();
}

inline StudyTable study_from_csv(std::istream& is) {
  StudyTable t;
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      const auto sp = line.find_first_not_of("# ");
      if (eq == std::string::npos || sp == std::string::npos || line.find(' ', sp) < eq) continue;
      const std::string key = line.substr(sp, eq - sp), value = line.substr(eq + 1);
      if (key == "study") {
        t.name = value;
      } else if (key == "verdict") {
        t.verdict = value == "pass";
      } else {
        t.metadata[key] = value;
      }
      continue;
    }
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!header) {
      t.columns = cells;
      header = true;
      continue;
    }
    if (cells.size() != t.columns.size()) throw Error(ErrorCode::CountMismatch, "study row width mismatch");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(std::strtod(c.c_str(), nullptr));
    t.rows.push_back(std::move(row));
  }
  if (!header) throw Error(ErrorCode::MalformedHeader, "study CSV without header");
  return t;
}

}  // namespace dphase
