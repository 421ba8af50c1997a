#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dphase/studies.hpp"
#include "dphase/variational.hpp"

using namespace dphase;

namespace {

DoublePhaseParams params(double p, double q, double a = 1.0, double delta = 0.0) {
  return DoublePhaseParams(p, q, 1.0, CoefficientField::constant(a), delta);
}

ProblemSpec problem(GridPtr g, DoublePhaseParams pr, ScalarFunction bc, double eps = 0.0) {
  return ProblemSpec{std::move(g), std::move(pr), BoundaryData::from_function(std::move(bc)), eps, std::nullopt,
                     false};
}

double max_nodal_error(const NodalField& u, const ScalarFunction& exact) {
  double m = 0.0;
  for (int k = 0; k < u.size(); ++k) m = std::max(m, std::abs(u[k] - exact(u.grid().node(k))));
  return m;
}

}  // namespace

TEST(Energy, Examples) {
  const auto g = Grid::line(17, 1.0);
  const auto zero = NodalField::constant(g, 0.0);
  EXPECT_EQ(energy(zero, problem(g, params(2, 4), [](const Point&) { return 0.0; })), 0.0);
  EXPECT_EQ(energy(zero, problem(g, params(2, 4), [](const Point&) { return 0.0; }, 0.1)), 0.0);
  const auto x = interpolate(g, [](const Point& p) { return p.x; });
  EXPECT_NEAR(energy(x, problem(g, params(2, 4), [](const Point& p) { return p.x; })), 0.75, 1e-14);
}

TEST(Energy, SourceTermIsExactForP1) {
  // int u dx for u = x^2 interpolant on [0,1] with 4 segments: trapezoid rule
  const auto g = Grid::line(5, 1.0);
  const auto u = interpolate(g, [](const Point& p) { return p.x * p.x; });
  const double trap = 0.25 * (0.5 * 0 + 0.0625 + 0.25 + 0.5625 + 0.5 * 1.0);
  const double grad = energy(u, problem(g, params(2, 2, 0.0), [](const Point&) { return 0.0; }));
  EXPECT_NEAR(energy(u, problem(g, params(2, 2, 0.0), [](const Point&) { return 0.0; }, 2.0)), grad - 2.0 * trap,
              1e-14);
}

TEST(Energy, GridMismatch) {
  const auto spec = problem(Grid::line(9, 1.0), params(2, 2), [](const Point&) { return 0.0; });
  EXPECT_THROW(energy(NodalField::constant(Grid::line(11, 1.0), 0.0), spec), Error);
  EXPECT_THROW(residual(NodalField::constant(Grid::line(11, 1.0), 0.0), spec), Error);
}

TEST(Residual, Examples) {
  const auto g = Grid::line(33, 1.0);
  const auto lin = [](const Point& p) { return 0.3 + 1.7 * p.x; };
  const auto spec = problem(g, params(2.5, 3.0, 2.0), lin);
  for (double r : residual(interpolate(g, lin), spec)) EXPECT_LE(std::abs(r), 1e-12);

  const auto src = problem(g, params(2.5, 3.0), [](const Point&) { return 0.0; }, 0.1);
  for (double r : residual(NodalField::constant(g, 0.0), src)) EXPECT_NEAR(r, -0.1 * g->hx(), 1e-15);

  const auto sq = Grid::rectangle(9, 9, 1.0, 1.0);
  const auto src2 = problem(sq, params(1.5, 3.0), [](const Point&) { return 0.0; }, 0.1);
  for (double r : residual(NodalField::constant(sq, 0.0), src2)) EXPECT_NEAR(r, -0.1 * sq->hx() * sq->hy(), 1e-15);
}

TEST(Residual, LinearCaseIsStiffnessAction) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  const auto g = Grid::line(21, 2.0);
  std::vector<double> v(g->node_count());
  for (auto& x : v) x = n(rng);
  const NodalField u(g, v);
  const double eps = 0.3, h = g->hx();
  const auto r = residual(u, problem(g, params(2, 2, 0.0), [](const Point&) { return 0.0; }, eps));
  const auto& in = g->interior_nodes();
  for (size_t i = 0; i < in.size(); ++i) {
    const int k = in[i];
    EXPECT_NEAR(r[i], (2 * v[k] - v[k - 1] - v[k + 1]) / h - eps * h, 1e-12);
  }
}

TEST(Residual, IsGradientOfSmoothedEnergy) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 0.5);
  auto coeff = CoefficientField::analytic([](const Point& x) { return 1.0 + std::sin(x.x) * std::cos(x.y); },
                                          nullptr);
  for (auto [p, q] : {std::pair{1.5, 1.8}, {2.0, 3.0}, {1.5, 3.0}}) {
    const double delta = 1e-2;
    const auto g = Grid::rectangle(7, 6, 1.0, 0.8);
    ProblemSpec spec{g, DoublePhaseParams(p, q, 1.0, coeff, delta),
                     BoundaryData::from_function([](const Point&) { return 0.0; }), 0.2, std::nullopt, false};
    std::vector<double> v(g->node_count());
    for (auto& x : v) x = n(rng);
    const auto r = residual(NodalField(g, v), spec);
    const auto& in = g->interior_nodes();
    for (size_t i = 0; i < in.size(); ++i) {
      const double step = 1e-6;
      auto vp = v, vm = v;
      vp[in[i]] += step;
      vm[in[i]] -= step;
      const double fd = (smoothed_energy(NodalField(g, vp), spec, delta) -
                         smoothed_energy(NodalField(g, vm), spec, delta)) / (2 * step);
      EXPECT_NEAR(r[i], fd, 1e-6 * std::max(1.0, std::abs(fd))) << "p=" << p << " q=" << q;
    }
  }
}

TEST(SolveDirichlet, OneDimensionalLinear) {
  const auto g = Grid::line(129, 1.0);
  const auto sol = solve_dirichlet(problem(g, params(2.5, 3.0), [](const Point& p) { return p.x; }));
  EXPECT_TRUE(sol.report.converged);
  EXPECT_LE(max_nodal_error(sol.field, [](const Point& p) { return p.x; }), 1e-10);
  EXPECT_LE(sol.report.residual_norm, 1e-9);
}

TEST(SolveDirichlet, LaplaceSecondOrder) {
  const auto exact = [](const Point& p) { return p.x * p.x - p.y * p.y; };
  std::vector<double> err;
  for (int n : {9, 17, 33}) {
    const auto sol = solve_dirichlet(problem(Grid::rectangle(n, n, 1.0, 1.0), params(2, 2, 0.0), exact));
    err.push_back(max_nodal_error(sol.field, exact));
  }
  // x^2 - y^2 is reproduced exactly by this mesh's stiffness stencil, so only check smallness
  for (double e : err) EXPECT_LE(e, 1e-9);
}

TEST(SolveDirichlet, RadialPLaplaceConverges) {
  const auto exact = [](const Point& p) { return std::sqrt(std::hypot(p.x, p.y)); };
  std::vector<double> err;
  for (int n : {9, 17, 33}) {
    const auto sol = solve_dirichlet(problem(Grid::rectangle(n, n, 1.0, 1.0, 1.0, 1.0), params(3, 3, 0.0), exact));
    err.push_back(max_nodal_error(sol.field, exact));
  }
  for (size_t i = 1; i < err.size(); ++i) EXPECT_GE(std::log2(err[i - 1] / err[i]), 0.9);
}

TEST(SolveDirichlet, ArmijoDecreasesEnergyWithinStages) {
  const auto g = Grid::rectangle(17, 17, 1.0, 1.0);
  const auto sol = solve_dirichlet(
      problem(g, params(1.5, 3.0, 0.5), [](const Point& p) { return std::sin(3 * p.x) + p.y * p.y; }, 0.2));
  const auto& rep = sol.report;
  ASSERT_FALSE(rep.step_energy_after.empty());
  for (size_t i = 0; i < rep.step_energy_after.size(); ++i) {
    const double e0 = rep.step_energy_before[i];
    EXPECT_LE(rep.step_energy_after[i], e0 + 1e-13 * (1 + std::abs(e0)));
    if (i > 0 && rep.step_stage[i] == rep.step_stage[i - 1]) {
      EXPECT_LE(rep.step_energy_after[i], rep.step_energy_after[i - 1] + 1e-13 * (1 + std::abs(e0)));
    }
  }
}

TEST(SolveDirichlet, StrictValidation) {
  auto spec = problem(Grid::rectangle(5, 5, 1.0, 1.0), params(2, 4), [](const Point&) { return 0.0; });
  EXPECT_NO_THROW(solve_dirichlet(spec));
  spec.strict_validation = true;
  try {
    solve_dirichlet(spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ExponentBoundViolated);
  }
}

TEST(SolveDirichlet, NonConvergenceCarriesReport) {
  NewtonOptions opts;
  opts.max_iterations_per_stage = 1;
  const auto spec = problem(Grid::rectangle(9, 9, 1.0, 1.0), params(1.5, 3.0),
                            [](const Point& p) { return std::sin(4 * p.x); });
  try {
    solve_dirichlet(spec, opts);
    FAIL();
  } catch (const SolveFailure& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonConvergence);
    EXPECT_FALSE(e.report().converged);
    EXPECT_FALSE(e.report().residual_history.empty());
  }
}

TEST(SolveDirichlet, ComparisonProperty) {
  std::mt19937_64 rng(12);
  const auto g = Grid::rectangle(9, 9, 1.0, 1.0);
  for (auto [p, q] : {std::pair{1.5, 1.8}, {2.5, 3.0}, {1.6, 2.4}}) {
    for (int t = 0; t < 5; ++t) {
      const TrigSeries h1(*g, rng), h2(*g, rng);
      std::vector<double> d;
      for (int k : g->boundary_nodes()) d.push_back(h1(g->node(k)) - h2(g->node(k)));
      const double shift = *std::max_element(d.begin(), d.end()) + 1e-3;
      const auto u1 = solve_dirichlet(problem(g, params(p, q), h1));
      const auto u2 = solve_dirichlet(problem(g, params(p, q), [&](const Point& x) { return h2(x) + shift; }));
      for (int k = 0; k < g->node_count(); ++k) EXPECT_LE(u1.field[k], u2.field[k] + 1e-9);
    }
  }
}

TEST(SolveDirichlet, TranslationInvariance) {
  const auto g = Grid::rectangle(9, 9, 1.0, 1.0);
  const auto bc = [](const Point& p) { return std::cos(2 * p.x) * p.y; };
  const auto u1 = solve_dirichlet(problem(g, params(1.8, 2.5), bc));
  const auto u2 = solve_dirichlet(problem(g, params(1.8, 2.5), [&](const Point& p) { return bc(p) + 1.0; }));
  for (int k = 0; k < g->node_count(); ++k) EXPECT_NEAR(u2.field[k], u1.field[k] + 1.0, 1e-9);
}

// ---------------------------------------------------------------------------

namespace {

ProblemSpec obstacle_problem(GridPtr g, DoublePhaseParams pr, ScalarFunction bc, ScalarFunction psi) {
  ProblemSpec s = problem(g, std::move(pr), std::move(bc));
  s.obstacle = interpolate(g, psi);
  return s;
}

void expect_complementarity(const ProblemSpec& spec, const Solution& sol) {
  const NodalField& psi = *spec.obstacle;
  ProblemSpec plain = spec;
  plain.obstacle.reset();
  plain.params = spec.params.with_delta(NewtonOptions{}.delta_schedule.back());
  const auto r = nodal_residual(sol.field, plain);
  const double tol_c = contact_tolerance(psi);
  for (int k : spec.grid->interior_nodes()) {
    EXPECT_GE(sol.field[k], psi[k]);
    if (sol.field[k] > psi[k] + tol_c) {
      EXPECT_LE(std::abs(r[k]), 1e-8);
    } else {
      EXPECT_GE(r[k], -1e-8);
    }
  }
}

}  // namespace

TEST(SolveObstacle, InactiveObstacleReproducesDirichlet) {
  const auto g = Grid::rectangle(17, 17, 1.0, 1.0);
  const auto bc = [](const Point& p) { return p.x + p.y * p.y; };
  const auto spec = obstacle_problem(g, params(2.5, 3.0), bc, [](const Point&) { return -10.0; });
  const auto sol = solve_obstacle(spec);
  ProblemSpec plain = spec;
  plain.obstacle.reset();
  const auto ref = solve_dirichlet(plain);
  EXPECT_EQ(sol.report.active_set_size, 0);
  EXPECT_LE(max_abs_difference(sol.field, ref.field), 1e-9);
  expect_complementarity(spec, sol);
}

TEST(SolveObstacle, TentIsReproducedExactly) {
  const auto g = Grid::line(65, 1.0);
  const auto tent = [](const Point& p) { return 1.0 - 2.0 * std::abs(p.x - 0.5); };
  const auto spec = obstacle_problem(g, params(2.5, 3.0), tent, tent);
  const auto sol = solve_obstacle(spec);
  EXPECT_LE(max_abs_difference(sol.field, *spec.obstacle), 1e-9);
  EXPECT_EQ(sol.report.active_set_size, static_cast<int>(g->interior_nodes().size()));
}

TEST(SolveObstacle, ConcaveCapWithOwnBoundaryValuesIsFullContact) {
  const auto g = Grid::line(65, 1.0);
  const auto psi = [](const Point& p) { return 0.5 - 2.0 * (p.x - 0.5) * (p.x - 0.5); };
  const auto spec = obstacle_problem(g, params(2, 2, 0.0), psi, psi);
  const auto sol = solve_obstacle(spec);
  EXPECT_LE(max_abs_difference(sol.field, *spec.obstacle), 1e-12);
  expect_complementarity(spec, sol);
}

TEST(SolveObstacle, TangencyOracle) {
  // psi = 1/2 - 8 (x - 1/2)^2 with zero data: straight segments from the ends,
  // tangent to psi at t = 1/2 - (1 - sqrt(3)/2)/2.
  const auto g = Grid::line(129, 1.0);
  const auto psi = [](const Point& p) { return 0.5 - 8.0 * (p.x - 0.5) * (p.x - 0.5); };
  const auto spec = obstacle_problem(g, params(2, 2, 0.0), [](const Point&) { return 0.0; }, psi);
  const auto sol = solve_obstacle(spec);
  const double t = 0.5 - (1.0 - std::sqrt(3.0) / 2.0) / 2.0;
  const double slope = psi({t, 0}) / t;
  const auto exact = [&](const Point& p) {
    const double x = std::min(p.x, 1.0 - p.x);
    return x <= t ? slope * x : psi({x, 0});
  };
  EXPECT_LE(max_nodal_error(sol.field, exact), 2e-3);
  const double h = g->hx();
  for (int k : g->interior_nodes()) {
    const double x = g->node(k).x;
    const bool contact = sol.field[k] <= (*spec.obstacle)[k] + contact_tolerance(*spec.obstacle);
    if (x > t + 2 * h && x < 1 - t - 2 * h) EXPECT_TRUE(contact) << x;
    if (x < t - 2 * h || x > 1 - t + 2 * h) EXPECT_FALSE(contact) << x;
  }
  expect_complementarity(spec, sol);
}

TEST(SolveObstacle, ComplementarityOnDoublePhase2D) {
  const auto g = Grid::rectangle(17, 17, 1.0, 1.0);
  const auto spec = obstacle_problem(g, params(1.6, 2.4, 1.0), [](const Point&) { return 0.0; },
                                     [](const Point& p) { return 0.3 - 3 * ((p.x - .5) * (p.x - .5) + (p.y - .4) * (p.y - .4)); });
  const auto sol = solve_obstacle(spec);
  EXPECT_GT(sol.report.active_set_size, 0);
  expect_complementarity(spec, sol);
}

TEST(SolveObstacle, InfeasibleObstacle) {
  const auto g = Grid::line(9, 1.0);
  const auto spec = obstacle_problem(g, params(2, 2), [](const Point&) { return 0.0; },
                                     [](const Point&) { return 0.5; });
  try {
    solve_obstacle(spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InfeasibleObstacle);
  }
}

TEST(SolveObstacle, LargerObstacleLargerSolution) {
  const auto g = Grid::rectangle(13, 13, 1.0, 1.0);
  const auto base = [](const Point& p) { return 0.2 - 2 * ((p.x - .5) * (p.x - .5) + (p.y - .5) * (p.y - .5)); };
  const auto s1 = solve_obstacle(obstacle_problem(g, params(2.2, 2.8), [](const Point&) { return 0.0; }, base));
  const auto s2 = solve_obstacle(obstacle_problem(g, params(2.2, 2.8), [](const Point&) { return 0.0; },
                                                  [&](const Point& p) { return base(p) + 0.05 * p.x * (1 - p.x); }));
  for (int k = 0; k < g->node_count(); ++k) EXPECT_LE(s1.field[k], s2.field[k] + 1e-9);
}

TEST(ApproximationSequence, ConstantTarget) {
  const auto g = Grid::rectangle(9, 9, 1.0, 1.0);
  const auto spec = problem(g, params(1.8, 2.5), [](const Point&) { return 0.7; });
  const auto seq = approximation_sequence(spec, [](const Point&) { return 0.7; }, 3);
  ASSERT_EQ(seq.size(), 3u);
  for (const auto& lvl : seq) {
    for (int k = 0; k < g->node_count(); ++k) {
      EXPECT_DOUBLE_EQ(lvl.obstacle[k], 0.7);
      EXPECT_NEAR(lvl.solution[k], 0.7, 1e-12);
    }
  }
}

TEST(ApproximationSequence, SingleLevelIsOneObstacleSolve) {
  const auto g = Grid::rectangle(9, 9, 1.0, 1.0);
  const auto target = [](const Point& p) { return std::sin(3 * p.x) * std::cos(2 * p.y); };
  const auto spec = problem(g, params(2.0, 2.5), target);
  const auto seq = approximation_sequence(spec, target, 1);
  ASSERT_EQ(seq.size(), 1u);
  ProblemSpec direct{g, spec.params, BoundaryData::from_field(seq[0].obstacle), 0.0, seq[0].obstacle, false};
  EXPECT_LE(max_abs_difference(seq[0].solution, solve_obstacle(direct).field), 1e-14);
}

TEST(ApproximationSequence, MonotoneBelowSolvedTarget) {
  // P1 comparison needs an isotropic linearization in 2D; 1D holds for all exponents
  struct Case {
    GridPtr g;
    double p, q;
  };
  const std::vector<Case> cases = {{Grid::rectangle(13, 13, 1.0, 1.0), 2.0, 2.0},
                                   {Grid::rectangle(13, 13, 1.0, 1.0), 1.5, 1.8},
                                   {Grid::line(65, 1.0), 1.8, 2.5},
                                   {Grid::line(65, 1.0), 2.5, 3.0}};
  for (const auto& c : cases) {
    const auto& g = c.g;
    const auto pr = params(c.p, c.q, 1.0);
    const auto ref = solve_dirichlet(problem(g, pr, [](const Point& p) { return p.x * p.x - p.y + std::sin(2 * p.y); }));
    const NodalField target = ref.field;
    const auto closure = [&](const Point& x) {
      const int i = static_cast<int>(std::lround((x.x - g->ox()) / g->hx()));
      const int j = g->dim() == 2 ? static_cast<int>(std::lround((x.y - g->oy()) / g->hy())) : 0;
      return target[g->index(i, j)];
    };
    const auto seq = approximation_sequence(problem(g, pr, closure), closure, 4);
    for (size_t j = 0; j < seq.size(); ++j) {
      for (int k = 0; k < g->node_count(); ++k) {
        EXPECT_LE(seq[j].obstacle[k], target[k]);
        EXPECT_LE(seq[j].solution[k], target[k] + 1e-9) << "p=" << c.p << " q=" << c.q << " level " << j;
        if (j > 0) {
          EXPECT_LE(seq[j - 1].obstacle[k], seq[j].obstacle[k]);
          EXPECT_LE(seq[j - 1].solution[k], seq[j].solution[k] + 1e-9) << "p=" << c.p << " q=" << c.q;
        }
      }
    }
  }
}

TEST(InfConvolution, EnvelopeProperties) {
  const auto g = Grid::line(33, 1.0);
  const auto f = interpolate(g, [](const Point& p) { return std::abs(p.x - 0.3) + std::sin(9 * p.x); });
  NodalField prev = inf_convolution(f, 1.0);
  for (double lam : {0.1, 0.01, 1e-3, 1e-6}) {
    const NodalField cur = inf_convolution(f, lam);
    for (int k = 0; k < g->node_count(); ++k) {
      EXPECT_LE(cur[k], f[k]);
      EXPECT_LE(prev[k], cur[k]);
    }
    prev = cur;
  }
  EXPECT_EQ(max_abs_difference(prev, f), 0.0);  // lambda below h^2/2 leaves nodal data untouched
}
