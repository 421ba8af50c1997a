#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dphase/operator_core.hpp"

using namespace dphase;

namespace {

DoublePhaseParams params(double p, double q, double a = 1.0, double alpha = 1.0, double delta = 0.0) {
  return DoublePhaseParams(p, q, alpha, CoefficientField::constant(a), delta);
}

GradVec random_vec(std::mt19937_64& rng, int dim, double scale = 2.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return dim == 1 ? GradVec(u(rng)) : GradVec(u(rng), u(rng));
}

}  // namespace

TEST(Params, RejectsInvalidExponents) {
  EXPECT_THROW(params(1.0, 2.0), Error);
  EXPECT_THROW(params(3.0, 2.0), Error);
  EXPECT_THROW(params(2.0, 2.0, 1.0, 0.0), Error);
  EXPECT_THROW(params(2.0, 2.0, 1.0, 1.5), Error);
  EXPECT_THROW(params(2.0, 2.0, 1.0, 1.0, -1.0), Error);
  EXPECT_NO_THROW(params(1.01, 1.01));
}

TEST(Params, NegativeCoefficientRejected) {
  try {
    CoefficientField::constant(-0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidParams);
    EXPECT_NE(std::string(e.what()).find("a(x) >= 0"), std::string::npos);
  }
  auto f = CoefficientField::analytic([](const Point& x) { return x.x - 0.5; }, nullptr);
  EXPECT_THROW(f.value({0.0, 0.0}), Error);
  EXPECT_DOUBLE_EQ(f.value({1.0, 0.0}), 0.5);
}

TEST(ValidateExponents, Examples) {
  auto v = validate_exponents(params(2.0, 2.5), 2, ExponentMode::Standard);
  EXPECT_TRUE(v.ok);
  EXPECT_DOUBLE_EQ(v.ratio, 1.25);

  for (auto mode : {ExponentMode::Standard, ExponentMode::RegularizedLimit}) {
    for (int n : {1, 2, 3}) {
      EXPECT_TRUE(validate_exponents(params(1.3, 1.3, 1.0, 0.1), n, mode).ok);
    }
  }
  v = validate_exponents(params(2.0, 4.0), 3, ExponentMode::Standard);
  EXPECT_FALSE(v.ok);
  EXPECT_FALSE(v.explanation.empty());
}

TEST(ValidateExponents, RegularizedLimitAddsPBound) {
  // q/p = 1.4 <= 1 + 1/2 but > p = 1.2
  const auto p = params(1.2, 1.68);
  EXPECT_TRUE(validate_exponents(p, 2, ExponentMode::Standard).ok);
  const auto v = validate_exponents(p, 2, ExponentMode::RegularizedLimit);
  EXPECT_FALSE(v.ok);
  EXPECT_NE(v.explanation.find("p"), std::string::npos);
}

TEST(HEval, Examples) {
  EXPECT_EQ(h_eval(params(2, 4), Point{}, GradVec(0.0, 0.0)), 0.0);
  EXPECT_DOUBLE_EQ(h_eval(params(2, 4), Point{}, GradVec(1.0, 0.0)), 2.0);
  EXPECT_DOUBLE_EQ(h_eval(params(3, 3, 0.5), Point{}, GradVec(0.0, 2.0)), 12.0);
}

TEST(HEval, IgnoresDelta) {
  const auto p = params(2.5, 3.0, 1.0, 1.0, 0.3);
  EXPECT_DOUBLE_EQ(h_eval(p, Point{}, GradVec(1.0)), 2.0);
}

TEST(AFlux, Examples) {
  const GradVec z = a_flux(params(1.5, 1.8), Point{}, GradVec(0.0, 0.0));
  EXPECT_EQ(z[0], 0.0);
  EXPECT_EQ(z[1], 0.0);

  const GradVec xi(0.3, -1.7);
  const GradVec lin = a_flux(params(2, 2, 0.0), Point{}, xi);
  EXPECT_DOUBLE_EQ(lin[0], 0.3);
  EXPECT_DOUBLE_EQ(lin[1], -1.7);

  const GradVec v = a_flux(params(2, 4), Point{}, GradVec(1.0, 0.0));
  EXPECT_DOUBLE_EQ(v[0], 2.0);
  EXPECT_DOUBLE_EQ(v[1], 0.0);
}

TEST(AFlux, OddAndPairsToH) {
  std::mt19937_64 rng(7);
  for (auto [p, q] : {std::pair{1.5, 1.8}, {2.0, 3.0}, {1.5, 3.0}}) {
    const auto pr = params(p, q, 0.7);
    for (int k = 0; k < 1000; ++k) {
      const GradVec xi = random_vec(rng, 2);
      const GradVec f = a_flux(pr, Point{}, xi), g = a_flux(pr, Point{}, -1.0 * xi);
      EXPECT_NEAR(f[0], -g[0], 1e-15 * (1 + std::abs(f[0])));
      EXPECT_NEAR(f[1], -g[1], 1e-15 * (1 + std::abs(f[1])));
      const double h = h_eval(pr, Point{}, xi);
      EXPECT_NEAR(f.dot(xi), h, 1e-12 * (1 + h));
    }
  }
}

TEST(Jacobian, Examples) {
  const SymMat id = a_flux_jacobian(params(2, 2, 0.0), Point{}, GradVec(0.4, 0.9));
  EXPECT_DOUBLE_EQ(id(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(id(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(id(0, 1), 0.0);

  const SymMat j = a_flux_jacobian(params(4, 4, 0.0), Point{}, GradVec(1.0, 0.0));
  EXPECT_DOUBLE_EQ(j(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(j(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(j(0, 1), 0.0);
}

TEST(Jacobian, SingularAtZeroForSubquadratic) {
  try {
    a_flux_jacobian(params(1.5, 2.0), Point{}, GradVec(0.0, 0.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularJacobian);
  }
  EXPECT_NO_THROW(a_flux_jacobian(params(1.5, 2.0, 1.0, 1.0, 1e-3), Point{}, GradVec(0.0, 0.0)));
}

TEST(Jacobian, PositiveDefiniteWithDelta) {
  std::mt19937_64 rng(3);
  for (auto [p, q] : {std::pair{1.2, 1.5}, {2.0, 4.0}, {1.5, 3.0}}) {
    const auto pr = params(p, q, 0.5, 1.0, 1e-4);
    for (int k = 0; k < 200; ++k) EXPECT_GT(a_flux_jacobian(pr, Point{}, random_vec(rng, 2)).min_eigenvalue(), 0.0);
  }
}

TEST(Jacobian, MatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ex(1.1, 4.0), coef(0.0, 2.0), del(0.0, 0.1);
  int checked = 0;
  while (checked < 1000) {
    double p = ex(rng), q = ex(rng);
    if (p > q) std::swap(p, q);
    const int dim = 1 + checked % 2;
    const auto pr = params(p, q, coef(rng), 1.0, checked % 3 == 0 ? 0.0 : del(rng));
    GradVec xi = random_vec(rng, dim);
    if (xi.norm() < 0.05) continue;
    const SymMat j = a_flux_jacobian(pr, Point{}, xi);
    const double h = 1e-6 * std::max(1.0, xi.norm());
    double scale = 0.0;
    for (int r = 0; r < dim; ++r) {
      for (int c = 0; c < dim; ++c) scale = std::max(scale, std::abs(j(r, c)));
    }
    for (int c = 0; c < dim; ++c) {
      GradVec e = GradVec::zero(dim);
      e = dim == 1 ? GradVec(h) : (c == 0 ? GradVec(h, 0.0) : GradVec(0.0, h));
      const GradVec fp = a_flux(pr, Point{}, xi + e), fm = a_flux(pr, Point{}, xi - e);
      for (int r = 0; r < dim; ++r) {
        const double fd = (fp[r] - fm[r]) / (2 * h);
        EXPECT_NEAR(j(r, c), fd, 1e-6 * scale) << "p=" << p << " q=" << q;
      }
    }
    ++checked;
  }
}

TEST(MonotonicityGap, Examples) {
  const auto pr = params(1.5, 3.0);
  const GradVec xi(0.2, 0.5);
  EXPECT_EQ(monotonicity_gap(pr, Point{}, xi, xi), 0.0);
  const GradVec a(1.0, 2.0), b(-0.5, 0.25);
  EXPECT_NEAR(monotonicity_gap(params(2, 2, 0.0), Point{}, a, b), (a - b).squared_norm(), 1e-14);
  EXPECT_THROW(monotonicity_gap(params(2, 2, 0.0, 1.0, 0.1), Point{}, a, b), Error);
}

TEST(MonotonicityGap, StrictlyPositiveInEveryRegime) {
  std::mt19937_64 rng(5);
  for (auto [p, q] : {std::pair{1.5, 1.8}, {2.0, 3.0}, {1.5, 3.0}}) {
    const auto pr = params(p, q, 0.8);
    int bad = 0;
    for (int k = 0; k < 100000; ++k) {
      const GradVec a = random_vec(rng, 2), b = random_vec(rng, 2);
      if (a[0] == b[0] && a[1] == b[1]) continue;
      if (!(monotonicity_gap(pr, Point{}, a, b) > 0.0)) ++bad;
    }
    EXPECT_EQ(bad, 0) << "p=" << p << " q=" << q;
  }
}

TEST(VectorInequality, Examples) {
  auto r = vector_inequality_check(2.5, GradVec(0.3, 0.1), GradVec(0.3, 0.1));
  EXPECT_EQ(r.lhs, 0.0);
  EXPECT_TRUE(r.holds);

  r = vector_inequality_check(3.0, GradVec(1.0, 0.0), GradVec(0.0, 0.0));
  EXPECT_DOUBLE_EQ(r.lhs, 1.0);
  EXPECT_DOUBLE_EQ(r.rhs, 2.0);
  EXPECT_TRUE(r.holds);
}

TEST(VectorInequality, HoldsOnRandomPairs) {
  std::mt19937_64 rng(17);
  for (double t : {1.2, 1.5, 2.0, 3.0, 4.0}) {
    int bad = 0;
    for (int k = 0; k < 100000; ++k) {
      if (!vector_inequality_check(t, random_vec(rng, 2), random_vec(rng, 2)).holds) ++bad;
    }
    EXPECT_EQ(bad, 0) << "t=" << t;
  }
}
