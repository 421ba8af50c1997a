#pragma once

// Constitutive law of the double-phase equation
//
//   -div( |Du|^{p-2} Du + a(x) |Du|^{q-2} Du ) = eps
//
// H(x, xi) = |xi|^p + a(x) |xi|^q is the measurement density, A(x, xi) the
// flux. The solver-side flux replaces |xi| by m = sqrt(|xi|^2 + delta^2).

#include <cmath>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <utility>

#include "dphase/errors.hpp"
#include "dphase/small_linalg.hpp"

namespace dphase {

/// Nonnegative coefficient a(x), either constant or given analytically
/// together with its gradient.
class CoefficientField {
 public:
  using ValueFn = std::function<double(const Point&)>;
  using GradientFn = std::function<GradVec(const Point&, int dim)>;

  static CoefficientField constant(double a0) {
    if (!(a0 >= 0.0) || !std::isfinite(a0)) {
      throw Error(ErrorCode::InvalidParams, "a(x) >= 0 violated by constant coefficient " + std::to_string(a0));
    }
    CoefficientField f;
    f.a0_ = a0;
    return f;
  }

  static CoefficientField analytic(ValueFn value, GradientFn gradient) {
    CoefficientField f;
    f.value_ = std::move(value);
    f.gradient_ = std::move(gradient);
    return f;
  }

  bool is_constant() const { return !value_; }
  bool has_gradient() const { return is_constant() || static_cast<bool>(gradient_); }
  double constant_value() const { return a0_; }

  double value(const Point& x) const {
    if (is_constant()) return a0_;
    const double a = value_(x);
    if (!(a >= 0.0) || !std::isfinite(a)) {
      std::ostringstream os;
      os << "a(x) >= 0 violated: a(" << x.x << ", " << x.y << ") = " << a;
      throw Error(ErrorCode::InvalidParams, os.str());
    }
    return a;
  }

  GradVec gradient(const Point& x, int dim) const {
    if (is_constant()) return GradVec::zero(dim);
    if (!gradient_) throw Error(ErrorCode::InvalidParams, "coefficient gradient requested but not supplied");
    return gradient_(x, dim);
  }

 private:
  CoefficientField() = default;
  double a0_ = 0.0;
  ValueFn value_;
  GradientFn gradient_;
};

/// Exponents, Hoelder exponent, coefficient and flux regularization.
struct DoublePhaseParams {
  double p = 2.0;
  double q = 2.0;
  double alpha = 1.0;
  CoefficientField coeff = CoefficientField::constant(0.0);
  double delta = 0.0;

  DoublePhaseParams(double p_, double q_, double alpha_, CoefficientField coeff_, double delta_ = 0.0)
      : p(p_), q(q_), alpha(alpha_), coeff(std::move(coeff_)), delta(delta_) {
    validate();
  }

  void validate() const {
    if (!(p > 1.0) || !(p <= q) || !std::isfinite(q)) {
      throw Error(ErrorCode::InvalidParams, "exponents must satisfy 1 < p <= q < inf (p=" + std::to_string(p) +
                                                ", q=" + std::to_string(q) + ")");
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) {
      throw Error(ErrorCode::InvalidParams, "Hoelder exponent alpha must lie in (0, 1]");
    }
    if (!(delta >= 0.0) || !std::isfinite(delta)) {
      throw Error(ErrorCode::InvalidParams, "delta must be >= 0");
    }
  }

  DoublePhaseParams with_delta(double d) const {
    DoublePhaseParams out = *this;
    out.delta = d;
    out.validate();
    return out;
  }
};

enum class ExponentMode { Standard, RegularizedLimit };

struct ExponentVerdict {
  bool ok = true;
  double ratio = 1.0;  // q/p
  double bound = 0.0;  // tightest bound applied
  std::string explanation;
};

/// Gap condition q/p <= 1 + alpha/n; the regularized-limit mode also needs q/p <= p.
inline ExponentVerdict validate_exponents(const DoublePhaseParams& params, int n, ExponentMode mode) {
  ExponentVerdict v;
  v.ratio = params.q / params.p;
  const double gap_bound = 1.0 + params.alpha / n;
  v.bound = gap_bound;
  std::ostringstream os;
  if (v.ratio > gap_bound) {
    v.ok = false;
    os << "q/p = " << v.ratio << " exceeds 1 + alpha/n = " << gap_bound;
  }
  if (mode == ExponentMode::RegularizedLimit) {
    v.bound = std::min(gap_bound, params.p);
    if (v.ratio > params.p) {
      if (!v.ok) os << "; ";
      v.ok = false;
      os << "q/p = " << v.ratio << " exceeds p = " << params.p;
    }
  }
  if (v.ok) os << "q/p = " << v.ratio << " <= " << v.bound;
  v.explanation = os.str();
  return v;
}

/// |xi|^p + a(x)|xi|^q, never regularized.
inline double h_eval(const DoublePhaseParams& params, double a, double xi_norm) {
  return std::pow(xi_norm, params.p) + a * std::pow(xi_norm, params.q);
}
inline double h_eval(const DoublePhaseParams& params, const Point& x, const GradVec& xi) {
  return h_eval(params, params.coeff.value(x), xi.norm());
}

namespace detail {

// m^{e} for the regularized modulus, with the continuous extension at m = 0.
inline double modulus_power(double m, double e) {
  if (m > 0.0) return std::pow(m, e);
  if (e > 0.0) return 0.0;
  if (e == 0.0) return 1.0;
  return INFINITY;
}

}  // namespace detail

/// Scalar flux magnitude factor: A(x, xi) = flux_factor * xi.
inline double flux_factor(const DoublePhaseParams& params, double a, double xi_norm) {
  const double m = std::sqrt(xi_norm * xi_norm + params.delta * params.delta);
  if (m == 0.0) return 0.0;  // only reached with xi = 0, where A = 0 by continuity
  return std::pow(m, params.p - 2.0) + a * std::pow(m, params.q - 2.0);
}

inline GradVec a_flux(const DoublePhaseParams& params, double a, const GradVec& xi) {
  return flux_factor(params, a, xi.norm()) * xi;
}
inline GradVec a_flux(const DoublePhaseParams& params, const Point& x, const GradVec& xi) {
  return a_flux(params, params.coeff.value(x), xi);
}

/// Energy density (1/p) m^p + (a/q) m^q whose xi-gradient is a_flux.
inline double energy_density(const DoublePhaseParams& params, double a, double xi_norm) {
  const double m = std::sqrt(xi_norm * xi_norm + params.delta * params.delta);
  return std::pow(m, params.p) / params.p + a * std::pow(m, params.q) / params.q;
}

/// dA/dxi = m^{p-2}(I + (p-2) xi xi^T / m^2) + a m^{q-2}(I + (q-2) xi xi^T / m^2).
inline SymMat a_flux_jacobian(const DoublePhaseParams& params, double a, const GradVec& xi) {
  const int n = xi.dim();
  const double m2 = xi.squared_norm() + params.delta * params.delta;
  if (m2 == 0.0) {
    if (params.p < 2.0 || (a > 0.0 && params.q < 2.0)) {
      throw Error(ErrorCode::SingularJacobian, "flux Jacobian unbounded at xi = 0 with delta = 0 and p < 2");
    }
    // Degenerate (p > 2) terms vanish; p = 2 or q = 2 contribute the identity.
    double diag = (params.p == 2.0 ? 1.0 : 0.0) + (params.q == 2.0 ? a : 0.0);
    return diag * SymMat::identity(n);
  }
  const double m = std::sqrt(m2);
  const SymMat proj = (1.0 / m2) * SymMat::outer(xi);
  auto term = [&](double e) {
    SymMat t = SymMat::identity(n);
    t += (e - 2.0) * proj;
    return std::pow(m, e - 2.0) * t;
  };
  SymMat j = term(params.p);
  if (a != 0.0) j += a * term(params.q);
  return j;
}
inline SymMat a_flux_jacobian(const DoublePhaseParams& params, const Point& x, const GradVec& xi) {
  return a_flux_jacobian(params, params.coeff.value(x), xi);
}

/// <A(x, xi1) - A(x, xi2), xi1 - xi2>, evaluated with delta = 0.
inline double monotonicity_gap(const DoublePhaseParams& params, const Point& x, const GradVec& xi1,
                               const GradVec& xi2) {
  if (params.delta != 0.0) {
    throw Error(ErrorCode::PreconditionViolated, "monotonicity_gap is defined for delta = 0");
  }
  const double a = params.coeff.value(x);
  return (a_flux(params, a, xi1) - a_flux(params, a, xi2)).dot(xi1 - xi2);
}

struct VectorInequality {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = true;
};

/// | |xi1|^{t-2} xi1 - |xi2|^{t-2} xi2 | against
///   (t-1)|xi1 - xi2|(|xi1|^{t-2} + |xi2|^{t-2})   for t >= 2,
///   2^{2-t} |xi1 - xi2|^{t-1}                      for 1 < t < 2.
inline VectorInequality vector_inequality_check(double t, const GradVec& xi1, const GradVec& xi2) {
  if (!(t > 1.0)) throw Error(ErrorCode::InvalidExponent, "vector inequality needs t > 1");
  auto power_map = [t](const GradVec& v) {
    const double r = v.norm();
    return r == 0.0 ? GradVec::zero(v.dim()) : std::pow(r, t - 2.0) * v;
  };
  VectorInequality out;
  out.lhs = (power_map(xi1) - power_map(xi2)).norm();
  const double diff = (xi1 - xi2).norm();
  if (t >= 2.0) {
    out.rhs = (t - 1.0) * diff *
              (detail::modulus_power(xi1.norm(), t - 2.0) + detail::modulus_power(xi2.norm(), t - 2.0));
  } else {
    out.rhs = std::pow(2.0, 2.0 - t) * std::pow(diff, t - 1.0);
  }
  out.holds = out.lhs <= out.rhs * (1.0 + 1e-12);
  return out;
}

}  // namespace dphase
