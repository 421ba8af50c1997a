#pragma once

// Modular rho_H(u) = int |u|^p + a(x)|u|^q dx, its gradient counterpart, and
// the Luxemburg norm inf{lambda > 0 : rho_H(u / lambda) <= 1}. Quadrature is
// the one-point barycentric rule on each element.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "dphase/errors.hpp"
#include "dphase/mesh.hpp"
#include "dphase/operator_core.hpp"

namespace dphase {

struct ModularValue {
  double value = 0.0;
};

enum class NormTarget { Values, Gradient };

/// Optional per-element restriction (1 = include). Empty means the whole grid.
using ElementMask = std::vector<char>;

namespace detail {

// Per-element magnitudes |u| (or |Du|) at the barycenter, with measure and a.
struct ModularSamples {
  std::vector<double> magnitude;
  std::vector<double> measure;
  std::vector<double> coeff;
  double p = 2.0, q = 2.0;

  double eval(double scale) const {
    double sum = 0.0;
    for (size_t e = 0; e < magnitude.size(); ++e) {
      const double s = magnitude[e] * scale;
      if (s == 0.0) continue;
      sum += measure[e] * (std::pow(s, p) + coeff[e] * std::pow(s, q));
    }
    return sum;
  }
};

inline ModularSamples sample(const NodalField& field, const DoublePhaseParams& params, NormTarget target,
                             const ElementMask& mask) {
  const Grid& g = field.grid();
  const auto& elems = g.elements();
  if (!mask.empty() && mask.size() != elems.size()) {
    throw Error(ErrorCode::GridMismatch, "element mask does not match the grid");
  }
  ModularSamples s;
  s.p = params.p;
  s.q = params.q;
  for (size_t e = 0; e < elems.size(); ++e) {
    if (!mask.empty() && !mask[e]) continue;
    const Element& el = elems[e];
    double mag = 0.0;
    if (target == NormTarget::Values) {
      double avg = 0.0;
      for (int k = 0; k < el.count; ++k) avg += field[el.nodes[k]];
      mag = std::abs(avg / el.count);
    } else {
      mag = p1_gradient(field, el).norm();
    }
    s.magnitude.push_back(mag);
    s.measure.push_back(el.measure);
    s.coeff.push_back(params.coeff.value(el.barycenter));
  }
  return s;
}

}  // namespace detail

inline ModularValue modular(const NodalField& field, const DoublePhaseParams& params, const ElementMask& mask = {}) {
  return {detail::sample(field, params, NormTarget::Values, mask).eval(1.0)};
}

inline ModularValue gradient_modular(const NodalField& field, const DoublePhaseParams& params,
                                     const ElementMask& mask = {}) {
  return {detail::sample(field, params, NormTarget::Gradient, mask).eval(1.0)};
}

/// Bisection on lambda: bracket from lambda = 1 by doubling/halving, then
/// bisect until |rho(u/lambda) - 1| <= 1e-12 or 200 steps.
inline double luxemburg_norm(const NodalField& field, const DoublePhaseParams& params, NormTarget which,
                             const ElementMask& mask = {}) {
  const auto s = detail::sample(field, params, which, mask);
  if (s.eval(1.0) == 0.0) return 0.0;
  auto rho = [&](double lambda) { return s.eval(1.0 / lambda); };

  double lo = 1.0, hi = 1.0;
  int doublings = 0;
  if (rho(1.0) > 1.0) {
    while (rho(hi) > 1.0) {
      lo = hi;
      hi *= 2.0;
      if (++doublings > 200 || !std::isfinite(hi)) {
        throw Error(ErrorCode::NonConvergence, "Luxemburg bracket not found (non-finite input?)");
      }
    }
  } else {
    while (rho(lo) < 1.0) {
      hi = lo;
      lo *= 0.5;
      if (++doublings > 200 || lo == 0.0) {
        throw Error(ErrorCode::NonConvergence, "Luxemburg bracket not found (non-finite input?)");
      }
    }
  }
  // rho(lo) >= 1 >= rho(hi)
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double r = rho(mid);
    if (std::abs(r - 1.0) <= 1e-12) break;
    (r > 1.0 ? lo : hi) = mid;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
  }
  return mid;
}

struct NormModularBounds {
  bool lower_ok = true;
  bool upper_ok = true;
  double norm = 0.0;
  double modular = 0.0;
};

/// min{|u|^p, |u|^q} <= rho_H(u) <= max{|u|^p, |u|^q}, relative slack 1e-9.
inline NormModularBounds norm_modular_bounds_check(const NodalField& field, const DoublePhaseParams& params) {
  NormModularBounds out;
  out.modular = modular(field, params).value;
  out.norm = luxemburg_norm(field, params, NormTarget::Values);
  const double a = std::pow(out.norm, params.p), b = std::pow(out.norm, params.q);
  const double lo = std::min(a, b), hi = std::max(a, b);
  const double slack = 1e-9 * std::max(out.modular, hi);
  out.lower_ok = lo <= out.modular + slack;
  out.upper_ok = out.modular <= hi + slack;
  return out;
}

/// |u|_{L^H} / |Du|_{L^H} for a field vanishing on the boundary; 0 for the zero field.
inline double poincare_ratio(const NodalField& field, const DoublePhaseParams& params) {
  const Grid& g = field.grid();
  for (int k : g.boundary_nodes()) {
    if (field[k] != 0.0) throw Error(ErrorCode::PreconditionViolated, "field must vanish on the boundary");
  }
  const double grad_norm = luxemburg_norm(field, params, NormTarget::Gradient);
  if (grad_norm == 0.0) return 0.0;
  return luxemburg_norm(field, params, NormTarget::Values) / grad_norm;
}

/// Elements whose nodes all lie at index depth >= min_depth.
inline ElementMask interior_element_mask(const Grid& grid, int min_depth) {
  ElementMask mask(grid.elements().size(), 0);
  for (size_t e = 0; e < mask.size(); ++e) {
    const Element& el = grid.elements()[e];
    bool inside = true;
    for (int k = 0; k < el.count; ++k) inside = inside && grid.depth(el.nodes[k]) >= min_depth;
    mask[e] = inside;
  }
  return mask;
}

}  // namespace dphase
