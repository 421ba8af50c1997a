#pragma once

#include <array>
#include <cassert>
#include <cmath>

namespace dphase {

/// Physical location. In 1D the y coordinate is ignored and kept at 0.
struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Vector in R^n, n in {1, 2}. Used for gradients and fluxes.
class GradVec {
 public:
  constexpr GradVec() = default;
  constexpr explicit GradVec(double x) : c_{x, 0.0}, dim_(1) {}
  constexpr GradVec(double x, double y) : c_{x, y}, dim_(2) {}

  static constexpr GradVec zero(int dim) { return dim == 1 ? GradVec(0.0) : GradVec(0.0, 0.0); }

  constexpr int dim() const { return dim_; }
  constexpr double operator[](int i) const { return c_[i]; }
  constexpr double& operator[](int i) { return c_[i]; }

  double dot(const GradVec& o) const {
    assert(dim_ == o.dim_);
    return c_[0] * o.c_[0] + (dim_ == 2 ? c_[1] * o.c_[1] : 0.0);
  }
  double squared_norm() const { return dot(*this); }
  double norm() const { return std::sqrt(squared_norm()); }

  GradVec& operator+=(const GradVec& o) {
    c_[0] += o.c_[0];
    c_[1] += o.c_[1];
    return *this;
  }
  GradVec& operator-=(const GradVec& o) {
    c_[0] -= o.c_[0];
    c_[1] -= o.c_[1];
    return *this;
  }
  GradVec& operator*=(double s) {
    c_[0] *= s;
    c_[1] *= s;
    return *this;
  }

  friend GradVec operator+(GradVec a, const GradVec& b) { return a += b; }
  friend GradVec operator-(GradVec a, const GradVec& b) { return a -= b; }
  friend GradVec operator*(double s, GradVec a) { return a *= s; }
  friend GradVec operator*(GradVec a, double s) { return a *= s; }
  friend GradVec operator-(GradVec a) { return a *= -1.0; }

  bool is_finite() const { return std::isfinite(c_[0]) && std::isfinite(c_[1]); }

 private:
  std::array<double, 2> c_{0.0, 0.0};
  int dim_ = 2;
};

/// Symmetric n x n matrix, n in {1, 2}; stores (0,0), (1,1), (0,1).
class SymMat {
 public:
  constexpr SymMat() = default;
  constexpr explicit SymMat(double a00) : a00_(a00), dim_(1) {}
  constexpr SymMat(double a00, double a11, double a01) : a00_(a00), a11_(a11), a01_(a01), dim_(2) {}

  static constexpr SymMat identity(int dim) { return dim == 1 ? SymMat(1.0) : SymMat(1.0, 1.0, 0.0); }
  static constexpr SymMat zero(int dim) { return dim == 1 ? SymMat(0.0) : SymMat(0.0, 0.0, 0.0); }
  /// v v^T
  static SymMat outer(const GradVec& v) {
    return v.dim() == 1 ? SymMat(v[0] * v[0]) : SymMat(v[0] * v[0], v[1] * v[1], v[0] * v[1]);
  }

  constexpr int dim() const { return dim_; }
  double operator()(int i, int j) const {
    if (i == 0 && j == 0) return a00_;
    if (i == 1 && j == 1) return a11_;
    return a01_;
  }

  double trace() const { return dim_ == 1 ? a00_ : a00_ + a11_; }

  GradVec apply(const GradVec& v) const {
    if (dim_ == 1) return GradVec(a00_ * v[0]);
    return GradVec(a00_ * v[0] + a01_ * v[1], a01_ * v[0] + a11_ * v[1]);
  }
  double quadratic_form(const GradVec& v) const { return apply(v).dot(v); }

  /// Smallest eigenvalue; used by ordering checks on random matrices.
  double min_eigenvalue() const {
    if (dim_ == 1) return a00_;
    const double mean = 0.5 * (a00_ + a11_);
    const double rad = std::hypot(0.5 * (a00_ - a11_), a01_);
    return mean - rad;
  }

  SymMat& operator+=(const SymMat& o) {
    a00_ += o.a00_;
    a11_ += o.a11_;
    a01_ += o.a01_;
    return *this;
  }
  SymMat& operator*=(double s) {
    a00_ *= s;
    a11_ *= s;
    a01_ *= s;
    return *this;
  }
  friend SymMat operator+(SymMat a, const SymMat& b) { return a += b; }
  friend SymMat operator*(double s, SymMat a) { return a *= s; }

 private:
  double a00_ = 0.0;
  double a11_ = 0.0;
  double a01_ = 0.0;
  int dim_ = 2;
};

inline GradVec to_vec(const Point& p, int dim) { return dim == 1 ? GradVec(p.x) : GradVec(p.x, p.y); }
inline Point to_point(const GradVec& v) { return v.dim() == 1 ? Point{v[0], 0.0} : Point{v[0], v[1]}; }

inline double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace dphase
