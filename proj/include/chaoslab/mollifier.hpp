#pragma once

// The interaction mollifier V(x) = c_d (1 - (2|x|)^2)^3 on {|x| < 1/2} and its
// rescalings V^N(x) = N^beta V(N^{beta/d} x).
//
// V has a triple zero on the boundary of its support, so it is exactly C^2 on
// R^d, nonnegative and of unit mass. All radial integrals of V reduce to
// moments of (1 - s^2)^p s^r on [0, 1], which are evaluated in closed form.

#include <cmath>
#include <span>
#include <string>

#include "chaoslab/errors.hpp"
#include "chaoslab/torus.hpp"

namespace chaoslab {

namespace detail {

// Surface area of the unit sphere in R^d.
inline double sphere_area(int d) { return 2.0 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d); }

// int_0^1 (1 - s^2)^p s^r ds = B((r + 1) / 2, p + 1) / 2.
// Integer p uses the binomial expansion sum_j C(p, j) (-1)^j / (2j + r + 1).
inline double radial_moment(double p, double r) {
  if (p == std::floor(p) && p >= 0.0 && p <= 32.0) {
    const int n = static_cast<int>(p);
    double sum = 0.0;
    double binom = 1.0;
    for (int j = 0; j <= n; ++j) {
      sum += ((j % 2) ? -binom : binom) / (2.0 * j + r + 1.0);
      binom = binom * (n - j) / (j + 1);
    }
    return sum;
  }
  return 0.5 * std::beta(0.5 * (r + 1.0), p + 1.0);
}

}  // namespace detail

class MollifierSpec {
 public:
  MollifierSpec(int dim, double beta) : dim_(dim), beta_(beta) {
    if (dim < 1 || dim > kMaxDim) throw UnsupportedDimension("mollifier dimension must be 1..3");
    if (!(beta > 0.0 && beta < 1.0))
      throw InvalidParameter("mollifier exponent beta must lie in (0, 1), got " + std::to_string(beta));
    // c_d^{-1} = |S^{d-1}| 2^{-d} int_0^1 (1 - s^2)^3 s^{d-1} ds
    normalization_ =
        1.0 / (detail::sphere_area(dim) * std::pow(2.0, -dim) * detail::radial_moment(3.0, dim - 1.0));
  }

  int dim() const { return dim_; }
  double beta() const { return beta_; }
  double normalization() const { return normalization_; }

  // Support radius of V^N.
  double radius(long n) const { return 0.5 * length_scale(n); }
  // N^{-beta/d}.
  double length_scale(long n) const { return std::pow(static_cast<double>(n), -beta_ / dim_); }

  // Resolution rule for grids carrying V^N: h <= N^{-beta/d} / 8.
  bool resolves(const PeriodicGrid& grid, long n) const {
    return grid.spacing() <= length_scale(n) / 8.0 * (1.0 + 1e-12);
  }
  void require_resolved(const PeriodicGrid& grid, long n) const {
    if (!resolves(grid, n))
      throw ResolutionError("grid spacing " + std::to_string(grid.spacing()) +
                            " exceeds N^{-beta/d}/8 = " + std::to_string(length_scale(n) / 8.0) +
                            " for N = " + std::to_string(n));
  }

  // Profile as a function of the Euclidean radius.
  double profile(double r) const {
    if (r >= 0.5) return 0.0;
    const double s = 1.0 - 4.0 * r * r;
    return normalization_ * s * s * s;
  }

  // d/dr of the profile; grad V(x) = profile_derivative(|x|) x / |x|.
  double profile_derivative(double r) const {
    if (r >= 0.5) return 0.0;
    const double s = 1.0 - 4.0 * r * r;
    return -24.0 * normalization_ * s * s * r;
  }

  // Closed-form ||grad V||_q over R^d.
  double gradient_norm_q(double q) const {
    if (!(q >= 1.0)) throw InvalidParameter("gradient_norm_q: q must be >= 1");
    // |grad V| = 24 c_d (1 - 4r^2)^2 r; substitute s = 2r.
    const double integral = std::pow(24.0 * normalization_, q) * detail::sphere_area(dim_) *
                            std::pow(2.0, -(q + dim_)) * detail::radial_moment(2.0 * q, q + dim_ - 1.0);
    return std::pow(integral, 1.0 / q);
  }

  // m_1(V) = int V(y) |y| dy.
  double first_moment() const {
    return normalization_ * detail::sphere_area(dim_) * std::pow(2.0, -(dim_ + 1)) *
           detail::radial_moment(3.0, dim_);
  }

 private:
  int dim_;
  double beta_;
  double normalization_;
};

inline double eval_V(const MollifierSpec& spec, const TorusPoint& x) {
  if (x.dim() != spec.dim()) throw InvalidInput("eval_V: dimension mismatch");
  return spec.profile(x.norm());
}

inline double eval_VN(const MollifierSpec& spec, long n, const TorusPoint& x) {
  if (n < 1) throw InvalidParameter("eval_VN: N must be positive");
  if (x.dim() != spec.dim()) throw InvalidInput("eval_VN: dimension mismatch");
  const double n_beta = std::pow(static_cast<double>(n), spec.beta());
  const double stretch = std::pow(static_cast<double>(n), spec.beta() / spec.dim());
  return n_beta * spec.profile(stretch * x.norm());
}

// V^N sampled on the grid (periodized; the support fits inside one cell).
inline Field sample_VN(const MollifierSpec& spec, long n, const PeriodicGrid& grid) {
  if (grid.dim() != spec.dim()) throw InvalidInput("sample_VN: dimension mismatch");
  return Field::sample(grid, [&](const Vec& x) {
    return eval_VN(spec, n, TorusPoint::wrap(std::span<const double>(x.data(), grid.dim())));
  });
}

// Grid representation used for convolution: the sampled V^N rescaled to unit
// discrete mass, so convolving with it leaves the zero mode untouched.
class GridMollifier {
 public:
  GridMollifier(const MollifierSpec& spec, long n, const PeriodicGrid& grid)
      : n_(n), field_(grid) {
    spec.require_resolved(grid, n);
    Field raw = sample_VN(spec, n, grid);
    const double mass = raw.mass();
    std::vector<double> v(raw.values().begin(), raw.values().end());
    for (double& x : v) x /= mass;
    field_ = Field(grid, std::move(v));
    field_.fourier();
    raw_mass_ = mass;
  }

  long particles() const { return n_; }
  const Field& field() const { return field_; }
  const Spectrum& fourier() const { return field_.fourier(); }
  const PeriodicGrid& grid() const { return field_.grid(); }
  // Quadrature mass of the raw samples before rescaling.
  double raw_mass() const { return raw_mass_; }

 private:
  long n_;
  Field field_;
  double raw_mass_ = 1.0;
};

// (int |grad V^N|^q)^{1/q} with the gradient taken spectrally from samples.
inline double vn_gradient_norm_q(const MollifierSpec& spec, long n, double q, const PeriodicGrid& grid) {
  if (!(q >= 2.0)) throw InvalidParameter("vn_gradient_norm_q: q must be >= 2");
  spec.require_resolved(grid, n);
  const Field vn = sample_VN(spec, n, grid);
  std::vector<double> magnitude(grid.size(), 0.0);
  for (int a = 0; a < grid.dim(); ++a) {
    const Field g = derivative(vn, a);
    const auto gv = g.values();
    for (std::size_t i = 0; i < gv.size(); ++i) magnitude[i] += gv[i] * gv[i];
  }
  for (double& x : magnitude) x = std::sqrt(x);
  return lq_norm(Field(grid, std::move(magnitude)), q);
}

// Change-of-variables prediction N^{(q beta (1 + 1/d) - beta)/q} ||grad V||_q.
inline double vn_gradient_norm_q_analytic(const MollifierSpec& spec, long n, double q) {
  const double d = spec.dim();
  const double exponent = (q * spec.beta() * (1.0 + 1.0 / d) - spec.beta()) / q;
  return std::pow(static_cast<double>(n), exponent) * spec.gradient_norm_q(q);
}

}  // namespace chaoslab
