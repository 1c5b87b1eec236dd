#pragma once

// Initial densities rho_0 and i.i.d. sampling of particle positions from them.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "chaoslab/errors.hpp"
#include "chaoslab/rng.hpp"
#include "chaoslab/torus.hpp"

namespace chaoslab {

// exp(-|x - c|^2 / (2 s^2)) summed over periodic images (two rings suffice for s <= 0.2).
inline double periodic_gaussian(const Vec& x, const Vec& c, double s, int dim) {
  double total = 1.0;
  for (int a = 0; a < dim; ++a) {
    const double dx = wrap_coordinate(x[a] - c[a]);
    double axis = 0.0;
    for (int image = -2; image <= 2; ++image) {
      const double z = dx + image;
      axis += std::exp(-z * z / (2.0 * s * s));
    }
    total *= axis;
  }
  return total;
}

class InitialDensity {
 public:
  using Fn = std::function<double(const Vec&)>;

  // sup is an upper bound for the density, used by rejection sampling.
  InitialDensity(std::string name, int dim, Fn fn, double sup)
      : name_(std::move(name)), dim_(dim), fn_(std::move(fn)), sup_(sup) {
    if (dim < 1 || dim > kMaxDim) throw UnsupportedDimension("initial density: dimension must be 1..3");
    if (!(sup > 0.0)) throw InvalidParameter("initial density: sup bound must be positive");
  }

  // 1 + a cos(2 pi k x_1)
  static InitialDensity uniform_plus_cosine(int dim, double amplitude = 0.5, int wavenumber = 1) {
    if (!(std::abs(amplitude) <= 1.0)) throw InvalidParameter("uniform-plus-cosine: |amplitude| must be <= 1");
    return InitialDensity("uniform-plus-cosine", dim,
                          [amplitude, wavenumber](const Vec& x) {
                            return 1.0 + amplitude * std::cos(kTwoPi * wavenumber * x[0]);
                          },
                          1.0 + std::abs(amplitude));
  }

  // (1 - w) + w * (normalized periodic Gaussian of width s centred at 0)
  static InitialDensity gaussian_bump(int dim, double width = 0.12, double weight = 0.5) {
    if (!(width > 0.0 && width <= 0.2)) throw InvalidParameter("gaussian bump: width must lie in (0, 0.2]");
    if (!(weight >= 0.0 && weight <= 1.0)) throw InvalidParameter("gaussian bump: weight must lie in [0, 1]");
    const double norm = std::pow(kTwoPi * width * width, -0.5 * dim);
    const Vec centre{};
    // the nearest images lift the peak by at most a factor 1 + 2 exp(-1/(2 s^2)) per axis
    const double peak = std::pow(1.0 + 2.0 * std::exp(-1.0 / (2.0 * width * width)), dim) + 1e-12;
    return InitialDensity("gaussian-bump-periodized", dim,
                          [=](const Vec& x) {
                            return (1.0 - weight) + weight * norm * periodic_gaussian(x, centre, width, dim);
                          },
                          (1.0 - weight) + weight * norm * peak);
  }

  // 1 + a (g(x - c_+) - g(x - c_-)) with unit-peak Gaussians; the two bumps
  // cancel in mass, and a <= 1 keeps the density nonnegative.
  static InitialDensity vortex_pair(double amplitude = 0.8, double width = 0.1, double separation = 0.3) {
    if (!(amplitude >= 0.0 && amplitude <= 1.0)) throw InvalidParameter("vortex pair: amplitude must lie in [0, 1]");
    if (!(width > 0.0 && width <= 0.2)) throw InvalidParameter("vortex pair: width must lie in (0, 0.2]");
    const Vec plus{-0.5 * separation, 0.0, 0.0};
    const Vec minus{0.5 * separation, 0.0, 0.0};
    const double peak = std::pow(1.0 + 2.0 * std::exp(-1.0 / (2.0 * width * width)), 2);
    return InitialDensity("vortex-pair", 2,
                          [=](const Vec& x) {
                            return 1.0 + amplitude * (periodic_gaussian(x, plus, width, 2) -
                                                      periodic_gaussian(x, minus, width, 2));
                          },
                          1.0 + amplitude * peak);
  }

  const std::string& name() const { return name_; }
  int dim() const { return dim_; }
  double sup() const { return sup_; }
  double operator()(const Vec& x) const { return fn_(x); }

  // Nodal samples rescaled to unit quadrature mass.
  Field on_grid(const PeriodicGrid& grid) const {
    if (grid.dim() != dim_) throw InvalidInput("initial density: grid dimension mismatch");
    Field f = Field::sample(grid, fn_);
    const double mass = f.mass();
    if (!(mass > 0.0)) throw InvalidInput("initial density has nonpositive mass");
    auto v = f.mutable_values();
    for (double& x : v) {
      if (x < 0.0) throw InvalidInput("initial density " + name_ + " is negative somewhere");
      x /= mass;
    }
    return f;
  }

 private:
  std::string name_;
  int dim_;
  Fn fn_;
  double sup_;
};

// Inverse-CDF sampler for d = 1 on a fine tabulation (piecewise-constant density).
class InverseCdf1d {
 public:
  explicit InverseCdf1d(const InitialDensity& rho0, int cells = 1 << 16) : cdf_(cells + 1, 0.0) {
    if (rho0.dim() != 1) throw UnsupportedDimension("inverse CDF sampling is one-dimensional");
    const double h = 1.0 / cells;
    double sum = 0.0, carry = 0.0;
    for (int j = 0; j < cells; ++j) {
      const double v = rho0(Vec{-0.5 + (j + 0.5) * h, 0.0, 0.0}) * h;
      if (v < 0.0) throw InvalidInput("initial density is negative somewhere");
      const double y = v - carry;
      const double t = sum + y;
      carry = (t - sum) - y;
      sum = t;
      cdf_[j + 1] = sum;
    }
    for (double& c : cdf_) c /= sum;
    cdf_.back() = 1.0;
  }

  double operator()(double u) const {
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    std::size_t j = static_cast<std::size_t>(it - cdf_.begin());
    j = std::min(std::max<std::size_t>(j, 1), cdf_.size() - 1) - 1;
    const double lo = cdf_[j], hi = cdf_[j + 1];
    const double frac = hi > lo ? (u - lo) / (hi - lo) : 0.5;
    const double h = 1.0 / static_cast<double>(cdf_.size() - 1);
    return wrap_coordinate(-0.5 + (static_cast<double>(j) + frac) * h);
  }

 private:
  std::vector<double> cdf_;
};

// One particle position drawn from that particle's own stream. The draw does not depend on N, so ensembles are nested across N.
inline void sample_particle(const InitialDensity& rho0, const InverseCdf1d* icdf, const Stream& stream,
                            std::span<double> out) {
  const int d = rho0.dim();
  auto uniform = [&](std::uint64_t n) { return stream.uniform_pair(Channel::kInitial, n / 2)[n % 2]; };
  if (d == 1 && icdf) {
    out[0] = (*icdf)(uniform(0));
    return;
  }
  constexpr std::uint64_t kMaxAttempts = 1u << 20;
  Vec x{};
  for (std::uint64_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const std::uint64_t base = attempt * static_cast<std::uint64_t>(d + 1);
    for (int a = 0; a < d; ++a) x[a] = uniform(base + a) - 0.5;
    if (uniform(base + d) * rho0.sup() < rho0(x)) {
      for (int a = 0; a < d; ++a) out[a] = x[a];
      return;
    }
  }
  throw InvalidInput("rejection sampling of " + rho0.name() + " did not accept; check its sup bound");
}

}  // namespace chaoslab
