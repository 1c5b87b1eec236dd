#pragma once

// Discrepancies between the particle and continuum densities, replica moment
// estimates with bootstrap intervals, the bounded-Lipschitz distance on the
// circle, and the predicted and fitted convergence exponents.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "chaoslab/errors.hpp"
#include "chaoslab/particles.hpp"
#include "chaoslab/rng.hpp"
#include "chaoslab/torus.hpp"

namespace chaoslab {

// max over snapshots of ||a_t - b_t||_q
inline double sup_lq_discrepancy(const std::vector<Field>& a, const std::vector<Field>& b, double q) {
  if (a.size() != b.size()) throw InvalidInput("sup_lq_discrepancy: trajectories have different lengths");
  double best = 0.0;
  for (std::size_t s = 0; s < a.size(); ++s) {
    if (!(a[s].grid() == b[s].grid())) throw InvalidInput("sup_lq_discrepancy: snapshots on different grids");
    best = std::max(best, lq_norm(difference(a[s], b[s]), q));
  }
  return best;
}

inline double lm_moment_value(std::span<const double> values, double m) {
  if (!(m >= 1.0)) throw InvalidParameter("lm_moment: m must be >= 1");
  if (values.empty()) throw InvalidInput("lm_moment: no values");
  std::vector<double> terms(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) terms[i] = std::pow(std::abs(values[i]), m);
  return std::pow(compensated_sum(terms) / static_cast<double>(values.size()), 1.0 / m);
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct MomentEstimate {
  double value = 0.0;
  Interval ci;  // bootstrap 90% percentile interval
};

inline constexpr int kBootstrapResamples = 10000;
inline constexpr std::uint64_t kBootstrapSeed = 0xB0075;

namespace detail {

// Empirical quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Resample r of a bootstrap: replica indices drawn uniformly with replacement.
inline void resample_indices(const Stream& stream, int r, std::span<std::size_t> out, std::size_t count) {
  const std::uint64_t base = static_cast<std::uint64_t>(r) * out.size();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint64_t n = base + i;
    const double u = stream.uniform_pair(Channel::kAuxiliary, n / 2)[n % 2];
    out[i] = std::min(count - 1, static_cast<std::size_t>(u * static_cast<double>(count)));
  }
}

}  // namespace detail

inline MomentEstimate lm_moment(std::span<const double> values, double m, int resamples = kBootstrapResamples,
                                std::uint64_t seed = kBootstrapSeed) {
  if (!(m >= 1.0)) throw InvalidParameter("lm_moment: m must be >= 1");
  if (values.size() < 2) throw InvalidInput("lm_moment: need at least two replicas");
  MomentEstimate out;
  out.value = lm_moment_value(values, m);
  const Stream stream = Stream::labelled(seed, "bootstrap-moment");
  std::vector<std::size_t> idx(values.size());
  std::vector<double> pick(values.size());
  std::vector<double> stats(resamples);
  for (int r = 0; r < resamples; ++r) {
    detail::resample_indices(stream, r, idx, values.size());
    for (std::size_t i = 0; i < idx.size(); ++i) pick[i] = values[idx[i]];
    stats[r] = lm_moment_value(pick, m);
  }
  out.ci = {detail::quantile(stats, 0.05), detail::quantile(stats, 0.95)};
  return out;
}

// ---------------------------------------------------------------------------
// Bounded-Lipschitz distance on the circle.
//
// For probability measures mu, nu on T^1 the dual sup over 1-Lipschitz phi
// with ||phi||_inf <= 1 equals the circle Wasserstein-1 distance: integrating
// against mu - nu ignores constants, and any 1-Lipschitz phi on the circle
// oscillates by at most 1/2, so it can be shifted into [-1/4, 1/4]. The sup
// bound never binds and
//   ||mu - nu||_0 = min_c int |F_mu - F_nu - c| dx,
// the minimum attained at a median of D = F_mu - F_nu.

class Measure1D {
 public:
  static Measure1D from_atoms(std::span<const double> positions, std::span<const double> weights) {
    if (positions.size() != weights.size()) throw InvalidInput("measure: positions and weights differ in length");
    Measure1D m;
    for (std::size_t i = 0; i < positions.size(); ++i) {
      if (!(weights[i] >= 0.0)) throw InvalidInput("measure: negative atom weight");
      m.atoms_.push_back({wrap_coordinate(positions[i]), weights[i]});
    }
    m.check_mass();
    return m;
  }

  // Empirical measure of a one-dimensional ensemble.
  static Measure1D from_particles(const ParticleEnsemble& ens) {
    if (ens.dim() != 1) throw UnsupportedDimension("bounded-Lipschitz distance is implemented for d = 1 only");
    std::vector<double> w(ens.size(), 1.0 / static_cast<double>(ens.size()));
    return from_atoms(ens.positions(), w);
  }

  // Grid density, constant on the cell [x_j - h/2, x_j + h/2) around node j.
  static Measure1D from_field(const Field& f) {
    if (f.grid().dim() != 1) throw UnsupportedDimension("bounded-Lipschitz distance is implemented for d = 1 only");
    Measure1D m;
    m.cells_.assign(f.values().begin(), f.values().end());
    for (double v : m.cells_)
      if (v < 0.0) throw InvalidInput("measure: negative density value");
    m.check_mass();
    return m;
  }

  struct Atom {
    double x;
    double w;
  };
  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<double>& cells() const { return cells_; }

  double mass() const {
    std::vector<double> terms;
    for (const auto& a : atoms_) terms.push_back(a.w);
    const double h = cells_.empty() ? 0.0 : 1.0 / static_cast<double>(cells_.size());
    for (double v : cells_) terms.push_back(v * h);
    return compensated_sum(terms);
  }

 private:
  void check_mass() const {
    const double total = mass();
    if (std::abs(total - 1.0) > 1e-10)
      throw InvalidInput("measure: mass " + std::to_string(total) + " is not 1 within 1e-10");
  }

  std::vector<Atom> atoms_;
  std::vector<double> cells_;
};

namespace detail {

// D = F_mu - F_nu on [-1/2, 1/2) as linear pieces D(x) = value + slope (x - start).
struct CdfPiece {
  double start;
  double length;
  double value;
  double slope;
};

inline std::vector<CdfPiece> cdf_difference(const Measure1D& mu, const Measure1D& nu) {
  // Breakpoints carry jumps; densities are piecewise constant between them.
  struct Event {
    double x;
    double jump;
    double slope_change;
  };
  std::vector<Event> events;
  double slope0 = 0.0;  // density difference just right of -1/2
  auto add = [&](const Measure1D& m, double sign) {
    for (const auto& a : m.atoms()) events.push_back({a.x, sign * a.w, 0.0});
    const auto& c = m.cells();
    if (c.empty()) return;
    const std::size_t n = c.size();
    const double h = 1.0 / static_cast<double>(n);
    // Cell j covers [-1/2 + (j - 1/2) h, -1/2 + (j + 1/2) h); cell 0 wraps.
    slope0 += sign * c[0];
    for (std::size_t j = 0; j < n; ++j) {
      const double edge = -0.5 + (static_cast<double>(j) + 0.5) * h;
      const double next = c[(j + 1) % n];
      if (edge < 0.5) events.push_back({edge, 0.0, sign * (next - c[j])});
    }
  };
  add(mu, 1.0);
  add(nu, -1.0);
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.x < b.x; });

  std::vector<CdfPiece> pieces;
  double x = -0.5;
  double value = 0.0;
  double slope = slope0;
  std::size_t e = 0;
  while (x < 0.5) {
    while (e < events.size() && events[e].x <= x) {
      value += events[e].jump;
      slope += events[e].slope_change;
      ++e;
    }
    const double next = e < events.size() ? std::min(events[e].x, 0.5) : 0.5;
    if (next > x) pieces.push_back({x, next - x, value, slope});
    value += slope * (next - x);
    x = next;
    if (e >= events.size() && next >= 0.5) break;
  }
  return pieces;
}

// Lebesgue measure of {D < c}.
inline double sublevel_measure(const std::vector<CdfPiece>& pieces, double c) {
  double total = 0.0;
  for (const auto& p : pieces) {
    const double a = p.value;
    const double b = p.value + p.slope * p.length;
    if (a < c && b < c) {
      total += p.length;
    } else if (a >= c && b >= c) {
    } else {
      const double cross = (c - a) / (b - a) * p.length;
      total += a < c ? cross : p.length - cross;
    }
  }
  return total;
}

// int |D - c| exactly over every linear piece.
inline double abs_integral(const std::vector<CdfPiece>& pieces, double c) {
  double total = 0.0;
  for (const auto& p : pieces) {
    const double a = p.value - c;
    const double b = a + p.slope * p.length;
    if ((a >= 0.0) == (b >= 0.0)) {
      total += 0.5 * std::abs(a + b) * p.length;
    } else {
      const double cross = a / (a - b) * p.length;
      total += 0.5 * (std::abs(a) * cross + std::abs(b) * (p.length - cross));
    }
  }
  return total;
}

}  // namespace detail

inline double kr_distance_1d(const Measure1D& mu, const Measure1D& nu) {
  const auto pieces = detail::cdf_difference(mu, nu);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& p : pieces) {
    lo = std::min({lo, p.value, p.value + p.slope * p.length});
    hi = std::max({hi, p.value, p.value + p.slope * p.length});
  }
  // Median of D under Lebesgue measure by bisection.
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (detail::sublevel_measure(pieces, mid) < 0.5)
      lo = mid;
    else
      hi = mid;
  }
  return std::min(detail::abs_integral(pieces, lo), detail::abs_integral(pieces, hi));
}

inline double kr_distance_1d(const ParticleEnsemble& a, const ParticleEnsemble& b) {
  return kr_distance_1d(Measure1D::from_particles(a), Measure1D::from_particles(b));
}
inline double kr_distance_1d(const Field& a, const Field& b) {
  return kr_distance_1d(Measure1D::from_field(a), Measure1D::from_field(b));
}
inline double kr_distance_1d(const ParticleEnsemble& a, const Field& b) {
  return kr_distance_1d(Measure1D::from_particles(a), Measure1D::from_field(b));
}

// ---------------------------------------------------------------------------
// Predicted exponents.

enum class RateTheorem { kGeneral, kBurgers };

inline const char* theorem_name(RateTheorem t) { return t == RateTheorem::kGeneral ? "general" : "burgers"; }

// Open upper end of the admissible beta window.
inline double beta_upper_bound(RateTheorem theorem, int d, double q) {
  if (theorem == RateTheorem::kBurgers) return 1.0 / 3.0;
  return 1.0 / (2.0 * (1.0 + 1.0 / d - 1.0 / q));
}

inline std::string beta_window_message(RateTheorem theorem, double beta, int d, double q) {
  char buf[256];
  if (theorem == RateTheorem::kBurgers)
    std::snprintf(buf, sizeof buf, "beta = %g outside the window (0, 1/3) required in d = 1 with the Dirac kernel",
                  beta);
  else
    std::snprintf(buf, sizeof buf,
                  "beta = %g outside the window (0, %.6g) where %.6g = 1/(2[1 + 1/d - 1/q]) at d = %d, q = %g", beta,
                  beta_upper_bound(theorem, d, q), beta_upper_bound(theorem, d, q), d, q);
  return buf;
}

inline double predicted_rate(double beta, double gamma, int d, double q, RateTheorem theorem) {
  if (theorem == RateTheorem::kBurgers) {
    if (d != 1 || q != 2.0) throw AdmissibilityError("the Burgers exponent needs d = 1 and q = 2");
  } else {
    if (d < 1 || d > kMaxDim) throw UnsupportedDimension("predicted_rate: dimension must be 1..3");
    if (!(q > d)) throw AdmissibilityError("q must exceed the dimension");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw AdmissibilityError("gamma must lie in (0, 1]");
  }
  const double upper = beta_upper_bound(theorem, d, q);
  if (!(beta > 0.0 && beta < upper)) throw AdmissibilityError(beta_window_message(theorem, beta, d, q));
  if (theorem == RateTheorem::kBurgers) return std::min(beta / 2.0, 0.5 - 1.5 * beta);
  return std::min(beta * gamma / d, 0.5 - beta * (1.0 + 1.0 / d - 1.0 / q));
}

// ---------------------------------------------------------------------------
// Rate fits.

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  Interval ci{};
};

// Least squares of log e against log N.
inline RateFit fit_rate(std::span<const double> n, std::span<const double> e) {
  if (n.size() != e.size()) throw InvalidInput("fit_rate: N and error lists differ in length");
  if (n.size() < 2) throw InvalidInput("fit_rate: need at least two points");
  const std::size_t k = n.size();
  double mx = 0.0, my = 0.0;
  std::vector<double> x(k), y(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (!(n[i] > 0.0)) throw InvalidInput("fit_rate: N must be positive");
    if (!(e[i] > 0.0) || !std::isfinite(e[i])) throw InvalidInput("fit_rate: error values must be positive");
    x[i] = std::log(n[i]);
    y[i] = std::log(e[i]);
    mx += x[i];
    my += y[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw InvalidInput("fit_rate: all N are equal");
  RateFit out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  out.ci = {out.slope, out.slope};
  return out;
}

// Slope of the L^m replica moments against N with a bootstrap interval.
// errors[i][r] is replica r at N = n[i]; replicas are resampled jointly
// across N because they share seeds.
inline RateFit fit_rate_bootstrap(std::span<const double> n, const std::vector<std::vector<double>>& errors, double m,
                                  int resamples = kBootstrapResamples, std::uint64_t seed = kBootstrapSeed) {
  if (errors.size() != n.size()) throw InvalidInput("fit_rate_bootstrap: one replica list per N required");
  const std::size_t replicas = errors.front().size();
  for (const auto& row : errors)
    if (row.size() != replicas || replicas < 2)
      throw InvalidInput("fit_rate_bootstrap: every N needs the same replica count (>= 2)");
  std::vector<double> est(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) est[i] = lm_moment_value(errors[i], m);
  RateFit out = fit_rate(n, est);
  const Stream stream = Stream::labelled(seed, "bootstrap-slope");
  std::vector<std::size_t> idx(replicas);
  std::vector<double> pick(replicas);
  std::vector<double> slopes;
  slopes.reserve(resamples);
  for (int r = 0; r < resamples; ++r) {
    detail::resample_indices(stream, r, idx, replicas);
    for (std::size_t i = 0; i < n.size(); ++i) {
      for (std::size_t k = 0; k < replicas; ++k) pick[k] = errors[i][idx[k]];
      est[i] = lm_moment_value(pick, m);
    }
    bool positive = true;
    for (double v : est) positive = positive && v > 0.0;
    if (positive) slopes.push_back(fit_rate(n, est).slope);
  }
  if (slopes.empty()) throw InvalidInput("fit_rate_bootstrap: every resample had a zero estimate");
  out.ci = {detail::quantile(slopes, 0.05), detail::quantile(slopes, 0.95)};
  return out;
}

}  // namespace chaoslab
