#pragma once

// Drift nonlinearities F(x, u): the identity, the smooth componentwise
// cutoff F_A, and user-supplied Lipschitz maps.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "chaoslab/errors.hpp"
#include "chaoslab/rng.hpp"
#include "chaoslab/torus.hpp"

namespace chaoslab {

// Seam polynomial phi(s) = s (1 + 3s) (1 - s)^3 = s - 6s^3 + 8s^4 - 3s^5:
// phi(0) = 0, phi'(0) = 1, phi''(0) = 0 and a triple zero at s = 1.
inline double cutoff_blend(double s) { return s * (1.0 + 3.0 * s) * (1.0 - s) * (1.0 - s) * (1.0 - s); }
inline double cutoff_blend_derivative(double s) { return (1.0 - s) * (1.0 - s) * (1.0 + 2.0 * s - 15.0 * s * s); }

// f_A: identity on [-A, A], constant +-A beyond A + 1, C^2 with |f_A'| <= 1.
inline double eval_fA(double a, double x) {
  if (!(a > 0.0)) throw InvalidParameter("eval_fA: A must be positive");
  if (std::isinf(a)) return x;
  const double ax = std::abs(x);
  if (ax <= a) return x;
  const double magnitude = ax >= a + 1.0 ? a : a + cutoff_blend(ax - a);
  return x < 0.0 ? -magnitude : magnitude;
}

inline std::vector<double> eval_FA(double a, std::span<const double> v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = eval_fA(a, v[i]);
  return out;
}

enum class DriftKind { kIdentity, kCutoff, kCustomLipschitz };

class DriftSpec {
 public:
  // out = F(x, u); u and out have the drift's dimension.
  using Map = std::function<void(const TorusPoint& x, std::span<const double> u, std::span<double> out)>;

  static DriftSpec identity() { return DriftSpec(DriftKind::kIdentity, 1.0, kInf); }

  static DriftSpec cutoff(double a) {
    if (!(a > 0.0)) throw InvalidParameter("cutoff drift: A must be positive");
    return DriftSpec(DriftKind::kCutoff, 1.0, std::isinf(a) ? kInf : a + 1.0, a);
  }

  static DriftSpec custom(Map map, double lipschitz, double bound = kInf) {
    if (!(lipschitz > 0.0)) throw InvalidParameter("custom drift: Lipschitz constant must be positive");
    if (!(bound > 0.0)) throw InvalidParameter("custom drift: bound must be positive");
    DriftSpec s(DriftKind::kCustomLipschitz, lipschitz, bound);
    s.map_ = std::move(map);
    return s;
  }

  // F = 0: a Lipschitz drift used by force-free sanity runs.
  static DriftSpec zero() {
    DriftSpec s(DriftKind::kCustomLipschitz, 1.0, 0.0);
    s.map_ = [](const TorusPoint&, std::span<const double>, std::span<double> out) {
      std::fill(out.begin(), out.end(), 0.0);
    };
    s.zero_ = true;
    return s;
  }

  DriftKind kind() const { return kind_; }
  bool is_zero() const { return zero_; }
  double lipschitz() const { return lipschitz_; }
  // sup of |F_a| over components, infinite when unbounded.
  double bound() const { return bound_; }
  double level() const { return level_; }
  // The identity window of the cutoff, infinite otherwise.
  double cutoff_level() const { return kind_ == DriftKind::kCutoff ? level_ : kInf; }

  void apply(const TorusPoint& x, std::span<const double> u, std::span<double> out) const {
    if (u.size() != out.size()) throw InvalidInput("drift: input and output dimensions differ");
    switch (kind_) {
      case DriftKind::kIdentity:
        std::copy(u.begin(), u.end(), out.begin());
        return;
      case DriftKind::kCutoff:
        for (std::size_t i = 0; i < u.size(); ++i) out[i] = eval_fA(level_, u[i]);
        return;
      case DriftKind::kCustomLipschitz:
        map_(x, u, out);
        return;
    }
  }

 private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  DriftSpec(DriftKind kind, double lipschitz, double bound, double level = kInf)
      : kind_(kind), lipschitz_(lipschitz), bound_(bound), level_(level) {}

  DriftKind kind_;
  double lipschitz_;
  double bound_;
  double level_;
  Map map_;
  bool zero_ = false;
};

inline std::vector<double> eval_drift(const DriftSpec& spec, const TorusPoint& x, std::span<const double> u,
                                      int expected_dim) {
  if (static_cast<int>(u.size()) != expected_dim)
    throw InvalidInput("eval_drift: u has " + std::to_string(u.size()) + " components, expected " +
                       std::to_string(expected_dim));
  std::vector<double> out(u.size());
  spec.apply(x, u, out);
  return out;
}

struct LipschitzCheck {
  double worst_ratio = 0.0;  // max |F(x,u) - F(y,v)| / (|x-y| + |u-v|)
  double worst_value = 0.0;  // max_a |F_a(x,u)|
  bool within_lipschitz = true;
  bool within_bound = true;
};

// Samples random pairs to sanity-check a drift's declared constants.
inline LipschitzCheck check_lipschitz(const DriftSpec& spec, int dim, int samples = 2000,
                                      double u_range = 10.0, std::uint64_t seed = 0x11b) {
  const Stream stream = Stream::labelled(seed, "lipschitz-check");
  LipschitzCheck out;
  std::vector<double> xa(dim), xb(dim), ua(dim), ub(dim), fa(dim), fb(dim);
  std::uint64_t block = 0;
  auto draw = [&](std::span<double> v, double scale) {
    for (double& c : v) c = scale * (2.0 * stream.uniform_pair(Channel::kAuxiliary, block++)[0] - 1.0);
  };
  for (int s = 0; s < samples; ++s) {
    draw(xa, 0.5);
    draw(xb, 0.5);
    draw(ua, u_range);
    // half of the pairs are close together so local slopes are probed
    draw(ub, s % 2 ? u_range : 1e-3);
    if (s % 2 == 0)
      for (int a = 0; a < dim; ++a) ub[a] += ua[a];
    const TorusPoint pa = TorusPoint::wrap(xa);
    const TorusPoint pb = TorusPoint::wrap(xb);
    spec.apply(pa, ua, fa);
    spec.apply(pb, ub, fb);
    double df = 0.0, du = 0.0, na = 0.0;
    for (int a = 0; a < dim; ++a) {
      df += (fa[a] - fb[a]) * (fa[a] - fb[a]);
      du += (ua[a] - ub[a]) * (ua[a] - ub[a]);
      na = std::max(na, std::abs(fa[a]));
    }
    const double sep = torus_distance(pa, pb) + std::sqrt(du);
    if (sep > 0.0) out.worst_ratio = std::max(out.worst_ratio, std::sqrt(df) / sep);
    out.worst_value = std::max(out.worst_value, na);
  }
  out.within_lipschitz = out.worst_ratio <= spec.lipschitz() * (1.0 + 1e-9);
  out.within_bound = out.worst_value <= spec.bound() * (1.0 + 1e-12);
  return out;
}

}  // namespace chaoslab
