#pragma once

// Euler-Maruyama integration of the moderately interacting particle system
//   dX^i = F(X^i, (K * rho^N)(X^i)) dt + dW^i + sigma_t dB,
// with rho^N = V^N * S^N built by cloud-in-cell deposition and a spectral
// convolution.

#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "chaoslab/drift.hpp"
#include "chaoslab/errors.hpp"
#include "chaoslab/initial.hpp"
#include "chaoslab/kernel.hpp"
#include "chaoslab/mollifier.hpp"
#include "chaoslab/rng.hpp"
#include "chaoslab/torus.hpp"

namespace chaoslab {

// Common-noise coefficient sigma_t: a d x d matrix, piecewise constant in
// time and constant in space. The idiosyncratic coefficient is the identity.
class NoiseModel {
 public:
  NoiseModel(int dim, std::vector<double> sigma) : dim_(dim) {
    if (dim < 1 || dim > kMaxDim) throw UnsupportedDimension("noise model: dimension must be 1..3");
    add_piece(0.0, std::move(sigma));
  }

  static NoiseModel isotropic(int dim, double s) {
    std::vector<double> m(static_cast<std::size_t>(dim * dim), 0.0);
    for (int a = 0; a < dim; ++a) m[a * dim + a] = s;
    return NoiseModel(dim, std::move(m));
  }

  // sigma switches to `sigma` from time t_start on (pieces sorted by start).
  void add_piece(double t_start, std::vector<double> sigma) {
    if (sigma.size() != static_cast<std::size_t>(dim_ * dim_))
      throw InvalidInput("noise model: sigma must have d*d entries");
    for (double s : sigma)
      if (!std::isfinite(s)) throw InvalidInput("noise model: non-finite sigma entry");
    if (!starts_.empty() && !(t_start > starts_.back()))
      throw InvalidInput("noise model: schedule pieces must have increasing start times");
    starts_.push_back(t_start);
    pieces_.push_back(std::move(sigma));
  }

  int dim() const { return dim_; }
  std::size_t pieces() const { return pieces_.size(); }

  std::span<const double> sigma_at(double t) const {
    std::size_t p = 0;
    while (p + 1 < starts_.size() && t >= starts_[p + 1]) ++p;
    return pieces_[p];
  }

  // sigma_t dB
  Vec transport(double t, std::span<const double> db) const {
    if (static_cast<int>(db.size()) != dim_) throw InvalidInput("noise model: dB has the wrong dimension");
    const auto s = sigma_at(t);
    Vec out{};
    for (int a = 0; a < dim_; ++a)
      for (int b = 0; b < dim_; ++b) out[a] += s[a * dim_ + b] * db[b];
    return out;
  }

  bool is_zero() const {
    for (const auto& p : pieces_)
      for (double s : p)
        if (s != 0.0) return false;
    return true;
  }

 private:
  int dim_;
  std::vector<double> starts_;
  std::vector<std::vector<double>> pieces_;
};

class ParticleEnsemble {
 public:
  ParticleEnsemble(int dim, long n, std::uint64_t replica_seed)
      : dim_(dim), n_(n), seed_(replica_seed), positions_(static_cast<std::size_t>(n) * dim, 0.0) {
    if (dim < 1 || dim > kMaxDim) throw UnsupportedDimension("ensemble dimension must be 1..3");
    if (n < 1) throw InvalidParameter("ensemble needs at least one particle");
  }

  // Particles i.i.d. from rho_0; particle i depends only on (seed, i).
  static ParticleEnsemble sample(const InitialDensity& rho0, long n, std::uint64_t replica_seed) {
    ParticleEnsemble ens(rho0.dim(), n, replica_seed);
    std::unique_ptr<InverseCdf1d> icdf;
    if (rho0.dim() == 1) icdf = std::make_unique<InverseCdf1d>(rho0);
    for (long i = 0; i < n; ++i) sample_particle(rho0, icdf.get(), ens.stream(i), ens.position(i));
    return ens;
  }

  static ParticleEnsemble from_positions(int dim, std::span<const double> raw, std::uint64_t replica_seed = 0) {
    if (raw.size() % static_cast<std::size_t>(dim) != 0 || raw.empty())
      throw InvalidInput("ensemble: coordinate count is not a positive multiple of d");
    ParticleEnsemble ens(dim, static_cast<long>(raw.size() / dim), replica_seed);
    for (std::size_t k = 0; k < raw.size(); ++k) {
      if (!std::isfinite(raw[k])) throw InvalidInput("ensemble: non-finite coordinate");
      ens.positions_[k] = wrap_coordinate(raw[k]);
    }
    return ens;
  }

  int dim() const { return dim_; }
  long size() const { return n_; }
  std::uint64_t seed() const { return seed_; }
  double time() const { return time_; }
  void set_time(double t) { time_ = t; }

  Stream stream(long i) const { return Stream::for_particle(seed_, static_cast<std::uint64_t>(i)); }

  std::span<double> position(long i) {
    return {positions_.data() + static_cast<std::size_t>(i) * dim_, static_cast<std::size_t>(dim_)};
  }
  std::span<const double> position(long i) const {
    return {positions_.data() + static_cast<std::size_t>(i) * dim_, static_cast<std::size_t>(dim_)};
  }
  std::span<const double> positions() const { return positions_; }
  TorusPoint point(long i) const { return TorusPoint::wrap(position(i)); }

 private:
  int dim_;
  long n_;
  std::uint64_t seed_;
  double time_ = 0.0;
  std::vector<double> positions_;
};

// dW^i for a step of length stride * fine_dt starting at fine step
// j * stride: the sum of `stride` fine increments of the particle's stream.
// Fine increment f of component c is normal number f * d + c.
inline void idiosyncratic_increment(const Stream& stream, int dim, long j, int stride, double fine_dt,
                                    std::span<double> out) {
  const double scale = std::sqrt(fine_dt);
  std::array<double, kMaxDim> buf{};
  for (int a = 0; a < dim; ++a) out[a] = 0.0;
  for (int s = 0; s < stride; ++s) {
    const std::uint64_t f = static_cast<std::uint64_t>(j) * stride + s;
    stream.normals(Channel::kIncrements, f * dim, std::span<double>(buf.data(), dim));
    for (int a = 0; a < dim; ++a) out[a] += buf[a] * scale;
  }
}

// X^i <- wrap(X^i + F_i dt + dW^i + sigma_t dB).
inline void em_step(ParticleEnsemble& ens, std::span<const double> drift, const NoiseModel& noise,
                    std::span<const double> dw, std::span<const double> db, double dt) {
  if (!(dt > 0.0)) throw InvalidParameter("em_step: dt must be positive");
  const int d = ens.dim();
  const std::size_t count = static_cast<std::size_t>(ens.size()) * d;
  if (drift.size() != count || dw.size() != count) throw InvalidInput("em_step: per-particle arrays have the wrong size");
  const Vec shift = noise.transport(ens.time(), db);
  for (long i = 0; i < ens.size(); ++i) {
    auto x = ens.position(i);
    for (int a = 0; a < d; ++a) {
      const double f = drift[i * d + a];
      if (!std::isfinite(f)) throw IntegrationError("non-finite drift at particle " + std::to_string(i), i);
      x[a] = wrap_coordinate(x[a] + f * dt + dw[i * d + a] + shift[a]);
    }
  }
  ens.set_time(ens.time() + dt);
}

// Cloud-in-cell deposition of S^N: grid values whose quadrature is S^N.
inline Field deposit(const ParticleEnsemble& ens, const PeriodicGrid& grid) {
  if (grid.dim() != ens.dim()) throw InvalidInput("deposit: grid dimension mismatch");
  std::vector<double> v(grid.size(), 0.0);
  const double w = 1.0 / (static_cast<double>(ens.size()) * grid.cell_volume());
  for (long i = 0; i < ens.size(); ++i) {
    const auto s = cic_stencil(grid, ens.position(i));
    for (int c = 0; c < s.count; ++c) v[s.index[c]] += w * s.weight[c];
  }
  return Field(grid, std::move(v));
}

struct MollifiedDensity {
  Field rho;
  double clipped_mass = 0.0;  // mass removed by clipping roundoff undershoot
  double min_before_clip = 0.0;
};

// rho^N = V^N * S^N by spectral multiplication. Roundoff undershoot down to
// -1e-10 is clipped to 0; anything deeper is a defect and raises.
inline MollifiedDensity mollify(const Field& sn, const GridMollifier& gm) {
  if (!(sn.grid() == gm.grid())) throw InvalidInput("mollify: grids differ");
  Spectrum s = sn.fourier();
  const auto& v = gm.fourier();
  for (std::size_t i = 0; i < s.coeffs.size(); ++i) s[i] *= v[i];
  MollifiedDensity out{Field::from_fourier(std::move(s))};
  auto values = out.rho.mutable_values();
  double lowest = std::numeric_limits<double>::infinity();
  double clipped = 0.0;
  for (double& x : values) {
    lowest = std::min(lowest, x);
    if (x < 0.0) {
      if (x < -1e-10) throw NonnegativityError("mollified density undershoots by " + std::to_string(x));
      clipped -= x;
      x = 0.0;
    }
  }
  out.clipped_mass = clipped * sn.grid().cell_volume();
  out.min_before_clip = lowest;
  out.rho.fourier();
  return out;
}

inline MollifiedDensity mollify(const Field& sn, const MollifierSpec& moll, long n) {
  return mollify(sn, GridMollifier(moll, n, sn.grid()));
}

// max_i |u_i| <= A over every step observed so far; sticky once violated.
class CutoffMonitor {
 public:
  explicit CutoffMonitor(double level) : level_(level) {
    if (!(level > 0.0)) throw InvalidParameter("cutoff monitor: A must be positive");
  }

  bool observe(std::span<const double> u, int components) {
    for (std::size_t i = 0; i + components <= u.size(); i += components) {
      double s = 0.0;
      for (int c = 0; c < components; ++c) s += u[i + c] * u[i + c];
      max_seen_ = std::max(max_seen_, std::sqrt(s));
    }
    ok_ = ok_ && max_seen_ <= level_;
    return ok_;
  }

  bool ok() const { return ok_; }
  double level() const { return level_; }
  double max_seen() const { return max_seen_; }

 private:
  double level_;
  double max_seen_ = 0.0;
  bool ok_ = true;
};

inline bool cutoff_monitor(std::span<const double> u, int components, double level) {
  CutoffMonitor m(level);
  return m.observe(u, components);
}

struct StepDiagnostics {
  double max_u = 0.0;
  double mass_deviation = 0.0;
  double clipped_mass = 0.0;
};

// Everything the particle system needs that does not change between steps.
class ParticleSystem {
 public:
  ParticleSystem(const PeriodicGrid& grid, KernelSpec kernel, DriftSpec drift, MollifierSpec moll, long n,
                 NoiseModel noise)
      : grid_(grid),
        kernel_(std::move(kernel)),
        drift_(std::move(drift)),
        moll_(moll),
        n_(n),
        noise_(std::move(noise)),
        gm_(moll_, n, grid),
        gk_(kernel_, grid) {
    if (kernel_.dim() != grid.dim() || moll_.dim() != grid.dim() || noise_.dim() != grid.dim())
      throw InvalidInput("particle system: dimension mismatch between grid, kernel, mollifier and noise");
    if (kernel_.components() != grid.dim())
      throw InvalidInput("particle system: kernel output must have d components");
  }

  const PeriodicGrid& grid() const { return grid_; }
  const KernelSpec& kernel() const { return kernel_; }
  const DriftSpec& drift() const { return drift_; }
  const NoiseModel& noise() const { return noise_; }
  const GridMollifier& mollifier() const { return gm_; }
  long particles() const { return n_; }

  MollifiedDensity density(const ParticleEnsemble& ens) const { return mollify(deposit(ens, grid_), gm_); }

  // K * rho^N on the grid, one field per component.
  std::vector<Field> velocity_field(const Field& rho_n) const {
    if (kernel_.kind() == KernelKind::kDirac) return {rho_n};
    return gk_.apply(rho_n.fourier());
  }

  // u_i = (K * rho^N)(X^i) by CIC interpolation, flattened as i * d + c.
  std::vector<double> interpolate(const std::vector<Field>& u, const ParticleEnsemble& ens) const {
    const int d = ens.dim();
    std::vector<double> out(static_cast<std::size_t>(ens.size()) * d);
    std::vector<std::span<const double>> comps;
    for (const auto& f : u) comps.push_back(f.values());
    for (long i = 0; i < ens.size(); ++i) {
      const auto s = cic_stencil(grid_, ens.position(i));
      for (int c = 0; c < d; ++c) {
        double acc = 0.0;
        for (int k = 0; k < s.count; ++k) acc += s.weight[k] * comps[c][s.index[k]];
        out[i * d + c] = acc;
      }
    }
    return out;
  }

  std::vector<double> apply_drift(const ParticleEnsemble& ens, std::span<const double> u) const {
    const int d = ens.dim();
    std::vector<double> out(u.size());
    for (long i = 0; i < ens.size(); ++i)
      drift_.apply(ens.point(i), u.subspan(i * d, d), std::span<double>(out).subspan(i * d, d));
    return out;
  }

  // One Euler-Maruyama step of length stride * fine_dt, using the state's
  // density rho_n (which must be current for ens). Returns the uncut u_i.
  std::vector<double> step(ParticleEnsemble& ens, const Field& rho_n, std::span<const double> db, long j, int stride,
                           double fine_dt) const {
    const int d = ens.dim();
    const auto u = interpolate(velocity_field(rho_n), ens);
    const auto f = apply_drift(ens, u);
    std::vector<double> dw(u.size());
    for (long i = 0; i < ens.size(); ++i)
      idiosyncratic_increment(ens.stream(i), d, j, stride, fine_dt, std::span<double>(dw).subspan(i * d, d));
    em_step(ens, f, noise_, dw, db, stride * fine_dt);
    return u;
  }

 private:
  PeriodicGrid grid_;
  KernelSpec kernel_;
  DriftSpec drift_;
  MollifierSpec moll_;
  long n_;
  NoiseModel noise_;
  GridMollifier gm_;
  GridKernel gk_;
};

// Per-particle forces F(X^i, u_i) from the grid pipeline.
inline std::vector<double> interaction_force(const ParticleSystem& sys, const ParticleEnsemble& ens,
                                             const Field& rho_n) {
  return sys.apply_drift(ens, sys.interpolate(sys.velocity_field(rho_n), ens));
}

// O(N^2) reference for u_i = (1/N) sum_k G^N(X^i - X^k), with the gridded
// G^N = K * V^N read off by CIC interpolation.
inline std::vector<double> pairwise_velocity(const std::vector<Field>& g_n, const ParticleEnsemble& ens) {
  const int d = ens.dim();
  std::vector<double> out(static_cast<std::size_t>(ens.size()) * d, 0.0);
  std::array<double, kMaxDim> diff{};
  for (long i = 0; i < ens.size(); ++i) {
    const auto xi = ens.position(i);
    for (long k = 0; k < ens.size(); ++k) {
      const auto xk = ens.position(k);
      for (int a = 0; a < d; ++a) diff[a] = wrap_coordinate(xi[a] - xk[a]);
      for (std::size_t c = 0; c < g_n.size(); ++c)
        out[i * d + c] += cic_interpolate(g_n[c], std::span<const double>(diff.data(), d));
    }
    for (int c = 0; c < d; ++c) out[i * d + c] /= static_cast<double>(ens.size());
  }
  return out;
}

// CSV rows "t,i,x_1..x_d"; the header is written when requested.
inline void dump_particles_csv(std::ostream& out, const ParticleEnsemble& ens, bool header) {
  const int d = ens.dim();
  if (header) {
    out << "t,i";
    for (int a = 1; a <= d; ++a) out << ",x_" << a;
    out << '\n';
  }
  char buf[64];
  for (long i = 0; i < ens.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", ens.time());
    out << buf << ',' << i;
    for (int a = 0; a < d; ++a) {
      std::snprintf(buf, sizeof buf, "%.17g", ens.position(i)[a]);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace chaoslab
