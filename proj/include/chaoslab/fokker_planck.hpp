#pragma once

// Pseudo-spectral solver for the stochastic Fokker-Planck equation in
// Stratonovich form,
//   d rho = 1/2 Laplacian rho dt - div(rho F(K * rho)) dt - grad rho . sigma_t o dB,
// by Strang splitting: half a step of exact heat flow, an SSP-RK2 step of the
// dealiased transport term, another half heat step, then the exact
// translation by sigma_t dB_j.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "chaoslab/drift.hpp"
#include "chaoslab/errors.hpp"
#include "chaoslab/kernel.hpp"
#include "chaoslab/particles.hpp"
#include "chaoslab/rng.hpp"
#include "chaoslab/torus.hpp"

namespace chaoslab {

struct SolverLimits {
  double cfl = 0.5;
  double clip_floor = 1e-8;       // deepest tolerated undershoot
  double clip_mass = 1e-6;        // largest tolerated clipped mass per step
  double blow_up_factor = 1e3;    // ||rho_t||_q / ||rho_0||_q abort level
};

struct SolverDiagnostics {
  double sup_norm_q = 0.0;
  double min_rho = std::numeric_limits<double>::infinity();
  double max_clipped_mass = 0.0;
  double max_mass_deviation = 0.0;
  double max_cfl = 0.0;
  long steps = 0;
};

struct SolverState {
  Field rho;
  double time = 0.0;
  long step = 0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Field> snapshots;
  SolverDiagnostics diagnostics;
};

class SpectralSolver {
 public:
  SpectralSolver(const PeriodicGrid& grid, KernelSpec kernel, DriftSpec drift, NoiseModel noise, double q = 2.0,
                 SolverLimits limits = {})
      : grid_(grid),
        kernel_(std::move(kernel)),
        drift_(std::move(drift)),
        noise_(std::move(noise)),
        q_(q),
        limits_(limits),
        gk_(kernel_, grid),
        keep_(grid.spectral_size(), 0) {
    if (kernel_.dim() != grid.dim() || noise_.dim() != grid.dim())
      throw InvalidInput("solver: dimension mismatch between grid, kernel and noise");
    if (kernel_.components() != grid.dim()) throw InvalidInput("solver: kernel output must have d components");
    // 2/3 rule: keep |k_a| <= M/3 on every axis.
    const int cut = grid.points() / 3;
    grid.for_each_mode([&](std::size_t idx, const IVec& k) {
      bool inside = true;
      for (int a = 0; a < grid.dim(); ++a) inside = inside && std::abs(k[a]) <= cut;
      keep_[idx] = inside ? 1 : 0;
    });
  }

  const PeriodicGrid& grid() const { return grid_; }
  const NoiseModel& noise() const { return noise_; }
  const DriftSpec& drift() const { return drift_; }
  const KernelSpec& kernel() const { return kernel_; }

  // rho(x) <- rho(x - shift). Modes at the Nyquist frequency of an axis carry
  // cos(2 pi (M/2) shift_a) on that axis, the grid restriction of the shift.
  void substep_common_noise(Field& rho, const Vec& shift) const {
    bool zero = true;
    for (int a = 0; a < grid_.dim(); ++a) zero = zero && shift[a] == 0.0;
    if (zero) return;
    Spectrum& s = rho.mutable_fourier();
    const int nyq = grid_.nyquist();
    grid_.for_each_mode([&](std::size_t idx, const IVec& k) {
      cplx factor(1.0, 0.0);
      for (int a = 0; a < grid_.dim(); ++a) {
        if (k[a] == 0) continue;
        if (std::abs(k[a]) == nyq)
          factor *= std::cos(kTwoPi * nyq * shift[a]);
        else
          factor *= std::polar(1.0, -kTwoPi * k[a] * shift[a]);
      }
      s[idx] *= factor;
    });
  }

  void substep_diffusion(Field& rho, double dt) const {
    if (!(dt > 0.0)) throw InvalidParameter("substep_diffusion: dt must be positive");
    Spectrum& s = rho.mutable_fourier();
    grid_.for_each_mode([&](std::size_t idx, const IVec& k) { s[idx] *= heat_multiplier(k, dt); });
  }

  static double heat_multiplier_for(const IVec& k, int dim, double dt) {
    double k2 = 0.0;
    for (int a = 0; a < dim; ++a) k2 += static_cast<double>(k[a]) * k[a];
    return std::exp(-0.5 * kTwoPi * kTwoPi * k2 * dt);
  }

  // -div(rho F(K * rho)) in Fourier space, dealiased by the 2/3 rule.
  // Reports max |F| through max_f.
  Spectrum transport_rhs(const Spectrum& rho_hat, double& max_f) const {
    const int d = grid_.dim();
    Spectrum trunc = rho_hat;
    for (std::size_t i = 0; i < trunc.coeffs.size(); ++i)
      if (!keep_[i]) trunc[i] = 0.0;
    const Field rho_t = Field::from_fourier(trunc);
    const auto rv = rho_t.values();
    std::vector<Field> u;
    if (kernel_.kind() == KernelKind::kDirac)
      u.push_back(rho_t);
    else
      u = gk_.apply(trunc);
    std::vector<std::span<const double>> uv;
    for (const auto& f : u) uv.push_back(f.values());

    std::vector<std::vector<double>> flux(d, std::vector<double>(grid_.size()));
    std::array<double, kMaxDim> ui{}, fi{};
    max_f = 0.0;
    const bool identity = drift_.kind() == DriftKind::kIdentity;
    for (std::size_t n = 0; n < grid_.size(); ++n) {
      for (int a = 0; a < d; ++a) ui[a] = uv[a][n];
      if (identity) {
        fi = ui;
      } else {
        const Vec x = grid_.position(n);
        drift_.apply(TorusPoint::wrap(std::span<const double>(x.data(), d)), std::span<const double>(ui.data(), d),
                     std::span<double>(fi.data(), d));
      }
      double mag = 0.0;
      for (int a = 0; a < d; ++a) {
        if (!std::isfinite(fi[a])) throw IntegrationError("solver: non-finite drift on the grid", -1);
        flux[a][n] = rv[n] * fi[a];
        mag += fi[a] * fi[a];
      }
      max_f = std::max(max_f, std::sqrt(mag));
    }

    Spectrum out(grid_);
    const Fft& fft = Fft::for_grid(grid_);
    Spectrum tmp(grid_);
    for (int a = 0; a < d; ++a) {
      fft.forward(flux[a], tmp.coeffs);
      grid_.for_each_mode([&](std::size_t idx, const IVec& k) {
        if (keep_[idx]) out[idx] -= cplx(0.0, kTwoPi * k[a]) * tmp[idx];
      });
    }
    return out;
  }

  // SSP-RK2 (Heun) step of d rho / dt = -div(rho F(K * rho)).
  void substep_nonlinear(Field& rho, double dt, double* cfl_out = nullptr) const {
    if (!(dt > 0.0)) throw InvalidParameter("substep_nonlinear: dt must be positive");
    if (is_force_free()) return;
    const Spectrum r0 = rho.fourier();
    double f0 = 0.0, f1 = 0.0;
    const Spectrum k0 = transport_rhs(r0, f0);
    check_cfl(f0, dt, cfl_out);
    Spectrum r1 = r0;
    for (std::size_t i = 0; i < r1.coeffs.size(); ++i) r1[i] += dt * k0[i];
    const Spectrum k1 = transport_rhs(r1, f1);
    check_cfl(f1, dt, cfl_out);
    Spectrum& out = rho.mutable_fourier();
    for (std::size_t i = 0; i < out.coeffs.size(); ++i) out[i] = 0.5 * r0[i] + 0.5 * (r1[i] + dt * k1[i]);
  }

  // One Strang step of length dt with common increment db (of B, not sigma B).
  void step(SolverState& state, std::span<const double> db, double dt, SolverDiagnostics* diag = nullptr) const {
    const Vec shift = noise_.transport(state.time, db);
    double cfl = 0.0;
    substep_diffusion(state.rho, 0.5 * dt);
    substep_nonlinear(state.rho, dt, &cfl);
    substep_diffusion(state.rho, 0.5 * dt);
    substep_common_noise(state.rho, shift);
    state.time += dt;
    state.step += 1;
    const double clipped = enforce_nonnegativity(state.rho);
    if (diag) {
      diag->max_cfl = std::max(diag->max_cfl, cfl);
      diag->max_clipped_mass = std::max(diag->max_clipped_mass, clipped);
      diag->steps += 1;
    }
  }

  // Integrates over the whole path; snapshots at steps 0, every, 2 every, ...
  // and the final step.
  Trajectory solve(const Field& rho0, const BrownianPaths& paths, long snapshot_every = 1) const {
    if (!(rho0.grid() == grid_)) throw InvalidInput("solve: initial field is on a different grid");
    if (paths.dim() != grid_.dim()) throw InvalidInput("solve: Brownian path dimension mismatch");
    if (snapshot_every < 1) throw InvalidParameter("solve: snapshot_every must be positive");
    const double dt = paths.dt();
    SolverState state{Field(grid_, std::vector<double>(rho0.values().begin(), rho0.values().end()))};
    const double norm0 = lq_norm(state.rho, q_);
    Trajectory traj;
    auto record = [&]() {
      traj.times.push_back(state.time);
      traj.snapshots.emplace_back(grid_, std::vector<double>(state.rho.values().begin(), state.rho.values().end()));
      traj.snapshots.back().fourier();
    };
    observe(state.rho, norm0, traj.diagnostics);
    record();
    for (long j = 0; j < paths.steps(); ++j) {
      step(state, paths.increment(j), dt, &traj.diagnostics);
      observe(state.rho, norm0, traj.diagnostics);
      if (state.step % snapshot_every == 0 || j + 1 == paths.steps()) record();
    }
    return traj;
  }

  // Blow-up guard and running diagnostics for a state reached by step().
  void observe(const Field& rho, double norm0, SolverDiagnostics& diag) const {
    const double norm = lq_norm(rho, q_);
    if (!std::isfinite(norm) || norm > limits_.blow_up_factor * norm0)
      throw BlowUpError("||rho_t||_q = " + std::to_string(norm) + " exceeds " +
                        std::to_string(limits_.blow_up_factor) + " ||rho_0||_q; T is beyond the existence time");
    diag.sup_norm_q = std::max(diag.sup_norm_q, norm);
    for (double x : rho.values()) diag.min_rho = std::min(diag.min_rho, x);
    diag.max_mass_deviation = std::max(diag.max_mass_deviation, std::abs(rho.mass() - 1.0));
  }

  double q() const { return q_; }

  bool is_force_free() const {
    return drift_.is_zero() || (kernel_.kind() == KernelKind::kKellerSegel && kernel_.chi() == 0.0 &&
                                drift_.kind() != DriftKind::kCustomLipschitz);
  }

 private:
  double heat_multiplier(const IVec& k, double dt) const { return heat_multiplier_for(k, grid_.dim(), dt); }

  void check_cfl(double max_f, double dt, double* cfl_out) const {
    const double ratio = max_f * dt / grid_.spacing();
    if (cfl_out) *cfl_out = std::max(*cfl_out, ratio);
    if (ratio > limits_.cfl)
      throw StepSizeError("CFL ratio max|F| dt / h = " + std::to_string(ratio) + " exceeds " +
                              std::to_string(limits_.cfl),
                          ratio);
  }

  // Clips roundoff undershoot and restores unit mass; returns the clipped mass.
  double enforce_nonnegativity(Field& rho) const {
    const auto v = rho.values();
    double lowest = std::numeric_limits<double>::infinity();
    for (double x : v) lowest = std::min(lowest, x);
    if (lowest >= 0.0) return 0.0;
    if (lowest < -limits_.clip_floor)
      throw NonnegativityError("solver density undershoots to " + std::to_string(lowest));
    const double mass = rho.mass();
    auto w = rho.mutable_values();
    double clipped = 0.0;
    for (double& x : w)
      if (x < 0.0) {
        clipped -= x;
        x = 0.0;
      }
    clipped *= grid_.cell_volume();
    if (clipped > limits_.clip_mass)
      throw NonnegativityError("solver clipped mass " + std::to_string(clipped) + " exceeds the tolerance");
    const double scale = mass / (mass + clipped);
    for (double& x : w) x *= scale;
    return clipped;
  }

  PeriodicGrid grid_;
  KernelSpec kernel_;
  DriftSpec drift_;
  NoiseModel noise_;
  double q_;
  SolverLimits limits_;
  GridKernel gk_;
  std::vector<unsigned char> keep_;
};

// Binary field dump: a 32-byte header followed by `count` records.
//   bytes 0-7   magic "CHLFLD01"
//   bytes 8-11  int32 d
//   bytes 12-15 int32 M
//   bytes 16-23 int64 count
//   bytes 24-31 reserved, zero
// Each record is a float64 time and M^d float64 values, last axis fastest.
// All integers and floats are little-endian.
inline constexpr char kFieldDumpMagic[8] = {'C', 'H', 'L', 'F', 'L', 'D', '0', '1'};

// Streams records after a header announcing `count` of them.
class FieldDumpWriter {
 public:
  FieldDumpWriter(std::ostream& out, const PeriodicGrid& grid, std::int64_t count)
      : out_(out), grid_(grid), count_(count) {
    if (count < 0) throw InvalidInput("field dump: negative record count");
    const std::int32_t d = grid.dim();
    const std::int32_t m = grid.points();
    const std::uint64_t reserved = 0;
    out_.write(kFieldDumpMagic, 8);
    out_.write(reinterpret_cast<const char*>(&d), 4);
    out_.write(reinterpret_cast<const char*>(&m), 4);
    out_.write(reinterpret_cast<const char*>(&count), 8);
    out_.write(reinterpret_cast<const char*>(&reserved), 8);
  }

  void append(double t, const Field& f) {
    if (!(f.grid() == grid_)) throw InvalidInput("field dump: snapshots on different grids");
    if (written_ >= count_) throw InvalidInput("field dump: more records than announced");
    out_.write(reinterpret_cast<const char*>(&t), 8);
    const auto v = f.values();
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    ++written_;
  }

  std::int64_t written() const { return written_; }

 private:
  std::ostream& out_;
  PeriodicGrid grid_;
  std::int64_t count_;
  std::int64_t written_ = 0;
};

inline void write_field_dump(std::ostream& out, const std::vector<double>& times, const std::vector<Field>& fields) {
  if (times.size() != fields.size()) throw InvalidInput("field dump: times and fields differ in length");
  if (fields.empty()) throw InvalidInput("field dump: nothing to write");
  FieldDumpWriter w(out, fields.front().grid(), static_cast<std::int64_t>(fields.size()));
  for (std::size_t s = 0; s < fields.size(); ++s) w.append(times[s], fields[s]);
}

struct FieldDump {
  std::vector<double> times;
  std::vector<Field> fields;
};

inline FieldDump read_field_dump(std::istream& in) {
  char magic[8];
  std::int32_t d = 0, m = 0;
  std::int64_t count = 0;
  std::uint64_t reserved = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&d), 4);
  in.read(reinterpret_cast<char*>(&m), 4);
  in.read(reinterpret_cast<char*>(&count), 8);
  in.read(reinterpret_cast<char*>(&reserved), 8);
  if (!in || std::memcmp(magic, kFieldDumpMagic, 8) != 0) throw InvalidInput("field dump: bad header");
  if (count < 0) throw InvalidInput("field dump: negative record count");
  const PeriodicGrid grid(d, m);
  FieldDump dump;
  for (std::int64_t s = 0; s < count; ++s) {
    double t = 0.0;
    std::vector<double> v(grid.size());
    in.read(reinterpret_cast<char*>(&t), 8);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) throw InvalidInput("field dump: truncated record " + std::to_string(s));
    dump.times.push_back(t);
    dump.fields.emplace_back(grid, std::move(v));
  }
  return dump;
}

// CSV rows "t,node_index_1..node_index_d,rho".
inline void write_field_csv(std::ostream& out, const std::vector<double>& times, const std::vector<Field>& fields) {
  if (times.size() != fields.size()) throw InvalidInput("field csv: times and fields differ in length");
  if (fields.empty()) return;
  const PeriodicGrid grid = fields.front().grid();
  out << "t";
  for (int a = 1; a <= grid.dim(); ++a) out << ",node_index_" << a;
  out << ",rho\n";
  char buf[64];
  for (std::size_t s = 0; s < fields.size(); ++s) {
    const auto v = fields[s].values();
    char tbuf[64];
    std::snprintf(tbuf, sizeof tbuf, "%.17g", times[s]);
    for (std::size_t n = 0; n < v.size(); ++n) {
      out << tbuf;
      const IVec j = grid.unflatten(n);
      for (int a = 0; a < grid.dim(); ++a) out << ',' << j[a];
      std::snprintf(buf, sizeof buf, "%.17g", v[n]);
      out << ',' << buf << '\n';
    }
  }
}

}  // namespace chaoslab
