#pragma once

// Coupled replica runs and convergence studies. One replica advances the SPDE
// and one particle system per N in lockstep on the same Brownian path, so
// ||rho^N_t - rho_t||_q is taken over every time step.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "chaoslab/config.hpp"
#include "chaoslab/fokker_planck.hpp"
#include "chaoslab/metrics.hpp"

namespace chaoslab {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Everything fixed for a study: numerical objects, the cutoff level and the
// predicted exponent.
struct StudySetup {
  ExperimentConfig cfg;
  PeriodicGrid grid;
  KernelSpec kernel;
  MollifierSpec moll;
  NoiseModel noise;
  InitialDensity rho0;
  Field rho0_grid;
  DriftSpec drift;
  RateTheorem theorem = RateTheorem::kGeneral;
  double gamma = 1.0;
  double kappa = kNaN;
  double cutoff_level = std::numeric_limits<double>::infinity();
  double c_k_grid = kNaN;
  double sup_rho_norm = kNaN;  // sup_t ||rho_t|| in the norm that controls u
  std::vector<std::string> warnings;
};

// sup_t ||rho_t||_r along the deterministic flow. Constant common noise only
// translates the solution, so this is the same for every replica.
inline double deterministic_sup_norm(const StudySetup& s, double r) {
  const SpectralSolver solver(s.grid, s.kernel, DriftSpec::identity(), NoiseModel::isotropic(s.cfg.d, 0.0), r);
  const long steps = s.cfg.steps();
  const BrownianPaths still(s.cfg.d, s.cfg.dt, std::vector<double>(static_cast<std::size_t>(steps) * s.cfg.d, 0.0));
  return solver.solve(s.rho0_grid, still, steps).diagnostics.sup_norm_q;
}

// Validates and builds the study objects. With an automatic cutoff,
// A = C_K^grid (eta + sup_t ||rho_t||_q); for the Dirac kernel u = rho^N
// itself, so C_K = 1 and the sup norm replaces the q-norm.
inline StudySetup prepare_study(const ExperimentConfig& cfg, bool study = true) {
  const Validation v = validate_config(cfg, study);
  if (!v.ok()) throw ConfigError(v.errors);
  const PeriodicGrid grid(cfg.d, cfg.M);
  const InitialDensity rho0 = build_rho0(cfg);
  StudySetup s{cfg,  grid, build_kernel(cfg), MollifierSpec(cfg.d, cfg.beta), build_noise(cfg), rho0,
               rho0.on_grid(grid), DriftSpec::identity(), {}, 1.0, kNaN, std::numeric_limits<double>::infinity(),
               kNaN, kNaN, {}};
  s.rho0_grid.fourier();  // both representations current before sharing across workers
  s.warnings = v.warnings;
  s.theorem = theorem_for(cfg);
  s.gamma = kernel_gamma(cfg);
  s.kappa = predicted_rate(cfg.beta, s.gamma, cfg.d, cfg.q, s.theorem);
  if (cfg.drift.kind == "cutoff") {
    if (cfg.drift.auto_level) {
      if (s.kernel.kind() == KernelKind::kDirac) {
        s.c_k_grid = 1.0;
        s.sup_rho_norm = deterministic_sup_norm(s, std::numeric_limits<double>::infinity());
      } else {
        s.c_k_grid = calibrate_ck(s.kernel, grid, cfg.q);
        s.sup_rho_norm = deterministic_sup_norm(s, cfg.q);
      }
      s.cutoff_level = s.c_k_grid * (cfg.drift.eta + s.sup_rho_norm);
      const double ratio = (s.cutoff_level + 1.0) * cfg.dt / grid.spacing();
      if (ratio > 0.5)
        throw StepSizeError("CFL pre-check: automatic cutoff A = " + std::to_string(s.cutoff_level) +
                                " gives (A + 1) dt / h = " + std::to_string(ratio) + " > 0.5",
                            ratio);
    } else {
      s.cutoff_level = cfg.drift.level;
    }
  }
  s.drift = build_drift(cfg, s.cutoff_level);
  return s;
}

inline std::uint64_t replica_seed(std::uint64_t master, int r) {
  return hash_combine(master, static_cast<std::uint64_t>(r));
}

// Per (N, replica) outcome.
struct ReplicaRecord {
  long n = 0;
  std::uint64_t seed = 0;
  double sup_lq = 0.0;        // max over steps of ||rho^N_t - rho_t||_q
  bool cutoff_ok = true;      // max_{i,t} |u_i| <= A
  double max_u = 0.0;
  double init_term = 0.0;     // ||rho_0 - rho^N_0||_q
  double kr0 = kNaN;          // ||S^N_0 - rho_0||_0 (d = 1)
  double kr_sup = kNaN;       // max over snapshots of ||S^N_t - rho_t||_0 (d = 1)
  double mass_dev = 0.0;      // max |mass(rho^N_t) - 1|
  double clipped_mass = 0.0;  // max per-step roundoff clipping of rho^N
  double div_residual = kNaN; // ||div K * rho^N_T||_2 (Biot-Savart)
};

// SPDE side of one replica.
struct SpdeRecord {
  std::uint64_t path_hash = 0;
  SolverDiagnostics diag;
  double div_residual = kNaN;
};

struct ReplicaRun {
  std::uint64_t seed = 0;
  SpdeRecord spde;
  std::vector<ReplicaRecord> per_n;
};

struct DumpRequest {
  std::filesystem::path dir;
  bool fields = false;
  bool particles = false;
  std::string tag = "r0";
};

// Thrown out of a replica with the ensemble size that failed (0: the SPDE).
class ReplicaError : public Error {
 public:
  ReplicaError(long n, std::uint64_t seed, std::string reason, bool numerical)
      : Error(reason), failure_{n, seed, std::move(reason)}, numerical_(numerical) {}
  const FailedReplica& failure() const { return failure_; }
  bool spde_numerical() const { return failure_.n_particles == 0 && numerical_; }

 private:
  FailedReplica failure_;
  bool numerical_;
};

namespace detail {

inline double divergence_of(const KernelSpec& kernel, const Field& rho) {
  if (kernel.kind() != KernelKind::kBiotSavart2d) return kNaN;
  return divergence_l2(GridKernel(kernel, rho.grid()).apply(rho.fourier()));
}

struct Lane {
  long n;
  ParticleSystem sys;
  ParticleEnsemble ens;
  MollifiedDensity rho_n;
  std::optional<CutoffMonitor> monitor;
  ReplicaRecord rec;
  std::unique_ptr<std::ofstream> field_file;
  std::unique_ptr<FieldDumpWriter> field_dump;
  std::unique_ptr<std::ofstream> particle_file;
};

}  // namespace detail

// One coupled replica over the N values `ns`. With `refine` the SPDE and the
// particles both run at dt/2 on the same (fine) Brownian increments.
inline ReplicaRun run_replica_lockstep(const StudySetup& s, const std::vector<long>& ns, std::uint64_t seed,
                                       bool refine = false, const DumpRequest* dump = nullptr) {
  const ExperimentConfig& cfg = s.cfg;
  const int d = cfg.d;
  const long coarse_steps = cfg.steps();
  const BrownianPaths fine = BrownianPaths::generate(seed, d, 0.5 * cfg.dt, 2 * coarse_steps);
  const BrownianPaths path = refine ? fine : fine.coarsen();
  const long steps = path.steps();
  const double dt = path.dt();
  const int stride = refine ? 1 : 2;
  const long every = cfg.snapshot_every * (refine ? 2 : 1);
  auto is_snapshot = [&](long step) { return step == 0 || step % every == 0 || step == steps; };
  std::int64_t snapshots = 0;
  for (long k = 0; k <= steps; ++k) snapshots += is_snapshot(k) ? 1 : 0;

  ReplicaRun run;
  run.seed = seed;
  run.spde.path_hash = path.fingerprint();

  long current = 0;
  try {
    const SpectralSolver solver(s.grid, s.kernel, s.drift, s.noise, cfg.q);
    SolverState state{Field(s.grid, std::vector<double>(s.rho0_grid.values().begin(), s.rho0_grid.values().end()))};
    const double norm0 = lq_norm(state.rho, cfg.q);
    solver.observe(state.rho, norm0, run.spde.diag);

    std::vector<std::unique_ptr<detail::Lane>> lanes;
    for (long n : ns) {
      current = n;
      ParticleSystem sys(s.grid, s.kernel, s.drift, s.moll, n, s.noise);
      ParticleEnsemble ens = ParticleEnsemble::sample(s.rho0, n, seed);
      MollifiedDensity rn = sys.density(ens);
      auto lane = std::make_unique<detail::Lane>(
          detail::Lane{n, std::move(sys), std::move(ens), std::move(rn), std::nullopt, ReplicaRecord{}, {}, {}, {}});
      if (std::isfinite(s.cutoff_level)) lane->monitor.emplace(s.cutoff_level);
      ReplicaRecord& rec = lane->rec;
      rec.n = n;
      rec.seed = seed;
      rec.init_term = lq_norm(difference(lane->rho_n.rho, s.rho0_grid), cfg.q);
      rec.sup_lq = rec.init_term;
      rec.mass_dev = std::abs(lane->rho_n.rho.mass() - 1.0);
      rec.clipped_mass = lane->rho_n.clipped_mass;
      if (d == 1) {
        rec.kr0 = kr_distance_1d(lane->ens, s.rho0_grid);
        rec.kr_sup = rec.kr0;
      }
      if (dump && dump->fields) {
        lane->field_file = std::make_unique<std::ofstream>(
            dump->dir / ("fields_rhoN_N" + std::to_string(n) + "_" + dump->tag + ".bin"), std::ios::binary);
        lane->field_dump = std::make_unique<FieldDumpWriter>(*lane->field_file, s.grid, snapshots);
        lane->field_dump->append(0.0, lane->rho_n.rho);
      }
      if (dump && dump->particles) {
        lane->particle_file = std::make_unique<std::ofstream>(
            dump->dir / ("particles_N" + std::to_string(n) + "_" + dump->tag + ".csv"));
        dump_particles_csv(*lane->particle_file, lane->ens, true);
      }
      lanes.push_back(std::move(lane));
    }

    std::unique_ptr<std::ofstream> rho_file;
    std::unique_ptr<FieldDumpWriter> rho_dump;
    if (dump && dump->fields) {
      rho_file = std::make_unique<std::ofstream>(dump->dir / ("fields_rho_" + dump->tag + ".bin"), std::ios::binary);
      rho_dump = std::make_unique<FieldDumpWriter>(*rho_file, s.grid, snapshots);
      rho_dump->append(0.0, state.rho);
    }

    for (long j = 0; j < steps; ++j) {
      const auto db = path.increment(j);
      for (auto& lane : lanes) {
        current = lane->n;
        const auto u = lane->sys.step(lane->ens, lane->rho_n.rho, db, j, stride, fine.dt());
        if (lane->monitor) {
          lane->rec.cutoff_ok = lane->monitor->observe(u, d);
          lane->rec.max_u = lane->monitor->max_seen();
        } else {
          for (std::size_t i = 0; i + d <= u.size(); i += d) {
            double m2 = 0.0;
            for (int a = 0; a < d; ++a) m2 += u[i + a] * u[i + a];
            lane->rec.max_u = std::max(lane->rec.max_u, std::sqrt(m2));
          }
        }
        lane->rho_n = lane->sys.density(lane->ens);
      }
      current = 0;
      solver.step(state, db, dt, &run.spde.diag);
      solver.observe(state.rho, norm0, run.spde.diag);

      const long k = j + 1;
      const bool snap = is_snapshot(k);
      if (snap && rho_dump) rho_dump->append(state.time, state.rho);
      for (auto& lane : lanes) {
        current = lane->n;
        ReplicaRecord& rec = lane->rec;
        rec.sup_lq = std::max(rec.sup_lq, lq_norm(difference(lane->rho_n.rho, state.rho), cfg.q));
        rec.mass_dev = std::max(rec.mass_dev, std::abs(lane->rho_n.rho.mass() - 1.0));
        rec.clipped_mass = std::max(rec.clipped_mass, lane->rho_n.clipped_mass);
        if (!snap) continue;
        if (d == 1) rec.kr_sup = std::max(rec.kr_sup, kr_distance_1d(lane->ens, state.rho));
        if (lane->field_dump) lane->field_dump->append(state.time, lane->rho_n.rho);
        if (lane->particle_file) dump_particles_csv(*lane->particle_file, lane->ens, false);
      }
    }

    current = 0;
    run.spde.div_residual = detail::divergence_of(s.kernel, state.rho);
    for (auto& lane : lanes) {
      current = lane->n;
      lane->rec.div_residual = detail::divergence_of(s.kernel, lane->rho_n.rho);
      run.per_n.push_back(lane->rec);
    }
  } catch (const NumericalAbort& e) {
    throw ReplicaError(current, seed, e.what(), true);
  } catch (const ReplicaError&) {
    throw;
  } catch (const Error& e) {
    throw ReplicaError(current, seed, e.what(), false);
  }
  return run;
}

inline ReplicaRecord run_replica(const StudySetup& s, long n, std::uint64_t seed) {
  return run_replica_lockstep(s, {n}, seed).per_n.front();
}

inline ReplicaRecord run_replica(const ExperimentConfig& cfg, long n, std::uint64_t seed) {
  ExperimentConfig one = cfg;
  one.N = {n};
  return run_replica(prepare_study(one, false), n, seed);
}

// ---------------------------------------------------------------------------
// Studies

struct RunOptions {
  int workers = 1;
  std::optional<std::filesystem::path> dump_dir;
  bool dump_fields = false;
  bool dump_particles = false;
};

struct RateRow {
  long n = 0;
  MomentEstimate estimate;
  double init_term = 0.0;  // L^m moment of ||rho_0 - rho^N_0||_q
  double median = 0.0;     // median of sup_lq over replicas
};

struct CountingCheck {
  long cutoff_failures = 0;
  long eta_exceedances = 0;
  bool pooled_ok = true;
  bool per_n_ok = true;
  bool ok() const { return pooled_ok && per_n_ok; }
};

struct DtCheck {
  bool ran = false;
  long n = 0;
  std::uint64_t seed = 0;
  double e_dt = kNaN;
  double e_dt_half = kNaN;
  double relative_change = kNaN;
  bool ok = false;
  std::string note;
};

struct Conservation {
  double mass_dev_rho = 0.0;
  double mass_dev_rho_n = 0.0;
  double clipped_rho = 0.0;
  double clipped_rho_n = 0.0;
  double div_residual = kNaN;
};

struct StudyResult {
  explicit StudyResult(StudySetup s) : setup(std::move(s)) {}

  StudySetup setup;
  std::vector<ReplicaRun> runs;  // replica order
  std::vector<RateRow> rates;    // ascending N
  RateFit fit;
  bool medians_decreasing = false;
  CountingCheck counting;
  double cutoff_ok_fraction = 1.0;
  DtCheck dt_check;
  Conservation conservation;
  std::vector<std::string> warnings;

  // errors[i][r]: sup_lq at N = rates[i].n in replica r.
  std::vector<std::vector<double>> error_matrix() const { return column([](const ReplicaRecord& r) { return r.sup_lq; }); }

  template <class F>
  std::vector<std::vector<double>> column(F&& pick) const {
    std::vector<std::vector<double>> out(rates.size());
    for (std::size_t i = 0; i < rates.size(); ++i)
      for (const auto& run : runs)
        for (const auto& rec : run.per_n)
          if (rec.n == rates[i].n) out[i].push_back(pick(rec));
    return out;
  }
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw InvalidInput("median of an empty list");
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

inline bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

// The inclusion {cutoff fires} within {||rho^N - rho||_{T,q} > eta}, counted.
inline CountingCheck counting_check(const std::vector<ReplicaRun>& runs, const std::vector<long>& ns, double eta) {
  CountingCheck c;
  for (long n : ns) {
    long fails = 0, exceed = 0;
    for (const auto& run : runs)
      for (const auto& rec : run.per_n)
        if (rec.n == n) {
          fails += rec.cutoff_ok ? 0 : 1;
          exceed += rec.sup_lq > eta ? 1 : 0;
        }
    c.cutoff_failures += fails;
    c.eta_exceedances += exceed;
    c.per_n_ok = c.per_n_ok && fails <= exceed;
  }
  c.pooled_ok = c.cutoff_failures <= c.eta_exceedances;
  return c;
}

// Runs `count` jobs on `workers` threads; results land in job order.
template <class Job>
void run_work_queue(int count, int workers, Job&& job) {
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int r = next++; r < count; r = next++) job(r);
  };
  const int w = std::max(1, std::min(workers, count));
  if (w == 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (int k = 0; k < w; ++k) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

inline DtCheck run_dt_check(const StudySetup& s, std::uint64_t seed, double e_dt) {
  DtCheck c;
  c.ran = true;
  c.n = s.cfg.max_n();
  c.seed = seed;
  c.e_dt = e_dt;
  try {
    c.e_dt_half = run_replica_lockstep(s, {c.n}, seed, true).per_n.front().sup_lq;
    c.relative_change = std::abs(c.e_dt - c.e_dt_half) / c.e_dt;
    c.ok = c.relative_change < 0.1;
    if (!c.ok) c.note = "sup error moved by more than 10% when dt was halved; dt does not resolve the study";
  } catch (const Error& e) {
    c.note = std::string("dt/2 rerun failed: ") + e.what();
  }
  return c;
}

inline StudyResult run_convergence_study(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  StudyResult out(prepare_study(cfg, true));
  const StudySetup& s = out.setup;
  out.warnings = s.warnings;
  std::vector<long> ns(cfg.N.begin(), cfg.N.end());
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());

  std::optional<DumpRequest> dump;
  if (opts.dump_dir && (opts.dump_fields || opts.dump_particles)) {
    std::filesystem::create_directories(*opts.dump_dir);
    dump = DumpRequest{*opts.dump_dir, opts.dump_fields, opts.dump_particles, "r0"};
  }

  std::vector<std::optional<ReplicaRun>> slots(cfg.R);
  std::vector<std::optional<ReplicaError>> errors(cfg.R);
  run_work_queue(cfg.R, opts.workers, [&](int r) {
    const std::uint64_t seed = replica_seed(cfg.seed, r);
    try {
      slots[r] = run_replica_lockstep(s, ns, seed, false, r == 0 && dump ? &*dump : nullptr);
    } catch (const ReplicaError& e) {
      errors[r] = e;
    } catch (const std::exception& e) {
      errors[r] = ReplicaError(0, seed, e.what(), false);
    }
  });

  std::vector<FailedReplica> failed;
  for (int r = 0; r < cfg.R; ++r) {
    if (!errors[r]) continue;
    if (errors[r]->spde_numerical()) throw NumericalAbort("replica seed " + std::to_string(errors[r]->failure().seed) +
                                                          ": SPDE solver aborted: " + errors[r]->failure().reason);
    failed.push_back(errors[r]->failure());
  }
  if (!failed.empty()) throw ReplicaFailure(failed);
  for (auto& slot : slots) out.runs.push_back(std::move(*slot));

  for (long n : ns) {
    RateRow row;
    row.n = n;
    out.rates.push_back(row);
  }
  const auto errs = out.error_matrix();
  const auto inits = out.column([](const ReplicaRecord& r) { return r.init_term; });
  std::vector<double> nd(ns.begin(), ns.end()), medians;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    out.rates[i].estimate = lm_moment(errs[i], cfg.m);
    out.rates[i].init_term = lm_moment_value(inits[i], cfg.m);
    out.rates[i].median = median_of(errs[i]);
    medians.push_back(out.rates[i].median);
  }
  out.fit = fit_rate_bootstrap(nd, errs, cfg.m);
  out.medians_decreasing = strictly_decreasing(medians);
  out.counting = counting_check(out.runs, ns, cfg.drift.eta);

  long total = 0, ok = 0;
  for (const auto& run : out.runs) {
    out.conservation.mass_dev_rho = std::max(out.conservation.mass_dev_rho, run.spde.diag.max_mass_deviation);
    out.conservation.clipped_rho = std::max(out.conservation.clipped_rho, run.spde.diag.max_clipped_mass);
    auto fold_div = [&](double v) {
      if (std::isnan(v)) return;
      out.conservation.div_residual =
          std::isnan(out.conservation.div_residual) ? v : std::max(out.conservation.div_residual, v);
    };
    fold_div(run.spde.div_residual);
    for (const auto& rec : run.per_n) {
      ++total;
      ok += rec.cutoff_ok ? 1 : 0;
      out.conservation.mass_dev_rho_n = std::max(out.conservation.mass_dev_rho_n, rec.mass_dev);
      out.conservation.clipped_rho_n = std::max(out.conservation.clipped_rho_n, rec.clipped_mass);
      fold_div(rec.div_residual);
    }
  }
  out.cutoff_ok_fraction = total ? static_cast<double>(ok) / total : 1.0;

  if (cfg.dt_check) {
    const double e_dt = out.runs.front().per_n.back().sup_lq;
    out.dt_check = run_dt_check(s, out.runs.front().seed, e_dt);
    if (!out.dt_check.ok) out.warnings.push_back("dt check: " + out.dt_check.note);
  }
  if (!out.medians_decreasing) out.warnings.push_back("median sup errors are not strictly decreasing in N");
  if (!out.counting.ok()) out.warnings.push_back("cutoff counting inequality violated");
  return out;
}

// ---------------------------------------------------------------------------
// Empirical-measure corollary (d = 1)

struct CorollaryRow {
  long n = 0;
  MomentEstimate estimate;  // L^m moment of sup_t ||S^N_t - rho_t||_0
  double init_term = 0.0;   // L^m moment of ||S^N_0 - rho_0||_0
  double median = 0.0;
  double reference = 0.0;   // N^{-(kappa - eps)}
};

struct CorollaryReport {
  double kappa = 0.0;
  double epsilon = 0.0;
  std::vector<CorollaryRow> rows;
  RateFit fit;
  bool medians_nonincreasing = false;
};

inline CorollaryReport corollary_report(const StudyResult& study) {
  const ExperimentConfig& cfg = study.setup.cfg;
  if (cfg.d != 1) throw UnsupportedDimension("the empirical-measure report needs d = 1");
  CorollaryReport rep;
  rep.kappa = study.setup.kappa;
  rep.epsilon = rep.kappa / 4.0;
  const auto sups = study.column([](const ReplicaRecord& r) { return r.kr_sup; });
  const auto inits = study.column([](const ReplicaRecord& r) { return r.kr0; });
  std::vector<double> nd;
  rep.medians_nonincreasing = true;
  for (std::size_t i = 0; i < study.rates.size(); ++i) {
    CorollaryRow row;
    row.n = study.rates[i].n;
    row.estimate = lm_moment(sups[i], cfg.m);
    row.init_term = lm_moment_value(inits[i], cfg.m);
    row.median = median_of(sups[i]);
    row.reference = std::pow(static_cast<double>(row.n), -(rep.kappa - rep.epsilon));
    if (!rep.rows.empty() && row.median > rep.rows.back().median) rep.medians_nonincreasing = false;
    rep.rows.push_back(row);
    nd.push_back(static_cast<double>(row.n));
  }
  rep.fit = fit_rate_bootstrap(nd, sups, cfg.m);
  return rep;
}

inline CorollaryReport run_corollary_empirical(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  if (cfg.d != 1) throw UnsupportedDimension("the empirical-measure report needs d = 1");
  return corollary_report(run_convergence_study(cfg, opts));
}

// ---------------------------------------------------------------------------
// Output files

namespace detail {

inline std::string num(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline json num_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p);
  if (!f) throw Error("cannot write " + p.string());
  return f;
}

}  // namespace detail

inline void write_rates_csv(std::ostream& out, const StudyResult& st) {
  out << "N,m,estimate,ci_lo,ci_hi,init_term\n";
  for (const auto& r : st.rates)
    out << r.n << ',' << detail::num(st.setup.cfg.m) << ',' << detail::num(r.estimate.value) << ','
        << detail::num(r.estimate.ci.lo) << ',' << detail::num(r.estimate.ci.hi) << ',' << detail::num(r.init_term)
        << '\n';
}

// Rows ordered by (N, replica index).
inline void write_replicas_csv(std::ostream& out, const StudyResult& st) {
  out << "N,seed,sup_lq,cutoff_ok,kr0\n";
  for (const auto& rate : st.rates)
    for (const auto& run : st.runs)
      for (const auto& rec : run.per_n)
        if (rec.n == rate.n)
          out << rec.n << ',' << rec.seed << ',' << detail::num(rec.sup_lq) << ',' << (rec.cutoff_ok ? 1 : 0) << ','
              << detail::num(rec.kr0) << '\n';
}

inline void write_diagnostics_csv(std::ostream& out, const StudyResult& st) {
  out << "N,seed,path_hash,max_u,init_term,kr_sup,mass_dev_rhoN,clipped_rhoN,div_rhoN,"
         "mass_dev_rho,clipped_rho,min_rho,sup_norm_rho,max_cfl,div_rho\n";
  for (const auto& rate : st.rates)
    for (const auto& run : st.runs)
      for (const auto& rec : run.per_n) {
        if (rec.n != rate.n) continue;
        const auto& dg = run.spde.diag;
        char hash[32];
        std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(run.spde.path_hash));
        out << rec.n << ',' << rec.seed << ',' << hash << ',' << detail::num(rec.max_u) << ','
            << detail::num(rec.init_term) << ',' << detail::num(rec.kr_sup) << ',' << detail::num(rec.mass_dev) << ','
            << detail::num(rec.clipped_mass) << ',' << detail::num(rec.div_residual) << ','
            << detail::num(dg.max_mass_deviation) << ',' << detail::num(dg.max_clipped_mass) << ','
            << detail::num(dg.min_rho) << ',' << detail::num(dg.sup_norm_q) << ',' << detail::num(dg.max_cfl) << ','
            << detail::num(run.spde.div_residual) << '\n';
      }
}

inline void write_corollary_csv(std::ostream& out, const CorollaryReport& rep, double m) {
  out << "N,m,estimate,ci_lo,ci_hi,init_term,reference\n";
  for (const auto& r : rep.rows)
    out << r.n << ',' << detail::num(m) << ',' << detail::num(r.estimate.value) << ','
        << detail::num(r.estimate.ci.lo) << ',' << detail::num(r.estimate.ci.hi) << ',' << detail::num(r.init_term)
        << ',' << detail::num(r.reference) << '\n';
}

inline json study_summary(const StudyResult& st) {
  const StudySetup& s = st.setup;
  const ExperimentConfig& c = s.cfg;
  json ns = json::array();
  for (const auto& r : st.rates) ns.push_back(r.n);
  json dt = {{"ran", st.dt_check.ran}};
  if (st.dt_check.ran)
    dt.update({{"N", st.dt_check.n},
               {"seed", st.dt_check.seed},
               {"e_dt", detail::num_or_null(st.dt_check.e_dt)},
               {"e_dt_half", detail::num_or_null(st.dt_check.e_dt_half)},
               {"relative_change", detail::num_or_null(st.dt_check.relative_change)},
               {"ok", st.dt_check.ok},
               {"note", st.dt_check.note}});
  return {
      {"name", c.name},
      {"slope", st.fit.slope},
      {"slope_ci", {st.fit.ci.lo, st.fit.ci.hi}},
      {"intercept", st.fit.intercept},
      {"kappa_predicted", s.kappa},
      {"kappa_target", -s.kappa},
      {"epsilon", s.kappa / 4.0},
      {"beta", c.beta},
      {"gamma", s.gamma},
      {"d", c.d},
      {"q", c.q},
      {"m", c.m},
      {"theorem", theorem_name(s.theorem)},
      {"kernel", kernel_name(s.kernel.kind())},
      {"N", ns},
      {"R", c.R},
      {"T", c.T},
      {"dt", c.dt},
      {"M", c.M},
      {"seed", c.seed},
      {"cutoff_A", detail::num_or_null(s.cutoff_level)},
      {"c_k_grid", detail::num_or_null(s.c_k_grid)},
      {"sup_rho_norm", detail::num_or_null(s.sup_rho_norm)},
      {"eta", c.drift.eta},
      {"cutoff_ok_fraction", st.cutoff_ok_fraction},
      {"counting_inequality",
       {{"cutoff_failures", st.counting.cutoff_failures},
        {"eta_exceedances", st.counting.eta_exceedances},
        {"pooled_ok", st.counting.pooled_ok},
        {"per_n_ok", st.counting.per_n_ok}}},
      {"medians_decreasing", st.medians_decreasing},
      {"dt_check", dt},
      {"conservation",
       {{"mass_dev_rho", st.conservation.mass_dev_rho},
        {"mass_dev_rhoN", st.conservation.mass_dev_rho_n},
        {"clipped_rho", st.conservation.clipped_rho},
        {"clipped_rhoN", st.conservation.clipped_rho_n},
        {"div_residual", detail::num_or_null(st.conservation.div_residual)}}},
      {"warnings", st.warnings},
      {"config", config_to_json(c)},
  };
}

// rates.csv, replicas.csv, diagnostics.csv, summary.json and, in d = 1,
// corollary.csv.
inline void write_study_outputs(const std::filesystem::path& dir, const StudyResult& st) {
  std::filesystem::create_directories(dir);
  {
    auto f = detail::open_out(dir / "rates.csv");
    write_rates_csv(f, st);
  }
  {
    auto f = detail::open_out(dir / "replicas.csv");
    write_replicas_csv(f, st);
  }
  {
    auto f = detail::open_out(dir / "diagnostics.csv");
    write_diagnostics_csv(f, st);
  }
  json summary = study_summary(st);
  if (st.setup.cfg.d == 1) {
    const CorollaryReport rep = corollary_report(st);
    auto f = detail::open_out(dir / "corollary.csv");
    write_corollary_csv(f, rep, st.setup.cfg.m);
    summary["corollary"] = {{"kappa", rep.kappa},
                            {"epsilon", rep.epsilon},
                            {"slope", rep.fit.slope},
                            {"slope_ci", {rep.fit.ci.lo, rep.fit.ci.hi}},
                            {"medians_nonincreasing", rep.medians_nonincreasing}};
  }
  auto f = detail::open_out(dir / "summary.json");
  f << summary.dump(2) << '\n';
}

}  // namespace chaoslab
