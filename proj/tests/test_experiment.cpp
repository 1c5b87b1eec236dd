#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "chaoslab/experiment.hpp"

using namespace chaoslab;

namespace {

// A few seconds of work: short horizon, coarse grid.
ExperimentConfig tiny_burgers() {
  auto c = preset("burgers1d");
  c.name = "tiny";
  c.T = 0.05;
  c.dt = c.T / 64;
  c.M = 128;
  c.N = {64, 256, 1024, 4096};
  c.R = 10;
  c.snapshot_every = 8;
  return c;
}

std::string first_line(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

}  // namespace

TEST(Setup, AutomaticCutoffLevel) {
  const auto s = prepare_study(tiny_burgers());
  EXPECT_EQ(s.c_k_grid, 1.0);
  // the maximum principle keeps the sup norm at or below its initial value 1.5
  EXPECT_LE(s.sup_rho_norm, 1.5 + 1e-9);
  EXPECT_GT(s.sup_rho_norm, 1.0);
  EXPECT_DOUBLE_EQ(s.cutoff_level, 1.0 + s.sup_rho_norm);
  EXPECT_DOUBLE_EQ(s.kappa, 0.125);
}

TEST(Setup, CommonNoiseDoesNotChangeExponent) {
  auto a = tiny_burgers();
  auto b = a;
  a.sigma = {{0.0, {0.0}}};
  b.sigma = {{0.0, {0.5}}};
  EXPECT_EQ(prepare_study(a).kappa, prepare_study(b).kappa);
}

TEST(Setup, InvalidConfigRaises) {
  auto c = tiny_burgers();
  c.beta = 0.5;
  EXPECT_THROW(prepare_study(c), ConfigError);
}

TEST(Replica, Deterministic) {
  const auto s = prepare_study(tiny_burgers());
  const auto a = run_replica_lockstep(s, {64, 256}, 17);
  const auto b = run_replica_lockstep(s, {64, 256}, 17);
  ASSERT_EQ(a.per_n.size(), 2u);
  EXPECT_EQ(a.spde.path_hash, b.spde.path_hash);
  for (int k = 0; k < 2; ++k) {
    EXPECT_EQ(a.per_n[k].sup_lq, b.per_n[k].sup_lq);
    EXPECT_EQ(a.per_n[k].kr_sup, b.per_n[k].kr_sup);
  }
  EXPECT_NE(run_replica_lockstep(s, {64}, 18).per_n[0].sup_lq, a.per_n[0].sup_lq);
}

TEST(Replica, LockstepMatchesSingleRun) {
  const auto s = prepare_study(tiny_burgers());
  const auto both = run_replica_lockstep(s, {64, 256}, 5);
  EXPECT_EQ(run_replica(s, 256, 5).sup_lq, both.per_n[1].sup_lq);
}

TEST(Replica, RecordFields) {
  const auto r = run_replica(tiny_burgers(), 256, 3);
  EXPECT_EQ(r.n, 256);
  EXPECT_GE(r.sup_lq, r.init_term);
  EXPECT_TRUE(std::isfinite(r.kr0));
  EXPECT_GE(r.kr_sup, r.kr0);
  EXPECT_LE(r.mass_dev, 1e-12);
  EXPECT_TRUE(r.cutoff_ok);
}

TEST(Replica, TinyCutoffFiresMonitor) {
  auto c = tiny_burgers();
  c.drift.auto_level = false;
  c.drift.level = 0.05;
  const auto r = run_replica(c, 256, 3);
  EXPECT_FALSE(r.cutoff_ok);
  EXPECT_GT(r.max_u, 0.05);
}

TEST(Study, DriftlessMediansDecrease) {
  auto c = tiny_burgers();
  c.drift.kind = "zero";
  c.dt_check = false;
  const auto st = run_convergence_study(c);
  ASSERT_EQ(st.rates.size(), 4u);
  EXPECT_TRUE(st.medians_decreasing);
  EXPECT_LT(st.fit.slope, 0.0);
}

TEST(Study, WorkerCountDoesNotChangeResults) {
  auto c = tiny_burgers();
  c.N = {64, 128, 256, 512};
  c.dt_check = false;
  RunOptions one, two;
  two.workers = 2;
  const auto a = run_convergence_study(c, one);
  const auto b = run_convergence_study(c, two);
  EXPECT_EQ(a.error_matrix(), b.error_matrix());
  EXPECT_EQ(a.fit.slope, b.fit.slope);
  EXPECT_EQ(a.fit.ci.lo, b.fit.ci.lo);
}

TEST(Study, OutputsAndSchema) {
  const auto dir = std::filesystem::temp_directory_path() / "chaoslab_study_outputs";
  std::filesystem::remove_all(dir);
  RunOptions opts;
  opts.dump_dir = dir / "dumps";
  opts.dump_fields = true;
  opts.dump_particles = true;
  const auto st = run_convergence_study(tiny_burgers(), opts);
  write_study_outputs(dir, st);
  EXPECT_EQ(first_line(dir / "rates.csv"), "N,m,estimate,ci_lo,ci_hi,init_term");
  EXPECT_EQ(first_line(dir / "replicas.csv"), "N,seed,sup_lq,cutoff_ok,kr0");
  EXPECT_TRUE(std::filesystem::exists(dir / "diagnostics.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "corollary.csv"));
  std::ifstream in(dir / "summary.json");
  const json s = json::parse(in);
  for (const char* key : {"slope", "slope_ci", "kappa_predicted", "beta", "gamma", "d", "q", "m", "theorem", "kernel",
                          "N", "R", "T", "dt", "M", "seed", "config"})
    EXPECT_TRUE(s.contains(key)) << key;
  EXPECT_EQ(s["theorem"], "burgers");
  EXPECT_DOUBLE_EQ(s["kappa_predicted"].get<double>(), 0.125);
  EXPECT_EQ(s["slope_ci"].size(), 2u);
  long rows = -1;
  {
    std::ifstream r(dir / "replicas.csv");
    std::string line;
    while (std::getline(r, line)) ++rows;
  }
  EXPECT_EQ(rows, 40);
  bool any_field = false, any_particles = false;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir / "dumps")) {
    any_field = any_field || e.path().extension() == ".bin";
    any_particles = any_particles || e.path().extension() == ".csv";
  }
  EXPECT_TRUE(any_field);
  EXPECT_TRUE(any_particles);
  EXPECT_TRUE(st.dt_check.ran);
  std::filesystem::remove_all(dir);
}

TEST(Corollary, MollificationGap) {
  // S^N against V^N * S^N moves mass by at most the first moment of V^N.
  const MollifierSpec m(1, 0.25);
  const PeriodicGrid g(1, 1024);
  const auto rho0 = InitialDensity::uniform_plus_cosine(1, 0.5);
  for (long n : {16L, 256L, 4096L}) {
    const auto ens = ParticleEnsemble::sample(rho0, n, 11);
    const auto rn = mollify(deposit(ens, g), m, n);
    const double bound = m.first_moment() * std::pow(static_cast<double>(n), -0.25) + 2.0 * g.spacing();
    EXPECT_LE(kr_distance_1d(ens, rn.rho), bound) << n;
  }
}

TEST(Corollary, ReportShape) {
  auto c = tiny_burgers();
  c.dt_check = false;
  const auto rep = corollary_report(run_convergence_study(c));
  EXPECT_DOUBLE_EQ(rep.epsilon, rep.kappa / 4.0);
  ASSERT_EQ(rep.rows.size(), 4u);
  EXPECT_DOUBLE_EQ(rep.rows[0].reference, std::pow(64.0, -(0.125 - 0.03125)));
  for (const auto& row : rep.rows) EXPECT_GT(row.estimate.value, 0.0);
}
