#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "chaoslab/fokker_planck.hpp"
#include "oracles.hpp"

using namespace chaoslab;

namespace {

SpectralSolver heat_only(const PeriodicGrid& g, double sigma) {
  return SpectralSolver(g, KernelSpec::keller_segel(g.dim(), 0.0), DriftSpec::zero(), NoiseModel::isotropic(g.dim(), sigma));
}

double l2_error(const Field& f, const std::function<double(const Vec&)>& exact) {
  return lq_norm(difference(f, Field::sample(f.grid(), exact)), 2.0);
}

}  // namespace

TEST(Heat, Multiplier) {
  EXPECT_NEAR(SpectralSolver::heat_multiplier_for({1}, 1, 0.01), 0.82087, 1e-5);
  EXPECT_EQ(SpectralSolver::heat_multiplier_for({0, 0}, 2, 0.3), 1.0);
}

TEST(Heat, Semigroup) {
  const PeriodicGrid g(1, 64);
  const auto s = heat_only(g, 0.0);
  auto init = [](const Vec& x) { return 1.0 + 0.4 * std::cos(kTwoPi * x[0]) + 0.2 * std::sin(6 * kPi * x[0]); };
  Field a = Field::sample(g, init), b = Field::sample(g, init);
  s.substep_diffusion(a, 0.01);
  s.substep_diffusion(a, 0.02);
  s.substep_diffusion(b, 0.03);
  EXPECT_LT(lq_norm(difference(a, b), 2.0), 1e-15);
}

TEST(CommonNoise, QuarterShift) {
  const PeriodicGrid g(1, 32);
  const auto s = heat_only(g, 1.0);
  Field f = Field::sample(g, [](const Vec& x) { return 1.0 + 0.5 * std::cos(kTwoPi * x[0]); });
  s.substep_common_noise(f, Vec{0.25, 0.0, 0.0});
  EXPECT_LT(l2_error(f, [](const Vec& x) { return 1.0 + 0.5 * std::sin(kTwoPi * x[0]); }), 1e-15);
}

TEST(CommonNoise, NormPreserved) {
  const PeriodicGrid g(2, 32);
  const auto s = heat_only(g, 1.0);
  Field f = Field::sample(g, [](const Vec& x) {
    return 1.0 + 0.3 * std::cos(kTwoPi * (x[0] + 2 * x[1])) + 0.2 * std::sin(kTwoPi * 3 * x[1]);
  });
  const double before = lq_norm(f, 2.0);
  s.substep_common_noise(f, Vec{0.123, -0.377, 0.0});
  EXPECT_NEAR(lq_norm(f, 2.0), before, 1e-13);
  EXPECT_NEAR(f.mass(), 1.0, 1e-14);
}

TEST(Solve, ForceFreeIsHeatFlow) {
  const PeriodicGrid g(1, 64);
  const auto s = heat_only(g, 0.0);
  const Field rho0 = Field::sample(g, [](const Vec& x) { return 1.0 + 0.5 * std::cos(kTwoPi * x[0]); });
  const auto paths = BrownianPaths::generate(1, 1, 0.01, 20);
  const auto traj = s.solve(rho0, paths, 5);
  ASSERT_EQ(traj.snapshots.size(), 5u);
  const double t = traj.times.back();
  EXPECT_NEAR(t, 0.2, 1e-14);
  const double decay = std::exp(-2.0 * kPi * kPi * t);
  EXPECT_LT(l2_error(traj.snapshots.back(), [&](const Vec& x) { return 1.0 + 0.5 * decay * std::cos(kTwoPi * x[0]); }),
            1e-12);
}

TEST(Solve, PureCommonNoiseIsTranslatedHeatFlow) {
  const PeriodicGrid g(2, 32);
  const auto s = heat_only(g, 1.0);
  auto mode = [](const Vec& x, double t, const std::vector<double>& b) {
    const double y0 = x[0] - b[0], y1 = x[1] - b[1];
    return 1.0 + 0.4 * std::exp(-2.0 * kPi * kPi * t) * std::cos(kTwoPi * y0) +
           0.2 * std::exp(-2.0 * kPi * kPi * 5.0 * t) * std::sin(kTwoPi * (y0 + 2 * y1));
  };
  const Field rho0 = Field::sample(g, [&](const Vec& x) { return mode(x, 0.0, {0.0, 0.0}); });
  const auto paths = BrownianPaths::generate(99, 2, 0.001, 200);
  const auto traj = s.solve(rho0, paths, 50);
  const auto b = paths.position(paths.steps());
  EXPECT_LT(l2_error(traj.snapshots.back(), [&](const Vec& x) { return mode(x, 0.2, b); }), 1e-10);
}

TEST(Solve, ViscousBurgersMatchesColeHopf) {
  const PeriodicGrid g(1, 128);
  const SpectralSolver s(g, KernelSpec::dirac(), DriftSpec::identity(), NoiseModel::isotropic(1, 0.0));
  const Field rho0 = Field::sample(g, [](const Vec& x) { return 1.0 + 0.5 * std::cos(kTwoPi * x[0]); });
  const double t = 0.1;
  const auto paths = BrownianPaths::generate(1, 1, t / 400, 400);
  const auto traj = s.solve(rho0, paths, 400);
  const oracle::ColeHopf ref;
  const Field exact = Field::sample(g, [&](const Vec& x) { return ref.rho(t, x[0]); });
  EXPECT_LT(lq_norm(difference(traj.snapshots.back(), exact), 2.0) / lq_norm(exact, 2.0), 1e-5);
}

TEST(Solve, WeakFormResidual) {
  // d/dt <rho, phi> = <rho, phi''/2 + rho phi'> for the Dirac identity drift
  // with no common noise, checked by central differences of the run.
  const PeriodicGrid g(1, 128);
  const SpectralSolver s(g, KernelSpec::dirac(), DriftSpec::identity(), NoiseModel::isotropic(1, 0.0));
  const Field rho0 = Field::sample(g, [](const Vec& x) { return 1.0 + 0.5 * std::cos(kTwoPi * x[0]); });
  const double dt = 1e-4;
  const auto traj = s.solve(rho0, BrownianPaths::generate(1, 1, dt, 200), 1);
  auto pair = [&](const Field& f, auto&& w) {
    double acc = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) acc += f.values()[n] * w(g.position(n)[0], f.values()[n]);
    return acc * g.spacing();
  };
  const auto phi = [](double x, double) { return std::sin(kTwoPi * x); };
  const auto gen = [](double x, double r) {
    return -0.5 * kTwoPi * kTwoPi * std::sin(kTwoPi * x) + r * kTwoPi * std::cos(kTwoPi * x);
  };
  for (int j : {50, 100, 150}) {
    const double lhs = (pair(traj.snapshots[j + 1], phi) - pair(traj.snapshots[j - 1], phi)) / (2 * dt);
    const double rhs = pair(traj.snapshots[j], gen);
    EXPECT_NEAR(lhs, rhs, 1e-4 * std::abs(rhs) + 1e-8);
  }
}

TEST(Solve, MassAndDivergenceFreeTransport) {
  const PeriodicGrid g(2, 64);
  const SpectralSolver s(g, KernelSpec::biot_savart(), DriftSpec::identity(), NoiseModel::isotropic(2, 0.5));
  const Field rho0 = InitialDensity::vortex_pair().on_grid(g);
  const auto traj = s.solve(rho0, BrownianPaths::generate(4, 2, 0.001, 100), 50);
  EXPECT_LE(traj.diagnostics.max_mass_deviation, 1e-12);
  EXPECT_LE(traj.diagnostics.max_clipped_mass, 1e-6);
  EXPECT_EQ(traj.diagnostics.steps, 100);
}

TEST(Solve, CflViolationRaises) {
  const PeriodicGrid g(1, 256);
  const SpectralSolver s(g, KernelSpec::dirac(), DriftSpec::identity(), NoiseModel::isotropic(1, 0.0));
  const Field rho0 = Field::sample(g, [](const Vec& x) { return 1.0 + 0.5 * std::cos(kTwoPi * x[0]); });
  EXPECT_THROW(s.solve(rho0, BrownianPaths::generate(1, 1, 0.01, 2)), StepSizeError);
}

TEST(Solve, BlowUpGuard) {
  // Heat flow never grows the norm, so a factor below one must fire on the first step.
  const PeriodicGrid g(1, 32);
  SolverLimits below;
  below.blow_up_factor = 0.5;
  const SpectralSolver t(g, KernelSpec::dirac(), DriftSpec::zero(), NoiseModel::isotropic(1, 0.0), 2.0, below);
  const Field rho0 = Field::sample(g, [](const Vec& x) { return 1.0 + 0.5 * std::cos(kTwoPi * x[0]); });
  EXPECT_NO_THROW(heat_only(g, 0.0).solve(rho0, BrownianPaths::generate(1, 1, 0.01, 3)));
  EXPECT_THROW(t.solve(rho0, BrownianPaths::generate(1, 1, 0.01, 3)), BlowUpError);
}

TEST(Dump, BinaryRoundTrip) {
  const PeriodicGrid g(2, 8);
  std::vector<Field> fields;
  std::vector<double> times{0.0, 0.5};
  for (int s = 0; s < 2; ++s)
    fields.push_back(Field::sample(g, [s](const Vec& x) { return 1.0 + s * x[0] - 0.25 * x[1]; }));
  std::stringstream buf;
  write_field_dump(buf, times, fields);
  EXPECT_EQ(buf.str().size(), 32u + 2u * (8u + 64u * 8u));
  EXPECT_EQ(buf.str().substr(0, 8), "CHLFLD01");
  const auto back = read_field_dump(buf);
  ASSERT_EQ(back.fields.size(), 2u);
  EXPECT_EQ(back.times, times);
  for (int s = 0; s < 2; ++s)
    for (std::size_t n = 0; n < g.size(); ++n) EXPECT_EQ(back.fields[s].values()[n], fields[s].values()[n]);
  std::stringstream bad("NOTADUMP");
  EXPECT_THROW(read_field_dump(bad), InvalidInput);
}

TEST(Dump, CsvLayout) {
  const PeriodicGrid g(2, 4);
  std::ostringstream out;
  write_field_csv(out, {0.25}, {Field(g, std::vector<double>(16, 1.0))});
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,node_index_1,node_index_2,rho");
  std::getline(in, line);
  EXPECT_EQ(line, "0.25,0,0,1");
  int rows = 1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 16);
}
