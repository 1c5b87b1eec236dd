// Acceptance checks A1-A9. One PASS/FAIL line per criterion; exit status is
// the number of failures. The two rate studies dominate the runtime.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chaoslab/chaoslab.hpp"
#include "oracles.hpp"

using namespace chaoslab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const char* id, const char* title, const std::function<Outcome()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  std::printf("%s %s  %s  [%s] (%.1fs)\n", id, o.pass ? "PASS" : "FAIL", title, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Outcome a1_mollifier_scaling() {
  double worst = 0.0;
  for (int d : {1, 2})
    for (double q : {2.0, 4.0})
      for (double beta : {0.2, 0.3})
        for (long n : {64L, 256L, 1024L}) {
          const MollifierSpec s(d, beta);
          const PeriodicGrid g(d, d == 1 ? 8192 : 512);
          const double grid = std::pow(vn_gradient_norm_q(s, n, q, g), q);
          const double base = std::pow(s.gradient_norm_q(q), q);
          const double want = std::pow(static_cast<double>(n), q * beta * (1.0 + 1.0 / d) - beta);
          worst = std::max(worst, std::abs(grid / base / want - 1.0));
        }
  return {worst <= 1e-4, fmt("worst relative deviation %.2e over 24 cases (tol 1e-4)", worst)};
}

Outcome a2_translation() {
  const PeriodicGrid g(1, 256);
  const double t = 0.5, dt = t / 2048, sigma = 0.7;
  const SpectralSolver solver(g, KernelSpec::dirac(), DriftSpec::zero(), NoiseModel::isotropic(1, sigma));
  auto profile = [](double x, double time) {
    return 1.0 + 0.5 * std::exp(-2.0 * kPi * kPi * time) * std::cos(kTwoPi * x) +
           0.2 * std::exp(-2.0 * kPi * kPi * 9.0 * time) * std::sin(3.0 * kTwoPi * x);
  };
  const Field rho0 = Field::sample(g, [&](const Vec& x) { return profile(x[0], 0.0); });
  const auto paths = BrownianPaths::generate(2024, 1, dt, 2048);
  const auto traj = solver.solve(rho0, paths, 2048);
  const double shift = sigma * paths.position(paths.steps())[0];
  const Field exact = Field::sample(g, [&](const Vec& x) { return profile(x[0] - shift, t); });
  const double err = lq_norm(difference(traj.snapshots.back(), exact), 2.0);
  return {err <= 1e-10, fmt("L2 error %.2e (tol 1e-10)", err)};
}

double burgers_error(const PeriodicGrid& g, double t, long steps, const Field& exact) {
  const SpectralSolver solver(g, KernelSpec::dirac(), DriftSpec::identity(), NoiseModel::isotropic(1, 0.0));
  const Field rho0 = Field::sample(g, [](const Vec& x) { return 1.0 + 0.5 * std::cos(kTwoPi * x[0]); });
  const auto still = BrownianPaths(1, t / steps, std::vector<double>(steps, 0.0));
  const auto traj = solver.solve(rho0, still, steps);
  return lq_norm(difference(traj.snapshots.back(), exact), 2.0) / lq_norm(exact, 2.0);
}

Outcome a3_cole_hopf() {
  const PeriodicGrid g(1, 256);
  const double t = 0.5;
  const oracle::ColeHopf ref;
  const Field exact = Field::sample(g, [&](const Vec& x) { return ref.rho(t, x[0]); });
  const double e1 = burgers_error(g, t, 4096, exact);
  const double e2 = burgers_error(g, t, 8192, exact);
  const double ratio = e1 / e2;
  return {e1 <= 1e-4 && ratio >= 3.4 && ratio <= 4.6,
          fmt("relative L2 %.2e at dt=T/4096 (tol 1e-4), %.2e at T/8192, ratio %.3f (want [3.4, 4.6])", e1, e2, ratio)};
}

Outcome rate_outcome(const StudyResult& st, double slope_max, double cutoff_min) {
  std::string medians;
  for (const auto& r : st.rates) medians += fmt("%.4g ", r.median);
  const bool ci_excludes_zero = st.fit.ci.hi < 0.0;
  bool pass = st.medians_decreasing && st.fit.slope <= slope_max && ci_excludes_zero;
  std::string detail = fmt("slope %.4f CI [%.4f, %.4f], predicted -%.4f", st.fit.slope, st.fit.ci.lo, st.fit.ci.hi,
                           st.setup.kappa) +
                       ", medians " + medians + (st.medians_decreasing ? "decreasing" : "NOT decreasing");
  if (cutoff_min > 0.0) {
    pass = pass && st.cutoff_ok_fraction >= cutoff_min;
    detail += fmt(", cutoff ok %.0f%%", 100.0 * st.cutoff_ok_fraction);
  }
  return {pass, detail};
}

Outcome a6_conservation(const std::vector<const StudyResult*>& studies) {
  bool pass = true;
  std::string detail;
  for (const StudyResult* st : studies) {
    const auto& c = st->conservation;
    const bool div_ok = !std::isfinite(c.div_residual) || c.div_residual <= 1e-10;
    const bool ok = c.mass_dev_rho <= 1e-12 && c.mass_dev_rho_n <= 1e-12 && c.clipped_rho <= 1e-6 && div_ok;
    pass = pass && ok;
    detail += st->setup.cfg.name + fmt(": mass rho %.1e rhoN %.1e, clipped %.1e", c.mass_dev_rho, c.mass_dev_rho_n,
                                       c.clipped_rho);
    if (std::isfinite(c.div_residual)) detail += fmt(", div %.1e", c.div_residual);
    detail += "; ";
  }
  return {pass, detail};
}

Outcome a7_mollification_gap() {
  const MollifierSpec moll(1, 0.25);
  const PeriodicGrid g(1, 512);
  const auto rho0 = InitialDensity::uniform_plus_cosine(1, 0.5);
  const Stream stream = Stream::labelled(7, "acceptance-lipschitz");
  std::uint64_t counter = 0;
  auto u = [&]() { return stream.uniform_pair(Channel::kAuxiliary, counter++)[0]; };

  // Half trigonometric sums with sum |a_k| = 1, half shifted circle distances;
  // both are 1-Lipschitz and bounded by 1.
  std::vector<std::function<double(double)>> tests;
  for (int k = 0; k < 20; ++k) {
    if (k % 2 == 0) {
      std::vector<double> a(5), th(5);
      double total = 0.0;
      for (int j = 0; j < 5; ++j) {
        a[j] = 2.0 * u() - 1.0;
        th[j] = kTwoPi * u();
        total += std::abs(a[j]);
      }
      for (double& x : a) x /= total;
      tests.push_back([a, th](double x) {
        double s = 0.0;
        for (int j = 0; j < 5; ++j) s += a[j] * std::sin(kTwoPi * (j + 1) * x + th[j]) / (kTwoPi * (j + 1));
        return s;
      });
    } else {
      const double c = u() - 0.5;
      tests.push_back([c](double x) { return oracle::circle_distance(x, c) - 0.25; });
    }
  }

  double worst_ratio = 0.0;
  bool pass = true;
  for (long n : {256L, 1024L, 4096L}) {
    const double bound = std::pow(static_cast<double>(n), -0.25) * moll.first_moment() + 2.0 * g.spacing();
    for (int rep = 0; rep < 3; ++rep) {
      const auto ens = ParticleEnsemble::sample(rho0, n, replica_seed(99, rep));
      const auto rn = mollify(deposit(ens, g), moll, n);
      for (const auto& phi : tests) {
        double grid_pair = 0.0, particle_pair = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) grid_pair += rn.rho.values()[j] * phi(g.node(static_cast<int>(j)));
        grid_pair *= g.spacing();
        for (long i = 0; i < n; ++i) particle_pair += phi(ens.position(i)[0]);
        particle_pair /= static_cast<double>(n);
        const double gap = std::abs(grid_pair - particle_pair);
        worst_ratio = std::max(worst_ratio, gap / bound);
        pass = pass && gap <= bound;
      }
    }
  }
  return {pass, fmt("largest gap / bound = %.3f over 20 test functions x 3 N x 3 samples", worst_ratio)};
}

Outcome a8_counting(const std::vector<const StudyResult*>& studies) {
  bool pass = true;
  std::string detail;
  for (const StudyResult* st : studies) {
    const auto& c = st->counting;
    pass = pass && c.pooled_ok;
    detail += st->setup.cfg.name + fmt(": %.0f cutoff failures <= %.0f eta exceedances", c.cutoff_failures,
                                       c.eta_exceedances) +
              (c.pooled_ok ? "" : " VIOLATED") + (c.per_n_ok ? " (also per N)" : " (not per N)") + "; ";
  }
  return {pass, detail};
}

Outcome a9_kr_oracle() {
  const Stream stream = Stream::labelled(9, "acceptance-kr");
  std::uint64_t counter = 0;
  auto u = [&]() { return stream.uniform_pair(Channel::kAuxiliary, counter++)[0]; };
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int na = 1 + trial % 6, nb = 1 + (trial / 6) % 6;
    std::vector<double> pa(na), pb(nb), wa(na), wb(nb);
    double sa = 0.0, sb = 0.0;
    for (int i = 0; i < na; ++i) {
      // some atoms land on a coarse lattice so supports can coincide
      pa[i] = trial % 3 == 0 ? std::floor(8.0 * u()) / 8.0 - 0.5 : u() - 0.5;
      wa[i] = u() + 0.05;
      sa += wa[i];
    }
    for (int i = 0; i < nb; ++i) {
      pb[i] = trial % 3 == 0 ? std::floor(8.0 * u()) / 8.0 - 0.5 : u() - 0.5;
      wb[i] = u() + 0.05;
      sb += wb[i];
    }
    std::vector<double> x, mu, nu;
    for (int i = 0; i < na; ++i) {
      wa[i] /= sa;
      x.push_back(pa[i]);
      mu.push_back(wa[i]);
      nu.push_back(0.0);
    }
    for (int i = 0; i < nb; ++i) {
      wb[i] /= sb;
      x.push_back(pb[i]);
      mu.push_back(0.0);
      nu.push_back(wb[i]);
    }
    const double lp = oracle::kr_dual_lp(x, mu, nu);
    const double ours = kr_distance_1d(Measure1D::from_atoms(pa, wa), Measure1D::from_atoms(pb, wb));
    worst = std::max(worst, std::abs(lp - ours));
  }
  const double delta = kr_distance_1d(Measure1D::from_atoms(std::vector<double>{0.0}, std::vector<double>{1.0}),
                                      Measure1D::from_atoms(std::vector<double>{0.25}, std::vector<double>{1.0}));
  const bool pass = worst <= 1e-6 && std::abs(delta - 0.25) <= 1e-9;
  return {pass, fmt("max |ours - LP| = %.2e over 50 pairs (tol 1e-6); delta pair %.12f", worst, delta)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks A1-A9"};
  int workers = 1;
  std::string out_dir;
  app.add_option("--workers", workers, "worker threads for the rate studies")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "write the study outputs of A4 and A5 under this directory");
  CLI11_PARSE(app, argc, argv);

  RunOptions opts;
  opts.workers = workers;

  report("A1", "mollifier gradient scaling", a1_mollifier_scaling);
  report("A2", "translation oracle", a2_translation);
  report("A3", "deterministic Burgers vs Cole-Hopf", a3_cole_hopf);

  std::optional<StudyResult> burgers, navier;
  report("A4", "burgers1d rate study", [&]() {
    burgers.emplace(run_convergence_study(preset("burgers1d"), opts));
    if (!out_dir.empty()) write_study_outputs(std::filesystem::path(out_dir) / "burgers1d", *burgers);
    return rate_outcome(*burgers, -0.08, 0.0);
  });
  report("A5", "navier-stokes-2d rate study", [&]() {
    navier.emplace(run_convergence_study(preset("navier-stokes-2d"), opts));
    if (!out_dir.empty()) write_study_outputs(std::filesystem::path(out_dir) / "navier-stokes-2d", *navier);
    auto o = rate_outcome(*navier, -0.05, 0.9);
    return o;
  });

  std::vector<const StudyResult*> studies;
  if (burgers) studies.push_back(&*burgers);
  if (navier) studies.push_back(&*navier);
  report("A6", "conservation and positivity", [&]() {
    if (studies.size() < 2) return Outcome{false, "a rate study did not complete"};
    return a6_conservation(studies);
  });
  report("A7", "mollification gap", a7_mollification_gap);
  report("A8", "cutoff counting inequality", [&]() {
    if (studies.size() < 2) return Outcome{false, "a rate study did not complete"};
    return a8_counting(studies);
  });
  report("A9", "bounded-Lipschitz distance vs LP dual", a9_kr_oracle);

  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
