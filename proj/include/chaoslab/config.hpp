#pragma once

// Experiment configuration: JSON schema, shipped presets, validation against
// the admissibility windows, and construction of the numerical objects.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "chaoslab/drift.hpp"
#include "chaoslab/errors.hpp"
#include "chaoslab/initial.hpp"
#include "chaoslab/kernel.hpp"
#include "chaoslab/metrics.hpp"
#include "chaoslab/mollifier.hpp"
#include "chaoslab/particles.hpp"
#include "chaoslab/torus.hpp"

namespace chaoslab {

using json = nlohmann::json;

struct KernelConfig {
  std::string kind = "dirac";  // dirac | biot-savart | keller-segel | custom
  double chi = 1.0 / kTwoPi;
  std::string table;           // custom multiplier table path
  std::optional<double> gamma;
  std::optional<double> c_k;
  std::optional<double> q;
};

struct DriftConfig {
  std::string kind = "cutoff";  // identity | cutoff | zero
  bool auto_level = true;
  double level = std::numeric_limits<double>::infinity();
  double eta = 1.0;
};

struct InitialConfig {
  std::string preset = "uniform-plus-cosine";  // | gaussian-bump-periodized | vortex-pair
  double amplitude = 0.5;
  int wavenumber = 1;
  double width = 0.12;
  double weight = 0.5;
  double separation = 0.3;
};

struct SigmaPiece {
  double t_start = 0.0;
  std::vector<double> matrix;  // row-major d x d
};

struct ExperimentConfig {
  std::string name = "custom";
  int d = 1;
  double T = 0.5;
  double dt = 0.5 / 2048;
  int M = 512;
  double beta = 0.25;
  std::vector<long> N{256, 512, 1024, 2048, 4096, 8192};
  int R = 20;
  double m = 2.0;
  double q = 2.0;
  KernelConfig kernel;
  DriftConfig drift;
  std::vector<SigmaPiece> sigma{{0.0, {0.5}}};
  InitialConfig rho0;
  std::uint64_t seed = 20240601;
  long snapshot_every = 16;
  bool dt_check = true;

  long steps() const { return std::lround(T / dt); }
  long max_n() const {
    long best = 0;
    for (long n : N) best = std::max(best, n);
    return best;
  }
};

inline std::vector<long> powers_of_two(int lo, int hi) {
  std::vector<long> out;
  for (int e = lo; e <= hi; ++e) out.push_back(1L << e);
  return out;
}

inline std::vector<double> isotropic_matrix(int d, double s) {
  std::vector<double> m(static_cast<std::size_t>(d * d), 0.0);
  for (int a = 0; a < d; ++a) m[a * d + a] = s;
  return m;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"burgers1d", "navier-stokes-2d", "keller-segel-2d"};
  return names;
}

inline ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  if (name == "burgers1d") {
    c.d = 1;
    c.T = 0.5;
    c.dt = c.T / 2048;
    c.M = 512;
    c.beta = 0.25;
    c.N = powers_of_two(8, 13);
    c.R = 20;
    c.m = 2.0;
    c.q = 2.0;
    c.kernel = KernelConfig{};
    c.kernel.kind = "dirac";
    c.drift = DriftConfig{};
    c.sigma = {{0.0, isotropic_matrix(1, 0.5)}};
    c.rho0 = InitialConfig{};
    c.rho0.preset = "uniform-plus-cosine";
    c.rho0.amplitude = 0.5;
    c.snapshot_every = 16;
    return c;
  }
  if (name == "navier-stokes-2d") {
    c.d = 2;
    c.T = 0.25;
    c.dt = c.T / 2048;
    c.M = 128;
    c.beta = 1.0 / 3.0;
    c.N = powers_of_two(9, 13);
    c.R = 10;
    c.m = 2.0;
    c.q = 4.0;
    c.kernel = KernelConfig{};
    c.kernel.kind = "biot-savart";
    c.drift = DriftConfig{};
    c.sigma = {{0.0, isotropic_matrix(2, 0.5)}};
    c.rho0 = InitialConfig{};
    c.rho0.preset = "vortex-pair";
    c.rho0.amplitude = 0.8;
    c.rho0.width = 0.1;
    c.rho0.separation = 0.3;
    c.snapshot_every = 16;
    return c;
  }
  if (name == "keller-segel-2d") {
    c.d = 2;
    c.T = 0.25;
    c.dt = c.T / 2048;
    c.M = 128;
    c.beta = 1.0 / 3.0;
    c.N = powers_of_two(9, 13);
    c.R = 10;
    c.m = 2.0;
    c.q = 4.0;
    c.kernel = KernelConfig{};
    c.kernel.kind = "keller-segel";
    c.kernel.chi = 1.0 / kTwoPi;
    c.drift = DriftConfig{};
    c.sigma = {{0.0, isotropic_matrix(2, 0.5)}};
    c.rho0 = InitialConfig{};
    c.rho0.preset = "gaussian-bump-periodized";
    c.rho0.width = 0.12;
    c.rho0.weight = 0.5;
    c.snapshot_every = 16;
    return c;
  }
  throw ConfigError({"unknown preset '" + name + "' (known: burgers1d, navier-stokes-2d, keller-segel-2d)"});
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where,
                           std::vector<std::string>& problems) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) problems.push_back("unknown key '" + where + it.key() + "'");
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where, std::vector<std::string>& problems) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    problems.push_back("key '" + where + key + "' has the wrong type");
  }
}

inline std::vector<double> parse_matrix(const json& v, int d, std::vector<std::string>& problems) {
  if (v.is_number()) return isotropic_matrix(d, v.get<double>());
  std::vector<double> out;
  if (v.is_array() && static_cast<int>(v.size()) == d) {
    for (const auto& row : v) {
      if (!row.is_array() || static_cast<int>(row.size()) != d) {
        problems.push_back("sigma must be a number or a d x d array");
        return {};
      }
      for (const auto& x : row) {
        if (!x.is_number()) {
          problems.push_back("sigma entries must be numbers");
          return {};
        }
        out.push_back(x.get<double>());
      }
    }
    return out;
  }
  problems.push_back("sigma must be a number or a d x d array");
  return {};
}

}  // namespace detail

// Overlays the JSON object on `base`; every problem is collected.
inline ExperimentConfig config_from_json(const json& j, ExperimentConfig base = {}) {
  std::vector<std::string> problems;
  if (!j.is_object()) throw ConfigError({"configuration must be a JSON object"});
  detail::reject_unknown(j,
                         {"name", "d", "T", "dt", "M", "beta", "N", "R", "m", "q", "kernel", "drift", "sigma", "rho0",
                          "seed", "snapshot_every", "dt_check", "preset"},
                         "", problems);
  ExperimentConfig c = base;
  if (j.contains("preset")) {
    if (!j["preset"].is_string()) {
      problems.push_back("key 'preset' must be a string");
    } else {
      try {
        c = preset(j["preset"].get<std::string>());
      } catch (const ConfigError& e) {
        for (const auto& p : e.problems()) problems.push_back(p);
      }
    }
  }
  detail::read(j, "name", c.name, "", problems);
  detail::read(j, "d", c.d, "", problems);
  detail::read(j, "T", c.T, "", problems);
  detail::read(j, "dt", c.dt, "", problems);
  detail::read(j, "M", c.M, "", problems);
  detail::read(j, "beta", c.beta, "", problems);
  detail::read(j, "N", c.N, "", problems);
  detail::read(j, "R", c.R, "", problems);
  detail::read(j, "m", c.m, "", problems);
  detail::read(j, "q", c.q, "", problems);
  detail::read(j, "seed", c.seed, "", problems);
  detail::read(j, "snapshot_every", c.snapshot_every, "", problems);
  detail::read(j, "dt_check", c.dt_check, "", problems);
  if (j.contains("kernel")) {
    const json& k = j["kernel"];
    if (!k.is_object()) {
      problems.push_back("key 'kernel' must be an object");
    } else {
      detail::reject_unknown(k, {"kind", "chi", "table", "gamma", "C_K", "q"}, "kernel.", problems);
      c.kernel = KernelConfig{};
      detail::read(k, "kind", c.kernel.kind, "kernel.", problems);
      detail::read(k, "chi", c.kernel.chi, "kernel.", problems);
      detail::read(k, "table", c.kernel.table, "kernel.", problems);
      double x = 0.0;
      if (k.contains("gamma")) detail::read(k, "gamma", x, "kernel.", problems), c.kernel.gamma = x;
      if (k.contains("C_K")) detail::read(k, "C_K", x, "kernel.", problems), c.kernel.c_k = x;
      if (k.contains("q")) detail::read(k, "q", x, "kernel.", problems), c.kernel.q = x;
    }
  }
  if (j.contains("drift")) {
    const json& f = j["drift"];
    if (!f.is_object()) {
      problems.push_back("key 'drift' must be an object");
    } else {
      detail::reject_unknown(f, {"kind", "A", "eta"}, "drift.", problems);
      detail::read(f, "kind", c.drift.kind, "drift.", problems);
      detail::read(f, "eta", c.drift.eta, "drift.", problems);
      if (f.contains("A")) {
        if (f["A"].is_string() && f["A"].get<std::string>() == "auto") {
          c.drift.auto_level = true;
        } else if (f["A"].is_number()) {
          c.drift.auto_level = false;
          c.drift.level = f["A"].get<double>();
        } else {
          problems.push_back("key 'drift.A' must be a number or \"auto\"");
        }
      }
    }
  }
  if (j.contains("rho0")) {
    const json& r = j["rho0"];
    if (!r.is_object()) {
      problems.push_back("key 'rho0' must be an object");
    } else {
      detail::reject_unknown(r, {"preset", "amplitude", "wavenumber", "width", "weight", "separation"}, "rho0.",
                             problems);
      detail::read(r, "preset", c.rho0.preset, "rho0.", problems);
      detail::read(r, "amplitude", c.rho0.amplitude, "rho0.", problems);
      detail::read(r, "wavenumber", c.rho0.wavenumber, "rho0.", problems);
      detail::read(r, "width", c.rho0.width, "rho0.", problems);
      detail::read(r, "weight", c.rho0.weight, "rho0.", problems);
      detail::read(r, "separation", c.rho0.separation, "rho0.", problems);
    }
  }
  if (j.contains("sigma")) {
    const json& s = j["sigma"];
    c.sigma.clear();
    if (s.is_array() && !s.empty() && s.front().is_object()) {
      for (const auto& piece : s) {
        if (!piece.is_object() || !piece.contains("sigma")) {
          problems.push_back("sigma schedule entries must be objects {\"t\": start, \"sigma\": ...}");
          continue;
        }
        detail::reject_unknown(piece, {"t", "sigma"}, "sigma[].", problems);
        SigmaPiece p;
        detail::read(piece, "t", p.t_start, "sigma[].", problems);
        p.matrix = detail::parse_matrix(piece["sigma"], c.d, problems);
        c.sigma.push_back(std::move(p));
      }
    } else {
      c.sigma.push_back({0.0, detail::parse_matrix(s, c.d, problems)});
    }
  }
  if (!problems.empty()) throw ConfigError(problems);
  return c;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open configuration file " + path});
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError({"configuration file " + path + " is not valid JSON: " + e.what()});
  }
  return config_from_json(j, std::move(base));
}

inline json config_to_json(const ExperimentConfig& c) {
  json k = {{"kind", c.kernel.kind}};
  if (c.kernel.kind == "keller-segel") k["chi"] = c.kernel.chi;
  if (!c.kernel.table.empty()) k["table"] = c.kernel.table;
  if (c.kernel.gamma) k["gamma"] = *c.kernel.gamma;
  if (c.kernel.c_k) k["C_K"] = *c.kernel.c_k;
  if (c.kernel.q) k["q"] = *c.kernel.q;
  json f = {{"kind", c.drift.kind}, {"eta", c.drift.eta}};
  if (c.drift.kind == "cutoff") {
    if (c.drift.auto_level)
      f["A"] = "auto";
    else
      f["A"] = c.drift.level;
  }
  json sigma = json::array();
  for (const auto& p : c.sigma) {
    json rows = json::array();
    for (int a = 0; a < c.d; ++a) {
      json row = json::array();
      for (int b = 0; b < c.d; ++b)
        row.push_back(p.matrix.size() == static_cast<std::size_t>(c.d * c.d) ? p.matrix[a * c.d + b] : 0.0);
      rows.push_back(row);
    }
    sigma.push_back({{"t", p.t_start}, {"sigma", rows}});
  }
  json r = {{"preset", c.rho0.preset}};
  if (c.rho0.preset == "uniform-plus-cosine") {
    r["amplitude"] = c.rho0.amplitude;
    r["wavenumber"] = c.rho0.wavenumber;
  } else if (c.rho0.preset == "gaussian-bump-periodized") {
    r["width"] = c.rho0.width;
    r["weight"] = c.rho0.weight;
  } else {
    r["amplitude"] = c.rho0.amplitude;
    r["width"] = c.rho0.width;
    r["separation"] = c.rho0.separation;
  }
  return {{"name", c.name}, {"d", c.d},       {"T", c.T},           {"dt", c.dt},       {"M", c.M},
          {"beta", c.beta}, {"N", c.N},       {"R", c.R},           {"m", c.m},         {"q", c.q},
          {"kernel", k},    {"drift", f},     {"sigma", sigma},     {"rho0", r},        {"seed", c.seed},
          {"snapshot_every", c.snapshot_every}, {"dt_check", c.dt_check}};
}

// ---------------------------------------------------------------------------
// Construction

inline KernelSpec build_kernel(const ExperimentConfig& c) {
  const double q = c.kernel.q.value_or(c.q);
  if (c.kernel.kind == "dirac") return KernelSpec::dirac(c.d);
  if (c.kernel.kind == "biot-savart") return KernelSpec::biot_savart(q, c.kernel.c_k);
  if (c.kernel.kind == "keller-segel") return KernelSpec::keller_segel(c.d, c.kernel.chi, q, c.kernel.c_k);
  if (c.kernel.kind == "custom") {
    HolderMeta meta{c.kernel.gamma.value_or(0.0), q, c.kernel.c_k};
    return KernelSpec::load_custom_table(c.kernel.table, c.d, meta);
  }
  throw ConfigError({"unknown kernel kind '" + c.kernel.kind + "'"});
}

inline RateTheorem theorem_for(const ExperimentConfig& c) {
  return c.kernel.kind == "dirac" ? RateTheorem::kBurgers : RateTheorem::kGeneral;
}

inline double kernel_gamma(const ExperimentConfig& c) {
  if (c.kernel.kind == "dirac") return 1.0;
  if (c.kernel.gamma) return *c.kernel.gamma;
  const double q = c.kernel.q.value_or(c.q);
  return 1.0 - c.d / q;
}

inline NoiseModel build_noise(const ExperimentConfig& c) {
  if (c.sigma.empty()) return NoiseModel::isotropic(c.d, 0.0);
  NoiseModel noise(c.d, c.sigma.front().matrix);
  for (std::size_t p = 1; p < c.sigma.size(); ++p) noise.add_piece(c.sigma[p].t_start, c.sigma[p].matrix);
  return noise;
}

inline InitialDensity build_rho0(const ExperimentConfig& c) {
  const auto& r = c.rho0;
  if (r.preset == "uniform-plus-cosine") return InitialDensity::uniform_plus_cosine(c.d, r.amplitude, r.wavenumber);
  if (r.preset == "gaussian-bump-periodized") return InitialDensity::gaussian_bump(c.d, r.width, r.weight);
  if (r.preset == "vortex-pair") {
    if (c.d != 2) throw ConfigError({"rho0 preset vortex-pair needs d = 2"});
    return InitialDensity::vortex_pair(r.amplitude, r.width, r.separation);
  }
  throw ConfigError({"unknown rho0 preset '" + r.preset + "'"});
}

// Drift for a given cutoff level (ignored unless the kind is cutoff).
inline DriftSpec build_drift(const ExperimentConfig& c, double level) {
  if (c.drift.kind == "identity") return DriftSpec::identity();
  if (c.drift.kind == "zero") return DriftSpec::zero();
  if (c.drift.kind == "cutoff") return DriftSpec::cutoff(level);
  throw ConfigError({"unknown drift kind '" + c.drift.kind + "'"});
}

// ---------------------------------------------------------------------------
// Validation

struct Validation {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  bool ok() const { return errors.empty(); }
};

// Checks every admissibility window and numerical gate; never stops early.
// `study` adds the requirements of a rate study (>= 4 N over >= 2 octaves,
// >= 10 replicas).
inline Validation validate_config(const ExperimentConfig& c, bool study = true) {
  Validation v;
  auto err = [&](const std::string& s) { v.errors.push_back(s); };
  const bool dim_ok = c.d >= 1 && c.d <= kMaxDim;
  if (!dim_ok) err("d = " + std::to_string(c.d) + " unsupported (1..3)");
  if (!(c.T > 0.0)) err("T must be positive");
  if (!(c.dt > 0.0)) err("dt must be positive");
  if (c.T > 0.0 && c.dt > 0.0) {
    const double steps = c.T / c.dt;
    if (std::abs(steps - std::round(steps)) > 1e-9 * steps) err("T / dt must be an integer number of steps");
  }
  if (c.M < 2 || (c.M & (c.M - 1)) != 0) err("M must be a power of two >= 2");
  if (c.N.empty()) err("N list is empty");
  for (long n : c.N)
    if (n < 1) err("every N must be positive");
  if (c.R < 2) err("R must be at least 2 replicas");
  if (!(c.m >= 1.0)) err("moment order m must be >= 1");
  if (!(c.q >= 1.0)) err("q must be >= 1");
  if (c.snapshot_every < 1) err("snapshot_every must be positive");
  if (study) {
    std::set<long> distinct(c.N.begin(), c.N.end());
    if (distinct.size() < 4) err("a rate study needs at least 4 distinct N values");
    if (!distinct.empty() && *distinct.rbegin() < 4 * *distinct.begin())
      err("the N values must span at least 2 octaves (max N >= 4 min N)");
    if (c.R < 10) err("a rate study needs at least 10 replicas");
  }
  if (c.R < 5 * c.m)
    v.warnings.push_back("R = " + std::to_string(c.R) + " < 5 m: L^m estimates with m = " + std::to_string(c.m) +
                         " may be unstable");

  // Mollifier exponent and the theorem windows.
  if (!(c.beta > 0.0 && c.beta < 1.0)) err("beta must lie in (0, 1) (mollifier scaling assumption)");
  const std::set<std::string> kernels{"dirac", "biot-savart", "keller-segel", "custom"};
  if (!kernels.count(c.kernel.kind)) err("unknown kernel kind '" + c.kernel.kind + "'");
  const double kq = c.kernel.q.value_or(c.q);
  if (c.kernel.kind == "dirac") {
    if (c.d != 1) err("the Dirac kernel needs d = 1");
    if (c.q != 2.0) err("the Dirac kernel needs q = 2");
  }
  if (c.kernel.kind == "biot-savart" && c.d != 2) err("the Biot-Savart kernel needs d = 2");
  if (c.kernel.kind == "keller-segel" && !(c.kernel.chi >= 0.0)) err("keller-segel chi must be nonnegative");
  if (c.kernel.kind == "custom") {
    if (c.kernel.table.empty()) err("custom kernel needs kernel.table");
    if (!c.kernel.gamma || !(*c.kernel.gamma > 0.0 && *c.kernel.gamma <= 1.0))
      err("custom kernel needs kernel.gamma in (0, 1] (kernel regularity assumption)");
    if (!c.kernel.c_k || !(*c.kernel.c_k > 0.0)) err("custom kernel needs kernel.C_K > 0 (kernel regularity assumption)");
  }
  if (c.kernel.kind != "dirac" && dim_ok && !(kq > c.d))
    err("q = " + std::to_string(kq) + " must exceed d (kernel regularity assumption)");
  if (dim_ok && c.beta > 0.0 && c.beta < 1.0 && kernels.count(c.kernel.kind)) {
    const RateTheorem th = theorem_for(c);
    const bool windows_defined = th == RateTheorem::kBurgers ? (c.d == 1 && c.q == 2.0) : c.q > c.d;
    if (windows_defined) {
      const double upper = beta_upper_bound(th, c.d, c.q);
      if (!(c.beta < upper)) err(beta_window_message(th, c.beta, c.d, c.q));
    }
    const double gamma = kernel_gamma(c);
    if (th == RateTheorem::kGeneral && !(gamma > 0.0 && gamma <= 1.0))
      err("Hoelder exponent gamma = " + std::to_string(gamma) + " outside (0, 1]");
  }

  // Drift.
  if (c.drift.kind != "identity" && c.drift.kind != "cutoff" && c.drift.kind != "zero")
    err("unknown drift kind '" + c.drift.kind + "'");
  if (c.drift.kind == "cutoff" && !c.drift.auto_level && !(c.drift.level > 0.0)) err("cutoff level A must be positive");
  if (c.drift.kind == "cutoff" && !(c.drift.eta > 0.0)) err("drift.eta must be positive");

  // Noise: constant in space, d x d, finite.
  for (std::size_t p = 0; p < c.sigma.size(); ++p) {
    if (dim_ok && c.sigma[p].matrix.size() != static_cast<std::size_t>(c.d * c.d)) err("sigma must be d x d");
    for (double s : c.sigma[p].matrix)
      if (!std::isfinite(s)) err("sigma entries must be finite");
    if (p > 0 && !(c.sigma[p].t_start > c.sigma[p - 1].t_start)) err("sigma schedule start times must increase");
  }
  if (!c.sigma.empty() && c.sigma.front().t_start != 0.0) err("the sigma schedule must start at t = 0");

  // Initial density.
  if (dim_ok) {
    try {
      build_rho0(c);
    } catch (const Error& e) {
      err(std::string("rho0: ") + e.what());
    }
  }

  // Resolution rule h <= (max N)^{-beta/d} / 8.
  if (dim_ok && c.M >= 2 && (c.M & (c.M - 1)) == 0 && c.beta > 0.0 && c.beta < 1.0 && c.max_n() >= 1) {
    const MollifierSpec moll(c.d, c.beta);
    const PeriodicGrid grid(c.d, c.M);
    if (!moll.resolves(grid, c.max_n()))
      err("resolution rule violated: h = 1/" + std::to_string(c.M) + " > (max N)^{-beta/d}/8 = " +
          std::to_string(moll.length_scale(c.max_n()) / 8.0));
  }

  // CFL pre-check with a known drift bound.
  if (c.drift.kind == "cutoff" && !c.drift.auto_level && c.drift.level > 0.0 && c.M >= 2 && c.dt > 0.0) {
    const double ratio = (c.drift.level + 1.0) * c.dt * c.M;
    if (ratio > 0.5)
      err("CFL pre-check: (A + 1) dt / h = " + std::to_string(ratio) + " exceeds 0.5 (cutoff drift bound)");
  }
  return v;
}

inline void require_valid(const ExperimentConfig& c, bool study = true) {
  const Validation v = validate_config(c, study);
  if (!v.ok()) throw ConfigError(v.errors);
}

}  // namespace chaoslab
