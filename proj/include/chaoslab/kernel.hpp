#pragma once

// Interaction kernels K as Fourier multipliers on the torus, and the mollified
// kernels G^N = K * V^N used by the particle systems.
//
// Symbols follow the torus convention f(x) = sum_k fhat(k) e^{2 pi i k.x}:
//   Biot-Savart   (i / 2pi) k^perp / |k|^2,  k^perp = (-k_2, k_1)
//   Keller-Segel  chi i k / (2pi |k|^2)       (= chi grad (-Laplacian)^{-1}, attractive:
//                 in d = 2 it is the periodization of -(chi / 2pi) x / |x|^2)
//   Dirac         1 for every k
// The 2pi factors cancel exactly: grad^perp (-Laplacian)^{-1} has symbol
// 2 pi i k^perp / (4 pi^2 |k|^2), which is the Biot-Savart series coefficient.

#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "chaoslab/errors.hpp"
#include "chaoslab/mollifier.hpp"
#include "chaoslab/rng.hpp"
#include "chaoslab/torus.hpp"

namespace chaoslab {

enum class KernelKind { kBiotSavart2d, kKellerSegel, kDirac, kCustom };

inline const char* kernel_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::kBiotSavart2d: return "biot-savart";
    case KernelKind::kKellerSegel: return "keller-segel";
    case KernelKind::kDirac: return "dirac";
    case KernelKind::kCustom: return "custom";
  }
  return "unknown";
}

// Regularity data ||K * f||_{C^gamma} <= C_K ||f||_q. C_K is unknown for the
// built-in kernels until calibrated on a grid.
struct HolderMeta {
  double gamma = 1.0;
  double q = 2.0;
  std::optional<double> c_k;
};

inline std::array<cplx, 2> biot_savart_symbol(const IVec& k) {
  const double k2 = static_cast<double>(k[0]) * k[0] + static_cast<double>(k[1]) * k[1];
  if (k2 == 0.0) throw DomainError("biot_savart_symbol: zero mode has no symbol");
  const cplx factor(0.0, 1.0 / (kTwoPi * k2));
  return {factor * static_cast<double>(-k[1]), factor * static_cast<double>(k[0])};
}

inline std::vector<cplx> keller_segel_symbol(const IVec& k, int dim, double chi) {
  double k2 = 0.0;
  for (int a = 0; a < dim; ++a) k2 += static_cast<double>(k[a]) * k[a];
  if (k2 == 0.0) throw DomainError("keller_segel_symbol: zero mode has no symbol");
  std::vector<cplx> out(dim);
  const cplx factor(0.0, chi / (kTwoPi * k2));
  for (int a = 0; a < dim; ++a) out[a] = factor * static_cast<double>(k[a]);
  return out;
}

inline cplx dirac_symbol(const IVec&) { return {1.0, 0.0}; }

class KernelSpec {
 public:
  static KernelSpec biot_savart(double q = 4.0, std::optional<double> c_k = std::nullopt) {
    KernelSpec s(KernelKind::kBiotSavart2d, 2, 2);
    s.holder_ = {1.0 - 2.0 / q, q, c_k};
    return s;
  }

  static KernelSpec keller_segel(int dim, double chi, double q = 4.0,
                                 std::optional<double> c_k = std::nullopt) {
    if (!(chi >= 0.0)) throw InvalidParameter("keller_segel: chi must be nonnegative");
    KernelSpec s(KernelKind::kKellerSegel, dim, dim);
    s.chi_ = chi;
    s.holder_ = {1.0 - dim / q, q, c_k};
    return s;
  }

  static KernelSpec dirac(int dim = 1) {
    KernelSpec s(KernelKind::kDirac, dim, 1);
    s.holder_ = {1.0, 2.0, std::nullopt};
    return s;
  }

  using Table = std::map<std::vector<int>, std::vector<cplx>>;

  static KernelSpec custom(int dim, Table table, HolderMeta meta) {
    if (!(meta.gamma > 0.0 && meta.gamma <= 1.0))
      throw InvalidParameter("custom kernel: gamma must lie in (0, 1]");
    if (!meta.c_k || !(*meta.c_k > 0.0)) throw InvalidParameter("custom kernel: C_K must be positive");
    if (!(meta.q > dim)) throw InvalidParameter("custom kernel: q must exceed the dimension");
    KernelSpec s(KernelKind::kCustom, dim, dim);
    for (const auto& [k, v] : table) {
      if (static_cast<int>(k.size()) != dim || static_cast<int>(v.size()) != dim)
        throw InvalidInput("custom kernel: table entries must have d frequencies and d components");
    }
    s.table_ = std::move(table);
    s.holder_ = meta;
    return s;
  }

  // Rows "k_1 .. k_d re_1 im_1 .. re_d im_d"; '#' starts a comment. Modes not
  // listed are zero. Only the stored half of the spectrum is consulted, so
  // real output assumes symbol(-k) = conj(symbol(k)).
  static KernelSpec load_custom_table(const std::string& path, int dim, HolderMeta meta) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open kernel table " + path);
    Table table;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream row(line);
      std::vector<double> fields;
      double x;
      while (row >> x) fields.push_back(x);
      if (!row.eof()) throw InvalidInput(path + ":" + std::to_string(line_no) + ": not a number");
      if (fields.empty()) continue;
      if (static_cast<int>(fields.size()) != 3 * dim)
        throw InvalidInput(path + ":" + std::to_string(line_no) + ": expected " +
                           std::to_string(3 * dim) + " columns");
      std::vector<int> k(dim);
      std::vector<cplx> v(dim);
      for (int a = 0; a < dim; ++a) {
        if (fields[a] != std::floor(fields[a]))
          throw InvalidInput(path + ":" + std::to_string(line_no) + ": non-integer frequency");
        k[a] = static_cast<int>(fields[a]);
        v[a] = cplx(fields[dim + 2 * a], fields[dim + 2 * a + 1]);
      }
      table[k] = v;
    }
    return custom(dim, std::move(table), meta);
  }

  KernelKind kind() const { return kind_; }
  int dim() const { return dim_; }
  int components() const { return components_; }
  double chi() const { return chi_; }
  const HolderMeta& holder() const { return holder_; }
  void set_calibrated_ck(double c_k) { holder_.c_k = c_k; }

  // Symbol at k including the zero mode (0 except for Dirac).
  std::vector<cplx> symbol(const IVec& k) const {
    bool zero = true;
    for (int a = 0; a < dim_; ++a) zero = zero && k[a] == 0;
    switch (kind_) {
      case KernelKind::kDirac: return {dirac_symbol(k)};
      case KernelKind::kBiotSavart2d: {
        if (zero) return {0.0, 0.0};
        const auto s = biot_savart_symbol(k);
        return {s[0], s[1]};
      }
      case KernelKind::kKellerSegel:
        if (zero) return std::vector<cplx>(dim_, 0.0);
        return keller_segel_symbol(k, dim_, chi_);
      case KernelKind::kCustom: {
        if (zero) return std::vector<cplx>(dim_, 0.0);
        auto it = table_.find(std::vector<int>(k.begin(), k.begin() + dim_));
        if (it == table_.end()) return std::vector<cplx>(dim_, 0.0);
        return it->second;
      }
    }
    return {};
  }

 private:
  KernelSpec(KernelKind kind, int dim, int components) : kind_(kind), dim_(dim), components_(components) {
    if (dim < 1 || dim > kMaxDim) throw UnsupportedDimension("kernel dimension must be 1..3");
    if (kind == KernelKind::kBiotSavart2d && dim != 2)
      throw UnsupportedDimension("Biot-Savart kernel is two-dimensional");
  }

  KernelKind kind_;
  int dim_;
  int components_;
  double chi_ = 0.0;
  HolderMeta holder_;
  Table table_;
};

namespace detail {
inline std::atomic<long>& kernel_bound_violation_count() {
  static std::atomic<long> count{0};
  return count;
}
}  // namespace detail

// Number of apply_kernel calls whose sup norm exceeded C_K ||f||_q.
inline long kernel_bound_violations() { return detail::kernel_bound_violation_count().load(); }

// Multipliers of a kernel tabulated on one grid. Odd symbols lose their
// Nyquist modes, which have no real-valued counterpart.
class GridKernel {
 public:
  GridKernel(const KernelSpec& spec, const PeriodicGrid& grid) : spec_(spec), grid_(grid) {
    if (grid.dim() != spec.dim()) throw InvalidInput("GridKernel: dimension mismatch");
    multipliers_.assign(spec.components(), std::vector<cplx>(grid.spectral_size()));
    const bool odd = spec.kind() != KernelKind::kDirac;
    grid.for_each_mode([&](std::size_t idx, const IVec& k) {
      const auto s = spec.symbol(k);
      for (int c = 0; c < spec.components(); ++c)
        multipliers_[c][idx] = (odd && grid.is_nyquist(k)) ? cplx(0.0) : s[c];
    });
  }

  const KernelSpec& spec() const { return spec_; }
  const PeriodicGrid& grid() const { return grid_; }
  int components() const { return spec_.components(); }
  const std::vector<cplx>& multiplier(int c) const { return multipliers_[c]; }

  Spectrum apply_component(const Spectrum& f, int c) const {
    Spectrum out(grid_);
    const auto& m = multipliers_[c];
    for (std::size_t i = 0; i < out.coeffs.size(); ++i) out[i] = m[i] * f[i];
    return out;
  }

  std::vector<Field> apply(const Spectrum& f) const {
    std::vector<Field> out;
    out.reserve(components());
    for (int c = 0; c < components(); ++c) out.push_back(Field::from_fourier(apply_component(f, c)));
    return out;
  }

 private:
  KernelSpec spec_;
  PeriodicGrid grid_;
  std::vector<std::vector<cplx>> multipliers_;
};

// Pointwise Euclidean magnitude of a vector field, maximized over nodes.
inline double sup_magnitude(const std::vector<Field>& v) {
  if (v.empty()) return 0.0;
  const std::size_t n = v.front().grid().size();
  double best = 0.0;
  std::vector<std::span<const double>> comps;
  for (const auto& f : v) comps.push_back(f.values());
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (const auto& c : comps) s += c[i] * c[i];
    best = std::max(best, s);
  }
  return std::sqrt(best);
}

// K * f componentwise. When C_K is known the bound ||K * f||_inf <= C_K ||f||_q
// is monitored; violations are counted and reported, not thrown.
inline std::vector<Field> apply_kernel(const KernelSpec& spec, const Field& f) {
  const GridKernel gk(spec, f.grid());
  auto out = gk.apply(f.fourier());
  if (spec.holder().c_k) {
    const double lhs = sup_magnitude(out);
    const double rhs = *spec.holder().c_k * lq_norm(f, spec.holder().q);
    if (lhs > rhs * (1.0 + 1e-12)) {
      if (detail::kernel_bound_violation_count().fetch_add(1) == 0)
        std::clog << "chaoslab: kernel bound exceeded (" << lhs << " > " << rhs << ")\n";
    }
  }
  return out;
}

// G^N = K * V^N on the grid, one field per kernel component.
inline std::vector<Field> mollified_kernel(const KernelSpec& spec, const MollifierSpec& moll, long n,
                                           const PeriodicGrid& grid) {
  const GridMollifier gm(moll, n, grid);
  if (spec.kind() == KernelKind::kDirac) return {gm.field()};
  return GridKernel(spec, grid).apply(gm.fourier());
}

// L2 norm of the spectral divergence of a d-component field.
inline double divergence_l2(const std::vector<Field>& v) {
  const PeriodicGrid& grid = v.front().grid();
  if (static_cast<int>(v.size()) != grid.dim()) throw InvalidInput("divergence_l2: need d components");
  Spectrum div(grid);
  for (int a = 0; a < grid.dim(); ++a) {
    const Spectrum& s = v[a].fourier();
    grid.for_each_mode([&](std::size_t idx, const IVec& k) {
      if (!grid.is_nyquist(k)) div[idx] += cplx(0.0, kTwoPi * k[a]) * s[idx];
    });
  }
  return std::sqrt(parseval_sum(div));
}

// Grid proxy for C_K: max of ||K * f||_inf / ||f||_q over random band-limited
// f (Gaussian coefficients for |k_i| <= band, unit mean).
inline double calibrate_ck(const KernelSpec& spec, const PeriodicGrid& grid, double q, int samples = 100,
                           std::uint64_t seed = 0x5eed, int band = 4) {
  const GridKernel gk(spec, grid);
  const Stream stream = Stream::labelled(seed, "calibrate-ck");
  double best = 0.0;
  std::uint64_t n = 0;
  for (int s = 0; s < samples; ++s) {
    Spectrum f(grid);
    grid.for_each_mode([&](std::size_t idx, const IVec& k) {
      bool inside = true;
      bool zero = true;
      for (int a = 0; a < grid.dim(); ++a) {
        inside = inside && std::abs(k[a]) <= band;
        zero = zero && k[a] == 0;
      }
      if (zero) {
        f[idx] = 1.0;
      } else if (inside && !grid.is_nyquist(k)) {
        const double re = stream.normal(Channel::kAuxiliary, n++);
        const double im = stream.normal(Channel::kAuxiliary, n++);
        f[idx] = cplx(re, im) * 0.5;
      }
    });
    // Round-trip through real space so the spectrum is exactly Hermitian.
    const Field synth = Field::from_fourier(std::move(f));
    const Field field(grid, std::vector<double>(synth.values().begin(), synth.values().end()));
    const double ratio = sup_magnitude(gk.apply(field.fourier())) / lq_norm(field, q);
    best = std::max(best, ratio);
  }
  return best;
}

}  // namespace chaoslab
