#pragma once

// Geometry of the unit torus [-1/2, 1/2)^d, its periodic grid, the discrete
// Fourier transform on that grid and rectangle-rule quadrature.
//
// Fourier convention: f(x) = sum_k fhat(k) exp(2 pi i k.x) with integer k, so
// fhat(0) is the mean of f over the torus (the torus has unit volume).
// Spectra use the real-to-complex layout: the last axis stores 0..M/2 only and
// the remaining modes are implied by Hermitian symmetry.

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "chaoslab/errors.hpp"

namespace chaoslab {

inline constexpr int kMaxDim = 3;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

using cplx = std::complex<double>;
using Vec = std::array<double, kMaxDim>;
using IVec = std::array<int, kMaxDim>;

inline double wrap_coordinate(double x) {
  if (x >= -0.5 && x < 0.5) return x;
  double r = x - std::floor(x + 0.5);
  // floor(x + 0.5) can round across the seam for x just below a half-integer
  if (r >= 0.5) r -= 1.0;
  if (r < -0.5) r += 1.0;
  return r;
}

class TorusPoint {
 public:
  TorusPoint() = default;

  static TorusPoint wrap(std::span<const double> raw) {
    if (raw.empty() || raw.size() > kMaxDim)
      throw UnsupportedDimension("torus points support dimensions 1.." + std::to_string(kMaxDim));
    TorusPoint p;
    p.dim_ = static_cast<int>(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (!std::isfinite(raw[i])) throw InvalidInput("wrap: non-finite coordinate");
      p.x_[i] = wrap_coordinate(raw[i]);
    }
    return p;
  }
  static TorusPoint wrap(std::initializer_list<double> raw) {
    return wrap(std::span<const double>(raw.begin(), raw.size()));
  }

  int dim() const { return dim_; }
  double operator[](int i) const { return x_[i]; }
  std::span<const double> coords() const { return {x_.data(), static_cast<std::size_t>(dim_)}; }
  double norm() const {
    double s = 0.0;
    for (int i = 0; i < dim_; ++i) s += x_[i] * x_[i];
    return std::sqrt(s);
  }

 private:
  Vec x_{};
  int dim_ = 0;
};

inline TorusPoint wrap(std::span<const double> raw) { return TorusPoint::wrap(raw); }
inline TorusPoint wrap(std::initializer_list<double> raw) { return TorusPoint::wrap(raw); }

inline double torus_distance(const TorusPoint& a, const TorusPoint& b) {
  if (a.dim() != b.dim()) throw InvalidInput("torus_distance: dimension mismatch");
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i) {
    const double dx = wrap_coordinate(a[i] - b[i]);
    s += dx * dx;
  }
  return std::sqrt(s);
}

// Neumaier-compensated sum; grid quadratures feed mass checks at 1e-12.
template <class Range>
double compensated_sum(const Range& values) {
  double sum = 0.0;
  double carry = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      carry += (sum - t) + v;
    else
      carry += (v - t) + sum;
    sum = t;
  }
  return sum + carry;
}

class PeriodicGrid {
 public:
  PeriodicGrid(int dim, int points) : dim_(dim), points_(points) {
    if (dim < 1 || dim > kMaxDim)
      throw UnsupportedDimension("grid dimension must be in 1.." + std::to_string(kMaxDim));
    if (points < 2 || (points & (points - 1)) != 0)
      throw InvalidParameter("points per axis must be a power of two >= 2, got " +
                             std::to_string(points));
    size_ = 1;
    for (int i = 0; i < dim; ++i) size_ *= static_cast<std::size_t>(points);
    spectral_size_ = size_ / static_cast<std::size_t>(points) * static_cast<std::size_t>(half());
  }

  int dim() const { return dim_; }
  int points() const { return points_; }
  double spacing() const { return 1.0 / points_; }
  double cell_volume() const { return std::pow(spacing(), dim_); }
  std::size_t size() const { return size_; }
  std::size_t spectral_size() const { return spectral_size_; }
  int half() const { return points_ / 2 + 1; }
  int nyquist() const { return points_ / 2; }

  double node(int j) const { return -0.5 + j * spacing(); }

  IVec unflatten(std::size_t flat) const {
    IVec j{};
    for (int a = dim_ - 1; a >= 0; --a) {
      j[a] = static_cast<int>(flat % points_);
      flat /= points_;
    }
    return j;
  }
  std::size_t flatten(const IVec& j) const {
    std::size_t flat = 0;
    for (int a = 0; a < dim_; ++a) flat = flat * points_ + static_cast<std::size_t>(j[a]);
    return flat;
  }
  Vec position(std::size_t flat) const {
    const IVec j = unflatten(flat);
    Vec x{};
    for (int a = 0; a < dim_; ++a) x[a] = node(j[a]);
    return x;
  }

  // Signed frequency of storage index j on a full axis.
  int frequency(int j) const { return j <= points_ / 2 ? j : j - points_; }

  // Calls f(spectral_index, k) for every stored mode, k holding signed frequencies.
  template <class F>
  void for_each_mode(F&& f) const {
    const int m = points_;
    const int hm = half();
    IVec k{};
    std::size_t idx = 0;
    if (dim_ == 1) {
      for (int j0 = 0; j0 < hm; ++j0) {
        k[0] = j0;
        f(idx++, k);
      }
    } else if (dim_ == 2) {
      for (int j0 = 0; j0 < m; ++j0) {
        k[0] = frequency(j0);
        for (int j1 = 0; j1 < hm; ++j1) {
          k[1] = j1;
          f(idx++, k);
        }
      }
    } else {
      for (int j0 = 0; j0 < m; ++j0) {
        k[0] = frequency(j0);
        for (int j1 = 0; j1 < m; ++j1) {
          k[1] = frequency(j1);
          for (int j2 = 0; j2 < hm; ++j2) {
            k[2] = j2;
            f(idx++, k);
          }
        }
      }
    }
  }

  // Stored modes on the last axis at 0 or M/2 are their own conjugate partners.
  double hermitian_weight(const IVec& k) const {
    const int last = k[dim_ - 1];
    return (last == 0 || last == points_ / 2) ? 1.0 : 2.0;
  }

  bool is_nyquist(const IVec& k) const {
    for (int a = 0; a < dim_; ++a)
      if (std::abs(k[a]) == points_ / 2) return true;
    return false;
  }

  bool operator==(const PeriodicGrid& other) const {
    return dim_ == other.dim_ && points_ == other.points_;
  }

 private:
  int dim_;
  int points_;
  std::size_t size_ = 0;
  std::size_t spectral_size_ = 0;
};

struct Spectrum {
  PeriodicGrid grid;
  std::vector<cplx> coeffs;

  explicit Spectrum(PeriodicGrid g) : grid(g), coeffs(g.spectral_size()) {}
  Spectrum(PeriodicGrid g, std::vector<cplx> c) : grid(g), coeffs(std::move(c)) {}

  cplx& operator[](std::size_t i) { return coeffs[i]; }
  const cplx& operator[](std::size_t i) const { return coeffs[i]; }

  // Coefficient of an arbitrary signed frequency with |k_i| <= M/2.
  cplx at(IVec k) const {
    const int d = grid.dim();
    const int m = grid.points();
    bool conjugate = false;
    if (k[d - 1] < 0) {
      for (int a = 0; a < d; ++a) k[a] = -k[a];
      conjugate = true;
    }
    std::size_t idx = 0;
    for (int a = 0; a < d - 1; ++a) idx = idx * m + static_cast<std::size_t>((k[a] % m + m) % m);
    idx = idx * grid.half() + static_cast<std::size_t>(k[d - 1]);
    return conjugate ? std::conj(coeffs[idx]) : coeffs[idx];
  }
};

// Sum over all integer frequencies of |fhat(k)|^2, conjugate partners included.
inline double parseval_sum(const Spectrum& s) {
  std::vector<double> terms(s.coeffs.size());
  s.grid.for_each_mode([&](std::size_t idx, const IVec& k) {
    terms[idx] = s.grid.hermitian_weight(k) * std::norm(s.coeffs[idx]);
  });
  return compensated_sum(terms);
}

// FFTW plans per grid shape. Plans are created once under a lock with
// FFTW_ESTIMATE | FFTW_UNALIGNED, so execution is deterministic and may run
// concurrently on caller-owned arrays.
class Fft {
 public:
  static const Fft& for_grid(const PeriodicGrid& grid) {
    static std::mutex mutex;
    static auto* cache = new std::map<std::pair<int, int>, std::unique_ptr<Fft>>();
    std::lock_guard<std::mutex> lock(mutex);
    auto key = std::make_pair(grid.dim(), grid.points());
    auto it = cache->find(key);
    if (it == cache->end()) it = cache->emplace(key, std::unique_ptr<Fft>(new Fft(grid))).first;
    return *it->second;
  }

  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  // coeffs[k] = fhat(k) = M^{-d} sum_j f(x_j) e^{-2 pi i k.x_j}. Nodes start
  // at -1/2, so the raw transform picks up (-1)^{k_1+...+k_d}.
  void forward(std::span<const double> values, std::span<cplx> coeffs) const {
    fftw_execute_dft_r2c(r2c_, const_cast<double*>(values.data()),
                         reinterpret_cast<fftw_complex*>(coeffs.data()));
    const double scale = 1.0 / static_cast<double>(size_);
    for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] *= odd_[i] ? -scale : scale;
  }

  void inverse(std::span<const cplx> coeffs, std::span<double> values) const {
    thread_local std::vector<cplx> scratch;
    scratch.resize(coeffs.size());
    for (std::size_t i = 0; i < coeffs.size(); ++i) scratch[i] = odd_[i] ? -coeffs[i] : coeffs[i];
    fftw_execute_dft_c2r(c2r_, reinterpret_cast<fftw_complex*>(scratch.data()), values.data());
  }

 private:
  explicit Fft(const PeriodicGrid& grid) : size_(grid.size()), odd_(grid.spectral_size()) {
    grid.for_each_mode([&](std::size_t idx, const IVec& k) {
      int sum = 0;
      for (int a = 0; a < grid.dim(); ++a) sum += k[a];
      odd_[idx] = (sum % 2 != 0) ? 1 : 0;
    });
    int dims[kMaxDim];
    for (int a = 0; a < grid.dim(); ++a) dims[a] = grid.points();
    double* real = fftw_alloc_real(grid.size());
    fftw_complex* spec = fftw_alloc_complex(grid.spectral_size());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    r2c_ = fftw_plan_dft_r2c(grid.dim(), dims, real, spec, flags);
    c2r_ = fftw_plan_dft_c2r(grid.dim(), dims, spec, real, flags);
    fftw_free(real);
    fftw_free(spec);
  }

  std::size_t size_;
  std::vector<unsigned char> odd_;
  fftw_plan r2c_;
  fftw_plan c2r_;
};

// Real values on a periodic grid with a lazily synchronized spectrum. Const
// accessors may fill the cache, so share a Field across threads only after
// both representations are current (call values() and fourier() once).
class Field {
 public:
  explicit Field(PeriodicGrid grid)
      : grid_(grid), values_(grid.size(), 0.0), spectrum_(grid), fourier_fresh_(true) {}

  Field(PeriodicGrid grid, std::vector<double> values)
      : grid_(grid), values_(std::move(values)), spectrum_(grid) {
    if (values_.size() != grid_.size()) throw InvalidInput("Field: value count does not match grid");
  }

  static Field from_fourier(Spectrum s) {
    Field f(s.grid);
    f.spectrum_ = std::move(s);
    f.values_fresh_ = false;
    f.fourier_fresh_ = true;
    return f;
  }

  template <class F>
  static Field sample(PeriodicGrid grid, F&& fn) {
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(grid.position(i));
    return Field(grid, std::move(v));
  }

  const PeriodicGrid& grid() const { return grid_; }

  std::span<const double> values() const {
    if (!values_fresh_) {
      Fft::for_grid(grid_).inverse(spectrum_.coeffs, values_);
      values_fresh_ = true;
    }
    return values_;
  }

  std::span<double> mutable_values() {
    values();
    fourier_fresh_ = false;
    return values_;
  }

  const Spectrum& fourier() const {
    if (!fourier_fresh_) {
      Fft::for_grid(grid_).forward(values_, spectrum_.coeffs);
      fourier_fresh_ = true;
    }
    return spectrum_;
  }

  Spectrum& mutable_fourier() {
    fourier();
    values_fresh_ = false;
    return spectrum_;
  }

  double mass() const { return compensated_sum(values()) * grid_.cell_volume(); }

 private:
  PeriodicGrid grid_;
  mutable std::vector<double> values_;
  mutable Spectrum spectrum_;
  mutable bool values_fresh_ = true;
  mutable bool fourier_fresh_ = false;
};

inline double quadrature(const Field& f) { return f.mass(); }

inline double lq_norm(const Field& f, double q) {
  if (!(q >= 1.0)) throw InvalidParameter("lq_norm: q must be >= 1");
  const auto v = f.values();
  if (std::isinf(q)) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }
  std::vector<double> terms(v.size());
  if (q == 2.0) {
    for (std::size_t i = 0; i < v.size(); ++i) terms[i] = v[i] * v[i];
    return std::sqrt(compensated_sum(terms) * f.grid().cell_volume());
  }
  for (std::size_t i = 0; i < v.size(); ++i) terms[i] = std::pow(std::abs(v[i]), q);
  return std::pow(compensated_sum(terms) * f.grid().cell_volume(), 1.0 / q);
}

inline Field difference(const Field& a, const Field& b) {
  if (!(a.grid() == b.grid())) throw InvalidInput("difference: grids differ");
  const auto va = a.values();
  const auto vb = b.values();
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < va.size(); ++i) out[i] = va[i] - vb[i];
  return Field(a.grid(), std::move(out));
}

// Spectral partial derivative along one axis; the Nyquist mode is dropped.
inline Field derivative(const Field& f, int axis) {
  Spectrum s = f.fourier();
  s.grid.for_each_mode([&](std::size_t idx, const IVec& k) {
    s[idx] *= s.grid.is_nyquist(k) ? cplx(0.0) : cplx(0.0, kTwoPi * k[axis]);
  });
  return Field::from_fourier(std::move(s));
}

// Cloud-in-cell stencil: the 2^d nodes surrounding a point and their
// multilinear weights (a partition of unity).
struct CicStencil {
  std::array<std::size_t, 1 << kMaxDim> index{};
  std::array<double, 1 << kMaxDim> weight{};
  int count = 0;
};

inline CicStencil cic_stencil(const PeriodicGrid& grid, std::span<const double> x) {
  const int d = grid.dim();
  const int m = grid.points();
  std::array<int, kMaxDim> lo{};
  std::array<double, kMaxDim> frac{};
  for (int a = 0; a < d; ++a) {
    const double u = (x[a] + 0.5) * m;
    int j = static_cast<int>(std::floor(u));
    double f = u - j;
    if (j >= m) {
      j -= m;
    } else if (j < 0) {
      j += m;
    }
    lo[a] = j;
    frac[a] = f;
  }
  CicStencil s;
  s.count = 1 << d;
  for (int corner = 0; corner < s.count; ++corner) {
    std::size_t flat = 0;
    double w = 1.0;
    for (int a = 0; a < d; ++a) {
      const int bit = (corner >> a) & 1;
      const int j = bit ? (lo[a] + 1) % m : lo[a];
      flat = flat * m + static_cast<std::size_t>(j);
      w *= bit ? frac[a] : 1.0 - frac[a];
    }
    s.index[corner] = flat;
    s.weight[corner] = w;
  }
  return s;
}

inline double cic_interpolate(const Field& f, std::span<const double> x) {
  const auto s = cic_stencil(f.grid(), x);
  const auto v = f.values();
  double out = 0.0;
  for (int c = 0; c < s.count; ++c) out += s.weight[c] * v[s.index[c]];
  return out;
}

}  // namespace chaoslab
