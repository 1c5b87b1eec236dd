#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "chaoslab/rng.hpp"
#include "chaoslab/torus.hpp"

using namespace chaoslab;

TEST(Wrap, Identity) { EXPECT_EQ(wrap({0.0})[0], 0.0); }

TEST(Wrap, OnePeriod) { EXPECT_DOUBLE_EQ(wrap({0.75})[0], -0.25); }

TEST(Wrap, TwoCoordinatesAndSeam) {
  const auto p = wrap({-1.3, 2.5});
  EXPECT_NEAR(p[0], -0.3, 1e-15);
  EXPECT_EQ(p[1], -0.5);
}

TEST(Wrap, RangeIsHalfOpen) {
  for (double x : {0.5, -0.5, 1.5, -2.5, 0.49999999999999994, -0.5000000000000001, 1e6 + 0.5}) {
    const double w = wrap_coordinate(x);
    EXPECT_GE(w, -0.5) << x;
    EXPECT_LT(w, 0.5) << x;
  }
}

TEST(Wrap, RejectsBadInput) {
  EXPECT_THROW(wrap({std::nan("")}), InvalidInput);
  EXPECT_THROW(wrap({0.1, 0.2, 0.3, 0.4}), UnsupportedDimension);
  EXPECT_THROW(wrap(std::span<const double>()), UnsupportedDimension);
}

TEST(TorusDistance, UsesShortestImage) {
  EXPECT_NEAR(torus_distance(wrap({0.45}), wrap({-0.45})), 0.1, 1e-15);
  EXPECT_NEAR(torus_distance(wrap({0.0, 0.0}), wrap({0.5, 0.5})), std::sqrt(0.5), 1e-15);
}

TEST(Grid, Validation) {
  EXPECT_THROW(PeriodicGrid(0, 8), UnsupportedDimension);
  EXPECT_THROW(PeriodicGrid(4, 8), UnsupportedDimension);
  EXPECT_THROW(PeriodicGrid(1, 12), InvalidParameter);
  EXPECT_THROW(PeriodicGrid(1, 1), InvalidParameter);
  const PeriodicGrid g(2, 16);
  EXPECT_EQ(g.size(), 256u);
  EXPECT_EQ(g.spectral_size(), 16u * 9u);
  EXPECT_DOUBLE_EQ(g.node(0), -0.5);
}

TEST(Fourier, ConstantField) {
  for (int d = 1; d <= 3; ++d) {
    const PeriodicGrid g(d, 8);
    const Field f(g, std::vector<double>(g.size(), 1.0));
    const Spectrum& s = f.fourier();
    g.for_each_mode([&](std::size_t idx, const IVec& k) {
      bool zero = true;
      for (int a = 0; a < d; ++a) zero = zero && k[a] == 0;
      EXPECT_NEAR(std::abs(s[idx] - cplx(zero ? 1.0 : 0.0)), 0.0, 1e-15);
    });
  }
}

TEST(Fourier, CosineHasHalfCoefficients) {
  const PeriodicGrid g(1, 32);
  const Field f = Field::sample(g, [](const Vec& x) { return std::cos(kTwoPi * x[0]); });
  const Spectrum& s = f.fourier();
  EXPECT_NEAR(std::abs(s.at({1}) - cplx(0.5)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(s.at({-1}) - cplx(0.5)), 0.0, 1e-15);
  for (int k = 2; k <= 16; ++k) EXPECT_NEAR(std::abs(s.at({k})), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(s.at({0})), 0.0, 1e-15);
}

TEST(Fourier, SineCoefficientsInTwoDimensions) {
  // sin(2 pi x_2) = (e^{2 pi i x_2} - e^{-2 pi i x_2}) / 2i
  const PeriodicGrid g(2, 16);
  const Field f = Field::sample(g, [](const Vec& x) { return std::sin(kTwoPi * x[1]); });
  EXPECT_NEAR(std::abs(f.fourier().at({0, 1}) - cplx(0.0, -0.5)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(f.fourier().at({0, -1}) - cplx(0.0, 0.5)), 0.0, 1e-15);
}

TEST(Fourier, RoundTripRandomField) {
  const Stream st(42);
  for (int d = 1; d <= 3; ++d) {
    const PeriodicGrid g(d, d == 3 ? 8 : 32);
    std::vector<double> v(g.size());
    st.normals(Channel::kAuxiliary, 0, v);
    const Field f(g, v);
    const Field back = Field::from_fourier(f.fourier());
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(back.values()[i], v[i], 1e-12);
  }
}

TEST(Fourier, Parseval) {
  const Stream st(7);
  const PeriodicGrid g(2, 16);
  std::vector<double> v(g.size());
  st.normals(Channel::kAuxiliary, 0, v);
  const Field f(g, v);
  const double l2sq = std::pow(lq_norm(f, 2.0), 2);
  EXPECT_NEAR(parseval_sum(f.fourier()), l2sq, 1e-12 * l2sq);
}

TEST(Norms, Constant) {
  const PeriodicGrid g(2, 8);
  const Field f(g, std::vector<double>(g.size(), 1.0));
  for (double q : {1.0, 2.0, 3.5, 4.0, double(INFINITY)}) EXPECT_NEAR(lq_norm(f, q), 1.0, 1e-14);
}

TEST(Norms, CosineL2) {
  const PeriodicGrid g(1, 64);
  const Field f = Field::sample(g, [](const Vec& x) { return std::cos(kTwoPi * x[0]); });
  EXPECT_NEAR(lq_norm(f, 2.0), std::sqrt(0.5), 1e-14);
  EXPECT_NEAR(lq_norm(f, 2.0), 0.70711, 1e-5);
}

TEST(Norms, DiscreteSpike) {
  const PeriodicGrid g(1, 128);
  std::vector<double> v(g.size(), 0.0);
  v[17] = 128.0;
  EXPECT_DOUBLE_EQ(lq_norm(Field(g, v), 1.0), 1.0);
  EXPECT_THROW(lq_norm(Field(g, v), 0.5), InvalidParameter);
}

TEST(Quadrature, CompensatedSumMass) {
  const PeriodicGrid g(1, 1024);
  const Field f = Field::sample(g, [](const Vec& x) { return 1.0 + 0.5 * std::cos(kTwoPi * x[0]); });
  EXPECT_NEAR(f.mass(), 1.0, 1e-15);
}

TEST(Derivative, Sine) {
  const PeriodicGrid g(2, 32);
  const Field f = Field::sample(g, [](const Vec& x) { return std::sin(kTwoPi * 2 * x[0]); });
  const Field df = derivative(f, 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec x = g.position(i);
    EXPECT_NEAR(df.values()[i], 2 * kTwoPi * std::cos(kTwoPi * 2 * x[0]), 1e-11);
  }
  const Field dy = derivative(f, 1);
  EXPECT_NEAR(lq_norm(dy, INFINITY), 0.0, 1e-12);
}

TEST(Cic, PartitionOfUnityAndNodes) {
  const PeriodicGrid g(2, 16);
  const std::vector<double> on_node{g.node(3), g.node(5)};
  const auto s = cic_stencil(g, on_node);
  double total = 0.0;
  for (int c = 0; c < s.count; ++c) total += s.weight[c];
  EXPECT_DOUBLE_EQ(total, 1.0);
  EXPECT_DOUBLE_EQ(s.weight[0], 1.0);
  EXPECT_EQ(s.index[0], g.flatten({3, 5}));
  // Seam: a point just below 1/2 shares weight with node 0.
  const std::vector<double> seam{0.5 - 0.25 / 16, 0.0};
  const auto t = cic_stencil(g, seam);
  EXPECT_EQ(t.index[1], g.flatten({0, 8}));
  EXPECT_NEAR(t.weight[1], 0.75, 1e-12);
}

TEST(Cic, InterpolatesLinearExactlyBetweenNodes) {
  const PeriodicGrid g(1, 8);
  const Field f = Field::sample(g, [](const Vec& x) { return x[0]; });
  const std::vector<double> x{g.node(2) + 0.3 * g.spacing()};
  EXPECT_NEAR(cic_interpolate(f, x), x[0], 1e-15);
}
