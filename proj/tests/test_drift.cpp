#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "chaoslab/drift.hpp"

using namespace chaoslab;

TEST(CutoffScalar, IdentityWindow) { EXPECT_EQ(eval_fA(1.0, 0.5), 0.5); }

TEST(CutoffScalar, Saturation) {
  EXPECT_EQ(eval_fA(1.0, 3.0), 1.0);
  EXPECT_EQ(eval_fA(1.0, -3.0), -1.0);
}

TEST(CutoffScalar, Blend) {
  EXPECT_DOUBLE_EQ(eval_fA(1.0, 1.5), 1.15625);
  EXPECT_DOUBLE_EQ(eval_fA(1.0, -1.5), -1.15625);
}

TEST(CutoffScalar, SmoothAtSeams) {
  // phi(0) = 0, phi'(0) = 1, phi''(0) = 0 and phi, phi', phi'' vanish at 1.
  EXPECT_EQ(cutoff_blend(0.0), 0.0);
  EXPECT_EQ(cutoff_blend_derivative(0.0), 1.0);
  EXPECT_EQ(cutoff_blend(1.0), 0.0);
  EXPECT_EQ(cutoff_blend_derivative(1.0), 0.0);
  const double h = 1e-4;
  const double second0 = (cutoff_blend_derivative(h) - cutoff_blend_derivative(-h)) / (2 * h);
  const double second1 = (cutoff_blend_derivative(1 + h) - cutoff_blend_derivative(1 - h)) / (2 * h);
  EXPECT_NEAR(second0, 0.0, 1e-6);
  EXPECT_NEAR(second1, 0.0, 1e-6);
}

TEST(CutoffScalar, BoundedOddAndOneLipschitz) {
  // f_A rises above A inside the blend and returns to A at A + 1; it need not be monotone.
  for (double a : {0.3, 1.0, 4.0}) {
    const double step = 1e-4;
    for (double x = -a - 3; x <= a + 3; x += step) {
      const double f = eval_fA(a, x);
      EXPECT_LE(std::abs(f), a + 1.0);
      EXPECT_EQ(eval_fA(a, -x), -f);
      EXPECT_LE(std::abs(eval_fA(a, x + step) - f), step * (1.0 + 1e-9));
    }
    EXPECT_NEAR(eval_fA(a, a + 1.0), a, 1e-15);
  }
  double peak = 0.0;
  for (double s = 0.0; s <= 1.0; s += 1e-5) peak = std::max(peak, cutoff_blend(s));
  EXPECT_NEAR(peak, 16.0 / 81.0, 1e-9);
  EXPECT_THROW(eval_fA(0.0, 1.0), InvalidParameter);
  EXPECT_EQ(eval_fA(INFINITY, 123.0), 123.0);
}

TEST(CutoffVector, Componentwise) {
  const std::vector<double> inside{0.2, -0.3};
  EXPECT_EQ(eval_FA(1.0, inside), inside);
  const std::vector<double> outside{5.0, -5.0};
  EXPECT_EQ(eval_FA(1.0, outside), (std::vector<double>{1.0, -1.0}));
  const std::vector<double> any{17.0, -3.5};
  EXPECT_EQ(eval_FA(INFINITY, any), any);
}

TEST(DriftSpec, Identity) {
  const auto f = eval_drift(DriftSpec::identity(), wrap({0.1}), std::vector<double>{0.7}, 1);
  EXPECT_EQ(f, std::vector<double>{0.7});
}

TEST(DriftSpec, CutoffInsideAndSaturated) {
  EXPECT_EQ(eval_drift(DriftSpec::cutoff(2.0), wrap({0.0, 0.0}), std::vector<double>{1.5, -1.0}, 2),
            (std::vector<double>{1.5, -1.0}));
  EXPECT_EQ(eval_drift(DriftSpec::cutoff(1.0), wrap({0.0}), std::vector<double>{10.0}, 1), std::vector<double>{1.0});
  EXPECT_DOUBLE_EQ(DriftSpec::cutoff(1.0).bound(), 2.0);
  EXPECT_DOUBLE_EQ(DriftSpec::cutoff(1.0).cutoff_level(), 1.0);
}

TEST(DriftSpec, DimensionMismatch) {
  EXPECT_THROW(eval_drift(DriftSpec::identity(), wrap({0.0}), std::vector<double>{1.0, 2.0}, 1), InvalidInput);
}

TEST(DriftSpec, CustomAndZero) {
  const auto shift = DriftSpec::custom(
      [](const TorusPoint& x, std::span<const double> u, std::span<double> out) {
        for (std::size_t a = 0; a < u.size(); ++a) out[a] = std::sin(u[a]) + 0.5 * std::cos(kTwoPi * x[0]) / kTwoPi;
      },
      1.5, 1.6);
  const auto f = eval_drift(shift, wrap({0.25}), std::vector<double>{0.0}, 1);
  EXPECT_NEAR(f[0], 0.0, 1e-15);
  const auto z = eval_drift(DriftSpec::zero(), wrap({0.3, 0.1}), std::vector<double>{4.0, 5.0}, 2);
  EXPECT_EQ(z, (std::vector<double>{0.0, 0.0}));
  EXPECT_TRUE(DriftSpec::zero().is_zero());
  EXPECT_THROW(DriftSpec::custom(nullptr, 0.0), InvalidParameter);
}

TEST(Lipschitz, CutoffIsOneLipschitzAndBounded) {
  for (double a : {0.5, 1.0, 3.0}) {
    const auto c = check_lipschitz(DriftSpec::cutoff(a), 2);
    EXPECT_TRUE(c.within_lipschitz) << c.worst_ratio;
    EXPECT_TRUE(c.within_bound) << c.worst_value;
  }
}

TEST(Lipschitz, DetectsMisdeclaredConstant) {
  const auto steep = DriftSpec::custom(
      [](const TorusPoint&, std::span<const double> u, std::span<double> out) {
        for (std::size_t a = 0; a < u.size(); ++a) out[a] = 3.0 * u[a];
      },
      1.0);
  EXPECT_FALSE(check_lipschitz(steep, 1).within_lipschitz);
}
