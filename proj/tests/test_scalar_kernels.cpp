#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "maec/scalar_kernels.hpp"
#include "oracles.hpp"

namespace {

constexpr double kOmega = 0.5671432904097838;

double close_tol(double x, double tol) { return tol * std::max(1.0, std::abs(x)); }

double lse(double x1, double x2) {
  const double m = std::max(x1, x2);
  return m + std::log(std::exp(x1 - m) + std::exp(x2 - m));
}

}  // namespace

// ---------------------------------------------------------------- Lambert W

TEST(LambertW, Examples) {
  EXPECT_NEAR(maec::lambert_w_exp(1.0).w, 1.0, 1e-15);
  EXPECT_NEAR(maec::lambert_w_exp(0.0).w, kOmega, 1e-15);
  const auto big = maec::lambert_w_exp(1000.0);
  EXPECT_NEAR(big.w, 993.0991, 1e-4);
  EXPECT_LE(std::abs(std::log(big.w) + big.w - 1000.0), 1e-12 * 1000.0);
}

TEST(LambertW, MatchesBisectionOracle) {
  for (double z : {-700.0, -100.0, -5.0, -1e-3, 0.0, 0.12, 0.3, 0.5, 0.50001, 1.0, 3.0, 30.0, 709.0, 800.0, 1e6}) {
    const double want = oracle::lambert_w_exp(z);
    EXPECT_NEAR(maec::lambert_w_exp(z).w, want, 4e-15 * want) << "z=" << z;
  }
}

TEST(LambertW, IterationBoundAndResiduals) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> mag(std::log(1e-8), std::log(1e6));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  int worst = 0;
  for (int k = 0; k < 100000; ++k) {
    double z = std::exp(mag(rng));
    if (coin(rng) < 0.5) z = -std::min(z, 700.0);
    const auto r = maec::lambert_w_exp(z);
    worst = std::max(worst, r.stats.iterations);
    ASSERT_GT(r.w, 0.0);
    if (z > 0.5)
      ASSERT_LE(std::abs(std::log(r.w) + r.w - z), 1e-12 * std::max(1.0, std::abs(z))) << z;
    else
      ASSERT_LE(std::abs(r.w * std::exp(r.w) - std::exp(z)), 1e-12 * std::exp(z)) << z;
  }
  EXPECT_LE(worst, 5);
}

TEST(LambertW, RejectsNonFinite) {
  EXPECT_THROW(maec::lambert_w_exp(std::numeric_limits<double>::infinity()), maec::ValidationError);
  EXPECT_THROW(maec::lambert_w_exp(std::nan("")), maec::ValidationError);
}

// ---------------------------------------------------------------- prox_lse2

TEST(ProxLse2, Examples) {
  const auto id = maec::prox_lse2(3.0, 1.0, 0.0);
  EXPECT_EQ(id.x1, 3.0);
  EXPECT_EQ(id.x2, 1.0);

  const auto sym = maec::prox_lse2(0.0, 0.0, 2.0);
  EXPECT_NEAR(sym.lambda, 0.5, 1e-15);
  EXPECT_NEAR(sym.x1, -1.0, 1e-15);
  EXPECT_NEAR(sym.x2, -1.0, 1e-15);

  const auto r = maec::prox_lse2(2.0, 0.0, 1.0);
  const auto [o1, o2] = oracle::prox_lse2(2.0, 0.0, 1.0);
  EXPECT_NEAR(r.x1, o1, 1e-8);
  EXPECT_NEAR(r.x2, o2, 1e-8);
  // Golden-section cross-check of the bisection oracle on the profile in x1.
  auto profile = [](double x1) {
    auto inner = [x1](double x2) { return lse(x1, x2) + 0.5 * (x2 * x2); };
    const double x2 = oracle::golden_section(inner, -3.0, 3.0);
    return inner(x2) + 0.5 * (x1 - 2.0) * (x1 - 2.0);
  };
  EXPECT_NEAR(oracle::golden_section(profile, -3.0, 3.0), o1, 1e-5);
}

TEST(ProxLse2, MatchesOracleOnRandomDraws) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ys(-10.0, 10.0);
  std::uniform_real_distribution<double> as(0.0, 20.0);
  for (int k = 0; k < 1000; ++k) {
    const double y1 = ys(rng);
    const double y2 = ys(rng);
    const double a = as(rng);
    const auto r = maec::prox_lse2(y1, y2, a);
    const auto [o1, o2] = oracle::prox_lse2(y1, y2, a);
    ASSERT_NEAR(r.x1, o1, close_tol(o1, 1e-7)) << y1 << ' ' << y2 << ' ' << a;
    ASSERT_NEAR(r.x2, o2, close_tol(o2, 1e-7)) << y1 << ' ' << y2 << ' ' << a;
  }
}

TEST(ProxLse2, BracketSumRuleAndSwap) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ys(-30.0, 30.0);
  std::uniform_real_distribution<double> as(0.0, 50.0);
  for (int k = 0; k < 5000; ++k) {
    double y1 = ys(rng);
    double y2 = ys(rng);
    if (y1 < y2) std::swap(y1, y2);
    const double a = as(rng);
    const auto r = maec::prox_lse2(y1, y2, a);
    const double lower = std::max(0.5, 1.0 / (1.0 + std::exp(y2 - y1 + a)));
    const double upper = 1.0 / (1.0 + std::exp(y2 - y1));
    ASSERT_GE(r.lambda, lower - 1e-15);
    ASSERT_LE(r.lambda, upper + 1e-15);
    ASSERT_NEAR(r.x1 + r.x2, y1 + y2 - a, 1e-12 * std::max(1.0, std::abs(y1) + std::abs(y2) + a));
    const auto s = maec::prox_lse2(y2, y1, a);
    ASSERT_EQ(s.x1, r.x2);
    ASSERT_EQ(s.x2, r.x1);
  }
}

TEST(ProxLse2, ShiftCovariance) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ys(-5.0, 5.0);
  std::uniform_real_distribution<double> as(0.0, 10.0);
  std::uniform_real_distribution<double> ts(-100.0, 100.0);
  for (int k = 0; k < 2000; ++k) {
    const double y1 = ys(rng);
    const double y2 = ys(rng);
    const double a = as(rng);
    const double t = ts(rng);
    const auto r = maec::prox_lse2(y1, y2, a);
    const auto s = maec::prox_lse2(y1 + t, y2 + t, a);
    ASSERT_NEAR(s.x1, r.x1 + t, 1e-10);
    ASSERT_NEAR(s.x2, r.x2 + t, 1e-10);
  }
}

TEST(ProxLse2, Nonexpansive) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ys(-20.0, 20.0);
  std::uniform_real_distribution<double> as(0.0, 30.0);
  for (int k = 0; k < 10000; ++k) {
    const double a = as(rng);
    const double y1 = ys(rng), y2 = ys(rng), w1 = ys(rng), w2 = ys(rng);
    const auto p = maec::prox_lse2(y1, y2, a);
    const auto q = maec::prox_lse2(w1, w2, a);
    ASSERT_LE(std::hypot(p.x1 - q.x1, p.x2 - q.x2), std::hypot(y1 - w1, y2 - w2) * (1.0 + 1e-12) + 1e-12);
  }
}

TEST(ProxLse2, DyadicGridIterationBounds) {
  int worst = 0;
  long total = 0;
  long cells = 0;
  double worst_residual = 0.0;
  for (int e1 = -10; e1 <= 20; ++e1)
    for (int e2 = -10; e2 <= 20; ++e2)
      for (double sign : {1.0, -1.0}) {
        const auto r = maec::prox_lse2(sign * std::ldexp(1.0, e1), 0.0, std::ldexp(1.0, e2));
        worst = std::max(worst, r.stats.iterations);
        worst_residual = std::max(worst_residual, r.stats.residual);
        total += r.stats.iterations;
        ++cells;
      }
  EXPECT_LE(worst, 18);
  EXPECT_LE(static_cast<double>(total) / static_cast<double>(cells), 4.0);
  EXPECT_LE(worst_residual, 1e-12);
}

TEST(ProxLse2, SaturatedBranch) {
  // y2 - y1 + a < log(1e-16): lambda* = 1 to machine precision.
  const auto r = maec::prox_lse2(100.0, 0.0, 10.0);
  EXPECT_EQ(r.lambda, 1.0);
  EXPECT_EQ(r.x1, 90.0);
  EXPECT_EQ(r.x2, 0.0);
  const auto [o1, o2] = oracle::prox_lse2(100.0, 0.0, 10.0);
  EXPECT_NEAR(r.x1, o1, 1e-12);
  EXPECT_NEAR(r.x2, o2, 1e-12);
}

TEST(ProxLse2, StationarityByFiniteDifferences) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> ys(-8.0, 8.0);
  std::uniform_real_distribution<double> as(0.1, 10.0);
  const double h = 1e-6;
  for (int k = 0; k < 200; ++k) {
    const double y1 = ys(rng), y2 = ys(rng), a = as(rng);
    auto obj = [&](double x1, double x2) {
      return a * lse(x1, x2) + 0.5 * ((x1 - y1) * (x1 - y1) + (x2 - y2) * (x2 - y2));
    };
    const auto r = maec::prox_lse2(y1, y2, a);
    const double g1 = (obj(r.x1 + h, r.x2) - obj(r.x1 - h, r.x2)) / (2 * h);
    const double g2 = (obj(r.x1, r.x2 + h) - obj(r.x1, r.x2 - h)) / (2 * h);
    // Curvature scale of the objective is 1 + a.
    ASSERT_LE(std::abs(g1), 1e-5 * (1.0 + a));
    ASSERT_LE(std::abs(g2), 1e-5 * (1.0 + a));
  }
}

TEST(ProxLse2, Errors) {
  EXPECT_THROW(maec::prox_lse2(0.0, 0.0, -1.0), maec::ValidationError);
  EXPECT_THROW(maec::prox_lse2(std::nan(""), 0.0, 1.0), maec::ValidationError);
  EXPECT_THROW(maec::prox_lse2(0.0, HUGE_VAL, 1.0), maec::ValidationError);
}

// ---------------------------------------------------------------- g1

TEST(ProxG1, Examples) {
  const auto id = maec::prox_g1_pixel(1.5, -2.0, 0.0, 0.0, 1.0, 1.0);
  EXPECT_EQ(id.x1, 1.5);
  EXPECT_EQ(id.x2, -2.0);

  const auto sym = maec::prox_g1_pixel(0.0, 0.0, 1.0, 1.0, 1.0, 1.0);
  EXPECT_NEAR(sym.x1, 0.0, 1e-15);
  EXPECT_NEAR(sym.x2, 0.0, 1e-15);

  const auto r = maec::prox_g1_pixel(1.0, -1.0, 2.0, 0.0, 0.5, 1.0);
  const auto [o1, o2] = oracle::prox_g1(1.0, -1.0, 2.0, 0.0, 0.5, 1.0);
  EXPECT_NEAR(r.x1, o1, 1e-8);
  EXPECT_NEAR(r.x2, o2, 1e-8);
}

TEST(ProxG1, MatchesOracleIncludingScaling) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> zs(-10.0, 10.0);
  std::uniform_real_distribution<double> us(0.0, 20.0);
  std::uniform_real_distribution<double> gs(0.1, 3.0);
  std::uniform_real_distribution<double> cs(0.25, 4.0);
  for (int k = 0; k < 1000; ++k) {
    const double z1 = zs(rng), z2 = zs(rng), u1 = us(rng), u2 = us(rng), g = gs(rng);
    const double c = k % 2 == 0 ? 1.0 : cs(rng);
    const auto r = maec::prox_g1_pixel(z1, z2, u1, u2, g, c);
    const auto [o1, o2] = oracle::prox_g1(z1, z2, u1, u2, g, c);
    ASSERT_NEAR(r.x1, o1, close_tol(o1, 1e-7)) << k;
    ASSERT_NEAR(r.x2, o2, close_tol(o2, 1e-7)) << k;
  }
}

// ---------------------------------------------------------------- h1

TEST(ProxH1, Examples) {
  EXPECT_EQ(maec::prox_h1_pixel(5.0, 2.0, 0.0, 1.0, 1.0), 3.0);
  EXPECT_NEAR(maec::prox_h1_pixel(0.0, 0.0, 1.0, 1.0, 1.0), kOmega, 1e-15);

  const double deep = maec::prox_h1_pixel(-800.0, 0.0, 1.0, 1.0, 1.0);
  ASSERT_TRUE(std::isfinite(deep));
  const double want = oracle::prox_h1(-800.0, 0.0, 1.0, 1.0, 1.0);
  EXPECT_NEAR(deep, want, 1e-8 * std::abs(want));
  auto obj = [](double z) { return std::exp(-z) + 0.5 * (z + 800.0) * (z + 800.0); };
  EXPECT_NEAR(oracle::golden_section(obj, -20.0, 0.0), want, 1e-6);
}

TEST(ProxH1, MatchesOracleIncludingScaling) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> zs(-20.0, 20.0);
  std::uniform_real_distribution<double> us(0.0, 50.0);
  std::uniform_real_distribution<double> bs(0.0, 100.0);
  std::uniform_real_distribution<double> gs(0.1, 3.0);
  std::uniform_real_distribution<double> cs(0.25, 4.0);
  for (int k = 0; k < 1000; ++k) {
    const double z0 = zs(rng), u = us(rng), b = bs(rng), g = gs(rng);
    const double c = k % 2 == 0 ? 1.0 : cs(rng);
    const double got = maec::prox_h1_pixel(z0, u, b, g, c);
    const double want = oracle::prox_h1(z0, u, b, g, c);
    ASSERT_NEAR(got, want, close_tol(want, 1e-7)) << z0 << ' ' << u << ' ' << b << ' ' << g << ' ' << c;
  }
}

TEST(ProxH1, StationarityByFiniteDifferences) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> zs(-5.0, 5.0);
  const double h = 1e-6;
  for (int k = 0; k < 200; ++k) {
    const double z0 = zs(rng), u = 3.0, b = 7.0, g = 0.8;
    auto obj = [&](double z) { return g * (u * z + b * std::exp(-z)) + 0.5 * (z - z0) * (z - z0); };
    const double z = maec::prox_h1_pixel(z0, u, b, g, 1.0);
    const double curvature = 1.0 + g * b * std::exp(-z);
    ASSERT_LE(std::abs((obj(z + h) - obj(z - h)) / (2 * h)), 1e-5 * (1.0 + curvature));
  }
}

TEST(ProxH1, Errors) {
  EXPECT_THROW(maec::prox_h1_pixel(0.0, -1.0, 1.0, 1.0, 1.0), maec::ValidationError);
  EXPECT_THROW(maec::prox_h1_pixel(0.0, 1.0, -1.0, 1.0, 1.0), maec::ValidationError);
  EXPECT_THROW(maec::prox_h1_pixel(0.0, 1.0, 1.0, 0.0, 1.0), maec::ValidationError);
}

// ---------------------------------------------------------------- j1

TEST(ProxJ1, Examples) {
  EXPECT_EQ(maec::prox_j1_pixel(3.0, 1.0, 0.0, 1.0, 1.0), 2.0);
  EXPECT_EQ(maec::prox_j1_pixel(0.0, 0.0, 1.0, 1.0, 1.0), 1.0);
  const double got = maec::prox_j1_pixel(-2.0, 0.5, 3.0, 2.0, 1.0);
  EXPECT_NEAR(got, oracle::prox_j1(-2.0, 0.5, 3.0, 2.0, 1.0), 1e-8);
  auto obj = [](double z) { return 0.5 * (z + 2.0) * (z + 2.0) + 2.0 * (0.5 * z - 3.0 * std::log(z)); };
  EXPECT_NEAR(oracle::golden_section(obj, 1e-9, 10.0), got, 1e-6);
}

TEST(ProxJ1, MatchesOracleIncludingScaling) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> zs(-50.0, 200.0);
  std::uniform_real_distribution<double> as(0.0, 5.0);
  std::uniform_real_distribution<double> us(0.0, 200.0);
  std::uniform_real_distribution<double> gs(0.1, 3.0);
  std::uniform_real_distribution<double> cs(0.25, 4.0);
  for (int k = 0; k < 1000; ++k) {
    const double z0 = zs(rng), a = as(rng), u = k % 10 == 0 ? 0.0 : us(rng), g = gs(rng);
    const double c = k % 2 == 0 ? 1.0 : cs(rng);
    const double got = maec::prox_j1_pixel(z0, a, u, g, c);
    ASSERT_GE(got, 0.0);
    const double want = oracle::prox_j1(z0, a, u, g, c);
    ASSERT_NEAR(got, want, close_tol(want, 1e-7)) << z0 << ' ' << a << ' ' << u << ' ' << g << ' ' << c;
  }
}

TEST(ProxJ1, NoCancellationForLargeShift) {
  // b = gamma a - z0 = 1e8 with u = 1: root ~ u / b = 1e-8.
  const double z = maec::prox_j1_pixel(-1e8, 0.0, 1.0, 1.0, 1.0);
  EXPECT_NEAR(z, 1e-8, 1e-20);
}

TEST(ProxJ1, Errors) {
  EXPECT_THROW(maec::prox_j1_pixel(0.0, -1.0, 1.0, 1.0, 1.0), maec::ValidationError);
  EXPECT_THROW(maec::prox_j1_pixel(0.0, 1.0, -1.0, 1.0, 1.0), maec::ValidationError);
  EXPECT_THROW(maec::prox_j1_pixel(0.0, 1.0, 1.0, 1.0, 0.0), maec::ValidationError);
}

// ---------------------------------------------------------------- TV, positivity

TEST(GroupSoftThreshold, Examples) {
  EXPECT_EQ(maec::group_soft_threshold(std::vector<double>{3.0, 4.0}, 5.0), (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(maec::group_soft_threshold(std::vector<double>{3.0, 4.0}, 0.0), (std::vector<double>{3.0, 4.0}));
  const auto s = maec::group_soft_threshold(std::vector<double>{6.0, 8.0}, 5.0);
  EXPECT_NEAR(s[0], 3.0, 1e-15);
  EXPECT_NEAR(s[1], 4.0, 1e-15);
  EXPECT_EQ(maec::group_soft_threshold(std::vector<double>{0.0, 0.0, 0.0}, 1.0), (std::vector<double>(3, 0.0)));
  EXPECT_THROW(maec::group_soft_threshold(std::vector<double>{1.0}, -1.0), maec::ValidationError);
}

TEST(ProjectNonneg, Examples) {
  EXPECT_EQ(maec::project_nonneg(-1.0), 0.0);
  EXPECT_EQ(maec::project_nonneg(0.0), 0.0);
  EXPECT_EQ(maec::project_nonneg(2.5), 2.5);
}
