#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dyneq/checks.hpp"
#include "dyneq/trajectories.hpp"

namespace {

using namespace dyneq;

const PhysicalConstants kUnit{};

TEST(Guidance, RealFieldHasZeroVelocity) {
  const ComplexField psi = make_gaussian(make_grid(512, 50.0), 0.0, 2.0, 0.0);
  for (double x : {-3.0, 0.0, 0.37, 4.1})
    EXPECT_NEAR(bohmian_velocity(psi, x, 1.0, kUnit), 0.0, 1e-12);
}

TEST(Guidance, PlaneWavePhase) {
  // k = 3, m = 2: v = hbar k / m = 1.5 at every point inside the packet.
  const SpatialGrid g = make_grid(1000, 100.0);
  const ComplexField psi = make_gaussian(g, 0.0, 3.0, 0.0, 3.0);
  for (double x : {-4.0, -0.33, 0.0, 2.5, 6.0}) {
    const double on_grid = g.coordinate(g.nearest_index(x));
    EXPECT_NEAR(bohmian_velocity(psi, on_grid, 2.0, kUnit), 1.5, 1e-8);
    // Between cells the interpolation error is O(dx^4 k^4).
    EXPECT_NEAR(bohmian_velocity(psi, x + 0.013, 2.0, kUnit), 1.5, 1e-4);
  }
}

TEST(Guidance, RefusesNodes) {
  const SpatialGrid g = make_grid(400, 40.0);
  ComplexField psi = make_gaussian(g, 0.0, 3.0, 0.0);
  for (std::size_t k = 0; k < g.size(); ++k) psi[k] *= g.coordinate(k);
  EXPECT_THROW(bohmian_velocity(psi, spatial_derivative(psi, 1), 0.0, 1.0,
                                kUnit, 1e-3),
               NodeProximityError);
}

TEST(Guidance, MatchesCurrentOverDensity) {
  const SpatialGrid g = make_grid(1000, 100.0);
  const ComplexField a = make_gaussian(g, -2.0, 2.0, 0.0, 0.8);
  const ComplexField b = make_gaussian(g, 3.0, 1.5, 0.4, -0.5);
  ComplexField psi(g);
  for (std::size_t k = 0; k < g.size(); ++k) psi[k] = a[k] + 0.6 * b[k];
  psi = normalize(psi);
  const RealField j = probability_current(psi, 1.3, kUnit);
  for (std::size_t k = 400; k < 600; k += 7) {
    const double rho = std::norm(psi[k]);
    if (rho < 1e-6) continue;
    EXPECT_NEAR(bohmian_velocity(psi, g.coordinate(k), 1.3, kUnit), j[k] / rho,
                1e-8);
  }
}

TEST(Current, RealFieldCarriesNone) {
  const ComplexField psi = make_gaussian(make_grid(256, 30.0), 1.0, 2.0, 0.0);
  for (double v : probability_current(psi, 1.0, kUnit))
    EXPECT_NEAR(v, 0.0, 1e-14);
}

TEST(Current, PlaneWaveCurrentIsVelocityTimesDensity) {
  const ComplexField psi =
      make_gaussian(make_grid(1000, 100.0), 0.0, 3.0, 0.0, 2.0);
  const RealField j = probability_current(psi, 1.0, kUnit);
  for (std::size_t k = 0; k < psi.size(); ++k) {
    EXPECT_GE(j[k], -1e-14);
    EXPECT_NEAR(j[k], 2.0 * std::norm(psi[k]), 1e-8);
  }
}

TEST(Advance, EulerUpdate) {
  const ParticleState p{1.0, 0.0, 1.0, 1};
  EXPECT_EQ(advance_position(p, 0.0, 0.01).position, 1.0);
  EXPECT_DOUBLE_EQ(advance_position(p, 2.0, 0.01).position, 1.02);
  ParticleState q{0.0, 0.0, 1.0, 2};
  for (int i = 0; i < 8; ++i) q = advance_position(q, 0.5, 0.25);
  EXPECT_EQ(q.position, 1.0);
  EXPECT_THROW(advance_position(p, 1.0, 0.0), PreconditionError);
}

TEST(Kernel, StationaryFieldNeverJumps) {
  const ComplexField psi = make_gaussian(make_grid(256, 30.0), 0.0, 2.0, 0.0);
  const JumpKernel k = vink_kernel(psi, 1.0, 0.01, kUnit);
  const RealField rho = density(psi);
  // In the far tails FFT rounding in j is divided by a tiny density.
  for (std::size_t s = 0; s < k.size(); ++s) {
    EXPECT_NEAR(k.left[s] + k.stay[s] + k.right[s], 1.0, 1e-12);
    if (rho[s] > 1e-6) EXPECT_NEAR(k.stay[s], 1.0, 1e-12);
  }
}

TEST(Kernel, RightMovingFieldNeverJumpsLeft) {
  const ComplexField psi =
      make_gaussian(make_grid(1000, 100.0), 0.0, 3.0, 0.0, 2.0);
  const JumpKernel k = vink_kernel(psi, 1.0, 0.01, kUnit);
  for (std::size_t s = 0; s < k.size(); ++s) {
    EXPECT_EQ(k.left[s], 0.0);
    EXPECT_GE(k.right[s], 0.0);
    EXPECT_GE(k.stay[s], 0.0);
    EXPECT_NEAR(k.left[s] + k.stay[s] + k.right[s], 1.0, 1e-12);
  }
}

TEST(Kernel, OverflowNamesTheCell) {
  const ComplexField psi =
      make_gaussian(make_grid(1000, 100.0), 0.0, 3.0, 0.0, 2.0);
  try {
    vink_kernel(psi, 1.0, 1.0, kUnit);
    FAIL() << "expected overflow";
  } catch (const ProbabilityOverflowError& e) {
    EXPECT_LT(e.cell(), psi.size());
  }
}

TEST(Kernel, DiscreteContinuity) {
  // One step of the kernel moves probability by the face-current balance.
  const SpatialGrid g = make_grid(512, 50.0);
  const ComplexField psi = make_gaussian(g, 0.0, 2.0, 0.0, 1.2);
  const double dt = 0.01, dx = g.spacing();
  const JumpKernel k = vink_kernel(psi, 1.0, dt, kUnit);
  const RealField rho = density(psi);
  const RealField j = probability_current(psi, 1.0, kUnit);
  const std::size_t n = g.size();
  for (std::size_t s = 1; s + 1 < n; ++s) {
    const double moved = rho[s] * k.stay[s] + rho[s - 1] * k.right[s - 1] +
                         rho[s + 1] * k.left[s + 1];
    const double face_r = 0.5 * (j[s] + j[s + 1]);
    const double face_l = 0.5 * (j[s - 1] + j[s]);
    EXPECT_NEAR(moved, rho[s] - dt / dx * (face_r - face_l), 1e-12);
  }
}

TEST(Sampling, StayingKernelIsFixedPoint) {
  JumpKernel k{RealField(5, 0.0), RealField(5, 1.0), RealField(5, 0.0)};
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_jump(k, 2, rng), 2u);
}

TEST(Sampling, ReproducibleForFixedSeed) {
  JumpKernel k{RealField(9, 0.3), RealField(9, 0.3), RealField(9, 0.4)};
  std::mt19937_64 a(42), b(42);
  for (int i = 0; i < 1000; ++i)
    EXPECT_EQ(sample_jump(k, 4, a), sample_jump(k, 4, b));
}

TEST(Sampling, FrequenciesMatchKernel) {
  const double pl = 0.2, pr = 0.35;
  JumpKernel k{RealField(3, pl), RealField(3, 1.0 - pl - pr), RealField(3, pr)};
  std::mt19937_64 rng(7);
  const int n = 100000;
  int left = 0, right = 0;
  for (int i = 0; i < n; ++i) {
    const std::size_t s = sample_jump(k, 1, rng);
    left += s == 0;
    right += s == 2;
  }
  const auto within = [n](int count, double p) {
    return std::abs(count - n * p) < 3.0 * std::sqrt(n * p * (1.0 - p));
  };
  EXPECT_TRUE(within(left, pl));
  EXPECT_TRUE(within(right, pr));
}

TEST(Walkers, MeanDisplacementMatchesGuidance) {
  // Over one step from a single site the expected displacement is
  // (p_right - p_left) dx; compare with v dt at that site.
  const SpatialGrid g = make_grid(1000, 100.0);
  const ComplexField psi = make_gaussian(g, 0.0, 2.0, 0.0, 1.0);
  const double dt = 0.01;
  const JumpKernel k = vink_kernel(psi, 1.0, dt, kUnit);
  const std::size_t site = g.nearest_index(0.3);
  std::mt19937_64 rng(11);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = (static_cast<double>(sample_jump(k, site, rng)) -
                      static_cast<double>(site)) *
                     g.spacing();
    sum += d;
    sum2 += d * d;
  }
  const double mean = sum / n;
  const double err = std::sqrt((sum2 / n - mean * mean) / n);
  const double v = bohmian_velocity(psi, g.coordinate(site), 1.0, kUnit);
  EXPECT_LT(std::abs(mean - v * dt), 3.0 * err + 1e-6);
}

TEST(Walkers, EnsembleFollowsDensity) {
  checks::EquivarianceConfig cfg;
  cfg.walkers = 4000;
  cfg.total_time = 1.0;
  const auto r = checks::vink_equivariance(cfg);
  EXPECT_LT(r.total_variation, 0.08);
  EXPECT_NEAR(r.walker_mean, r.density_mean, 0.1);
}

}  // namespace
