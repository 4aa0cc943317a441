#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "shellquad/kinematics.hpp"
#include "shellquad/rng.hpp"

using namespace shellquad;

namespace {

MomentumConfig random_point(RandomStream& s, int n, int dim, double scale = 2.0) {
  MomentumConfig p(n, dim);
  for (int j = 0; j + 1 < n; ++j)
    for (int l = 0; l < dim; ++l) p[j][l] = scale * s.normal();
  p.close();
  return p;
}

// P_k(0) with the last leg tied to the others, as a function of leg j, component l.
double pk0_shifted(const ShellConfig& c, MomentumConfig p, int j, int l, double delta) {
  p[j][l] += delta;
  p.close();
  return pk0(c, p);
}

std::vector<double> random_direction(RandomStream& s, int dim) {
  std::vector<double> u(dim);
  s.unit_vector(u);
  return u;
}

}  // namespace

TEST(Kinematics, OmegaAndEnergySum) {
  const double p[3] = {3.0, 4.0, 0.0};
  EXPECT_DOUBLE_EQ(omega(0.0, p), 5.0);
  EXPECT_DOUBLE_EQ(omega(12.0, std::span<const double>(p, 2)), 13.0);
  const double zero[3] = {0.0, 0.0, 0.0};
  EXPECT_THROW(omega(0.0, zero), DomainError);
  EXPECT_DOUBLE_EQ(omega(2.0, zero), 2.0);

  ShellConfig c{2, 4, 1, {0.0, 0.0}};
  MomentumConfig two({{1.0, 0.0, 0.0}, {-1.0, 0.0, 0.0}});
  EXPECT_DOUBLE_EQ(pk0(c, two), 0.0);
}

TEST(Kinematics, DimensionChecks) {
  ShellConfig c = ShellConfig::massless(4, 4, 2);
  MomentumConfig wrong(4, 2);
  EXPECT_THROW(pk0(c, wrong), DimensionMismatch);
  EXPECT_THROW(gradient(c, MomentumConfig(3, 3)), DimensionMismatch);
  EXPECT_THROW((ShellConfig{4, 4, 5, {0, 0, 0, 0}}.validate()), DimensionMismatch);
  EXPECT_THROW((ShellConfig{4, 4, 2, {0, -1, 0, 0}}.validate()), DomainError);
}

TEST(Kinematics, CloseConservesMomentum) {
  RandomStream s(1, 1, 0);
  for (int i = 0; i < 100; ++i) {
    const MomentumConfig p = random_point(s, 5, 3);
    EXPECT_TRUE(p.conserved());
  }
}

TEST(Kinematics, GradientMatchesCentralDifferences) {
  RandomStream s(2, 1, 0);
  const std::vector<ShellConfig> configs = {
      {4, 4, 2, {1.0, 0.0, 0.0, 0.0}}, {4, 3, 1, {1.0, 2.0, 0.5, 0.0}}, {6, 4, 3, {0.0, 1.0, 0.0, 1.0, 0.0, 2.0}}};
  const double h = tolerance::kFiniteDiffStep;
  for (const auto& c : configs) {
    for (int trial = 0; trial < 30; ++trial) {
      const MomentumConfig p = random_point(s, c.n, c.spatial_dim());
      const Gradient g = gradient(c, p);
      ASSERT_EQ(g.rows, c.n - 1);
      ASSERT_EQ(g.cols, c.spatial_dim());
      for (int j = 0; j + 1 < c.n; ++j)
        for (int l = 0; l < c.spatial_dim(); ++l) {
          const double fd = (pk0_shifted(c, p, j, l, h) - pk0_shifted(c, p, j, l, -h)) / (2.0 * h);
          EXPECT_NEAR(g(j, l), fd, tolerance::kFiniteDiffAgreement);
        }
    }
  }
}

TEST(Kinematics, MasslessEnergySumIsHomogeneous) {
  RandomStream s(3, 1, 0);
  const ShellConfig c = ShellConfig::massless(4, 4, 2);
  for (int i = 0; i < 50; ++i) {
    const MomentumConfig p = random_point(s, 4, 3);
    const double beta = 0.1 + 5.0 * s.uniform();
    EXPECT_NEAR(pk0(c, p.scaled(beta)), beta * pk0(c, p), 1e-12 * beta * 10.0);
  }
}

TEST(SingularRay, OnTheConeWithVanishingGradient) {
  RandomStream s(4, 1, 0);
  for (int n : {3, 4, 6}) {
    for (int k = 1; k < n; ++k) {
      const ShellConfig c = ShellConfig::massless(n, 4, k);
      std::vector<double> seeds(n);
      for (double& w : seeds) w = 0.2 + 3.0 * s.uniform();
      const SingularRay ray = sample_singular_ray(c, random_direction(s, 3), seeds);
      const MomentumConfig p = ray.momenta();
      EXPECT_LT(std::abs(pk0(c, p)), 1e-12);
      EXPECT_LT(gradient(c, p).frobenius, 1e-12);
      for (int j = 0; j < k; ++j) EXPECT_EQ(ray.energies[j], seeds[j]);
    }
  }
}

TEST(SingularRay, RescalingStaysOnCone) {
  RandomStream s(5, 1, 0);
  const ShellConfig c = ShellConfig::massless(4, 4, 2);
  const SingularRay ray = sample_singular_ray(c, random_direction(s, 3), std::vector<double>{1.0, 2.0, 0.5, 1.5});
  for (double beta : {3.0, 1e-3, -2.0}) {
    const SingularRay r = ray.scaled(beta);
    EXPECT_LT(std::abs(pk0(c, r.momenta())), 1e-12);
    EXPECT_LT(gradient(c, r.momenta()).frobenius, 1e-12);
  }
  EXPECT_THROW(ray.scaled(0.0), DomainError);
}

TEST(SingularRay, Preconditions) {
  const std::vector<double> u{1.0, 0.0, 0.0};
  const std::vector<double> seeds(4, 1.0);
  EXPECT_THROW(sample_singular_ray(ShellConfig{4, 4, 2, {1, 0, 0, 0}}, u, seeds), PreconditionError);
  EXPECT_THROW(sample_singular_ray(ShellConfig::massless(4, 4, 0), u, seeds), InfeasibleSplit);
  EXPECT_THROW(sample_singular_ray(ShellConfig::massless(4, 4, 4), u, seeds), InfeasibleSplit);
  EXPECT_THROW(sample_singular_ray(ShellConfig::massless(4, 4, 2), u, std::vector<double>{1, -1, 1, 1}),
               InfeasibleSplit);
  EXPECT_THROW(sample_singular_ray(ShellConfig::massless(4, 4, 2), std::vector<double>{1, 0}, seeds),
               DimensionMismatch);
}

TEST(Neighborhood, ConstraintHoldsForRandomOffsets) {
  RandomStream s(6, 1, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const ShellConfig c = ShellConfig::massless(5, 4, 2);
    const SingularRay ray = sample_singular_ray(c, random_direction(s, 3), std::vector<double>(5, 1.0));
    std::vector<std::vector<double>> raw(3, std::vector<double>(3));
    const double scale = std::pow(10.0, -3.0 * s.uniform());
    for (auto& v : raw)
      for (double& x : v) x = 0.1 * scale * s.normal();
    const NeighborhoodOffsets off = constrain_offsets(ray, raw);
    EXPECT_LE(constraint_residual(ray, off), 1e-12);
    // Unit directions s_j u + e_j.
    for (int j = 1; j < 4; ++j) {
      double n2 = 0.0;
      for (int l = 0; l < 3; ++l) {
        const double x = c.sign(j) * ray.direction[l] + off.e[j - 1][l];
        n2 += x * x;
      }
      EXPECT_NEAR(n2, 1.0, 1e-12);
    }
    EXPECT_TRUE(neighborhood_point(ray, off).conserved());
  }
}

TEST(Neighborhood, RejectsViolatingOffsets) {
  const ShellConfig c = ShellConfig::massless(4, 4, 2);
  const SingularRay ray = sample_singular_ray(c, std::vector<double>{0, 0, 1}, std::vector<double>(4, 1.0));
  NeighborhoodOffsets bad{{{0.1, 0.0, 0.0}, {0.0, 0.0, 0.0}}};
  EXPECT_THROW(neighborhood_point(ray, bad), ConstraintViolation);
  EXPECT_THROW(constrain_offsets(ray, {{2.0, 0.0, 0.0}, {0.0, 0.0, 0.0}}), ConstraintViolation);
}

// Oracle: P_k(0) evaluated directly at the perturbed point. The quadratic
// coefficient must reproduce it to second order, with a remainder that shrinks
// faster than R^2 alpha itself.
TEST(LocalExpansion, MatchesEnergySumToSecondOrder) {
  RandomStream s(7, 1, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 4 + trial % 3;
    const ShellConfig c = ShellConfig::massless(n, 4, n / 2);
    std::vector<double> seeds(n);
    for (double& w : seeds) w = 0.5 + s.uniform();
    const SingularRay ray = sample_singular_ray(c, random_direction(s, 3), seeds);
    std::vector<std::vector<double>> raw(n - 2, std::vector<double>(3));
    for (auto& v : raw)
      for (double& x : v) x = s.normal();
    double prev_rel = 1.0;
    for (double radius : {1e-1, 1e-2, 1e-3}) {
      auto scaled_raw = raw;
      double norm = 0.0;
      for (const auto& v : raw) norm += v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
      for (auto& v : scaled_raw)
        for (double& x : v) x *= radius / std::sqrt(norm);
      const NeighborhoodOffsets off = constrain_offsets(ray, scaled_raw);
      const LocalExpansion le = local_alpha(ray, off);
      ASSERT_TRUE(le.alpha.has_value());
      const double exact = pk0(c, neighborhood_point(ray, off));
      const double approx = le.r2 * *le.alpha;
      const double rel = std::abs(exact - approx) / std::max(std::abs(approx), 1e-300);
      if (std::abs(approx) > 1e-3 * le.r2) {
        EXPECT_LT(rel, 0.5 * prev_rel + 1e-6) << "R=" << radius;
        prev_rel = rel;
      }
    }
  }
}

TEST(LocalExpansion, ZeroOffsetsHaveNoAlpha) {
  const ShellConfig c = ShellConfig::massless(4, 4, 2);
  const SingularRay ray = sample_singular_ray(c, std::vector<double>{1, 0, 0}, std::vector<double>(4, 1.0));
  const LocalExpansion le = local_alpha(ray, NeighborhoodOffsets::zero(ray));
  EXPECT_FALSE(le.alpha.has_value());
  EXPECT_EQ(le.r2, 0.0);
}
