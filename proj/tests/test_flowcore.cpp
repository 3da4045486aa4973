#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "flowsync/error.hpp"
#include "flowsync/flowcore.hpp"

namespace flowsync {
namespace {

Grid2D random_grid(std::size_t h, std::size_t w, RngStream& rng) {
  Grid2D g(h, w);
  for (double& v : g.values()) v = rng.gaussian();
  return g;
}

TEST(FlowPath, EndpointsAreExact) {
  RngStream rng(1, 0);
  const Grid2D clean = random_grid(8, 8, rng);
  RngStream a(2, 0), b(2, 0);
  EXPECT_EQ(fm_add(clean, 0.0, a).noised, clean);
  const Noised full = fm_add(clean, 1.0, b);
  EXPECT_EQ(full.noised, full.eps);
}

TEST(FlowPath, MidpointOfConstantFrame) {
  const Grid2D clean(4, 4, 0.5);
  RngStream rng(3, 0);
  const Noised n = fm_add(clean, 0.92, rng);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    EXPECT_NEAR(n.noised[i], 0.04 + 0.92 * n.eps[i], 1e-15);
  }
}

TEST(FlowPath, VelocityMatchesFiniteDifferences) {
  RngStream rng(4, 0);
  const Grid2D clean = random_grid(5, 5, rng), eps = random_grid(5, 5, rng);
  const Grid2D v = velocity_target(clean, eps);
  const double h = 1e-5;
  for (double tau : {0.1, 0.5, 0.9}) {
    const Grid2D up = fm_interpolate(clean, eps, tau + h);
    const Grid2D down = fm_interpolate(clean, eps, tau - h);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR((up[i] - down[i]) / (2 * h), v[i], 1e-6);
  }
  EXPECT_EQ(velocity_target(Grid2D(2, 2, 0.0), Grid2D(2, 2, 1.0)), Grid2D(2, 2, 1.0));
}

TEST(FlowPath, AffineInCleanWithSharedNoise) {
  RngStream rng(5, 0);
  const Grid2D c1 = random_grid(6, 6, rng), c2 = random_grid(6, 6, rng), eps = random_grid(6, 6, rng);
  const double alpha = 0.3, tau = 0.37;
  const Grid2D mixed = fm_interpolate(axpby(alpha, c1, 1 - alpha, c2), eps, tau);
  const Grid2D combo =
      axpby(alpha, fm_interpolate(c1, eps, tau), 1 - alpha, fm_interpolate(c2, eps, tau));
  for (std::size_t i = 0; i < mixed.size(); ++i) EXPECT_NEAR(mixed[i], combo[i], 1e-14);
}

TEST(FlowPath, RejectsTauOutsideUnitInterval) {
  RngStream rng(6, 0);
  const Grid2D clean(2, 2);
  EXPECT_THROW(fm_add(clean, 1.5, rng), ContractError);
  EXPECT_THROW(fm_add(clean, -0.01, rng), ContractError);
  EXPECT_THROW(fm_interpolate(clean, clean, std::nan("")), ContractError);
  EXPECT_THROW(velocity_target(clean, Grid2D(3, 2)), ShapeError);
}

TEST(TimeGrid, UniformDescendingGrid) {
  const TimeGrid g = make_time_grid(0.92, 50);
  ASSERT_EQ(g.taus.size(), 51u);
  EXPECT_EQ(g.n_steps(), 50u);
  EXPECT_EQ(g.taus.front(), 0.92);
  EXPECT_EQ(g.taus.back(), 0.0);
  for (std::size_t i = 0; i + 1 < g.taus.size(); ++i) {
    EXPECT_NEAR(g.taus[i] - g.taus[i + 1], 0.0184, 4 * std::numeric_limits<double>::epsilon());
  }
  const TimeGrid one = make_time_grid(1.0, 1);
  EXPECT_EQ(one.taus, (std::vector<double>{1.0, 0.0}));
}

TEST(TimeGrid, InvalidConfigurations) {
  EXPECT_THROW(make_time_grid(0.92, 0), ConfigError);
  EXPECT_THROW(make_time_grid(0.0, 10), ConfigError);
  EXPECT_THROW(make_time_grid(1.2, 10), ConfigError);
}

TEST(TimeGrid, DiscreteIndex) {
  EXPECT_EQ(tau_to_discrete(0.85), 850);
  EXPECT_EQ(tau_to_discrete(0.92), 920);
  EXPECT_EQ(tau_to_discrete(1.0), 1000);
  EXPECT_EQ(tau_to_discrete(0.0), 0);
  EXPECT_EQ(tau_to_discrete(0.5, 10), 5);
}

}  // namespace
}  // namespace flowsync
