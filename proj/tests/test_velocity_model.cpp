#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "flowsync/error.hpp"
#include "flowsync/io.hpp"
#include "flowsync/velocity_model.hpp"
#include "support.hpp"

namespace flowsync {
namespace {

using testing::ScratchDir;
using testing::file_bytes;

LearnedVelocityModel random_model(FrameSize frame, std::vector<std::size_t> hidden, std::uint64_t seed) {
  RngStream rng(seed, 0);
  LearnedVelocityModel m = LearnedVelocityModel::initialise({frame, 1, std::move(hidden)}, rng);
  auto flat = m.flatten();
  for (double& v : flat) v = rng.uniform(-0.3, 0.3);
  m.assign_flat(flat);
  return m;
}

Grid2D random_grid(FrameSize f, RngStream& rng) {
  Grid2D g(f.height, f.width);
  for (double& v : g.values()) v = rng.uniform();
  return g;
}

TEST(TimeEmbedding, SinCosOctaves) {
  const double tau = 0.3;
  const auto e = time_embedding(tau);
  const double ks[] = {1, 2, 4, 8};
  for (int i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(e[2 * i], std::sin(ks[i] * std::numbers::pi * tau));
    EXPECT_DOUBLE_EQ(e[2 * i + 1], std::cos(ks[i] * std::numbers::pi * tau));
  }
}

TEST(LearnedModel, FreshModelPredictsZero) {
  RngStream rng(1, 0);
  const LearnedVelocityModel m = LearnedVelocityModel::initialise({{4, 4}, 1, {16}}, rng);
  EXPECT_EQ(m.null_token()(0), -1.0);
  const Grid2D x = random_grid({4, 4}, rng), c = random_grid({4, 4}, rng);
  const std::vector<double> audio{0.4};
  const Grid2D v = m.predict(x, {{&c, 1}, std::span<const double>(audio), 0.5});
  EXPECT_EQ(v, Grid2D(4, 4, 0.0));
}

TEST(LearnedModel, AbsentAudioEqualsNullToken) {
  const LearnedVelocityModel m = random_model({3, 3}, {12, 7}, 2);
  RngStream rng(2, 1);
  const Grid2D x = random_grid({3, 3}, rng), c = random_grid({3, 3}, rng);
  const std::vector<double> null{m.null_token()(0)};
  const Grid2D a = m.predict(x, {{&c, 1}, std::nullopt, 0.7});
  const Grid2D b = m.predict(x, {{&c, 1}, std::span<const double>(null), 0.7});
  EXPECT_EQ(a, b);
  const std::vector<double> real{0.6};
  EXPECT_NE(a, m.predict(x, {{&c, 1}, std::span<const double>(real), 0.7}));
}

TEST(LearnedModel, InputLayoutAndForward) {
  const LearnedVelocityModel m = random_model({2, 3}, {9}, 3);
  RngStream rng(3, 1);
  const Grid2D x = random_grid({2, 3}, rng);
  const std::vector<Grid2D> conds = {random_grid({2, 3}, rng), random_grid({2, 3}, rng)};
  const std::vector<double> audio{0.25};
  const double tau = 0.6;
  const ConditionBundle cb{conds, std::span<const double>(audio), tau};

  Eigen::VectorXd in(static_cast<Eigen::Index>(m.input_size()));
  m.build_input(x, cb, in);
  ASSERT_EQ(m.input_size(), 6u + 6u + 1u + 8u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(in(static_cast<Eigen::Index>(i)), x[i]);
    EXPECT_DOUBLE_EQ(in(static_cast<Eigen::Index>(6 + i)), 0.5 * (conds[0][i] + conds[1][i]));
  }
  EXPECT_EQ(in(12), 0.25);
  const auto e = time_embedding(tau);
  for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(in(static_cast<Eigen::Index>(13 + k)), e[k]);

  // Straight-line recomputation of the one-hidden-layer network.
  const MlpParams& p = m.mlp();
  const Grid2D v = m.predict(x, cb);
  for (Eigen::Index o = 0; o < 6; ++o) {
    double s = p.biases[1](o);
    for (Eigen::Index h = 0; h < 9; ++h) {
      double z = p.biases[0](h);
      for (Eigen::Index j = 0; j < in.size(); ++j) z += p.weights[0](h, j) * in(j);
      s += p.weights[1](o, h) * std::tanh(z);
    }
    EXPECT_NEAR(v[static_cast<std::size_t>(o)], s, 1e-13);
  }
}

TEST(LearnedModel, ShapeMismatches) {
  const LearnedVelocityModel m = random_model({4, 4}, {8}, 4);
  const Grid2D good(4, 4), bad(4, 5);
  const std::vector<double> audio{0.5}, audio2{0.5, 0.5};
  EXPECT_THROW(m.predict(bad, {{&good, 1}, std::span<const double>(audio), 0.5}), ShapeError);
  EXPECT_THROW(m.predict(good, {{&bad, 1}, std::span<const double>(audio), 0.5}), ShapeError);
  EXPECT_THROW(m.predict(good, {{&good, 1}, std::span<const double>(audio2), 0.5}), ShapeError);
  EXPECT_THROW(m.predict(good, {{}, std::span<const double>(audio), 0.5}), ContractError);
}

TEST(GaussianOracle, ReducesForStandardData) {
  // mu = 0, sigma2 = 1: x = a X + b eps with X, eps iid, so E[eps - X | x] = (b - a) x / (a^2 + b^2).
  const GaussianOracleModel oracle(Grid2D(1, 3, 0.0), 1.0);
  const Grid2D x(1, 3, std::vector<double>{-1.0, 0.2, 2.0});
  for (double tau : {0.2, 0.5, 0.8}) {
    const double a = 1 - tau, b = tau;
    const Grid2D v = oracle.velocity(x, tau);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(v[i], (b - a) * x[i] / (a * a + b * b), 1e-14);
  }
}

TEST(GaussianOracle, PointMassLimit) {
  // sigma2 -> 0: x_data = mu, so the velocity is (x - mu) / tau.
  const GaussianOracleModel oracle(Grid2D(1, 1, 0.3), 1e-12);
  const Grid2D x(1, 1, 0.7);
  EXPECT_NEAR(oracle.velocity(x, 0.4)[0], (0.7 - 0.3) / 0.4, 1e-9);
  EXPECT_THROW(GaussianOracleModel(Grid2D(1, 1), 0.0), ConfigError);
}

// Monte Carlo regression of (eps - x_data) on x_tau: within every populated bin the
// empirical conditional mean must sit within 3 standard errors of the oracle.
TEST(GaussianOracle, MatchesMonteCarloConditionalMean) {
  const double mu = 0.3, sigma2 = 0.04, tau = 0.5;
  const GaussianOracleModel oracle(Grid2D(1, 1, mu), sigma2);
  RngStream rng(77, 0);
  const int n = 100000, n_bins = 20;
  const double lo = -1.0, hi = 1.3;
  std::vector<double> sum_t(n_bins), sum_t2(n_bins), sum_v(n_bins);
  std::vector<int> count(n_bins);
  for (int i = 0; i < n; ++i) {
    const double xd = mu + std::sqrt(sigma2) * rng.gaussian();
    const double eps = rng.gaussian();
    const double x = (1 - tau) * xd + tau * eps;
    const int bin = static_cast<int>(std::floor((x - lo) / (hi - lo) * n_bins));
    if (bin < 0 || bin >= n_bins) continue;
    const double t = eps - xd;
    sum_t[bin] += t;
    sum_t2[bin] += t * t;
    sum_v[bin] += oracle.velocity(Grid2D(1, 1, x), tau)[0];
    ++count[bin];
  }
  int checked = 0;
  for (int b = 0; b < n_bins; ++b) {
    if (count[b] < 200) continue;
    const double m = sum_t[b] / count[b];
    const double var = sum_t2[b] / count[b] - m * m;
    const double se = std::sqrt(var / count[b]);
    EXPECT_LT(std::abs(m - sum_v[b] / count[b]), 3 * se) << "bin " << b;
    ++checked;
  }
  EXPECT_GE(checked, 10);
}

TEST(Checkpoint, RoundTripIsExactAtFloat32) {
  ScratchDir dir("ckpt");
  const LearnedVelocityModel m = random_model({4, 4}, {10, 6}, 5);
  save_checkpoint(dir / "a.ckpt", m);
  const LearnedVelocityModel back = load_checkpoint(dir / "a.ckpt");
  const auto orig = m.flatten(), got = back.flatten();
  ASSERT_EQ(orig.size(), got.size());
  for (std::size_t i = 0; i < orig.size(); ++i) {
    EXPECT_EQ(got[i], static_cast<double>(static_cast<float>(orig[i])));
  }
  save_checkpoint(dir / "b.ckpt", back);
  EXPECT_EQ(file_bytes(dir / "a.ckpt"), file_bytes(dir / "b.ckpt"));
  EXPECT_EQ(back.frame(), m.frame());
  EXPECT_EQ(back.mlp().layer_sizes, m.mlp().layer_sizes);
}

TEST(Checkpoint, HeaderDescribesLayout) {
  ScratchDir dir("ckpt_header");
  const LearnedVelocityModel m = random_model({2, 2}, {5}, 6);
  save_checkpoint(dir / "m.ckpt", m);
  const std::string bytes = file_bytes(dir / "m.ckpt");
  const std::string header = bytes.substr(0, bytes.find('\n'));
  // input 2*4 + 1 + 8 = 17; params 5*18 + 4*6 + 1 null token = 115.
  EXPECT_EQ(header, "FSYNC1 115 17,5,4 1 2 2");
  EXPECT_EQ(bytes.size(), header.size() + 1 + 115 * 4);
}

TEST(Checkpoint, MalformedFilesAreIoErrors) {
  ScratchDir dir("ckpt_bad");
  const LearnedVelocityModel m = random_model({2, 2}, {5}, 7);
  save_checkpoint(dir / "m.ckpt", m);
  const std::string bytes = file_bytes(dir / "m.ckpt");
  write_text_file(dir / "trunc.ckpt", bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(load_checkpoint(dir / "trunc.ckpt"), IoError);
  write_text_file(dir / "magic.ckpt", "NOTCKPT 1 2,1 1 1 1\nxxxx");
  EXPECT_THROW(load_checkpoint(dir / "magic.ckpt"), IoError);
  write_text_file(dir / "count.ckpt", "FSYNC1 7 17,5,4 1 2 2\n" + bytes.substr(bytes.find('\n') + 1));
  EXPECT_THROW(load_checkpoint(dir / "count.ckpt"), IoError);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), IoError);
}

}  // namespace
}  // namespace flowsync
