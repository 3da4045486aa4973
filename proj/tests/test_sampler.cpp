#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include <gtest/gtest.h>

#include "flowsync/error.hpp"
#include "flowsync/sampler.hpp"
#include "flowsync/training.hpp"

namespace flowsync {
namespace {

// Returns the same field everywhere, whatever the state.
class ConstantField final : public VelocityModel {
 public:
  explicit ConstantField(Grid2D v) : v_(std::move(v)) {}
  Grid2D predict(const Grid2D&, const ConditionBundle&) const override { return v_; }

 private:
  Grid2D v_;
};

// Velocity proportional to a huge multiple of the state: overflows within a few steps.
class Explosive final : public VelocityModel {
 public:
  Grid2D predict(const Grid2D& x, const ConditionBundle&) const override {
    Grid2D v = x;
    for (double& e : v.values()) e *= -1e300;
    return v;
  }
};

LearnedVelocityModel random_model(FrameSize frame, std::uint64_t seed) {
  RngStream rng(seed, 0);
  LearnedVelocityModel m = LearnedVelocityModel::initialise({frame, 1, {16}}, rng);
  auto flat = m.flatten();
  for (double& v : flat) v = rng.uniform(-0.2, 0.2);
  m.assign_flat(flat);
  return m;
}

SamplerConfig oracle_config(double tau_start, std::size_t n_steps) {
  SamplerConfig c;
  c.tau_start = tau_start;
  c.n_steps = n_steps;
  c.guidance.mode = GuidanceMode::kOff;
  return c;
}

SamplerConfig guided_config(FrameSize frame) {
  SamplerConfig c;
  c.n_steps = 10;
  c.seed = 3;
  c.guidance.spatial = spatial_profile({frame.width / 2.0, frame.height / 2.0}, 2.0, 0.1, frame);
  return c;
}

struct Moments {
  double mean = 0.0, var = 0.0;
};

Moments oracle_samples(std::size_t n, std::size_t n_steps) {
  const GaussianOracleModel oracle(Grid2D(1, 1, 0.3), 0.04);
  const SamplerConfig cfg = oracle_config(1.0, n_steps);
  const Grid2D source(1, 1, 0.9);
  const std::vector<double> audio{0.5};
  double s = 0, s2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng(21, i);
    const double x = sample_frame(oracle, source, audio, cfg, rng).raw[0];
    s += x;
    s2 += x * x;
  }
  const double m = s / static_cast<double>(n);
  return {m, s2 / static_cast<double>(n) - m * m};
}

TEST(ProgressiveInit, Limits) {
  RngStream rng(1, 0);
  Grid2D source(8, 8);
  for (double& v : source.values()) v = rng.uniform();
  SamplerConfig c;
  c.tau_start = 1e-12;
  RngStream a(2, 0);
  const Grid2D near = progressive_init(source, c, a);
  for (std::size_t i = 0; i < source.size(); ++i) EXPECT_NEAR(near[i], source[i], 1e-10);

  c.tau_start = 1.0;
  RngStream b(2, 0), d(2, 0);
  EXPECT_EQ(progressive_init(source, c, b), progressive_init(Grid2D(8, 8, 0.3), c, d));
}

TEST(ProgressiveInit, NoiseVariance) {
  const Grid2D source(100, 100, 0.5);
  SamplerConfig c;
  RngStream rng(3, 0);
  const Grid2D x = progressive_init(source, c, rng);
  EXPECT_NEAR(variance(axpby(1.0, x, -0.08, source)), 0.8464, 0.03);
}

TEST(SampleFrame, ConstantFieldIsIntegratedExactly) {
  RngStream draw(4, 0);
  Grid2D clean(6, 6);
  for (double& v : clean.values()) v = draw.uniform();
  SamplerConfig cfg = oracle_config(0.92, 50);
  RngStream probe(5, 0);
  const Grid2D eps = fm_add(clean, cfg.tau_start, probe).eps;  // the draw the sampler will make
  const ConstantField model(velocity_target(clean, eps));
  RngStream rng(5, 0);
  const std::vector<double> audio{0.5};
  const SampleResult r = sample_frame(model, clean, audio, cfg, rng);
  for (std::size_t i = 0; i < clean.size(); ++i) EXPECT_NEAR(r.raw[i], clean[i], 1e-13);
}

TEST(SampleFrame, OracleTransportsNoiseToData) {
  const Moments m = oracle_samples(2000, 50);
  EXPECT_NEAR(m.mean, 0.3, 0.015);
  EXPECT_NEAR(m.var, 0.04, 0.008);
}

// For Gaussian data the Euler map is affine in the initial noise, x_N = A eps + B, with
// A and B given by a scalar recursion over the grid.
std::pair<double, double> euler_affine_map(double mu, double sigma2, std::size_t n) {
  double A = 1.0, B = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double tau = static_cast<double>(n - i) / static_cast<double>(n), dt = 1.0 / static_cast<double>(n);
    const double a = 1.0 - tau, b = tau;
    const double gain = (b - a * sigma2) / (a * a * sigma2 + b * b);
    B -= dt * (-mu + gain * (B - a * mu));
    A *= 1.0 - dt * gain;
  }
  return {A, B};
}

TEST(SampleFrame, OracleSamplesFollowTheAffineEulerMap) {
  const GaussianOracleModel oracle(Grid2D(1, 1, 0.3), 0.04);
  const std::vector<double> audio{0.5};
  for (std::size_t n : {10u, 50u, 100u}) {
    const auto [A, B] = euler_affine_map(0.3, 0.04, n);
    const SamplerConfig cfg = oracle_config(1.0, n);
    for (std::uint64_t i = 0; i < 50; ++i) {
      RngStream probe(21, i), rng(21, i);
      const double eps = fm_add(Grid2D(1, 1, 0.9), 1.0, probe).eps[0];
      EXPECT_NEAR(sample_frame(oracle, Grid2D(1, 1, 0.9), audio, cfg, rng).raw[0], A * eps + B, 1e-12);
    }
  }
}

// The mean is transported exactly at any resolution; the variance carries an O(1/n) Euler
// bias (about -0.0039 at 50 steps) that exceeds the Monte Carlo error of 2000 samples.
TEST(SampleFrame, DoublingStepsKeepsTheMean) {
  const Moments a = oracle_samples(2000, 50), b = oracle_samples(2000, 100);
  EXPECT_LT(std::abs(a.mean - b.mean), std::sqrt(0.04 / 2000));
  const double a50 = euler_affine_map(0.3, 0.04, 50).first, a100 = euler_affine_map(0.3, 0.04, 100).first;
  EXPECT_NEAR(b.var / a.var, (a100 * a100) / (a50 * a50), 1e-9);
}

TEST(SampleFrame, OffEqualsZeroPeakBitwise) {
  const FrameSize f{8, 8};
  const LearnedVelocityModel model = random_model(f, 6);
  const Grid2D source(8, 8, 0.4);
  const std::vector<double> audio{0.7};
  SamplerConfig off = guided_config(f), zero = guided_config(f);
  off.guidance.mode = GuidanceMode::kOff;
  zero.guidance.omega_peak = 0.0;
  RngStream a(7, 0), b(7, 0);
  EXPECT_EQ(sample_frame(model, source, audio, off, a).raw, sample_frame(model, source, audio, zero, b).raw);
}

TEST(SampleFrame, TraceAndClamp) {
  const FrameSize f{8, 8};
  const LearnedVelocityModel model = random_model(f, 8);
  SamplerConfig cfg = guided_config(f);
  cfg.keep_trace = true;
  RngStream rng(9, 0);
  const std::vector<double> audio{0.2};
  const SampleResult r = sample_frame(model, Grid2D(8, 8, 0.5), audio, cfg, rng);
  ASSERT_EQ(r.trace.snapshots.size(), cfg.n_steps + 1);
  EXPECT_EQ(r.trace.taus.size(), cfg.n_steps + 1);
  EXPECT_EQ(r.trace.snapshots.back(), r.raw);
  EXPECT_EQ(r.frame, clamped(r.raw));
  FaceSpec spec;
  spec.frame = f;
  spec.mouth_center = {4, 5};
  spec.mouth_radii = {2, 1};
  const std::string csv = trace_csv(r.trace, Grid2D(8, 8, 0.5), spec.mouth_box());
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), static_cast<long>(cfg.n_steps + 2));
}

TEST(SampleFrame, NonFiniteStateNamesStep) {
  const Explosive blowup;
  SamplerConfig cfg = oracle_config(1.0, 10);
  RngStream rng(10, 0);
  const std::vector<double> audio{0.5};
  try {
    sample_frame(blowup, Grid2D(2, 2), audio, cfg, rng);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(SampleFrame, IdenticalInputsAndStreamsGiveIdenticalFrames) {
  const FrameSize f{8, 8};
  const LearnedVelocityModel model = random_model(f, 11);
  const SamplerConfig cfg = guided_config(f);
  const Grid2D source(8, 8, 0.6);
  const std::vector<double> audio{0.3};
  RngStream first(12, 5);
  const Grid2D ref = sample_frame(model, source, audio, cfg, first).raw;
  for (int k = 0; k < 7; ++k) {
    RngStream rng(12, 5);
    EXPECT_EQ(sample_frame(model, source, audio, cfg, rng).raw, ref);
  }
}

TEST(SampleClip, SingleFrameMatchesSampleFrame) {
  const FrameSize f{8, 8};
  const LearnedVelocityModel model = random_model(f, 13);
  const SamplerConfig cfg = guided_config(f);
  const FrameSequence clip{Grid2D(8, 8, 0.3)};
  AudioTrack audio;
  audio.features = {{0.4}};
  RngStream rng(cfg.seed, 0);
  EXPECT_EQ(sample_clip(model, clip, audio, cfg)[0].raw,
            sample_frame(model, clip[0], audio.features[0], cfg, rng).raw);
}

TEST(SampleClip, ChunkedEqualsSingleShot) {
  const FrameSize f{8, 8};
  const LearnedVelocityModel model = random_model(f, 14);
  const SamplerConfig cfg = guided_config(f);
  RngStream rng(15, 0);
  FrameSequence clip;
  AudioTrack audio;
  for (int t = 0; t < 64; ++t) {
    Grid2D g(8, 8);
    for (double& v : g.values()) v = rng.uniform();
    clip.push_back(g);
    audio.features.push_back({rng.uniform()});
  }
  const auto whole = sample_clip(model, clip, audio, cfg);
  const FrameSequence head(clip.begin(), clip.begin() + 32), tail(clip.begin() + 32, clip.end());
  AudioTrack ha, ta;
  ha.features.assign(audio.features.begin(), audio.features.begin() + 32);
  ta.features.assign(audio.features.begin() + 32, audio.features.end());
  const auto a = sample_clip(model, head, ha, cfg, 0);
  const auto b = sample_clip(model, tail, ta, cfg, 32);
  for (std::size_t t = 0; t < 32; ++t) {
    EXPECT_EQ(whole[t].raw, a[t].raw) << t;
    EXPECT_EQ(whole[32 + t].raw, b[t].raw) << t;
  }
}

TEST(SampleClip, LengthMismatchIsContractError) {
  const FrameSize f{8, 8};
  const LearnedVelocityModel model = random_model(f, 16);
  AudioTrack audio;
  audio.features = {{0.1}, {0.2}};
  EXPECT_THROW(sample_clip(model, FrameSequence(3, Grid2D(8, 8)), audio, guided_config(f)),
               ContractError);
}

TEST(SamplerConfig, Validation) {
  SamplerConfig c;
  c.n_steps = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.n_steps = 5;
  c.tau_start = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

// A briefly trained model on small frames: starting from the noised source keeps the
// face outside the mouth closer to the source than starting from pure noise.
TEST(SampleClip, ProgressiveInitAnchorsPose) {
  FacegenConfig data;
  data.frame = {16, 16};
  data.mouth_center = {8.0, 11.0};
  data.mouth_radii = {3.0, 2.0};
  data.pose_max = 2;
  const SyntheticFaceSource source(data);
  TrainConfig tc;
  tc.hidden = {256};
  tc.batch_size = 32;
  tc.n_steps = 300;
  TrainState state = init_train_state(tc, source);
  for (std::size_t s = 0; s < tc.n_steps; ++s) {
    cfm_step(state, assemble_batch(state.model, source, tc, s), tc);
  }

  double anchored = 0.0, free = 0.0;
  for (std::uint64_t c = 0; c < 6; ++c) {
    RngStream rng(500, c);
    const ClipPair pair = sample_clip_pair(PoolTag::kArbitrary, rng, 4, data);
    const MouthBox box = pair.cond_spec.mouth_box();
    for (double tau_start : {0.92, 1.0}) {
      SamplerConfig sc;
      sc.tau_start = tau_start;
      sc.n_steps = 20;
      sc.guidance = default_guidance(pair.cond_spec);
      const auto out = sample_clip(state.model, pair.cond_clip, pair.target_audio, sc, 4 * c);
      double sum = 0.0;
      for (std::size_t t = 0; t < out.size(); ++t) {
        for (std::size_t y = 0; y < 16; ++y) {
          for (std::size_t x = 0; x < 16; ++x) {
            if (!box.contains(y, x)) sum += std::abs(out[t].frame(y, x) - pair.cond_clip[t](y, x));
          }
        }
      }
      (tau_start < 1.0 ? anchored : free) += sum;
    }
  }
  EXPECT_LT(anchored, free);
}

}  // namespace
}  // namespace flowsync
