// Hot paths at the default 32x32 configuration.

#include <benchmark/benchmark.h>

#include "flowsync/facegen.hpp"
#include "flowsync/mlp.hpp"
#include "flowsync/sampler.hpp"
#include "flowsync/training.hpp"
#include "flowsync/velocity_model.hpp"

using namespace flowsync;

namespace {

LearnedVelocityModel default_model() {
  RngStream rng(1, 0);
  LearnedVelocityModel m = LearnedVelocityModel::initialise({{32, 32}, 1, {1024}}, rng);
  auto flat = m.flatten();
  for (double& v : flat) v = 0.01 * rng.gaussian();
  m.assign_flat(flat);
  return m;
}

void BM_MlpForward(benchmark::State& state) {
  RngStream rng(2, 0);
  const auto n = static_cast<std::size_t>(state.range(0));
  const MlpParams p = init_mlp({2 * 1024 + 1 + 16, n, 1024}, rng, false);
  Eigen::VectorXd x = Eigen::VectorXd::Random(static_cast<Eigen::Index>(p.input_size()));
  for (auto _ : state) benchmark::DoNotOptimize(mlp_forward(p, x));
}
BENCHMARK(BM_MlpForward)->Arg(256)->Arg(1024);

void BM_MlpBackwardBatch(benchmark::State& state) {
  RngStream rng(3, 0);
  const MlpParams p = init_mlp({2 * 1024 + 1 + 16, 1024, 1024}, rng, false);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(static_cast<Eigen::Index>(p.input_size()), 64);
  const Eigen::MatrixXd g = Eigen::MatrixXd::Random(1024, 64);
  MlpGrads grads = MlpParams::zeros(p.layer_sizes);
  for (auto _ : state) {
    const MlpTape tape = mlp_forward_batch(p, x);
    mlp_backward_batch(p, tape, g, grads, nullptr, {});
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_MlpBackwardBatch)->Unit(benchmark::kMillisecond);

void BM_RenderFace(benchmark::State& state) {
  RngStream rng(4, 0);
  const FaceRenderer r(sample_face_spec(rng, {}));
  double a = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(r.render(a));
    a = a < 0.9 ? a + 0.01 : 0.1;
  }
}
BENCHMARK(BM_RenderFace);

void BM_SampleFrame(benchmark::State& state) {
  const LearnedVelocityModel model = default_model();
  RngStream rng(5, 0);
  const FaceSpec spec = sample_face_spec(rng, {});
  const Grid2D source = render_face(spec, 0.4);
  SamplerConfig cfg;
  cfg.n_steps = static_cast<std::size_t>(state.range(0));
  cfg.guidance = default_guidance(spec);
  const std::vector<double> audio{0.6};
  for (auto _ : state) {
    RngStream s(6, 0);
    benchmark::DoNotOptimize(sample_frame(model, source, audio, cfg, s));
  }
}
BENCHMARK(BM_SampleFrame)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_CfmStep(benchmark::State& state) {
  const SyntheticFaceSource source(FacegenConfig{});
  TrainConfig cfg;
  TrainState ts = init_train_state(cfg, source);
  std::size_t step = 0;
  for (auto _ : state) {
    const Batch b = assemble_batch(ts.model, source, cfg, step++);
    benchmark::DoNotOptimize(cfm_step(ts, b, cfg));
  }
}
BENCHMARK(BM_CfmStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
