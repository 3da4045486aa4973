#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowsync/facegen.hpp"
#include "flowsync/flowcore.hpp"
#include "flowsync/guidance.hpp"
#include "flowsync/velocity_model.hpp"

namespace flowsync {

struct SamplerConfig {
  double tau_start = 0.92;
  std::size_t n_steps = 50;
  std::uint64_t seed = 0;
  GuidanceConfig guidance;
  bool keep_trace = false;

  /// Throws ConfigError on tau_start outside (0, 1] or n_steps == 0.
  void validate() const;
};

struct SampleTrace {
  std::vector<double> taus;
  std::vector<Grid2D> snapshots;  ///< n_steps + 1 states when tracing is on
};

struct SampleResult {
  Grid2D raw;    ///< state at tau = 0, unclamped
  Grid2D frame;  ///< raw clamped to [0, 1] for export
  SampleTrace trace;
};

/// (1 - tau_start) * source + tau_start * eps.
Grid2D progressive_init(const Grid2D& source, const SamplerConfig& cfg, RngStream& rng);

/// Progressive init from `source`, then guided Euler steps down the time grid,
/// conditioning every step on `source` and `audio_frame`. Throws NumericError
/// naming the step index if the state becomes non-finite.
SampleResult sample_frame(const VelocityModel& model, const Grid2D& source,
                          std::span<const double> audio_frame, const SamplerConfig& cfg,
                          RngStream& rng);

/// Frame t uses RngStream(cfg.seed, first_frame + t), so a clip split into chunks
/// reproduces the single-shot result when `first_frame` carries the offset.
/// Frames run in parallel; results do not depend on scheduling.
std::vector<SampleResult> sample_clip(const VelocityModel& model, const FrameSequence& source_clip,
                                      const AudioTrack& audio, const SamplerConfig& cfg,
                                      std::uint64_t first_frame = 0);

/// CSV `step,tau,mean,std,mouth_mse,outside_mse`, errors measured against `reference`
/// inside / outside the mouth bounding box.
std::string trace_csv(const SampleTrace& trace, const Grid2D& reference, const MouthBox& box);

}  // namespace flowsync
