#include "flowsync/sampler.hpp"

#include <cmath>
#include <sstream>

#include "flowsync/error.hpp"
#include "flowsync/io.hpp"
#include "flowsync/parallel.hpp"

namespace flowsync {

void SamplerConfig::validate() const {
  (void)make_time_grid(tau_start, n_steps);
  guidance.validate();
}

Grid2D progressive_init(const Grid2D& source, const SamplerConfig& cfg, RngStream& rng) {
  cfg.validate();
  return fm_add(source, cfg.tau_start, rng).noised;
}

SampleResult sample_frame(const VelocityModel& model, const Grid2D& source,
                          std::span<const double> audio_frame, const SamplerConfig& cfg,
                          RngStream& rng) {
  const TimeGrid grid = make_time_grid(cfg.tau_start, cfg.n_steps);
  cfg.guidance.validate();
  SampleResult out;
  Grid2D x = progressive_init(source, cfg, rng);
  const std::span<const Grid2D> cond_frames(&source, 1);
  if (cfg.keep_trace) {
    out.trace.taus = grid.taus;
    out.trace.snapshots.reserve(grid.taus.size());
    out.trace.snapshots.push_back(x);
  }
  const bool need_cond = cfg.guidance.mode != GuidanceMode::kOff;
  for (std::size_t i = 0; i < grid.n_steps(); ++i) {
    const double tau = grid.taus[i];
    const ConditionBundle uncond{cond_frames, std::nullopt, tau};
    const Grid2D v_u = model.predict(x, uncond);
    Grid2D v_hat;
    if (need_cond) {
      const ConditionBundle cond{cond_frames, audio_frame, tau};
      v_hat = apply_guidance(model.predict(x, cond), v_u, cfg.guidance, tau);
    } else {
      v_hat = v_u;
    }
    const double dt = tau - grid.taus[i + 1];
    for (std::size_t k = 0; k < x.size(); ++k) x[k] -= dt * v_hat[k];
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (!std::isfinite(x[k])) {
        throw NumericError("sampler: non-finite state at step " + std::to_string(i) +
                           " (tau = " + std::to_string(tau) + ")");
      }
    }
    if (cfg.keep_trace) out.trace.snapshots.push_back(x);
  }
  out.frame = clamped(x);
  out.raw = std::move(x);
  return out;
}

std::vector<SampleResult> sample_clip(const VelocityModel& model, const FrameSequence& source_clip,
                                      const AudioTrack& audio, const SamplerConfig& cfg,
                                      std::uint64_t first_frame) {
  if (audio.size() != source_clip.size()) {
    throw ContractError("audio has " + std::to_string(audio.size()) + " frames, source clip has " +
                        std::to_string(source_clip.size()));
  }
  cfg.validate();
  std::vector<SampleResult> results(source_clip.size());
  parallel_for(source_clip.size(), [&](std::size_t t) {
    RngStream rng(cfg.seed, first_frame + t);
    results[t] = sample_frame(model, source_clip[t], audio.features[t], cfg, rng);
  });
  return results;
}

std::string trace_csv(const SampleTrace& trace, const Grid2D& reference, const MouthBox& box) {
  std::ostringstream out;
  out << "step,tau,mean,std,mouth_mse,outside_mse\n";
  for (std::size_t s = 0; s < trace.snapshots.size(); ++s) {
    const Grid2D& x = trace.snapshots[s];
    require_same_shape(x, reference, "trace_csv");
    double in_sum = 0.0, out_sum = 0.0;
    std::size_t in_n = 0, out_n = 0;
    for (std::size_t y = 0; y < x.height(); ++y) {
      for (std::size_t c = 0; c < x.width(); ++c) {
        const double d = x(y, c) - reference(y, c);
        if (box.contains(y, c)) {
          in_sum += d * d;
          ++in_n;
        } else {
          out_sum += d * d;
          ++out_n;
        }
      }
    }
    out << s << "," << format_double(trace.taus[s]) << "," << format_double(mean(x)) << ","
        << format_double(std::sqrt(variance(x))) << ","
        << format_double(in_n ? in_sum / static_cast<double>(in_n) : 0.0) << ","
        << format_double(out_n ? out_sum / static_cast<double>(out_n) : 0.0) << "\n";
  }
  return out.str();
}

}  // namespace flowsync
