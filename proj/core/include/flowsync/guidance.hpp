#pragma once

#include <string_view>

#include "flowsync/facegen.hpp"
#include "flowsync/grid.hpp"

namespace flowsync {

/// Spatial guidance weight S(x, y) = s_base + (1 - s_base) * exp(-d^2 / (2 sigma^2)),
/// peaking at exactly 1 on the mouth centre.
struct SpatialProfile {
  PixelPoint center;
  double sigma = 9.0;
  double s_base = 0.1;
  Grid2D weights;
};

/// Throws ConfigError if sigma <= 0 or s_base is outside [0, 1], GeometryError if
/// the centre lies outside the frame.
SpatialProfile spatial_profile(PixelPoint center, double sigma, double s_base, FrameSize frame);

enum class GuidanceMode { kDsCfg, kStatic, kOff };

std::string_view to_string(GuidanceMode mode);
GuidanceMode parse_guidance_mode(std::string_view text);

struct GuidanceConfig {
  GuidanceMode mode = GuidanceMode::kDsCfg;
  double omega_peak = 3.0;
  double gamma = 1.5;
  double static_scale = 1.0;
  SpatialProfile spatial;

  /// Throws ConfigError on omega_peak < 0, gamma <= 0 or a non-finite static scale.
  void validate() const;
};

/// Default DS-CFG configuration for a face geometry: sigma = 1.5 * max radius.
GuidanceConfig default_guidance(const FaceSpec& spec, double omega_peak = 3.0);

/// omega_peak * tau^gamma.
double temporal_weight(const GuidanceConfig& cfg, double tau);

/// v_uncond + S * omega(tau) * (v_cond - v_uncond), elementwise.
Grid2D apply_dscfg(const Grid2D& v_cond, const Grid2D& v_uncond, const GuidanceConfig& cfg,
                   double tau);

/// Dispatches on cfg.mode: DS-CFG, v_uncond + static_scale * (v_cond - v_uncond), or
/// the unconditional prediction alone.
Grid2D apply_guidance(const Grid2D& v_cond, const Grid2D& v_uncond, const GuidanceConfig& cfg,
                      double tau);

}  // namespace flowsync
