#include "flowsync/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flowsync/error.hpp"

namespace flowsync {

SpatialProfile spatial_profile(PixelPoint center, double sigma, double s_base, FrameSize frame) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ConfigError("guidance.sigma must be positive, got " + std::to_string(sigma));
  }
  if (!(s_base >= 0.0 && s_base <= 1.0)) {
    throw ConfigError("guidance.s_base must lie in [0, 1], got " + std::to_string(s_base));
  }
  if (center.x < 0.0 || center.y < 0.0 || center.x > static_cast<double>(frame.width) - 1.0 ||
      center.y > static_cast<double>(frame.height) - 1.0) {
    throw GeometryError("guidance centre lies outside the frame");
  }
  SpatialProfile p{center, sigma, s_base, Grid2D(frame.height, frame.width)};
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t y = 0; y < frame.height; ++y) {
    for (std::size_t x = 0; x < frame.width; ++x) {
      const double dx = static_cast<double>(x) - center.x;
      const double dy = static_cast<double>(y) - center.y;
      p.weights(y, x) = s_base + (1.0 - s_base) * std::exp(-(dx * dx + dy * dy) * inv);
    }
  }
  return p;
}

std::string_view to_string(GuidanceMode mode) {
  switch (mode) {
    case GuidanceMode::kDsCfg: return "dscfg";
    case GuidanceMode::kStatic: return "static";
    case GuidanceMode::kOff: return "off";
  }
  return "?";
}

GuidanceMode parse_guidance_mode(std::string_view text) {
  if (text == "dscfg") return GuidanceMode::kDsCfg;
  if (text == "static") return GuidanceMode::kStatic;
  if (text == "off") return GuidanceMode::kOff;
  throw ConfigError("guidance.mode must be dscfg, static or off, got '" + std::string(text) + "'");
}

void GuidanceConfig::validate() const {
  if (!(omega_peak >= 0.0) || !std::isfinite(omega_peak)) {
    throw ConfigError("guidance.omega_peak must be >= 0");
  }
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("guidance.gamma must be > 0");
  if (!std::isfinite(static_scale)) throw ConfigError("guidance.static_scale must be finite");
}

GuidanceConfig default_guidance(const FaceSpec& spec, double omega_peak) {
  GuidanceConfig cfg;
  cfg.omega_peak = omega_peak;
  const double sigma = 1.5 * std::max(spec.mouth_radii.rx, spec.mouth_radii.ry);
  cfg.spatial = spatial_profile(spec.mouth_center_in_frame(), sigma, 0.1, spec.frame);
  return cfg;
}

double temporal_weight(const GuidanceConfig& cfg, double tau) {
  return cfg.omega_peak * std::pow(std::clamp(tau, 0.0, 1.0), cfg.gamma);
}

Grid2D apply_dscfg(const Grid2D& v_cond, const Grid2D& v_uncond, const GuidanceConfig& cfg,
                   double tau) {
  require_same_shape(v_cond, v_uncond, "apply_dscfg");
  require_same_shape(v_cond, cfg.spatial.weights, "apply_dscfg (spatial profile)");
  const double w = temporal_weight(cfg, tau);
  if (w == 0.0) return v_uncond;  // exact, including signed zeros
  Grid2D out(v_cond.height(), v_cond.width());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = v_uncond[i] + cfg.spatial.weights[i] * w * (v_cond[i] - v_uncond[i]);
  }
  out.ensure_finite("apply_dscfg");
  return out;
}

Grid2D apply_guidance(const Grid2D& v_cond, const Grid2D& v_uncond, const GuidanceConfig& cfg,
                      double tau) {
  switch (cfg.mode) {
    case GuidanceMode::kDsCfg:
      return apply_dscfg(v_cond, v_uncond, cfg, tau);
    case GuidanceMode::kStatic: {
      require_same_shape(v_cond, v_uncond, "static guidance");
      Grid2D out(v_cond.height(), v_cond.width());
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = v_uncond[i] + cfg.static_scale * (v_cond[i] - v_uncond[i]);
      }
      out.ensure_finite("static guidance");
      return out;
    }
    case GuidanceMode::kOff:
      require_same_shape(v_cond, v_uncond, "guidance off");
      return v_uncond;
  }
  return v_uncond;
}

}  // namespace flowsync
