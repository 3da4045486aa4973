#include "flowsync/facegen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "flowsync/error.hpp"

namespace flowsync {
namespace {

constexpr std::uint64_t kTextureStream = 0x7465787475726500ULL;  // "texture"

double sq(double v) { return v * v; }

void require_aperture(double a) {
  if (!(a >= 0.0 && a <= 1.0)) {
    throw ContractError("aperture must lie in [0, 1], got " + std::to_string(a));
  }
}

// Ellipse membership shared by render and measure so that aperture 0 and 1 are exact.
bool in_outer(double x, double y, const PixelPoint& c, const MouthRadii& r) {
  return sq((x - c.x) / r.rx) + sq((y - c.y) / r.ry) <= 1.0;
}

bool in_inner(double x, double y, const PixelPoint& c, const MouthRadii& r, double aperture) {
  if (aperture <= 0.0) return false;
  return sq((x - c.x) / r.rx) + sq((y - c.y) / (aperture * r.ry)) <= 1.0;
}

}  // namespace

MouthBox FaceSpec::mouth_box() const {
  const PixelPoint c = mouth_center_in_frame();
  return {static_cast<int>(std::ceil(c.x - mouth_radii.rx)),
          static_cast<int>(std::floor(c.x + mouth_radii.rx)),
          static_cast<int>(std::ceil(c.y - mouth_radii.ry)),
          static_cast<int>(std::floor(c.y + mouth_radii.ry))};
}

void FaceSpec::validate() const {
  if (frame.height == 0 || frame.width == 0) throw GeometryError("frame size must be positive");
  if (!(mouth_radii.rx > 0.0 && mouth_radii.ry > 0.0)) {
    throw GeometryError("mouth radii must be positive");
  }
  if (pose_max < 0 || std::abs(pose.dx) > pose_max || std::abs(pose.dy) > pose_max) {
    throw GeometryError("pose (" + std::to_string(pose.dx) + ", " + std::to_string(pose.dy) +
                        ") exceeds pose_max " + std::to_string(pose_max));
  }
  const PixelPoint c = mouth_center_in_frame();
  const double w = static_cast<double>(frame.width) - 1.0;
  const double h = static_cast<double>(frame.height) - 1.0;
  if (c.x - mouth_radii.rx < 0.0 || c.x + mouth_radii.rx > w || c.y - mouth_radii.ry < 0.0 ||
      c.y + mouth_radii.ry > h) {
    throw GeometryError("mouth ellipse centred at (" + std::to_string(c.x) + ", " +
                        std::to_string(c.y) + ") leaves the " + std::to_string(frame.height) +
                        "x" + std::to_string(frame.width) + " frame");
  }
}

Grid2D identity_texture(std::uint64_t identity_seed, FrameSize frame) {
  const std::size_t H = frame.height, W = frame.width;
  const int K = kTextureBand;
  const int nky = 2 * K + 1;
  RngStream rng(identity_seed, kTextureStream);

  // Half-plane of Fourier modes (kx > 0, or kx == 0 and ky > 0), no DC term.
  // coef[kx][ky] = (a, b) for a*cos(theta) + b*sin(theta).
  std::vector<std::array<double, 2>> coef(static_cast<std::size_t>((K + 1) * nky), {0.0, 0.0});
  for (int kx = 0; kx <= K; ++kx) {
    for (int ky = -K; ky <= K; ++ky) {
      if (kx == 0 && ky <= 0) continue;
      auto& c = coef[static_cast<std::size_t>(kx * nky + (ky + K))];
      c[0] = rng.gaussian();
      c[1] = rng.gaussian();
    }
  }

  // theta = 2pi(kx x / W + ky y / H); separate into x- and y-factors:
  // a cos + b sin = cy * (a cx + b sx) + sy * (b cx - a sx).
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<double> P(static_cast<std::size_t>(nky) * W, 0.0), Q(P.size(), 0.0);
  for (int ky = -K; ky <= K; ++ky) {
    for (std::size_t x = 0; x < W; ++x) {
      double p = 0.0, q = 0.0;
      for (int kx = 0; kx <= K; ++kx) {
        const auto& c = coef[static_cast<std::size_t>(kx * nky + (ky + K))];
        const double ang = two_pi * kx * static_cast<double>(x) / static_cast<double>(W);
        const double cx = std::cos(ang), sx = std::sin(ang);
        p += c[0] * cx + c[1] * sx;
        q += c[1] * cx - c[0] * sx;
      }
      P[static_cast<std::size_t>(ky + K) * W + x] = p;
      Q[static_cast<std::size_t>(ky + K) * W + x] = q;
    }
  }

  Grid2D tex(H, W);
  for (std::size_t y = 0; y < H; ++y) {
    for (int ky = -K; ky <= K; ++ky) {
      const double ang = two_pi * ky * static_cast<double>(y) / static_cast<double>(H);
      const double cy = std::cos(ang), sy = std::sin(ang);
      const std::size_t row = static_cast<std::size_t>(ky + K) * W;
      for (std::size_t x = 0; x < W; ++x) tex(y, x) += cy * P[row + x] + sy * Q[row + x];
    }
  }

  const double m = mean(tex);
  const double sd = std::sqrt(variance(tex));
  for (double& v : tex.values()) v = (v - m) * (sd > 0.0 ? kTextureStd / sd : 0.0);
  return tex;
}

FaceRenderer::FaceRenderer(const FaceSpec& spec) : spec_(spec) {
  spec_.validate();
  const std::size_t H = spec.frame.height, W = spec.frame.width;
  const Grid2D tex = identity_texture(spec.identity_seed, spec.frame);
  base_ = Grid2D(H, W);
  // The face (texture and mouth) translates rigidly with the pose; the texture wraps.
  const auto wrap = [](long v, std::size_t n) {
    const long m = static_cast<long>(n);
    return static_cast<std::size_t>(((v % m) + m) % m);
  };
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const std::size_t sy = wrap(static_cast<long>(y) - spec.pose.dy, H);
      const std::size_t sx = wrap(static_cast<long>(x) - spec.pose.dx, W);
      base_(y, x) = std::clamp(kSkinMean + tex(sy, sx), 0.0, 1.0);
    }
  }
}

Grid2D FaceRenderer::render(double aperture) const {
  require_aperture(aperture);
  Grid2D frame = base_;
  const PixelPoint c = spec_.mouth_center_in_frame();
  const MouthBox box = spec_.mouth_box();
  for (int y = std::max(box.y0, 0); y <= box.y1; ++y) {
    for (int x = std::max(box.x0, 0); x <= box.x1; ++x) {
      const double px = x, py = y;
      if (!in_outer(px, py, c, spec_.mouth_radii)) continue;
      frame(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
          in_inner(px, py, c, spec_.mouth_radii, aperture) ? kOpenValue : kLipValue;
    }
  }
  return frame;
}

Grid2D render_face(const FaceSpec& spec, double aperture) {
  return FaceRenderer(spec).render(aperture);
}

double measure_aperture(const Grid2D& frame, const FaceSpec& spec) {
  if (frame.height() != spec.frame.height || frame.width() != spec.frame.width) {
    throw ShapeError("measure_aperture: frame is " + std::to_string(frame.height()) + "x" +
                     std::to_string(frame.width()) + ", spec expects " +
                     std::to_string(spec.frame.height) + "x" + std::to_string(spec.frame.width));
  }
  const PixelPoint c = spec.mouth_center_in_frame();
  const MouthBox box = spec.mouth_box();
  std::size_t area = 0, dark = 0;
  for (int y = std::max(box.y0, 0); y <= std::min<int>(box.y1, int(frame.height()) - 1); ++y) {
    for (int x = std::max(box.x0, 0); x <= std::min<int>(box.x1, int(frame.width()) - 1); ++x) {
      if (!in_outer(x, y, c, spec.mouth_radii)) continue;
      ++area;
      if (frame(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) < kOpenThreshold) ++dark;
    }
  }
  if (area == 0) return 0.0;
  return std::clamp(static_cast<double>(dark) / static_cast<double>(area), 0.0, 1.0);
}

void AudioTrack::validate() const {
  const std::size_t d = dim();
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != d) {
      throw ContractError("audio frame " + std::to_string(i) + " has " +
                          std::to_string(features[i].size()) + " features, expected " +
                          std::to_string(d));
    }
    for (double v : features[i]) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ContractError("audio frame " + std::to_string(i) + " has a value outside [0, 1]");
      }
    }
  }
}

std::string_view to_string(PoolTag tag) {
  return tag == PoolTag::kPseudoPaired ? "pseudo_paired" : "arbitrary";
}

PoolTag parse_pool_tag(std::string_view text) {
  if (text == "pseudo_paired") return PoolTag::kPseudoPaired;
  if (text == "arbitrary") return PoolTag::kArbitrary;
  throw ConfigError("unknown pool tag '" + std::string(text) + "'");
}

FaceSpec sample_face_spec(RngStream& rng, const FacegenConfig& cfg) {
  FaceSpec spec;
  spec.identity_seed = rng.next_u64();
  spec.pose = {static_cast<int>(rng.uniform_int(-cfg.pose_max, cfg.pose_max)),
               static_cast<int>(rng.uniform_int(-cfg.pose_max, cfg.pose_max))};
  spec.mouth_center = cfg.mouth_center;
  spec.mouth_radii = cfg.mouth_radii;
  spec.frame = cfg.frame;
  spec.pose_max = cfg.pose_max;
  spec.validate();
  return spec;
}

std::vector<double> sample_aperture_trajectory(RngStream& rng, std::size_t length) {
  const double w1 = rng.uniform(0.8, 1.4), p1 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double w2 = rng.uniform(1.3, 2.2), p2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<double> a(length);
  for (std::size_t t = 0; t < length; ++t) {
    const double tt = static_cast<double>(t);
    a[t] = 0.5 + 0.3 * std::sin(w1 * tt + p1) + 0.1 * std::sin(w2 * tt + p2);
  }
  return a;
}

AudioTrack make_audio_track(const std::vector<double>& apertures, RngStream& rng,
                            double noise_std) {
  AudioTrack track;
  track.features.reserve(apertures.size());
  for (double a : apertures) {
    track.features.push_back({std::clamp(a + noise_std * rng.gaussian(), 0.0, 1.0)});
  }
  return track;
}

ClipPair sample_clip_pair(PoolTag pool, RngStream& rng, std::size_t clip_len,
                          const FacegenConfig& cfg) {
  if (clip_len == 0) throw ContractError("sample_clip_pair: clip_len must be at least 1");
  ClipPair pair;
  pair.pool = pool;
  pair.target_spec = sample_face_spec(rng, cfg);
  if (pool == PoolTag::kPseudoPaired) {
    pair.cond_spec = pair.target_spec;
  } else {
    do {
      pair.cond_spec = sample_face_spec(rng, cfg);
    } while (pair.cond_spec.pose == pair.target_spec.pose);
  }
  pair.ground_truth_apertures = sample_aperture_trajectory(rng, clip_len);
  pair.cond_apertures = sample_aperture_trajectory(rng, clip_len);
  pair.target_audio = make_audio_track(pair.ground_truth_apertures, rng, cfg.audio_noise_std);

  const FaceRenderer target(pair.target_spec);
  const FaceRenderer cond(pair.cond_spec);
  for (std::size_t t = 0; t < clip_len; ++t) {
    pair.target_clip.push_back(target.render(pair.ground_truth_apertures[t]));
    pair.cond_clip.push_back(cond.render(pair.cond_apertures[t]));
  }
  return pair;
}

}  // namespace flowsync
