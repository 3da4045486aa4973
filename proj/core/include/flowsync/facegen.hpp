#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "flowsync/grid.hpp"
#include "flowsync/rng.hpp"

namespace flowsync {

// Synthetic talking-face domain: a seeded, band-limited identity texture with an
// axis-aligned elliptical mouth whose open fraction is the single "landmark".

inline constexpr double kSkinMean = 0.5;
inline constexpr double kTextureStd = 0.1;
inline constexpr int kTextureBand = 8;  ///< max |k| per axis of the Fourier modes
inline constexpr double kLipValue = 0.85;
inline constexpr double kOpenValue = 0.1;
/// Pixels darker than this inside the mouth ellipse count as open.
inline constexpr double kOpenThreshold = 0.5 * (kLipValue + kOpenValue);

struct Pose {
  int dx = 0;
  int dy = 0;
  friend bool operator==(const Pose&, const Pose&) = default;
};

struct PixelPoint {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

struct MouthRadii {
  double rx = 6.0;
  double ry = 4.0;
  friend bool operator==(const MouthRadii&, const MouthRadii&) = default;
};

struct FrameSize {
  std::size_t height = 32;
  std::size_t width = 32;
  friend bool operator==(const FrameSize&, const FrameSize&) = default;
};

/// Inclusive pixel bounding box of the mouth ellipse in frame coordinates.
struct MouthBox {
  int x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  bool contains(std::size_t y, std::size_t x) const {
    const int xi = static_cast<int>(x), yi = static_cast<int>(y);
    return xi >= x0 && xi <= x1 && yi >= y0 && yi <= y1;
  }
};

struct FaceSpec {
  std::uint64_t identity_seed = 0;
  Pose pose;
  PixelPoint mouth_center{16.0, 22.0};  ///< pose-relative
  MouthRadii mouth_radii;
  FrameSize frame;
  int pose_max = 4;

  PixelPoint mouth_center_in_frame() const {
    return {mouth_center.x + pose.dx, mouth_center.y + pose.dy};
  }
  MouthBox mouth_box() const;
  /// Throws GeometryError if the pose exceeds pose_max or the shifted ellipse
  /// leaves the frame.
  void validate() const;

  friend bool operator==(const FaceSpec&, const FaceSpec&) = default;
};

/// Zero-mean identity texture (unshifted) with standard deviation kTextureStd.
Grid2D identity_texture(std::uint64_t identity_seed, FrameSize frame);

/// Renders frames for one FaceSpec; the posed texture is computed once.
class FaceRenderer {
 public:
  explicit FaceRenderer(const FaceSpec& spec);
  /// Throws ContractError unless aperture is in [0, 1].
  Grid2D render(double aperture) const;
  const FaceSpec& spec() const noexcept { return spec_; }

 private:
  FaceSpec spec_;
  Grid2D base_;
};

Grid2D render_face(const FaceSpec& spec, double aperture);

/// Open fraction: dark pixels inside the mouth ellipse over the ellipse pixel count.
double measure_aperture(const Grid2D& frame, const FaceSpec& spec);

/// One feature vector per frame; toy default is a single aperture-drive value.
struct AudioTrack {
  std::vector<std::vector<double>> features;
  double fps = 25.0;

  std::size_t size() const noexcept { return features.size(); }
  std::size_t dim() const noexcept { return features.empty() ? 0 : features.front().size(); }
  /// Throws ContractError on ragged features or values outside [0, 1].
  void validate() const;
};

enum class PoolTag { kPseudoPaired, kArbitrary };

std::string_view to_string(PoolTag tag);
PoolTag parse_pool_tag(std::string_view text);

struct ClipPair {
  FaceSpec cond_spec;
  FaceSpec target_spec;
  FrameSequence cond_clip;    ///< V_cd
  FrameSequence target_clip;  ///< V_ab
  AudioTrack target_audio;    ///< A_ab
  PoolTag pool = PoolTag::kArbitrary;
  std::vector<double> cond_apertures;
  std::vector<double> ground_truth_apertures;
};

struct FacegenConfig {
  FrameSize frame;
  int pose_max = 4;
  PixelPoint mouth_center{16.0, 22.0};
  MouthRadii mouth_radii;
  double audio_noise_std = 0.02;
};

/// Random identity and pose drawn from the generator's ranges.
FaceSpec sample_face_spec(RngStream& rng, const FacegenConfig& cfg);

/// Smooth aperture trajectory in [0.1, 0.9]: two sinusoids with random rates and phases.
std::vector<double> sample_aperture_trajectory(RngStream& rng, std::size_t length);

/// Audio features = apertures plus Gaussian noise (std `noise_std`), clamped to [0, 1].
AudioTrack make_audio_track(const std::vector<double>& apertures, RngStream& rng,
                            double noise_std);

/// Pseudo-paired pairs share identity and pose and differ only in aperture.
/// Arbitrary pairs draw independent specs; the cond pose is redrawn until it
/// differs from the target pose.
ClipPair sample_clip_pair(PoolTag pool, RngStream& rng, std::size_t clip_len,
                          const FacegenConfig& cfg);

}  // namespace flowsync
