#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "flowsync/facegen.hpp"
#include "flowsync/grid.hpp"
#include "flowsync/mlp.hpp"

namespace flowsync {

/// Conditioning for one target frame. Views only; the caller owns the data.
struct ConditionBundle {
  std::span<const Grid2D> cond_frames;                 ///< one or more source frames
  std::optional<std::span<const double>> audio;        ///< absent = unconditional branch
  double tau = 0.0;
};

class VelocityModel {
 public:
  virtual ~VelocityModel() = default;
  /// Velocity field with the shape of x. Throws ShapeError on layout mismatch.
  virtual Grid2D predict(const Grid2D& x, const ConditionBundle& cond) const = 0;
};

inline constexpr std::size_t kTimeEmbeddingDim = 8;

/// sin/cos(k * pi * tau) for k = 1, 2, 4, 8.
std::array<double, kTimeEmbeddingDim> time_embedding(double tau);

struct ModelShape {
  FrameSize frame;
  std::size_t audio_dim = 1;
  std::vector<std::size_t> hidden{1024};
};

/// MLP velocity predictor over the concatenated input
///   [x_tau (H*W) | cond frame (H*W, mean if several) | audio or null token | tau embedding (8)].
class LearnedVelocityModel final : public VelocityModel {
 public:
  LearnedVelocityModel() = default;
  /// Takes the network and null token as-is; checks that the layout is consistent.
  LearnedVelocityModel(MlpParams mlp, Eigen::VectorXd null_token, FrameSize frame,
                       std::size_t audio_dim);

  /// Glorot hidden layers, zero output layer (initial velocity is exactly zero),
  /// null token initialised to -1 (outside the valid audio range).
  static LearnedVelocityModel initialise(const ModelShape& shape, RngStream& rng);

  Grid2D predict(const Grid2D& x, const ConditionBundle& cond) const override;

  /// Writes the network input for (x, cond) into `out` (length input_size()).
  void build_input(const Grid2D& x, const ConditionBundle& cond, Eigen::Ref<Eigen::VectorXd> out) const;

  std::size_t pixels() const noexcept { return frame_.height * frame_.width; }
  std::size_t audio_dim() const noexcept { return audio_dim_; }
  std::size_t input_size() const noexcept { return 2 * pixels() + audio_dim_ + kTimeEmbeddingDim; }
  std::size_t audio_offset() const noexcept { return 2 * pixels(); }
  FrameSize frame() const noexcept { return frame_; }

  const MlpParams& mlp() const noexcept { return mlp_; }
  MlpParams& mlp() noexcept { return mlp_; }
  const Eigen::VectorXd& null_token() const noexcept { return null_token_; }
  Eigen::VectorXd& null_token() noexcept { return null_token_; }

  /// Network parameters followed by the null token.
  std::size_t parameter_count() const { return mlp_.parameter_count() + audio_dim_; }
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> flat);

 private:
  MlpParams mlp_;
  Eigen::VectorXd null_token_;
  FrameSize frame_;
  std::size_t audio_dim_ = 0;
};

/// Closed-form E[eps - x_data | x_tau = x] for x_data ~ N(mu, sigma2 I), eps ~ N(0, I).
class GaussianOracleModel final : public VelocityModel {
 public:
  /// Throws ConfigError unless sigma2 > 0.
  GaussianOracleModel(Grid2D mu, double sigma2);

  Grid2D velocity(const Grid2D& x, double tau) const;
  /// Conditioning is ignored apart from tau.
  Grid2D predict(const Grid2D& x, const ConditionBundle& cond) const override {
    return velocity(x, cond.tau);
  }

  const Grid2D& mu() const noexcept { return mu_; }
  double sigma2() const noexcept { return sigma2_; }

 private:
  Grid2D mu_;
  double sigma2_;
};

Grid2D oracle_velocity(const GaussianOracleModel& model, const Grid2D& x, double tau);

/// Checkpoint file: one ASCII header line
///   FSYNC1 <n_params> <layer sizes, comma separated> <audio_dim> <frame_h> <frame_w>
/// followed by n_params little-endian float32 values (per layer: weights row-major,
/// then biases; the null token last).
void save_checkpoint(const std::filesystem::path& path, const LearnedVelocityModel& model);
LearnedVelocityModel load_checkpoint(const std::filesystem::path& path);

}  // namespace flowsync
