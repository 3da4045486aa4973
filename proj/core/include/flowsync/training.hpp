#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "flowsync/facegen.hpp"
#include "flowsync/velocity_model.hpp"

namespace flowsync {

/// How the training pool is chosen for each item.
///   timestep: pseudo-paired iff tau > threshold (the method);
///   single:   pool drawn independently of tau with P(pseudo) = 1 - threshold, so the
///             data mixture matches but the pairing with noise level is removed.
enum class PoolMode { kTimestep, kSingle };

std::string_view to_string(PoolMode mode);
PoolMode parse_pool_mode(std::string_view text);

struct TrainConfig {
  double tau_threshold = 0.85;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t n_steps = 2000;
  double audio_dropout_p = 0.1;
  std::uint64_t seed = 0;
  std::size_t ckpt_every = 500;
  PoolMode pool_mode = PoolMode::kTimestep;
  std::vector<std::size_t> hidden{1024};

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

PoolTag pick_pool(double tau, const TrainConfig& cfg);

/// One (cond frame, target frame, audio) triple from a pool.
struct TrainingExample {
  Grid2D target;
  Grid2D cond;
  std::vector<double> audio;
};

/// Supplies training examples for either pool. Implementations must be safe to
/// call concurrently with distinct RngStreams.
class ExampleSource {
 public:
  virtual ~ExampleSource() = default;
  virtual TrainingExample draw(PoolTag pool, RngStream& rng) const = 0;
  virtual FrameSize frame() const = 0;
  virtual std::size_t audio_dim() const = 0;
};

/// Fresh single-frame clip pairs from the face generator.
class SyntheticFaceSource final : public ExampleSource {
 public:
  explicit SyntheticFaceSource(FacegenConfig cfg) : cfg_(std::move(cfg)) {}
  TrainingExample draw(PoolTag pool, RngStream& rng) const override;
  FrameSize frame() const override { return cfg_.frame; }
  std::size_t audio_dim() const override { return 1; }

 private:
  FacegenConfig cfg_;
};

/// Random frames of stored clip pairs (as written by `flowsync gen-data`).
class DatasetSource final : public ExampleSource {
 public:
  /// Loads every clip pair below `dir` listed in its manifest. Throws IoError if
  /// either pool is empty.
  explicit DatasetSource(const std::filesystem::path& dir);
  TrainingExample draw(PoolTag pool, RngStream& rng) const override;
  FrameSize frame() const override { return frame_; }
  std::size_t audio_dim() const override { return audio_dim_; }

 private:
  struct Stored {
    FrameSequence cond, target;
    AudioTrack audio;
  };
  std::vector<Stored> pseudo_, arbitrary_;
  FrameSize frame_;
  std::size_t audio_dim_ = 1;
};

/// 1x1 toy problem: the pixel value is 0.1 + 0.8 * a where a is the audio drive;
/// the cond pixel is uninformative. Both pools are identical.
class ScalarToySource final : public ExampleSource {
 public:
  TrainingExample draw(PoolTag pool, RngStream& rng) const override;
  FrameSize frame() const override { return {1, 1}; }
  std::size_t audio_dim() const override { return 1; }
};

struct AdamState {
  std::vector<double> m, v;
  std::uint64_t t = 0;
};

struct LossRow {
  std::size_t step = 0;
  double tau_mean = 0.0;
  double frac_pseudo = 0.0;
  double frac_null = 0.0;
  double loss = 0.0;
};

struct TrainState {
  LearnedVelocityModel model;
  AdamState adam;
  std::size_t step = 0;
  std::vector<LossRow> log;
};

/// Fully assembled batch: network inputs (one column per item) and velocity targets.
struct Batch {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;
  std::vector<double> taus;
  std::vector<PoolTag> pools;
  std::vector<bool> dropped;  ///< audio replaced by the null token
};

/// Batch for training step `step`: item i draws from RngStream(seed, step, i), so the
/// batch is reproducible and independent of scheduling.
Batch assemble_batch(const LearnedVelocityModel& model, const ExampleSource& source,
                     const TrainConfig& cfg, std::size_t step);

/// Mean squared error over pixels and batch (no update).
double batch_loss(const LearnedVelocityModel& model, const Batch& batch);

/// One Adam step on the CFM loss. Returns the pre-update loss. Throws NumericError
/// (with batch diagnostics) if the loss is not finite.
double cfm_step(TrainState& state, const Batch& batch, const TrainConfig& cfg);

TrainState init_train_state(const TrainConfig& cfg, const ExampleSource& source);

struct TrainOutputs {
  std::filesystem::path checkpoint;  ///< also gets a `.state` sidecar for resume
  std::filesystem::path loss_log;    ///< CSV `step,tau_mean,pool_frac_pseudo,loss`
};

/// Runs cfg.n_steps steps from `state` (a fresh or resumed state), checkpointing every
/// cfg.ckpt_every steps and at the end. The checkpoint path is written before the first
/// step so an unwritable location fails fast with IoError.
void train(TrainState& state, const TrainConfig& cfg, const ExampleSource& source,
           const TrainOutputs& outputs,
           const std::function<void(const LossRow&)>& on_step = {});

/// Loss rows for steps [first_step, first_step + n_steps) without updating the model.
std::vector<LossRow> evaluate_losses(const LearnedVelocityModel& model, const TrainConfig& cfg,
                                     const ExampleSource& source, std::size_t first_step,
                                     std::size_t n_steps);

std::string loss_log_csv(const std::vector<LossRow>& rows);

/// Exact (64-bit) resume file: parameters, Adam moments, step counter and loss log.
void save_train_state(const std::filesystem::path& path, const TrainState& state);
/// `shape_from` supplies the layer layout (typically the matching checkpoint).
TrainState load_train_state(const std::filesystem::path& path, LearnedVelocityModel shape_from);

/// Mean of the first and last `window` losses.
struct SmoothedLoss {
  double initial = 0.0;
  double final = 0.0;
};
SmoothedLoss smoothed_loss(const std::vector<LossRow>& rows, std::size_t window = 50);

}  // namespace flowsync
