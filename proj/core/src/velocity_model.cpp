#include "flowsync/velocity_model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "flowsync/error.hpp"
#include "flowsync/io.hpp"

namespace flowsync {
namespace {

std::string shape_text(FrameSize f) {
  return std::to_string(f.height) + "x" + std::to_string(f.width);
}

}  // namespace

std::array<double, kTimeEmbeddingDim> time_embedding(double tau) {
  std::array<double, kTimeEmbeddingDim> e{};
  double k = 1.0;
  for (std::size_t i = 0; i < kTimeEmbeddingDim / 2; ++i, k *= 2.0) {
    e[2 * i] = std::sin(k * std::numbers::pi * tau);
    e[2 * i + 1] = std::cos(k * std::numbers::pi * tau);
  }
  return e;
}

LearnedVelocityModel::LearnedVelocityModel(MlpParams mlp, Eigen::VectorXd null_token,
                                           FrameSize frame, std::size_t audio_dim)
    : mlp_(std::move(mlp)), null_token_(std::move(null_token)), frame_(frame), audio_dim_(audio_dim) {
  if (frame.height == 0 || frame.width == 0) throw ShapeError("model frame size must be positive");
  if (mlp_.layer_sizes.size() < 2 || mlp_.input_size() != input_size() ||
      mlp_.output_size() != pixels()) {
    throw ShapeError("network layout does not match a " + shape_text(frame) + " frame with " +
                     std::to_string(audio_dim) + " audio features");
  }
  if (static_cast<std::size_t>(null_token_.size()) != audio_dim) {
    throw ShapeError("null token length " + std::to_string(null_token_.size()) +
                     " != audio dim " + std::to_string(audio_dim));
  }
}

LearnedVelocityModel LearnedVelocityModel::initialise(const ModelShape& shape, RngStream& rng) {
  const std::size_t d = shape.frame.height * shape.frame.width;
  std::vector<std::size_t> sizes{2 * d + shape.audio_dim + kTimeEmbeddingDim};
  sizes.insert(sizes.end(), shape.hidden.begin(), shape.hidden.end());
  sizes.push_back(d);
  MlpParams mlp = init_mlp(sizes, rng, /*zero_output_layer=*/true);
  return LearnedVelocityModel(std::move(mlp),
                              Eigen::VectorXd::Constant(static_cast<Eigen::Index>(shape.audio_dim), -1.0),
                              shape.frame, shape.audio_dim);
}

void LearnedVelocityModel::build_input(const Grid2D& x, const ConditionBundle& cond,
                                       Eigen::Ref<Eigen::VectorXd> out) const {
  const std::size_t d = pixels();
  if (x.height() != frame_.height || x.width() != frame_.width) {
    throw ShapeError("x is " + std::to_string(x.height()) + "x" + std::to_string(x.width()) +
                     ", model expects " + shape_text(frame_));
  }
  if (cond.cond_frames.empty()) throw ContractError("at least one condition frame is required");
  if (static_cast<std::size_t>(out.size()) != input_size()) {
    throw ShapeError("input buffer has the wrong length");
  }
  for (std::size_t i = 0; i < d; ++i) out[static_cast<Eigen::Index>(i)] = x[i];

  const double inv = 1.0 / static_cast<double>(cond.cond_frames.size());
  for (std::size_t i = 0; i < d; ++i) out[static_cast<Eigen::Index>(d + i)] = 0.0;
  for (const Grid2D& c : cond.cond_frames) {
    if (!c.same_shape(x)) {
      throw ShapeError("condition frame is " + std::to_string(c.height()) + "x" +
                       std::to_string(c.width()) + ", model expects " + shape_text(frame_));
    }
    for (std::size_t i = 0; i < d; ++i) out[static_cast<Eigen::Index>(d + i)] += c[i];
  }
  if (cond.cond_frames.size() > 1) out.segment(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)) *= inv;

  const auto a0 = static_cast<Eigen::Index>(audio_offset());
  if (cond.audio) {
    if (cond.audio->size() != audio_dim_) {
      throw ShapeError("audio feature length " + std::to_string(cond.audio->size()) +
                       " != model audio dim " + std::to_string(audio_dim_));
    }
    for (std::size_t k = 0; k < audio_dim_; ++k) out[a0 + static_cast<Eigen::Index>(k)] = (*cond.audio)[k];
  } else {
    out.segment(a0, static_cast<Eigen::Index>(audio_dim_)) = null_token_;
  }
  const auto emb = time_embedding(cond.tau);
  const auto e0 = a0 + static_cast<Eigen::Index>(audio_dim_);
  for (std::size_t k = 0; k < kTimeEmbeddingDim; ++k) out[e0 + static_cast<Eigen::Index>(k)] = emb[k];
}

Grid2D LearnedVelocityModel::predict(const Grid2D& x, const ConditionBundle& cond) const {
  Eigen::VectorXd in(static_cast<Eigen::Index>(input_size()));
  build_input(x, cond, in);
  const Eigen::VectorXd v = mlp_forward(mlp_, in);
  return Grid2D(frame_.height, frame_.width, std::vector<double>(v.data(), v.data() + v.size()));
}

std::vector<double> LearnedVelocityModel::flatten() const {
  std::vector<double> flat = mlp_.flatten();
  flat.insert(flat.end(), null_token_.data(), null_token_.data() + null_token_.size());
  return flat;
}

void LearnedVelocityModel::assign_flat(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw ShapeError("flat parameter length " + std::to_string(flat.size()) +
                     " != model parameter count " + std::to_string(parameter_count()));
  }
  const std::size_t n = mlp_.parameter_count();
  mlp_.assign_flat(flat.first(n));
  for (std::size_t k = 0; k < audio_dim_; ++k) null_token_[static_cast<Eigen::Index>(k)] = flat[n + k];
}

GaussianOracleModel::GaussianOracleModel(Grid2D mu, double sigma2) : mu_(std::move(mu)), sigma2_(sigma2) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw ConfigError("oracle sigma2 must be positive, got " + std::to_string(sigma2));
  }
}

Grid2D GaussianOracleModel::velocity(const Grid2D& x, double tau) const {
  require_same_shape(x, mu_, "oracle_velocity");
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw ContractError("noise level must lie in [0, 1], got " + std::to_string(tau));
  }
  const double a = 1.0 - tau, b = tau;
  const double s = a * a * sigma2_ + b * b;
  const double gain = (b - a * sigma2_) / s;
  Grid2D v(x.height(), x.width());
  for (std::size_t i = 0; i < x.size(); ++i) v[i] = -mu_[i] + gain * (x[i] - a * mu_[i]);
  v.ensure_finite("oracle_velocity");
  return v;
}

Grid2D oracle_velocity(const GaussianOracleModel& model, const Grid2D& x, double tau) {
  return model.velocity(x, tau);
}

void save_checkpoint(const std::filesystem::path& path, const LearnedVelocityModel& model) {
  const std::vector<double> flat = model.flatten();
  std::ostringstream header;
  header << "FSYNC1 " << flat.size() << " ";
  const auto& sizes = model.mlp().layer_sizes;
  for (std::size_t i = 0; i < sizes.size(); ++i) header << (i ? "," : "") << sizes[i];
  header << " " << model.audio_dim() << " " << model.frame().height << " " << model.frame().width
         << "\n";
  std::string data = header.str();
  const std::size_t off = data.size();
  data.resize(off + 4 * flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(flat[i]));
    for (int b = 0; b < 4; ++b) data[off + 4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
  }
  write_text_file(path, data);
}

LearnedVelocityModel load_checkpoint(const std::filesystem::path& path) {
  const std::string data = read_text_file(path);
  const auto nl = data.find('\n');
  if (nl == std::string::npos) throw IoError(path.string() + ": missing checkpoint header");
  std::istringstream header(data.substr(0, nl));
  std::string magic, sizes_text;
  std::size_t n_params = 0, audio_dim = 0, h = 0, w = 0;
  if (!(header >> magic >> n_params >> sizes_text >> audio_dim >> h >> w) || magic != "FSYNC1") {
    throw IoError(path.string() + ": malformed checkpoint header");
  }
  std::vector<std::size_t> sizes;
  std::istringstream ss(sizes_text);
  for (std::string tok; std::getline(ss, tok, ',');) {
    try {
      sizes.push_back(std::stoul(tok));
    } catch (const std::exception&) {
      throw IoError(path.string() + ": bad layer size '" + tok + "'");
    }
  }
  if (data.size() != nl + 1 + 4 * n_params) {
    throw IoError(path.string() + ": expected " + std::to_string(n_params) + " float32 values");
  }
  MlpParams mlp = MlpParams::zeros(sizes);
  LearnedVelocityModel model(std::move(mlp), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(audio_dim)),
                             FrameSize{h, w}, audio_dim);
  if (model.parameter_count() != n_params) {
    throw IoError(path.string() + ": header parameter count does not match the layer sizes");
  }
  std::vector<double> flat(n_params);
  const std::size_t off = nl + 1;
  for (std::size_t i = 0; i < n_params; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[off + 4 * i + b])) << (8 * b);
    }
    flat[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  model.assign_flat(flat);
  return model;
}

}  // namespace flowsync
