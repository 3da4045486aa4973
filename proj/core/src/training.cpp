#include "flowsync/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "flowsync/error.hpp"
#include "flowsync/flowcore.hpp"
#include "flowsync/io.hpp"
#include "flowsync/parallel.hpp"

namespace flowsync {
namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

// Training streams live in the upper half of the stream-id space so they never
// coincide with the per-frame sampling streams.
constexpr std::uint64_t kTrainStreamTag = 1ULL << 63;
constexpr std::size_t kMaxBatch = std::size_t{1} << 24;

// Parameter tensors in storage order: per layer weights (column-major) and biases,
// then the null token. Adam moments and the resume file use this order.
template <typename Model, typename Fn>
void for_each_tensor(Model& model, Fn&& fn) {
  auto& mlp = model.mlp();
  for (std::size_t l = 0; l < mlp.num_layers(); ++l) {
    fn(mlp.weights[l].data(), static_cast<std::size_t>(mlp.weights[l].size()));
    fn(mlp.biases[l].data(), static_cast<std::size_t>(mlp.biases[l].size()));
  }
  fn(model.null_token().data(), static_cast<std::size_t>(model.null_token().size()));
}

std::vector<double> storage_values(const LearnedVelocityModel& model) {
  std::vector<double> out;
  out.reserve(model.parameter_count());
  for_each_tensor(model, [&](const double* p, std::size_t n) { out.insert(out.end(), p, p + n); });
  return out;
}

void assign_storage_values(LearnedVelocityModel& model, const std::vector<double>& values) {
  std::size_t k = 0;
  for_each_tensor(model, [&](double* p, std::size_t n) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(k), n, p);
    k += n;
  });
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + b])) << (8 * b);
  pos += 8;
  return v;
}

}  // namespace

std::string_view to_string(PoolMode mode) {
  return mode == PoolMode::kTimestep ? "timestep" : "single";
}

PoolMode parse_pool_mode(std::string_view text) {
  if (text == "timestep") return PoolMode::kTimestep;
  if (text == "single") return PoolMode::kSingle;
  throw ConfigError("train.pool_mode must be timestep or single, got '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (!(tau_threshold > 0.0 && tau_threshold < 1.0)) {
    throw ConfigError("train.threshold must lie in (0, 1)");
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train.lr must be a finite value >= 0");
  }
  if (batch_size == 0 || batch_size >= kMaxBatch) throw ConfigError("train.batch must be in [1, 2^24)");
  if (!(audio_dropout_p >= 0.0 && audio_dropout_p < 1.0)) {
    throw ConfigError("train.dropout must lie in [0, 1)");
  }
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("model.hidden sizes must be positive");
  }
}

PoolTag pick_pool(double tau, const TrainConfig& cfg) {
  return tau > cfg.tau_threshold ? PoolTag::kPseudoPaired : PoolTag::kArbitrary;
}

TrainingExample SyntheticFaceSource::draw(PoolTag pool, RngStream& rng) const {
  ClipPair pair = sample_clip_pair(pool, rng, 1, cfg_);
  return {std::move(pair.target_clip[0]), std::move(pair.cond_clip[0]),
          std::move(pair.target_audio.features[0])};
}

DatasetSource::DatasetSource(const std::filesystem::path& dir) {
  const auto rows = read_manifest(dir);
  bool first = true;
  for (const auto& row : rows) {
    StoredPair p = read_clip_pair(dir / row.pair, row.pool);
    const FrameSize f{p.target.spec.frame.height, p.target.spec.frame.width};
    if (first) {
      frame_ = f;
      audio_dim_ = p.target.audio.dim();
      first = false;
    } else if (!(f == frame_) || p.target.audio.dim() != audio_dim_) {
      throw IoError(dir.string() + ": clip '" + row.pair + "' has a different frame or audio layout");
    }
    Stored s{std::move(p.cond.frames), std::move(p.target.frames), std::move(p.target.audio)};
    (row.pool == PoolTag::kPseudoPaired ? pseudo_ : arbitrary_).push_back(std::move(s));
  }
  if (pseudo_.empty() || arbitrary_.empty()) {
    throw IoError(dir.string() + ": dataset needs clips from both pools");
  }
}

TrainingExample DatasetSource::draw(PoolTag pool, RngStream& rng) const {
  const auto& list = pool == PoolTag::kPseudoPaired ? pseudo_ : arbitrary_;
  const Stored& s = list[rng.below(list.size())];
  const std::size_t t = rng.below(s.target.size());
  return {s.target[t], s.cond[t], s.audio.features[t]};
}

TrainingExample ScalarToySource::draw(PoolTag, RngStream& rng) const {
  const double a = rng.uniform();
  const double c = rng.uniform();
  return {Grid2D(1, 1, 0.1 + 0.8 * a), Grid2D(1, 1, c), {a}};
}

Batch assemble_batch(const LearnedVelocityModel& model, const ExampleSource& source,
                     const TrainConfig& cfg, std::size_t step) {
  const std::size_t B = cfg.batch_size;
  const std::size_t D = model.pixels();
  if (!(source.frame() == model.frame()) || source.audio_dim() != model.audio_dim()) {
    throw ShapeError("training data layout does not match the model");
  }
  Batch batch;
  batch.inputs.resize(static_cast<Eigen::Index>(model.input_size()), static_cast<Eigen::Index>(B));
  batch.targets.resize(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(B));
  batch.taus.assign(B, 0.0);
  batch.pools.assign(B, PoolTag::kArbitrary);
  std::vector<char> dropped(B, 0);

  parallel_for(B, [&](std::size_t i) {
    RngStream rng(cfg.seed, kTrainStreamTag | (static_cast<std::uint64_t>(step) << 24) | i);
    const double tau = rng.uniform();
    const PoolTag pool = cfg.pool_mode == PoolMode::kTimestep
                             ? pick_pool(tau, cfg)
                             : (rng.bernoulli(1.0 - cfg.tau_threshold) ? PoolTag::kPseudoPaired
                                                                       : PoolTag::kArbitrary);
    const bool drop = rng.bernoulli(cfg.audio_dropout_p);
    const TrainingExample ex = source.draw(pool, rng);
    const Noised n = fm_add(ex.target, tau, rng);
    const Grid2D v = velocity_target(ex.target, n.eps);

    ConditionBundle cond{std::span<const Grid2D>(&ex.cond, 1), std::nullopt, tau};
    if (!drop) cond.audio = std::span<const double>(ex.audio);
    model.build_input(n.noised, cond, batch.inputs.col(static_cast<Eigen::Index>(i)));
    for (std::size_t k = 0; k < D; ++k) {
      batch.targets(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = v[k];
    }
    batch.taus[i] = tau;
    batch.pools[i] = pool;
    dropped[i] = drop ? 1 : 0;
  });
  batch.dropped.assign(dropped.begin(), dropped.end());
  return batch;
}

double batch_loss(const LearnedVelocityModel& model, const Batch& batch) {
  const MlpTape tape = mlp_forward_batch(model.mlp(), batch.inputs);
  return (tape.output() - batch.targets).squaredNorm() / static_cast<double>(batch.targets.size());
}

TrainState init_train_state(const TrainConfig& cfg, const ExampleSource& source) {
  cfg.validate();
  RngStream rng(cfg.seed, kTrainStreamTag - 1);
  ModelShape shape{source.frame(), source.audio_dim(), cfg.hidden};
  TrainState state{LearnedVelocityModel::initialise(shape, rng), {}, 0, {}};
  state.adam.m.assign(state.model.parameter_count(), 0.0);
  state.adam.v.assign(state.model.parameter_count(), 0.0);
  return state;
}

double cfm_step(TrainState& state, const Batch& batch, const TrainConfig& cfg) {
  LearnedVelocityModel& model = state.model;
  const auto B = batch.inputs.cols();
  if (B == 0) throw ContractError("cfm_step: empty batch");
  const MlpTape tape = mlp_forward_batch(model.mlp(), batch.inputs);
  const Eigen::MatrixXd diff = tape.output() - batch.targets;
  const double loss = diff.squaredNorm() / static_cast<double>(diff.size());
  if (!std::isfinite(loss)) {
    double tmin = 1.0, tmax = 0.0;
    for (double t : batch.taus) tmin = std::min(tmin, t), tmax = std::max(tmax, t);
    throw NumericError("cfm_step: non-finite loss at step " + std::to_string(state.step) +
                       " (batch of " + std::to_string(B) + ", tau in [" + std::to_string(tmin) +
                       ", " + std::to_string(tmax) + "], max |target| " +
                       std::to_string(batch.targets.cwiseAbs().maxCoeff()) + ")");
  }

  const Eigen::MatrixXd out_grad = (2.0 / static_cast<double>(diff.size())) * diff;
  MlpGrads grads;
  Eigen::MatrixXd audio_grad;
  const bool any_dropped = std::any_of(batch.dropped.begin(), batch.dropped.end(), [](bool d) { return d; });
  mlp_backward_batch(model.mlp(), tape, out_grad, grads, any_dropped ? &audio_grad : nullptr,
                     InputRows{model.audio_offset(), model.audio_dim()});
  Eigen::VectorXd null_grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.audio_dim()));
  if (any_dropped) {
    for (Eigen::Index b = 0; b < B; ++b) {
      if (batch.dropped[static_cast<std::size_t>(b)]) null_grad += audio_grad.col(b);
    }
  }

  // Adam, tensor by tensor in storage order.
  AdamState& adam = state.adam;
  if (adam.m.size() != model.parameter_count()) {
    adam.m.assign(model.parameter_count(), 0.0);
    adam.v.assign(model.parameter_count(), 0.0);
  }
  ++adam.t;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam.t));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam.t));
  const double lr = cfg.learning_rate;
  std::size_t offset = 0;
  auto update = [&](double* p, const double* g, std::size_t n) {
    Eigen::Map<Eigen::ArrayXd> pa(p, static_cast<Eigen::Index>(n));
    Eigen::Map<const Eigen::ArrayXd> ga(g, static_cast<Eigen::Index>(n));
    Eigen::Map<Eigen::ArrayXd> m(adam.m.data() + offset, static_cast<Eigen::Index>(n));
    Eigen::Map<Eigen::ArrayXd> v(adam.v.data() + offset, static_cast<Eigen::Index>(n));
    m = kBeta1 * m + (1.0 - kBeta1) * ga;
    v = kBeta2 * v + (1.0 - kBeta2) * ga.square();
    if (lr != 0.0) pa -= lr * (m / c1) / ((v / c2).sqrt() + kAdamEps);
    offset += n;
  };
  auto& mlp = model.mlp();
  for (std::size_t l = 0; l < mlp.num_layers(); ++l) {
    update(mlp.weights[l].data(), grads.weights[l].data(), static_cast<std::size_t>(mlp.weights[l].size()));
    update(mlp.biases[l].data(), grads.biases[l].data(), static_cast<std::size_t>(mlp.biases[l].size()));
  }
  update(model.null_token().data(), null_grad.data(), static_cast<std::size_t>(null_grad.size()));
  return loss;
}

namespace {

LossRow make_row(std::size_t step, const Batch& batch, double loss) {
  LossRow row;
  row.step = step;
  const double n = static_cast<double>(batch.taus.size());
  for (std::size_t i = 0; i < batch.taus.size(); ++i) {
    row.tau_mean += batch.taus[i] / n;
    if (batch.pools[i] == PoolTag::kPseudoPaired) row.frac_pseudo += 1.0 / n;
    if (batch.dropped[i]) row.frac_null += 1.0 / n;
  }
  row.loss = loss;
  return row;
}

void write_outputs(const TrainState& state, const TrainOutputs& outputs) {
  save_checkpoint(outputs.checkpoint, state.model);
  save_train_state(std::filesystem::path(outputs.checkpoint.string() + ".state"), state);
  if (!outputs.loss_log.empty()) write_text_file(outputs.loss_log, loss_log_csv(state.log));
}

}  // namespace

void train(TrainState& state, const TrainConfig& cfg, const ExampleSource& source,
           const TrainOutputs& outputs, const std::function<void(const LossRow&)>& on_step) {
  cfg.validate();
  write_outputs(state, outputs);  // fail fast on unwritable paths
  for (std::size_t k = 0; k < cfg.n_steps; ++k) {
    const Batch batch = assemble_batch(state.model, source, cfg, state.step);
    const double loss = cfm_step(state, batch, cfg);
    state.log.push_back(make_row(state.step, batch, loss));
    ++state.step;
    if (on_step) on_step(state.log.back());
    if (cfg.ckpt_every != 0 && state.step % cfg.ckpt_every == 0 && k + 1 < cfg.n_steps) {
      write_outputs(state, outputs);
    }
  }
  write_outputs(state, outputs);
}

std::vector<LossRow> evaluate_losses(const LearnedVelocityModel& model, const TrainConfig& cfg,
                                     const ExampleSource& source, std::size_t first_step,
                                     std::size_t n_steps) {
  cfg.validate();
  std::vector<LossRow> rows;
  for (std::size_t s = first_step; s < first_step + n_steps; ++s) {
    const Batch batch = assemble_batch(model, source, cfg, s);
    rows.push_back(make_row(s, batch, batch_loss(model, batch)));
  }
  return rows;
}

std::string loss_log_csv(const std::vector<LossRow>& rows) {
  std::ostringstream out;
  out << "step,tau_mean,pool_frac_pseudo,loss\n";
  for (const auto& r : rows) {
    out << r.step << "," << format_double(r.tau_mean) << "," << format_double(r.frac_pseudo) << ","
        << format_double(r.loss) << "\n";
  }
  return out.str();
}

void save_train_state(const std::filesystem::path& path, const TrainState& state) {
  const std::vector<double> params = storage_values(state.model);
  std::ostringstream header;
  header << "FSYNCSTATE1 " << params.size() << " " << state.adam.t << " " << state.step << " "
         << state.log.size() << "\n";
  std::string data = header.str();
  data.reserve(data.size() + 8 * (3 * params.size() + 5 * state.log.size()));
  auto put = [&](double v) { put_u64(data, std::bit_cast<std::uint64_t>(v)); };
  for (double v : params) put(v);
  for (std::size_t i = 0; i < params.size(); ++i) put(i < state.adam.m.size() ? state.adam.m[i] : 0.0);
  for (std::size_t i = 0; i < params.size(); ++i) put(i < state.adam.v.size() ? state.adam.v[i] : 0.0);
  for (const auto& r : state.log) {
    put_u64(data, r.step);
    put(r.tau_mean);
    put(r.frac_pseudo);
    put(r.frac_null);
    put(r.loss);
  }
  write_text_file(path, data);
}

TrainState load_train_state(const std::filesystem::path& path, LearnedVelocityModel shape_from) {
  const std::string data = read_text_file(path);
  const auto nl = data.find('\n');
  std::istringstream header(nl == std::string::npos ? std::string() : data.substr(0, nl));
  std::string magic;
  std::size_t n = 0, step = 0, n_log = 0;
  std::uint64_t t = 0;
  if (!(header >> magic >> n >> t >> step >> n_log) || magic != "FSYNCSTATE1") {
    throw IoError(path.string() + ": malformed training-state header");
  }
  if (n != shape_from.parameter_count()) {
    throw IoError(path.string() + ": parameter count " + std::to_string(n) +
                  " does not match the checkpoint (" + std::to_string(shape_from.parameter_count()) + ")");
  }
  if (data.size() != nl + 1 + 8 * (3 * n + 5 * n_log)) {
    throw IoError(path.string() + ": truncated training state");
  }
  std::size_t pos = nl + 1;
  auto get = [&] { return std::bit_cast<double>(get_u64(data, pos)); };
  std::vector<double> params(n);
  for (auto& v : params) v = get();
  TrainState state{std::move(shape_from), {}, step, {}};
  assign_storage_values(state.model, params);
  state.adam.t = t;
  state.adam.m.resize(n);
  state.adam.v.resize(n);
  for (auto& v : state.adam.m) v = get();
  for (auto& v : state.adam.v) v = get();
  for (std::size_t i = 0; i < n_log; ++i) {
    LossRow r;
    r.step = get_u64(data, pos);
    r.tau_mean = get();
    r.frac_pseudo = get();
    r.frac_null = get();
    r.loss = get();
    state.log.push_back(r);
  }
  return state;
}

SmoothedLoss smoothed_loss(const std::vector<LossRow>& rows, std::size_t window) {
  if (rows.empty()) return {};
  const std::size_t w = std::max<std::size_t>(1, std::min(window, rows.size()));
  SmoothedLoss s;
  for (std::size_t i = 0; i < w; ++i) {
    s.initial += rows[i].loss / static_cast<double>(w);
    s.final += rows[rows.size() - w + i].loss / static_cast<double>(w);
  }
  return s;
}

}  // namespace flowsync
