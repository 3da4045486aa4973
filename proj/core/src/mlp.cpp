#include "flowsync/mlp.hpp"

#include <cmath>
#include <string>

#include "flowsync/error.hpp"

namespace flowsync {
namespace {

void check_finite(const Eigen::MatrixXd& m, const char* context) {
  if (!m.allFinite()) throw NumericError(std::string(context) + ": non-finite value");
}

}  // namespace

MlpParams MlpParams::zeros(std::vector<std::size_t> sizes) {
  if (sizes.size() < 2) throw ConfigError("MLP needs at least an input and an output size");
  for (std::size_t s : sizes) {
    if (s == 0) throw ConfigError("MLP layer sizes must be positive");
  }
  MlpParams p;
  p.layer_sizes = std::move(sizes);
  for (std::size_t i = 0; i + 1 < p.layer_sizes.size(); ++i) {
    const auto rows = static_cast<Eigen::Index>(p.layer_sizes[i + 1]);
    const auto cols = static_cast<Eigen::Index>(p.layer_sizes[i]);
    p.weights.push_back(Eigen::MatrixXd::Zero(rows, cols));
    p.biases.push_back(Eigen::VectorXd::Zero(rows));
  }
  return p;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    n += layer_sizes[i + 1] * (layer_sizes[i] + 1);
  }
  return n;
}

std::vector<double> MlpParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const Eigen::MatrixXd& w = weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    }
    for (Eigen::Index r = 0; r < biases[l].size(); ++r) flat.push_back(biases[l](r));
  }
  return flat;
}

void MlpParams::assign_flat(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw ShapeError("flat parameter length " + std::to_string(flat.size()) +
                     " != parameter count " + std::to_string(parameter_count()));
  }
  std::size_t k = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    Eigen::MatrixXd& w = weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[k++];
    }
    for (Eigen::Index r = 0; r < biases[l].size(); ++r) biases[l](r) = flat[k++];
  }
}

bool MlpParams::same_shape(const MlpParams& other) const {
  return layer_sizes == other.layer_sizes;
}

void MlpParams::add_scaled(const MlpParams& other, double scale) {
  if (!same_shape(other)) throw ShapeError("MlpParams::add_scaled: layer sizes differ");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += scale * other.weights[l];
    biases[l] += scale * other.biases[l];
  }
}

void MlpParams::set_zero() {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l].setZero();
    biases[l].setZero();
  }
}

MlpParams init_mlp(std::vector<std::size_t> sizes, RngStream& rng, bool zero_output_layer) {
  MlpParams p = MlpParams::zeros(std::move(sizes));
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    if (zero_output_layer && l + 1 == p.weights.size()) break;
    Eigen::MatrixXd& w = p.weights[l];
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
    }
  }
  return p;
}

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& input) {
  if (static_cast<std::size_t>(input.size()) != params.input_size()) {
    throw ShapeError("mlp_forward: input length " + std::to_string(input.size()) +
                     " != layer_sizes[0] " + std::to_string(params.input_size()));
  }
  Eigen::VectorXd a = input;
  const std::size_t n = params.num_layers();
  for (std::size_t l = 0; l < n; ++l) {
    Eigen::VectorXd z = params.biases[l];
    z.noalias() += params.weights[l] * a;
    if (l + 1 < n) {
      a = z.array().tanh().matrix();
    } else {
      a = std::move(z);
    }
  }
  check_finite(a, "mlp_forward");
  return a;
}

MlpTape mlp_forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs) {
  if (static_cast<std::size_t>(inputs.rows()) != params.input_size()) {
    throw ShapeError("mlp_forward_batch: input rows " + std::to_string(inputs.rows()) +
                     " != layer_sizes[0] " + std::to_string(params.input_size()));
  }
  MlpTape tape;
  tape.activations.reserve(params.num_layers() + 1);
  tape.activations.push_back(inputs);
  const std::size_t n = params.num_layers();
  for (std::size_t l = 0; l < n; ++l) {
    Eigen::MatrixXd z(params.weights[l].rows(), inputs.cols());
    z.noalias() = params.weights[l] * tape.activations.back();
    z.colwise() += params.biases[l];
    if (l + 1 < n) z = z.array().tanh().matrix();
    tape.activations.push_back(std::move(z));
  }
  check_finite(tape.output(), "mlp_forward_batch");
  return tape;
}

void mlp_backward_batch(const MlpParams& params, const MlpTape& tape,
                        const Eigen::MatrixXd& output_grad, MlpGrads& grads,
                        Eigen::MatrixXd* input_grad, InputRows rows) {
  const std::size_t n = params.num_layers();
  if (tape.activations.size() != n + 1) {
    throw ShapeError("mlp_backward_batch: tape does not match the network depth");
  }
  if (output_grad.rows() != tape.output().rows() || output_grad.cols() != tape.output().cols()) {
    throw ShapeError("mlp_backward_batch: output_grad shape does not match the output");
  }
  if (!grads.same_shape(params)) grads = MlpParams::zeros(params.layer_sizes);

  Eigen::MatrixXd delta = output_grad;  // dL/dz for the current layer
  for (std::size_t l = n; l-- > 0;) {
    const Eigen::MatrixXd& a_in = tape.activations[l];
    grads.weights[l].noalias() = delta * a_in.transpose();
    grads.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = params.weights[l].transpose() * delta;
      delta = (back.array() * (1.0 - a_in.array().square())).matrix();
    } else if (input_grad != nullptr) {
      const std::size_t count = rows.count == 0 ? params.input_size() - rows.begin : rows.count;
      if (rows.begin + count > params.input_size()) {
        throw ShapeError("mlp_backward_batch: requested input rows out of range");
      }
      input_grad->noalias() =
          params.weights[0]
              .middleCols(static_cast<Eigen::Index>(rows.begin), static_cast<Eigen::Index>(count))
              .transpose() *
          delta;
    }
  }
}

MlpBackwardResult mlp_backward(const MlpParams& params, const Eigen::VectorXd& input,
                               const Eigen::VectorXd& output_grad) {
  if (static_cast<std::size_t>(input.size()) != params.input_size()) {
    throw ShapeError("mlp_backward: input length " + std::to_string(input.size()) +
                     " != layer_sizes[0] " + std::to_string(params.input_size()));
  }
  if (static_cast<std::size_t>(output_grad.size()) != params.output_size()) {
    throw ShapeError("mlp_backward: output_grad length " + std::to_string(output_grad.size()) +
                     " != output size " + std::to_string(params.output_size()));
  }
  const MlpTape tape = mlp_forward_batch(params, input);
  MlpBackwardResult result{MlpParams::zeros(params.layer_sizes), {}};
  Eigen::MatrixXd dx;
  mlp_backward_batch(params, tape, output_grad, result.param_grads, &dx);
  result.input_grad = dx.col(0);
  return result;
}

}  // namespace flowsync
