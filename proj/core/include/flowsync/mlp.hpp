#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "flowsync/rng.hpp"

namespace flowsync {

/// Fully connected network: tanh on hidden layers, identity on the output layer.
/// Layer i maps size[i] -> size[i+1] with a (size[i+1] x size[i]) weight matrix.
struct MlpParams {
  std::vector<std::size_t> layer_sizes;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  /// All-zero parameters with the given shape. Throws ConfigError on fewer than
  /// two sizes or a zero size.
  static MlpParams zeros(std::vector<std::size_t> sizes);

  std::size_t num_layers() const noexcept { return weights.size(); }
  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t output_size() const { return layer_sizes.back(); }
  /// Sum over layers of size[i+1] * (size[i] + 1).
  std::size_t parameter_count() const;

  /// Flat parameter vector: per layer, weights row-major followed by biases.
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> flat);

  /// Elementwise `this += scale * other`; shapes must match.
  void add_scaled(const MlpParams& other, double scale);
  void set_zero();
  bool same_shape(const MlpParams& other) const;
};

/// Gradients share the parameter layout.
using MlpGrads = MlpParams;

/// Glorot-uniform weights, zero biases. When `zero_output_layer` is set the last
/// layer starts at zero so the initial prediction is exactly zero.
MlpParams init_mlp(std::vector<std::size_t> sizes, RngStream& rng, bool zero_output_layer);

/// Single-vector forward pass. Throws ShapeError on an input-length mismatch and
/// NumericError if the output is not finite.
Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& input);

/// Activations kept from a batched forward pass (one column per example).
struct MlpTape {
  std::vector<Eigen::MatrixXd> activations;  ///< [0] = input, back() = output
  const Eigen::MatrixXd& output() const { return activations.back(); }
};

MlpTape mlp_forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs);

/// Rows of the input whose gradient is wanted from mlp_backward_batch.
struct InputRows {
  std::size_t begin = 0;
  std::size_t count = 0;
};

/// Reverse-mode pass for a batch. Overwrites `grads` with the gradient of
/// sum_b <output_grad[:, b], output[:, b]> with respect to every parameter. If
/// `input_grad` is non-null it receives the gradient for `rows` of the input.
void mlp_backward_batch(const MlpParams& params, const MlpTape& tape,
                        const Eigen::MatrixXd& output_grad, MlpGrads& grads,
                        Eigen::MatrixXd* input_grad = nullptr, InputRows rows = {});

struct MlpBackwardResult {
  MlpGrads param_grads;
  Eigen::VectorXd input_grad;
};

/// Single-vector reverse-mode pass (exact gradient of <output_grad, f(input)>).
MlpBackwardResult mlp_backward(const MlpParams& params, const Eigen::VectorXd& input,
                               const Eigen::VectorXd& output_grad);

}  // namespace flowsync
