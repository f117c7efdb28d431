#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "spais/rng.hpp"

namespace spais {

/// Fully connected network with tanh hidden layers and a linear output.
///
/// Parameters live in one flat vector; layer l stores its weight matrix
/// input-major (W[i * n_out + o]) followed by its bias.
class Mlp {
 public:
  /// Activations of every layer from a forward pass; reused across calls.
  struct Cache {
    std::vector<std::vector<double>> activations;
  };

  Mlp() = default;
  explicit Mlp(std::vector<std::size_t> layer_sizes);
  Mlp(std::vector<std::size_t> layer_sizes, std::vector<double> parameters);

  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  std::size_t parameter_count() const { return params_.size(); }
  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  /// Glorot-uniform weights, zero biases; the output layer is scaled by
  /// `output_scale`.
  void initialize(Rng& rng, double output_scale = 1.0);

  /// Output-layer bias (size output_dim()).
  std::span<double> output_bias();

  void forward(std::span<const double> input, Cache& cache) const;
  std::vector<double> forward(std::span<const double> input) const;

  /// Accumulates d(loss)/d(params) into `param_grad` given d(loss)/d(output)
  /// and the cache of the matching forward pass.
  void backward(const Cache& cache, std::span<const double> output_grad,
                std::span<double> param_grad) const;

  static std::size_t count_parameters(std::span<const std::size_t> layer_sizes);

 private:
  std::vector<std::size_t> sizes_;
  std::vector<double> params_;
};

}  // namespace spais
