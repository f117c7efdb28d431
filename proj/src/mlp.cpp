#include "spais/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spais {

std::size_t Mlp::count_parameters(std::span<const std::size_t> sizes) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l] * sizes[l + 1] + sizes[l + 1];
  return n;
}

Mlp::Mlp(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("an MLP needs at least input and output sizes");
  params_.assign(count_parameters(sizes_), 0.0);
}

Mlp::Mlp(std::vector<std::size_t> layer_sizes, std::vector<double> parameters)
    : sizes_(std::move(layer_sizes)), params_(std::move(parameters)) {
  if (sizes_.size() < 2) throw std::invalid_argument("an MLP needs at least input and output sizes");
  if (params_.size() != count_parameters(sizes_)) {
    throw std::invalid_argument("parameter vector does not match layer sizes");
  }
}

void Mlp::initialize(Rng& rng, double output_scale) {
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const std::size_t in = sizes_[l];
    const std::size_t out = sizes_[l + 1];
    const bool last = l + 2 == sizes_.size();
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out)) * (last ? output_scale : 1.0);
    for (std::size_t i = 0; i < in * out; ++i) params_[offset + i] = limit * (2.0 * rng.uniform() - 1.0);
    offset += in * out;
    for (std::size_t i = 0; i < out; ++i) params_[offset + i] = 0.0;
    offset += out;
  }
}

std::span<double> Mlp::output_bias() {
  return std::span<double>(params_).subspan(params_.size() - sizes_.back());
}

void Mlp::forward(std::span<const double> input, Cache& cache) const {
  if (input.size() != sizes_.front()) throw std::invalid_argument("MLP input dimension mismatch");
  cache.activations.resize(sizes_.size());
  cache.activations[0].assign(input.begin(), input.end());
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const std::size_t in = sizes_[l];
    const std::size_t out = sizes_[l + 1];
    const double* w = params_.data() + offset;
    const double* b = w + in * out;
    const auto& a = cache.activations[l];
    auto& z = cache.activations[l + 1];
    z.resize(out);
    const bool hidden = l + 2 < sizes_.size();
    std::copy(b, b + out, z.begin());
    for (std::size_t i = 0; i < in; ++i) {
      const double* col = w + i * out;
      const double ai = a[i];
      for (std::size_t o = 0; o < out; ++o) z[o] += col[o] * ai;
    }
    if (hidden) {
      for (auto& v : z) v = std::tanh(v);
    }
    offset += in * out + out;
  }
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
  Cache cache;
  forward(input, cache);
  return std::move(cache.activations.back());
}

void Mlp::backward(const Cache& cache, std::span<const double> output_grad,
                   std::span<double> param_grad) const {
  std::vector<double> delta(output_grad.begin(), output_grad.end());
  std::vector<double> prev;
  std::size_t offset = params_.size();
  for (std::size_t l = sizes_.size() - 1; l-- > 0;) {
    const std::size_t in = sizes_[l];
    const std::size_t out = sizes_[l + 1];
    offset -= in * out + out;
    const double* w = params_.data() + offset;
    double* gw = param_grad.data() + offset;
    double* gb = gw + in * out;
    const auto& a = cache.activations[l];
    for (std::size_t o = 0; o < out; ++o) gb[o] += delta[o];
    for (std::size_t i = 0; i < in; ++i) {
      double* gcol = gw + i * out;
      const double ai = a[i];
      for (std::size_t o = 0; o < out; ++o) gcol[o] += delta[o] * ai;
    }
    if (l == 0) break;
    prev.assign(in, 0.0);
    for (std::size_t i = 0; i < in; ++i) {
      const double* col = w + i * out;
      double acc = 0.0;
      for (std::size_t o = 0; o < out; ++o) acc += col[o] * delta[o];
      prev[i] = acc;
    }
    // a = tanh(z) on hidden layers, so dtanh = 1 - a^2.
    for (std::size_t i = 0; i < in; ++i) prev[i] *= 1.0 - a[i] * a[i];
    delta.swap(prev);
  }
}

}  // namespace spais
