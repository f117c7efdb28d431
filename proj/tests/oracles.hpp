#pragma once

// Reference computations written independently of the library, in long
// double where precision matters. Tests compare library output against these.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "spais/proposal.hpp"

namespace oracle {

inline long double normal_tail(long double z) { return 0.5L * std::erfc(z / std::numbers::sqrt2_v<long double>); }

inline long double log_normal_pdf(long double x, long double mean, long double stddev) {
  const long double z = (x - mean) / stddev;
  return -0.5L * z * z - std::log(stddev) - 0.5L * std::log(2.0L * std::numbers::pi_v<long double>);
}

inline long double logistic(long double z) { return 1.0L / (1.0L + std::exp(-z)); }

/// Plain triple-loop MLP: tanh hidden, linear output. `params` may be a
/// perturbed copy; layout is weights (input-major) then bias per layer.
inline std::vector<long double> mlp_forward(const std::vector<std::size_t>& sizes,
                                            std::span<const long double> params,
                                            std::span<const long double> input) {
  std::vector<long double> a(input.begin(), input.end());
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t n_in = sizes[l];
    const std::size_t n_out = sizes[l + 1];
    std::vector<long double> z(n_out, 0.0L);
    for (std::size_t o = 0; o < n_out; ++o) {
      long double acc = params[offset + n_in * n_out + o];
      for (std::size_t i = 0; i < n_in; ++i) acc += params[offset + i * n_out + o] * a[i];
      z[o] = acc;
    }
    offset += n_in * n_out + n_out;
    if (l + 2 < sizes.size()) {
      for (auto& v : z) v = std::tanh(v);
    }
    a = std::move(z);
  }
  return a;
}

/// Flattened [mean_net | logstd_net] parameters in long double.
inline std::vector<long double> flatten(const spais::GaussianProposalParams& p) {
  std::vector<long double> out;
  for (double v : p.mean_net.parameters()) out.push_back(v);
  for (double v : p.logstd_net.parameters()) out.push_back(v);
  return out;
}

struct Sample {
  std::vector<double> state;
  std::vector<double> x;
};

/// sum_i -log q(x_i | s_i) / normalizer with q evaluated from `flat`.
inline long double proposal_loss(const spais::GaussianProposalParams& shape,
                                 std::span<const long double> flat, const std::vector<Sample>& batch,
                                 long double normalizer) {
  const std::size_t n_mean = shape.mean_net.parameter_count();
  const auto mean_params = flat.subspan(0, n_mean);
  const auto logstd_params = flat.subspan(n_mean);
  long double total = 0.0L;
  for (const auto& s : batch) {
    std::vector<long double> in(s.state.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
      in[i] = (static_cast<long double>(s.state[i]) - shape.state_mean[i]) / shape.state_std[i];
    }
    const auto mean = mlp_forward(shape.mean_net.layer_sizes(), mean_params, in);
    const auto raw = mlp_forward(shape.logstd_net.layer_sizes(), logstd_params, in);
    for (std::size_t d = 0; d < s.x.size(); ++d) {
      const long double logstd = std::max<long double>(raw[d], shape.logstd_floor[d]);
      total -= log_normal_pdf(s.x[d], mean[d], std::exp(logstd));
    }
  }
  return total / normalizer;
}

/// Composite Simpson integral of g over [a, b] with n (even) panels.
inline long double simpson(const std::function<long double(long double)>& g, long double a, long double b,
                           std::size_t n) {
  const long double h = (b - a) / static_cast<long double>(n);
  long double s = g(a) + g(b);
  for (std::size_t i = 1; i < n; ++i) s += (i % 2 ? 4.0L : 2.0L) * g(a + h * static_cast<long double>(i));
  return s * h / 3.0L;
}

/// Bin masses of p~(x) ∝ N(x; 0, sd^2) sigma((x - gamma)/beta) on [lo, hi],
/// normalized over the real line. Mass outside [lo, hi] is dropped.
inline std::vector<long double> toy_smoothed_target_bins(long double gamma, long double beta, long double sd,
                                                         long double lo, long double hi, std::size_t bins) {
  auto density = [&](long double x) {
    return std::exp(log_normal_pdf(x, 0.0L, sd)) * logistic((x - gamma) / beta);
  };
  const long double z = simpson(density, -12.0L * sd, 12.0L * sd, 400000);
  std::vector<long double> mass(bins);
  const long double width = (hi - lo) / static_cast<long double>(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    const long double a = lo + width * static_cast<long double>(b);
    mass[b] = simpson(density, a, a + width, 2000) / z;
  }
  return mass;
}

}  // namespace oracle
