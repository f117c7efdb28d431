#include "spais/proposal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "spais/parallel.hpp"

namespace spais {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr std::size_t kPairChunk = 256;

std::vector<std::size_t> net_shape(std::size_t in, std::size_t out) {
  return {in, kHiddenSizes[0], kHiddenSizes[1], out};
}

std::vector<double> normalize(const GaussianProposalParams& p, const State& s) {
  if (s.size() != p.state_mean.size()) throw std::invalid_argument("proposal state dimension mismatch");
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = (s[i] - p.state_mean[i]) / p.state_std[i];
  return out;
}

struct Workspace {
  Mlp::Cache mean_cache;
  Mlp::Cache logstd_cache;
  std::vector<double> d_mean;
  std::vector<double> d_logstd;
};

// Adds -log q(x|s) to `loss` and its gradient to `grad`.
void accumulate_pair(const GaussianProposalParams& p, const State& s, std::span<const double> x,
                     Workspace& ws, double& loss, ProposalGradient& grad) {
  const auto input = normalize(p, s);
  p.mean_net.forward(input, ws.mean_cache);
  p.logstd_net.forward(input, ws.logstd_cache);
  const auto& mean = ws.mean_cache.activations.back();
  const auto& raw = ws.logstd_cache.activations.back();
  const std::size_t dx = x.size();
  ws.d_mean.resize(dx);
  ws.d_logstd.resize(dx);
  for (std::size_t d = 0; d < dx; ++d) {
    const bool floored = raw[d] < p.logstd_floor[d];
    const double logstd = floored ? p.logstd_floor[d] : raw[d];
    const double inv_std = std::exp(-logstd);
    const double z = (x[d] - mean[d]) * inv_std;
    loss += kHalfLog2Pi + logstd + 0.5 * z * z;
    ws.d_mean[d] = -z * inv_std;
    ws.d_logstd[d] = floored ? 0.0 : 1.0 - z * z;
  }
  p.mean_net.backward(ws.mean_cache, ws.d_mean, grad.mean_net);
  p.logstd_net.backward(ws.logstd_cache, ws.d_logstd, grad.logstd_net);
}

}  // namespace

GaussianProposalParams GaussianProposalParams::create(std::size_t state_dim,
                                                      std::size_t disturbance_dim, Rng& rng) {
  GaussianProposalParams p;
  p.mean_net = Mlp(net_shape(state_dim, disturbance_dim));
  p.logstd_net = Mlp(net_shape(state_dim, disturbance_dim));
  p.mean_net.initialize(rng, 0.1);
  p.logstd_net.initialize(rng, 0.1);
  p.state_mean.assign(state_dim, 0.0);
  p.state_std.assign(state_dim, 1.0);
  p.logstd_floor.assign(disturbance_dim, std::log(1e-3));
  return p;
}

void GaussianProposalParams::validate() const {
  const std::size_t ds = state_mean.size();
  const std::size_t dx = logstd_floor.size();
  if (state_std.size() != ds) throw std::invalid_argument("state_std size mismatch");
  if (mean_net.layer_sizes().empty() || logstd_net.layer_sizes().empty()) {
    throw std::invalid_argument("proposal networks are empty");
  }
  if (mean_net.input_dim() != ds || logstd_net.input_dim() != ds) {
    throw std::invalid_argument("network input size does not match the state dimension");
  }
  if (mean_net.output_dim() != dx || logstd_net.output_dim() != dx) {
    throw std::invalid_argument("network output size does not match the disturbance dimension");
  }
  for (double v : state_std) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("state_std must be positive");
  }
  for (double v : logstd_floor) {
    if (!std::isfinite(v)) throw std::invalid_argument("logstd_floor must be finite");
  }
}

ProposalMoments proposal_moments(const GaussianProposalParams& p, const State& state) {
  thread_local Mlp::Cache mean_cache;
  thread_local Mlp::Cache logstd_cache;
  const auto input = normalize(p, state);
  p.mean_net.forward(input, mean_cache);
  p.logstd_net.forward(input, logstd_cache);
  ProposalMoments m;
  m.mean = mean_cache.activations.back();
  m.raw_logstd = logstd_cache.activations.back();
  m.logstd.resize(m.raw_logstd.size());
  for (std::size_t d = 0; d < m.logstd.size(); ++d) m.logstd[d] = std::max(m.raw_logstd[d], p.logstd_floor[d]);
  return m;
}

double proposal_log_prob(const GaussianProposalParams& p, const State& state, std::span<const double> x) {
  if (x.size() != p.disturbance_dim()) throw std::invalid_argument("proposal disturbance dimension mismatch");
  const auto m = proposal_moments(p, state);
  double total = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double z = (x[d] - m.mean[d]) * std::exp(-m.logstd[d]);
    total -= kHalfLog2Pi + m.logstd[d] + 0.5 * z * z;
  }
  return total;
}

std::vector<double> reparameterize(const GaussianProposalParams& p, const State& state,
                                   std::span<const double> eps) {
  const auto m = proposal_moments(p, state);
  if (eps.size() != m.mean.size()) throw std::invalid_argument("noise dimension mismatch");
  std::vector<double> x(m.mean.size());
  for (std::size_t d = 0; d < x.size(); ++d) x[d] = m.mean[d] + std::exp(m.logstd[d]) * eps[d];
  return x;
}

std::vector<double> proposal_sample(const GaussianProposalParams& p, const State& state, Rng& rng) {
  std::vector<double> eps(p.disturbance_dim());
  for (auto& e : eps) e = rng.normal();
  return reparameterize(p, state, eps);
}

std::vector<double> proposal_sample(const GaussianProposalParams& p, const State& state,
                                    std::uint64_t seed) {
  Rng rng(seed);
  return proposal_sample(p, state, rng);
}

GaussianProposal::GaussianProposal(GaussianProposalParams params) : params_(std::move(params)) {
  params_.validate();
}

Draw GaussianProposal::draw(const State& state, Rng& rng) const {
  const auto m = proposal_moments(params_, state);
  Draw out;
  out.x.resize(m.mean.size());
  out.log_prob = 0.0;
  for (std::size_t d = 0; d < m.mean.size(); ++d) {
    const double eps = rng.normal();
    out.x[d] = m.mean[d] + std::exp(m.logstd[d]) * eps;
    out.log_prob -= kHalfLog2Pi + m.logstd[d] + 0.5 * eps * eps;
  }
  return out;
}

double GaussianProposal::log_prob(const State& state, std::span<const double> x) const {
  return proposal_log_prob(params_, state, x);
}

ProposalGradient ProposalGradient::zeros_like(const GaussianProposalParams& p) {
  return {std::vector<double>(p.mean_net.parameter_count(), 0.0),
          std::vector<double>(p.logstd_net.parameter_count(), 0.0)};
}

double ProposalGradient::max_abs() const {
  double m = 0.0;
  for (double v : mean_net) m = std::max(m, std::abs(v));
  for (double v : logstd_net) m = std::max(m, std::abs(v));
  return m;
}

LossAndGradient pair_loss_and_gradient(const GaussianProposalParams& params,
                                       std::span<const StatePair> pairs, double normalizer,
                                       std::size_t threads) {
  if (!(normalizer > 0.0)) throw std::invalid_argument("loss normalizer must be positive");
  const std::size_t n_chunks = (pairs.size() + kPairChunk - 1) / kPairChunk;
  std::vector<LossAndGradient> partial(n_chunks);
  parallel_for(n_chunks, threads, [&](std::size_t c) {
    auto& out = partial[c];
    out.gradient = ProposalGradient::zeros_like(params);
    Workspace ws;
    const std::size_t end = std::min(pairs.size(), (c + 1) * kPairChunk);
    for (std::size_t i = c * kPairChunk; i < end; ++i) {
      accumulate_pair(params, *pairs[i].state, *pairs[i].disturbance, ws, out.loss, out.gradient);
    }
  });
  LossAndGradient total;
  total.gradient = ProposalGradient::zeros_like(params);
  for (const auto& part : partial) {
    total.loss += part.loss;
    for (std::size_t i = 0; i < part.gradient.mean_net.size(); ++i) total.gradient.mean_net[i] += part.gradient.mean_net[i];
    for (std::size_t i = 0; i < part.gradient.logstd_net.size(); ++i) total.gradient.logstd_net[i] += part.gradient.logstd_net[i];
  }
  const double scale = 1.0 / normalizer;
  total.loss *= scale;
  for (double& g : total.gradient.mean_net) g *= scale;
  for (double& g : total.gradient.logstd_net) g *= scale;
  return total;
}

LossAndGradient loss_and_gradient(const GaussianProposalParams& params,
                                  std::span<const Trajectory> trajectories, std::size_t threads) {
  if (trajectories.empty()) throw std::invalid_argument("loss needs at least one trajectory");
  std::vector<StatePair> pairs;
  for (const auto& traj : trajectories) {
    for (const auto& step : traj.steps) pairs.push_back({&step.state, &step.disturbance});
  }
  return pair_loss_and_gradient(params, pairs, static_cast<double>(trajectories.size()), threads);
}

void AdamOptimizer::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != grad.size()) throw std::invalid_argument("Adam gradient size mismatch");
  if (m_.empty()) {
    m_.assign(params.size(), 0.0);
    v_.assign(params.size(), 0.0);
  }
  if (m_.size() != params.size()) throw std::invalid_argument("Adam parameter count changed");
  ++t_;
  const auto& o = options_;
  const double correction1 = 1.0 - std::pow(o.beta1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(o.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = o.beta1 * m_[i] + (1.0 - o.beta1) * grad[i];
    v_[i] = o.beta2 * v_[i] + (1.0 - o.beta2) * grad[i] * grad[i];
    const double m_hat = m_[i] / correction1;
    const double v_hat = v_[i] / correction2;
    params[i] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
  }
}

void AdamOptimizer::step(GaussianProposalParams& params, const ProposalGradient& grad) {
  // One flat moment vector across both nets: mean_net first.
  std::vector<double> flat(params.mean_net.parameters().begin(), params.mean_net.parameters().end());
  flat.insert(flat.end(), params.logstd_net.parameters().begin(), params.logstd_net.parameters().end());
  std::vector<double> flat_grad(grad.mean_net);
  flat_grad.insert(flat_grad.end(), grad.logstd_net.begin(), grad.logstd_net.end());
  step(flat, flat_grad);
  const auto split = static_cast<std::ptrdiff_t>(params.mean_net.parameter_count());
  std::copy(flat.begin(), flat.begin() + split, params.mean_net.parameters().begin());
  std::copy(flat.begin() + split, flat.end(), params.logstd_net.parameters().begin());
}

PretrainResult pretrain_to_nominal(GaussianProposalParams initial, const Environment& env,
                                   const PretrainConfig& config, std::uint64_t seed) {
  if (config.n_rollouts == 0) throw std::invalid_argument("pretraining needs at least one rollout");
  if (initial.state_dim() != env.state_dim() || initial.disturbance_dim() != env.disturbance_dim()) {
    throw std::invalid_argument("proposal dimensions do not match the environment");
  }
  const NominalSampler nominal(env);
  std::vector<std::uint64_t> seeds(config.n_rollouts);
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = stream_seed(seed, Stream::kPretrain, 0, i);
  const auto trajectories = rollout_batch(env, nominal, seeds, config.threads);

  const std::size_t ds = env.state_dim();
  const std::size_t dx = env.disturbance_dim();
  const std::size_t n_holdout =
      config.n_rollouts > 1
          ? std::clamp<std::size_t>(static_cast<std::size_t>(config.holdout_fraction * config.n_rollouts), 1,
                                    config.n_rollouts - 1)
          : 0;
  const std::size_t n_train = config.n_rollouts - n_holdout;

  // State normalization from the visited training states.
  std::vector<double> sum(ds, 0.0), sum_sq(ds, 0.0), nominal_std(dx, 0.0), nominal_mean(dx, 0.0);
  std::size_t count = 0;
  for (std::size_t n = 0; n < n_train; ++n) {
    for (const auto& step : trajectories[n].steps) {
      for (std::size_t i = 0; i < ds; ++i) {
        sum[i] += step.state[i];
        sum_sq[i] += step.state[i] * step.state[i];
      }
      const auto d = env.nominal(step.state);
      for (std::size_t k = 0; k < dx; ++k) {
        nominal_mean[k] += d.mean[k];
        nominal_std[k] += d.stddev[k];
      }
      ++count;
    }
  }
  GaussianProposalParams params = std::move(initial);
  params.state_mean.resize(ds);
  params.state_std.resize(ds);
  for (std::size_t i = 0; i < ds; ++i) {
    const double mean = sum[i] / static_cast<double>(count);
    const double var = std::max(0.0, sum_sq[i] / static_cast<double>(count) - mean * mean);
    params.state_mean[i] = mean;
    params.state_std[i] = std::sqrt(var) > 1e-8 ? std::sqrt(var) : 1.0;
  }
  params.logstd_floor.resize(dx);
  auto mean_bias = params.mean_net.output_bias();
  auto logstd_bias = params.logstd_net.output_bias();
  for (std::size_t k = 0; k < dx; ++k) {
    const double avg_std = nominal_std[k] / static_cast<double>(count);
    params.logstd_floor[k] = std::log(config.std_floor_ratio * avg_std);
    mean_bias[k] = nominal_mean[k] / static_cast<double>(count);
    logstd_bias[k] = std::log(avg_std);
  }

  std::vector<StatePair> train, holdout;
  for (std::size_t n = 0; n < config.n_rollouts; ++n) {
    auto& dest = n < n_train ? train : holdout;
    for (const auto& step : trajectories[n].steps) dest.push_back({&step.state, &step.disturbance});
  }

  AdamOptimizer adam({.learning_rate = config.learning_rate});
  Rng shuffle_rng(stream_seed(seed, Stream::kPretrain, 1));
  const std::size_t batch = std::max<std::size_t>(1, config.batch_size);
  for (std::size_t epoch = 0; epoch < config.n_epochs; ++epoch) {
    for (std::size_t i = train.size(); i > 1; --i) {
      std::swap(train[i - 1], train[shuffle_rng.next_u64() % i]);
    }
    for (std::size_t start = 0; start < train.size(); start += batch) {
      const std::size_t len = std::min(batch, train.size() - start);
      const auto slice = std::span<const StatePair>(train).subspan(start, len);
      const auto lg = pair_loss_and_gradient(params, slice, static_cast<double>(len), config.threads);
      adam.step(params, lg.gradient);
    }
  }

  const auto& eval = holdout.empty() ? train : holdout;
  PretrainResult result;
  result.report.n_pairs = train.size();
  double nll = 0.0, nominal_nll = 0.0;
  for (const auto& pair : eval) {
    nll -= proposal_log_prob(params, *pair.state, *pair.disturbance);
    nominal_nll -= env.nominal_log_prob(*pair.state, *pair.disturbance);
  }
  const double m = static_cast<double>(eval.size());
  result.report.heldout_nll = nll / m;
  result.report.nominal_entropy = nominal_nll / m;
  result.report.kl_per_step = result.report.heldout_nll - result.report.nominal_entropy;
  if (!(result.report.kl_per_step <= config.max_kl_per_step)) {
    throw std::runtime_error("pretraining did not match the nominal distribution: held-out KL per step " +
                             std::to_string(result.report.kl_per_step) + " exceeds " +
                             std::to_string(config.max_kl_per_step));
  }
  result.params = std::move(params);
  return result;
}

nlohmann::json proposal_to_json(const GaussianProposalParams& p) {
  auto net = [](const Mlp& mlp) {
    return nlohmann::json{{"layer_sizes", mlp.layer_sizes()},
                          {"parameters", std::vector<double>(mlp.parameters().begin(), mlp.parameters().end())}};
  };
  return {{"format", "spais-gaussian-proposal"},
          {"version", 1},
          {"activation", "tanh"},
          {"mean_net", net(p.mean_net)},
          {"logstd_net", net(p.logstd_net)},
          {"state_mean", p.state_mean},
          {"state_std", p.state_std},
          {"logstd_floor", p.logstd_floor}};
}

GaussianProposalParams proposal_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "spais-gaussian-proposal") {
    throw std::invalid_argument("not a proposal checkpoint");
  }
  auto net = [](const nlohmann::json& n) {
    return Mlp(n.at("layer_sizes").get<std::vector<std::size_t>>(),
               n.at("parameters").get<std::vector<double>>());
  };
  GaussianProposalParams p;
  p.mean_net = net(j.at("mean_net"));
  p.logstd_net = net(j.at("logstd_net"));
  p.state_mean = j.at("state_mean").get<std::vector<double>>();
  p.state_std = j.at("state_std").get<std::vector<double>>();
  p.logstd_floor = j.at("logstd_floor").get<std::vector<double>>();
  p.validate();
  return p;
}

void save_checkpoint(const GaussianProposalParams& params, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << proposal_to_json(params).dump(1) << '\n';
}

GaussianProposalParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  return proposal_from_json(nlohmann::json::parse(in));
}

}  // namespace spais
