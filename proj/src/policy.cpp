#include "haepo/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

#include "haepo/error.hpp"

namespace haepo {
namespace {

std::vector<double> softmax(const Eigen::VectorXd& logits) {
  const double max = logits.maxCoeff();
  std::vector<double> p(static_cast<std::size_t>(logits.size()));
  double sum = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - max);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

double log_softmax_at(const Eigen::VectorXd& logits, std::size_t action) {
  const double max = logits.maxCoeff();
  const double lse = max + std::log((logits.array() - max).exp().sum());
  return logits[static_cast<Eigen::Index>(action)] - lse;
}

std::size_t sample_index(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double cdf = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cdf += probs[i];
    if (u < cdf) return i;
  }
  // Rounding can leave the total a hair below 1.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return i;
  }
  return probs.size() - 1;
}

constexpr char kBinaryMagic[8] = {'H', 'A', 'E', 'P', 'O', 'P', 'A', 'R'};

}  // namespace

std::vector<double> Policy::action_distribution(const Observation& obs) const {
  return softmax(logits(obs));
}

double Policy::log_probability(const Observation& obs, std::size_t action) const {
  if (action >= action_count()) {
    throw Error(ErrorCode::InvalidArgument, "action out of range");
  }
  return log_softmax_at(logits(obs), action);
}

// -- tabular -----------------------------------------------------------------

TabularSoftmaxPolicy::TabularSoftmaxPolicy(std::size_t states,
                                           std::size_t actions)
    : states_(states), actions_(actions) {
  if (states == 0 || actions == 0) {
    throw Error(ErrorCode::InvalidArgument, "empty logit table");
  }
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(states * actions));
}

TabularSoftmaxPolicy TabularSoftmaxPolicy::shared(std::size_t actions) {
  TabularSoftmaxPolicy policy(1, actions);
  policy.shared_ = true;
  return policy;
}

std::unique_ptr<Policy> TabularSoftmaxPolicy::clone() const {
  return std::make_unique<TabularSoftmaxPolicy>(*this);
}

std::size_t TabularSoftmaxPolicy::row(const Observation& obs) const {
  if (shared_) return 0;
  if (obs.empty() || !(obs[0] >= 0.0) ||
      obs[0] >= static_cast<double>(states_)) {
    throw Error(ErrorCode::InvalidArgument, "state index out of range");
  }
  return static_cast<std::size_t>(obs[0]);
}

double& TabularSoftmaxPolicy::logit(std::size_t state, std::size_t action) {
  if (state >= states_ || action >= actions_) {
    throw Error(ErrorCode::InvalidArgument, "logit index out of range");
  }
  return params_[static_cast<Eigen::Index>(state * actions_ + action)];
}

Eigen::VectorXd TabularSoftmaxPolicy::logits(const Observation& obs) const {
  const auto r = static_cast<Eigen::Index>(row(obs) * actions_);
  return params_.segment(r, static_cast<Eigen::Index>(actions_));
}

void TabularSoftmaxPolicy::accumulate_step_gradient(const Observation& obs,
                                                    std::size_t action,
                                                    double coeff,
                                                    Eigen::VectorXd& grad) const {
  if (action >= actions_) throw Error(ErrorCode::InvalidArgument, "action out of range");
  if (grad.size() != params_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "gradient accumulator shape mismatch");
  }
  const auto r = static_cast<Eigen::Index>(row(obs) * actions_);
  const auto p = action_distribution(obs);
  for (std::size_t a = 0; a < actions_; ++a) {
    grad[r + static_cast<Eigen::Index>(a)] +=
        coeff * ((a == action ? 1.0 : 0.0) - p[a]);
  }
}

// -- MLP ---------------------------------------------------------------------

MlpPolicy::MlpPolicy(std::size_t obs_dim, std::size_t hidden,
                     std::size_t actions)
    : obs_dim_(obs_dim), hidden_(hidden), actions_(actions) {
  if (obs_dim == 0 || hidden == 0 || actions == 0) {
    throw Error(ErrorCode::InvalidArgument, "empty MLP layer");
  }
  params_ = Eigen::VectorXd::Zero(offsets().end);
}

MlpPolicy::MlpPolicy(std::size_t obs_dim, std::size_t hidden,
                     std::size_t actions, Rng& init_rng)
    : MlpPolicy(obs_dim, hidden, actions) {
  const Offsets o = offsets();
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(obs_dim));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (Eigen::Index i = o.w1; i < o.b1; ++i) params_[i] = init_rng.uniform(-bound1, bound1);
  for (Eigen::Index i = o.w2; i < o.b2; ++i) params_[i] = init_rng.uniform(-bound2, bound2);
}

std::unique_ptr<Policy> MlpPolicy::clone() const {
  return std::make_unique<MlpPolicy>(*this);
}

MlpPolicy::Offsets MlpPolicy::offsets() const {
  const auto d = static_cast<Eigen::Index>(obs_dim_);
  const auto h = static_cast<Eigen::Index>(hidden_);
  const auto a = static_cast<Eigen::Index>(actions_);
  Offsets o{};
  o.w1 = 0;
  o.b1 = o.w1 + d * h;
  o.w2 = o.b1 + h;
  o.b2 = o.w2 + h * a;
  o.end = o.b2 + a;
  return o;
}

Eigen::Map<const Eigen::VectorXd> MlpPolicy::input(const Observation& obs) const {
  if (obs.size() != obs_dim_) {
    throw Error(ErrorCode::ShapeMismatch, "observation has the wrong dimension");
  }
  return {obs.data(), static_cast<Eigen::Index>(obs_dim_)};
}

Eigen::VectorXd MlpPolicy::logits(const Observation& obs) const {
  const Offsets o = offsets();
  const auto d = static_cast<Eigen::Index>(obs_dim_);
  const auto h = static_cast<Eigen::Index>(hidden_);
  const auto a = static_cast<Eigen::Index>(actions_);
  Eigen::Map<const Eigen::MatrixXd> w1(params_.data() + o.w1, d, h);
  Eigen::Map<const Eigen::MatrixXd> w2(params_.data() + o.w2, h, a);
  const Eigen::VectorXd hidden =
      (w1.transpose() * input(obs) + params_.segment(o.b1, h)).cwiseMax(0.0);
  return w2.transpose() * hidden + params_.segment(o.b2, a);
}

void MlpPolicy::accumulate_step_gradient(const Observation& obs,
                                         std::size_t action, double coeff,
                                         Eigen::VectorXd& grad) const {
  if (action >= actions_) throw Error(ErrorCode::InvalidArgument, "action out of range");
  if (grad.size() != params_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "gradient accumulator shape mismatch");
  }
  const Offsets o = offsets();
  const auto d = static_cast<Eigen::Index>(obs_dim_);
  const auto h = static_cast<Eigen::Index>(hidden_);
  const auto a = static_cast<Eigen::Index>(actions_);
  Eigen::Map<const Eigen::MatrixXd> w1(params_.data() + o.w1, d, h);
  Eigen::Map<const Eigen::MatrixXd> w2(params_.data() + o.w2, h, a);
  const auto x = input(obs);

  const Eigen::VectorXd pre = w1.transpose() * x + params_.segment(o.b1, h);
  const Eigen::VectorXd hidden = pre.cwiseMax(0.0);
  const Eigen::VectorXd out = w2.transpose() * hidden + params_.segment(o.b2, a);

  // d log softmax(out)[action] / d out = e_action - p
  const std::vector<double> probs = softmax(out);
  Eigen::VectorXd d_out = -Eigen::Map<const Eigen::VectorXd>(probs.data(), a);
  d_out[static_cast<Eigen::Index>(action)] += 1.0;
  d_out *= coeff;

  // ReLU subgradient at 0 is 0.
  const Eigen::VectorXd d_pre =
      ((w2 * d_out).array() * (pre.array() > 0.0).cast<double>()).matrix();

  Eigen::Map<Eigen::MatrixXd>(grad.data() + o.w1, d, h) += x * d_pre.transpose();
  grad.segment(o.b1, h) += d_pre;
  Eigen::Map<Eigen::MatrixXd>(grad.data() + o.w2, h, a) += hidden * d_out.transpose();
  grad.segment(o.b2, a) += d_out;
}

// -- rollouts ----------------------------------------------------------------

double log_prob(const Policy& policy, const Observation& obs,
                std::size_t action) {
  return policy.log_probability(obs, action);
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

TrajectoryRecord sample_trajectory(const Policy& policy, Environment& env,
                                   Rng& rng, std::size_t max_steps) {
  if (policy.action_count() != env.action_count()) {
    throw Error(ErrorCode::ShapeMismatch,
                "policy and environment disagree on the action count");
  }
  TrajectoryRecord traj;
  Observation obs = env.reset(rng);
  for (std::size_t t = 0; t < max_steps; ++t) {
    const auto probs = policy.action_distribution(obs);
    const std::size_t action = sample_index(probs, rng);
    const double lp = policy.log_probability(obs, action);
    StepResult step = env.step(action, rng);
    traj.states.push_back(std::move(obs));
    traj.actions.push_back(action);
    traj.rewards.push_back(step.reward);
    traj.step_log_probs.push_back(lp);
    obs = std::move(step.observation);
    if (step.terminal) break;
  }
  return traj;
}

std::vector<double> replay_step_log_probs(const Policy& policy,
                                          const TrajectoryRecord& traj) {
  std::vector<double> out(traj.size());
  for (std::size_t t = 0; t < traj.size(); ++t) {
    out[t] = log_prob(policy, traj.states[t], traj.actions[t]);
  }
  return out;
}

double replay_log_likelihood(const Policy& policy, const TrajectoryRecord& traj) {
  double total = 0.0;
  for (double lp : replay_step_log_probs(policy, traj)) total += lp;
  return total;
}

Eigen::VectorXd accumulate_log_likelihood_gradient(const Policy& policy,
                                                   const TrajectoryRecord& traj) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(policy.parameter_count());
  for (std::size_t t = 0; t < traj.size(); ++t) {
    policy.accumulate_step_gradient(traj.states[t], traj.actions[t], 1.0, grad);
  }
  return grad;
}

Eigen::VectorXd accumulate_weighted_gradient(const Policy& policy,
                                             const TrajectoryRecord& traj,
                                             std::span<const double> coeffs) {
  if (coeffs.size() != traj.size()) {
    throw Error(ErrorCode::ShapeMismatch, "one coefficient per step is required");
  }
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(policy.parameter_count());
  for (std::size_t t = 0; t < traj.size(); ++t) {
    if (coeffs[t] != 0.0) {
      policy.accumulate_step_gradient(traj.states[t], traj.actions[t], coeffs[t], grad);
    }
  }
  return grad;
}

// -- optimizers --------------------------------------------------------------

OptimizerMode parse_optimizer_mode(std::string_view name) {
  if (name == "sgd") return OptimizerMode::Sgd;
  if (name == "adam") return OptimizerMode::Adam;
  throw Error(ErrorCode::Config, "unknown optimizer '" + std::string(name) + "'");
}

std::string_view to_string(OptimizerMode mode) {
  return mode == OptimizerMode::Adam ? "adam" : "sgd";
}

double clip_gradient_norm(Eigen::VectorXd& grad, double max_norm) {
  const double norm = grad.norm();
  if (norm > max_norm) grad *= max_norm / norm;
  return norm;
}

Optimizer::Optimizer(OptimizerConfig cfg, Eigen::Index parameter_count)
    : cfg_(cfg),
      first_moment_(Eigen::VectorXd::Zero(parameter_count)),
      second_moment_(Eigen::VectorXd::Zero(parameter_count)) {
  if (!(cfg_.learning_rate > 0.0) || !std::isfinite(cfg_.learning_rate)) {
    throw Error(ErrorCode::Config, "learning rate must be positive");
  }
  if (cfg_.max_grad_norm && !(*cfg_.max_grad_norm > 0.0)) {
    throw Error(ErrorCode::Config, "max gradient norm must be positive");
  }
}

void Optimizer::apply(Eigen::VectorXd& params, Eigen::VectorXd grad) {
  if (grad.size() != params.size() || grad.size() != first_moment_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "gradient and parameters differ in size");
  }
  if (!grad.allFinite()) {
    throw Error(ErrorCode::NonFinite, "non-finite gradient; update skipped");
  }
  if (cfg_.max_grad_norm) clip_gradient_norm(grad, *cfg_.max_grad_norm);
  ++steps_;

  if (cfg_.mode == OptimizerMode::Sgd) {
    params -= cfg_.learning_rate * grad;
    return;
  }
  first_moment_ = cfg_.adam_beta1 * first_moment_ + (1.0 - cfg_.adam_beta1) * grad;
  second_moment_ = cfg_.adam_beta2 * second_moment_ +
                   (1.0 - cfg_.adam_beta2) * grad.cwiseProduct(grad);
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(cfg_.adam_beta1, t);
  const double c2 = 1.0 - std::pow(cfg_.adam_beta2, t);
  params.array() -= cfg_.learning_rate * (first_moment_.array() / c1) /
                    ((second_moment_.array() / c2).sqrt() + cfg_.adam_epsilon);
}

// -- snapshots ---------------------------------------------------------------

std::string parameters_to_json(const Eigen::VectorXd& params) {
  nlohmann::json j = std::vector<double>(params.data(), params.data() + params.size());
  return j.dump();
}

Eigen::VectorXd parameters_from_json(std::string_view text) {
  try {
    const auto values = nlohmann::json::parse(text).get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                             static_cast<Eigen::Index>(values.size()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad parameter JSON: ") + e.what());
  }
}

void save_parameters_binary(const Eigen::VectorXd& params, const std::string& path) {
  static_assert(std::endian::native == std::endian::little,
                "snapshot format is little-endian");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  const auto count = static_cast<std::uint64_t>(params.size());
  out.write(kBinaryMagic, sizeof kBinaryMagic);
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  out.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path);
}

Eigen::VectorXd load_parameters_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  char magic[sizeof kBinaryMagic];
  std::uint64_t count = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  if (!in || std::memcmp(magic, kBinaryMagic, sizeof magic) != 0) {
    throw Error(ErrorCode::Io, path + " is not a parameter snapshot");
  }
  Eigen::VectorXd params(static_cast<Eigen::Index>(count));
  in.read(reinterpret_cast<char*>(params.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw Error(ErrorCode::Io, path + " is truncated");
  return params;
}

}  // namespace haepo
