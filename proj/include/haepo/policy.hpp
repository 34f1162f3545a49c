#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "haepo/environments.hpp"
#include "haepo/rng.hpp"
#include "haepo/trajectory.hpp"

namespace haepo {

/// Discrete-action softmax policy over a flat parameter vector.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::unique_ptr<Policy> clone() const = 0;
  virtual std::size_t action_count() const = 0;

  /// Max-shifted softmax of the logits at `obs`.
  std::vector<double> action_distribution(const Observation& obs) const;
  double log_probability(const Observation& obs, std::size_t action) const;

  /// Adds coeff * d log pi(action | obs) / d theta into `grad`.
  virtual void accumulate_step_gradient(const Observation& obs,
                                        std::size_t action, double coeff,
                                        Eigen::VectorXd& grad) const = 0;

  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }
  Eigen::Index parameter_count() const { return params_.size(); }

 protected:
  virtual Eigen::VectorXd logits(const Observation& obs) const = 0;

  Eigen::VectorXd params_;
};

/// Logit table indexed by (state, action); bandits use a single row.
/// Logits start at zero, i.e. the uniform policy.
class TabularSoftmaxPolicy final : public Policy {
 public:
  TabularSoftmaxPolicy(std::size_t states, std::size_t actions);

  /// One row used for every observation (state-independent action odds).
  static TabularSoftmaxPolicy shared(std::size_t actions);

  std::unique_ptr<Policy> clone() const override;
  std::size_t action_count() const override { return actions_; }
  std::size_t state_count() const { return states_; }

  void accumulate_step_gradient(const Observation& obs, std::size_t action,
                                double coeff,
                                Eigen::VectorXd& grad) const override;

  double& logit(std::size_t state, std::size_t action);

 protected:
  Eigen::VectorXd logits(const Observation& obs) const override;

 private:
  std::size_t row(const Observation& obs) const;

  std::size_t states_;
  std::size_t actions_;
  bool shared_ = false;
};

/// obs -> hidden (ReLU) -> action logits.
///
/// Parameters are laid out as W1 (obs_dim x hidden, column-major), b1,
/// W2 (hidden x actions, column-major), b2. Weights start uniform in
/// [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases at zero.
class MlpPolicy final : public Policy {
 public:
  MlpPolicy(std::size_t obs_dim, std::size_t hidden, std::size_t actions,
            Rng& init_rng);
  /// Zero-initialised network.
  MlpPolicy(std::size_t obs_dim, std::size_t hidden, std::size_t actions);

  std::unique_ptr<Policy> clone() const override;
  std::size_t action_count() const override { return actions_; }
  std::size_t observation_dim() const { return obs_dim_; }
  std::size_t hidden_units() const { return hidden_; }

  void accumulate_step_gradient(const Observation& obs, std::size_t action,
                                double coeff,
                                Eigen::VectorXd& grad) const override;

 protected:
  Eigen::VectorXd logits(const Observation& obs) const override;

 private:
  struct Offsets {
    Eigen::Index w1, b1, w2, b2, end;
  };
  Offsets offsets() const;
  Eigen::Map<const Eigen::VectorXd> input(const Observation& obs) const;

  std::size_t obs_dim_;
  std::size_t hidden_;
  std::size_t actions_;
};

double log_prob(const Policy& policy, const Observation& obs,
                std::size_t action);

/// Shannon entropy (nats) of a probability vector.
double entropy(std::span<const double> probs);

/// Rolls the policy out from env.reset() until a terminal step or max_steps.
TrajectoryRecord sample_trajectory(const Policy& policy, Environment& env,
                                   Rng& rng, std::size_t max_steps);

/// Log-probabilities of the recorded actions re-evaluated under `policy`.
std::vector<double> replay_step_log_probs(const Policy& policy,
                                          const TrajectoryRecord& traj);
double replay_log_likelihood(const Policy& policy, const TrajectoryRecord& traj);

/// d/d theta of sum_t log pi(a_t | s_t).
Eigen::VectorXd accumulate_log_likelihood_gradient(const Policy& policy,
                                                   const TrajectoryRecord& traj);

/// sum_t coeff_t * d log pi(a_t | s_t) / d theta.
Eigen::VectorXd accumulate_weighted_gradient(const Policy& policy,
                                             const TrajectoryRecord& traj,
                                             std::span<const double> coeffs);

enum class OptimizerMode { Sgd, Adam };

OptimizerMode parse_optimizer_mode(std::string_view name);
std::string_view to_string(OptimizerMode mode);

struct OptimizerConfig {
  OptimizerMode mode = OptimizerMode::Sgd;
  double learning_rate = 1e-2;
  std::optional<double> max_grad_norm;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

/// First-order optimizer with optional global-norm gradient clipping.
class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, Eigen::Index parameter_count);

  /// Descends along `grad`. Throws without touching `params` when the
  /// gradient has a non-finite entry.
  void apply(Eigen::VectorXd& params, Eigen::VectorXd grad);

  std::uint64_t steps() const { return steps_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  Eigen::VectorXd first_moment_;
  Eigen::VectorXd second_moment_;
  std::uint64_t steps_ = 0;
};

/// Rescales `grad` in place so its L2 norm is at most max_norm. Returns the
/// norm before clipping.
double clip_gradient_norm(Eigen::VectorXd& grad, double max_norm);

std::string parameters_to_json(const Eigen::VectorXd& params);
Eigen::VectorXd parameters_from_json(std::string_view text);
void save_parameters_binary(const Eigen::VectorXd& params, const std::string& path);
Eigen::VectorXd load_parameters_binary(const std::string& path);

}  // namespace haepo
