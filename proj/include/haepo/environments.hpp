#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "haepo/rng.hpp"
#include "haepo/trajectory.hpp"

namespace haepo {

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool terminal = false;
};

/// Discrete-action episodic environment with explicit seeding.
///
/// Environments with a finite state set report it through state_count() and
/// emit the state index as a one-element observation, which tabular policies
/// use directly. Continuous environments report state_count() == 0.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual std::size_t action_count() const = 0;
  virtual std::size_t observation_dim() const = 0;
  virtual std::size_t state_count() const = 0;
  virtual std::size_t max_steps() const = 0;

  virtual Observation reset(Rng& rng) = 0;
  virtual StepResult step(std::size_t action, Rng& rng) = 0;

 protected:
  void check_action(std::size_t action) const;
};

/// K-armed bandit with Gaussian rewards N(mu_k, noise_std^2). Means are drawn
/// uniformly from [0, 1] when the bandit is built and never change.
class GaussianBandit final : public Environment {
 public:
  GaussianBandit(std::size_t arms, std::uint64_t seed, double noise_std = 1.0);
  GaussianBandit(std::vector<double> means, double noise_std);

  std::string name() const override { return "bandit"; }
  std::size_t action_count() const override { return means_.size(); }
  std::size_t observation_dim() const override { return 1; }
  std::size_t state_count() const override { return 1; }
  std::size_t max_steps() const override { return 1; }

  Observation reset(Rng& rng) override;
  StepResult step(std::size_t action, Rng& rng) override;

  const std::vector<double>& means() const { return means_; }
  double best_mean() const;
  double noise_std() const { return noise_std_; }
  /// max_k mu_k - mean_k mu_k: expected regret of the uniform policy.
  double uniform_policy_regret() const;

 private:
  std::vector<double> means_;
  double noise_std_;
};

/// Realized regret max_k mu_k - r_t for every recorded pull.
std::vector<double> per_step_regret(const GaussianBandit& bandit,
                                    std::span<const double> chosen_rewards);

/// Noiseless counterpart max_k mu_k - mu_{a_t}.
std::vector<double> per_step_pseudo_regret(const GaussianBandit& bandit,
                                           std::span<const std::size_t> arms);

/// One-dimensional walk from position 0 with steps -1 (action 0) and +1
/// (action 1). Reaching +goal_distance pays 1 and ends the episode; running
/// out of steps ends it with reward 0.
class RandomWalkEnv final : public Environment {
 public:
  explicit RandomWalkEnv(int goal_distance, std::size_t max_steps = 500);

  std::string name() const override { return "random-walk"; }
  std::size_t action_count() const override { return 2; }
  std::size_t observation_dim() const override { return 1; }
  std::size_t state_count() const override;
  std::size_t max_steps() const override { return max_steps_; }

  Observation reset(Rng& rng) override;
  StepResult step(std::size_t action, Rng& rng) override;

  int position() const { return position_; }
  int goal_distance() const { return goal_; }

 private:
  Observation observe() const;

  int goal_;
  std::size_t max_steps_;
  int position_ = 0;
  std::size_t steps_ = 0;
};

/// Deterministic five-step chain. Action 0 advances, action 1 stays. Only
/// arriving at state 5 pays (reward 1); every episode lasts five steps.
class ChainMdp final : public Environment {
 public:
  static constexpr std::size_t kAdvance = 0;
  static constexpr std::size_t kStay = 1;
  static constexpr int kLength = 5;

  std::string name() const override { return "chain-mdp"; }
  std::size_t action_count() const override { return 2; }
  std::size_t observation_dim() const override { return 1; }
  std::size_t state_count() const override { return kLength + 1; }
  std::size_t max_steps() const override { return kLength; }

  Observation reset(Rng& rng) override;
  StepResult step(std::size_t action, Rng& rng) override;

  int state() const { return state_; }

 private:
  int state_ = 0;
  int steps_ = 0;
};

/// Single-period newsvendor: order q in {0..10}, demand ~ Poisson(5).
class NewsvendorEnv final : public Environment {
 public:
  struct Economics {
    double price = 10.0;
    double cost = 6.0;
    double salvage = 2.0;
    double demand_mean = 5.0;
    std::size_t max_order = 10;
  };

  NewsvendorEnv() = default;
  explicit NewsvendorEnv(Economics economics) : econ_(economics) {}

  std::string name() const override { return "newsvendor"; }
  std::size_t action_count() const override { return econ_.max_order + 1; }
  std::size_t observation_dim() const override { return 1; }
  std::size_t state_count() const override { return 1; }
  std::size_t max_steps() const override { return 1; }

  Observation reset(Rng& rng) override;
  StepResult step(std::size_t action, Rng& rng) override;

  double profit(std::size_t order, std::uint64_t demand) const;
  const Economics& economics() const { return econ_; }

 private:
  Economics econ_;
};

/// Poisson draw by sequential inversion of the CDF.
std::uint64_t sample_poisson(double mean, Rng& rng);

/// Classic cart-pole balancing task (Euler integration, +1 per surviving
/// step, capped at 500 steps).
class CartPoleEnv final : public Environment {
 public:
  static constexpr double kGravity = 9.8;
  static constexpr double kCartMass = 1.0;
  static constexpr double kPoleMass = 0.1;
  static constexpr double kTotalMass = kCartMass + kPoleMass;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kPoleMassLength = kPoleMass * kHalfLength;
  static constexpr double kForce = 10.0;
  static constexpr double kTau = 0.02;
  static constexpr double kThetaLimit = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;
  static constexpr double kXLimit = 2.4;
  static constexpr std::size_t kMaxSteps = 500;

  using State = std::array<double, 4>;  // x, x_dot, theta, theta_dot

  std::string name() const override { return "cartpole"; }
  std::size_t action_count() const override { return 2; }
  std::size_t observation_dim() const override { return 4; }
  std::size_t state_count() const override { return 0; }
  std::size_t max_steps() const override { return kMaxSteps; }

  Observation reset(Rng& rng) override;
  StepResult step(std::size_t action, Rng& rng) override;

  const State& state() const { return state_; }
  void set_state(const State& s) { state_ = s; steps_ = 0; }

  /// One Euler step of the dynamics; pure function of (state, action).
  static State integrate(const State& s, std::size_t action);

 private:
  State state_{};
  std::size_t steps_ = 0;
};

/// Plain construction record: environment name, its parameters and a seed.
struct EnvironmentSpec {
  std::string name;
  std::size_t bandit_arms = 10;
  double bandit_noise_std = 1.0;
  int walk_goal = 10;
  std::size_t walk_max_steps = 500;
  std::uint64_t seed = 0;
};

std::unique_ptr<Environment> make_environment(const EnvironmentSpec& spec);

}  // namespace haepo
