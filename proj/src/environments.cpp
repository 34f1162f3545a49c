#include "haepo/environments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "haepo/error.hpp"

namespace haepo {

void Environment::check_action(std::size_t action) const {
  if (action >= action_count()) {
    throw Error(ErrorCode::InvalidArgument,
                name() + ": action " + std::to_string(action) + " out of range");
  }
}

// -- bandit ------------------------------------------------------------------

GaussianBandit::GaussianBandit(std::size_t arms, std::uint64_t seed,
                               double noise_std)
    : noise_std_(noise_std) {
  if (arms == 0) throw Error(ErrorCode::Config, "bandit needs at least one arm");
  Rng rng(seed, /*stream=*/0xBA4D17);
  means_.resize(arms);
  for (double& mu : means_) mu = rng.uniform();
}

GaussianBandit::GaussianBandit(std::vector<double> means, double noise_std)
    : means_(std::move(means)), noise_std_(noise_std) {
  if (means_.empty()) throw Error(ErrorCode::Config, "bandit needs at least one arm");
}

Observation GaussianBandit::reset(Rng&) { return {0.0}; }

StepResult GaussianBandit::step(std::size_t action, Rng& rng) {
  check_action(action);
  double reward = means_[action];
  if (noise_std_ > 0.0) reward += noise_std_ * rng.normal();
  return {{0.0}, reward, true};
}

double GaussianBandit::best_mean() const {
  return *std::max_element(means_.begin(), means_.end());
}

double GaussianBandit::uniform_policy_regret() const {
  const double mean = std::accumulate(means_.begin(), means_.end(), 0.0) /
                      static_cast<double>(means_.size());
  return best_mean() - mean;
}

std::vector<double> per_step_regret(const GaussianBandit& bandit,
                                    std::span<const double> chosen_rewards) {
  const double best = bandit.best_mean();
  std::vector<double> out(chosen_rewards.size());
  std::transform(chosen_rewards.begin(), chosen_rewards.end(), out.begin(),
                 [best](double r) { return best - r; });
  return out;
}

std::vector<double> per_step_pseudo_regret(const GaussianBandit& bandit,
                                           std::span<const std::size_t> arms) {
  const double best = bandit.best_mean();
  std::vector<double> out(arms.size());
  for (std::size_t i = 0; i < arms.size(); ++i) {
    if (arms[i] >= bandit.means().size()) {
      throw Error(ErrorCode::InvalidArgument, "arm index out of range");
    }
    out[i] = best - bandit.means()[arms[i]];
  }
  return out;
}

// -- random walk -------------------------------------------------------------

RandomWalkEnv::RandomWalkEnv(int goal_distance, std::size_t max_steps)
    : goal_(goal_distance), max_steps_(max_steps) {
  if (goal_distance <= 0 || max_steps == 0) {
    throw Error(ErrorCode::Config,
                "random walk needs a positive goal distance and step budget");
  }
}

std::size_t RandomWalkEnv::state_count() const {
  return max_steps_ + static_cast<std::size_t>(goal_) + 1;
}

Observation RandomWalkEnv::observe() const {
  return {static_cast<double>(position_ + static_cast<int>(max_steps_))};
}

Observation RandomWalkEnv::reset(Rng&) {
  position_ = 0;
  steps_ = 0;
  return observe();
}

StepResult RandomWalkEnv::step(std::size_t action, Rng&) {
  check_action(action);
  if (steps_ >= max_steps_ || position_ >= goal_) {
    throw Error(ErrorCode::Runtime, "random walk stepped after termination");
  }
  position_ += action == 1 ? 1 : -1;
  ++steps_;
  if (position_ >= goal_) return {observe(), 1.0, true};
  return {observe(), 0.0, steps_ >= max_steps_};
}

// -- chain -------------------------------------------------------------------

Observation ChainMdp::reset(Rng&) {
  state_ = 0;
  steps_ = 0;
  return {0.0};
}

StepResult ChainMdp::step(std::size_t action, Rng&) {
  check_action(action);
  if (steps_ >= kLength) {
    throw Error(ErrorCode::Runtime, "chain stepped after termination");
  }
  if (action == kAdvance && state_ < kLength) ++state_;
  ++steps_;
  const bool arrived = state_ == kLength;
  return {{static_cast<double>(state_)}, arrived ? 1.0 : 0.0,
          arrived || steps_ >= kLength};
}

// -- newsvendor --------------------------------------------------------------

std::uint64_t sample_poisson(double mean, Rng& rng) {
  const double u = rng.uniform();
  double p = std::exp(-mean);
  double cdf = p;
  std::uint64_t k = 0;
  // The guard on p stops the search once the tail underflows.
  while (u > cdf && p > 0.0) {
    ++k;
    p *= mean / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

Observation NewsvendorEnv::reset(Rng&) { return {0.0}; }

double NewsvendorEnv::profit(std::size_t order, std::uint64_t demand) const {
  const double q = static_cast<double>(order);
  const double d = static_cast<double>(demand);
  return econ_.price * std::min(q, d) - econ_.cost * q +
         econ_.salvage * std::max(q - d, 0.0);
}

StepResult NewsvendorEnv::step(std::size_t action, Rng& rng) {
  check_action(action);
  const auto demand = sample_poisson(econ_.demand_mean, rng);
  return {{0.0}, profit(action, demand), true};
}

// -- cart-pole ---------------------------------------------------------------

Observation CartPoleEnv::reset(Rng& rng) {
  for (double& v : state_) v = rng.uniform(-0.05, 0.05);
  steps_ = 0;
  return {state_.begin(), state_.end()};
}

CartPoleEnv::State CartPoleEnv::integrate(const State& s, std::size_t action) {
  const auto [x, x_dot, theta, theta_dot] = s;
  const double force = action == 1 ? kForce : -kForce;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double temp =
      (force + kPoleMassLength * theta_dot * theta_dot * sin_t) / kTotalMass;
  const double theta_acc =
      (kGravity * sin_t - cos_t * temp) /
      (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / kTotalMass));
  const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;
  return {x + kTau * x_dot, x_dot + kTau * x_acc, theta + kTau * theta_dot,
          theta_dot + kTau * theta_acc};
}

StepResult CartPoleEnv::step(std::size_t action, Rng&) {
  check_action(action);
  if (steps_ >= kMaxSteps) {
    throw Error(ErrorCode::Runtime, "cart-pole stepped after termination");
  }
  state_ = integrate(state_, action);
  ++steps_;
  const bool failed = std::abs(state_[0]) > kXLimit ||
                      std::abs(state_[2]) > kThetaLimit;
  return {{state_.begin(), state_.end()}, 1.0, failed || steps_ >= kMaxSteps};
}

// -- factory -----------------------------------------------------------------

std::unique_ptr<Environment> make_environment(const EnvironmentSpec& spec) {
  if (spec.name == "bandit") {
    return std::make_unique<GaussianBandit>(spec.bandit_arms, spec.seed,
                                            spec.bandit_noise_std);
  }
  if (spec.name == "random-walk") {
    return std::make_unique<RandomWalkEnv>(spec.walk_goal, spec.walk_max_steps);
  }
  if (spec.name == "chain-mdp") return std::make_unique<ChainMdp>();
  if (spec.name == "newsvendor") return std::make_unique<NewsvendorEnv>();
  if (spec.name == "cartpole") return std::make_unique<CartPoleEnv>();
  throw Error(ErrorCode::Config, "unknown environment '" + spec.name + "'");
}

}  // namespace haepo
