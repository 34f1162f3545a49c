#include "haepo/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "haepo/error.hpp"

namespace haepo {

void validate(const PpoConfig& cfg) {
  if (!(cfg.clip_epsilon > 0.0 && cfg.clip_epsilon < 1.0)) {
    throw Error(ErrorCode::Config, "PPO clip epsilon must lie in (0, 1)");
  }
  if (cfg.epochs_per_update < 1) {
    throw Error(ErrorCode::Config, "PPO needs at least one epoch per update");
  }
}

void validate(const DpoConfig& cfg) {
  if (!std::isfinite(cfg.beta) || !(cfg.beta > 0.0)) {
    throw Error(ErrorCode::Config, "DPO beta must be positive and finite");
  }
}

PpoLoss ppo_loss(std::span<const double> new_lp, std::span<const double> old_lp,
                 std::span<const double> adv, const PpoConfig& cfg) {
  validate(cfg);
  if (new_lp.size() != old_lp.size() || adv.size() != new_lp.size()) {
    throw Error(ErrorCode::ShapeMismatch, "PPO inputs differ in length");
  }
  if (new_lp.empty()) throw Error(ErrorCode::InvalidArgument, "empty PPO batch");

  const double n = static_cast<double>(new_lp.size());
  PpoLoss out;
  out.grad_new.resize(new_lp.size());
  for (std::size_t t = 0; t < new_lp.size(); ++t) {
    const double rho = std::exp(new_lp[t] - old_lp[t]);
    const double clipped =
        std::clamp(rho, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon);
    const double unclipped_term = rho * adv[t];
    const double clipped_term = clipped * adv[t];
    if (unclipped_term <= clipped_term) {
      out.loss -= unclipped_term;
      out.grad_new[t] = -unclipped_term / n;  // d rho / d new = rho
    } else {
      out.loss -= clipped_term;
      out.grad_new[t] = 0.0;
    }
  }
  out.loss /= n;
  return out;
}

std::vector<double> batch_advantages(std::span<const double> returns) {
  if (returns.empty()) throw Error(ErrorCode::InvalidArgument, "empty return batch");
  const double mean = std::accumulate(returns.begin(), returns.end(), 0.0) /
                      static_cast<double>(returns.size());
  std::vector<double> adv(returns.size());
  std::transform(returns.begin(), returns.end(), adv.begin(),
                 [mean](double r) { return r - mean; });
  return adv;
}

DpoLoss dpo_loss(double winner, double loser, double ref_winner,
                 double ref_loser, const DpoConfig& cfg) {
  validate(cfg);
  DpoLoss out;
  out.margin = (winner - ref_winner) - (loser - ref_loser);
  const double z = cfg.beta * out.margin;
  // -log sigmoid(z) = softplus(-z)
  out.loss = z > 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
  const double sig_neg = 1.0 / (1.0 + std::exp(z));  // sigmoid(-z)
  out.grad_winner = -cfg.beta * sig_neg;
  out.grad_loser = cfg.beta * sig_neg;
  return out;
}

std::optional<std::pair<std::size_t, std::size_t>> select_preference_pair(
    std::span<const double> returns) {
  if (returns.empty()) return std::nullopt;
  const auto [lo, hi] = std::minmax_element(returns.begin(), returns.end());
  if (*lo == *hi) return std::nullopt;
  return std::pair{static_cast<std::size_t>(hi - returns.begin()),
                   static_cast<std::size_t>(lo - returns.begin())};
}

}  // namespace haepo
