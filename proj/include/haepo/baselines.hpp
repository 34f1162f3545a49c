#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace haepo {

struct PpoConfig {
  double clip_epsilon = 0.2;
  int epochs_per_update = 1;
};

struct DpoConfig {
  double beta = 1.0;
};

void validate(const PpoConfig& cfg);
void validate(const DpoConfig& cfg);

struct PpoLoss {
  double loss = 0.0;
  std::vector<double> grad_new;  // d loss / d new step log-prob
};

/// Clipped surrogate -mean_t min(rho_t A_t, clip(rho_t, 1-eps, 1+eps) A_t)
/// with rho_t = exp(new_t - old_t), over the flattened steps of a batch.
PpoLoss ppo_loss(std::span<const double> new_log_probs,
                 std::span<const double> old_log_probs,
                 std::span<const double> advantages, const PpoConfig& cfg);

/// A_k = R_k - mean(R).
std::vector<double> batch_advantages(std::span<const double> returns);

struct DpoLoss {
  double loss = 0.0;
  double margin = 0.0;
  double grad_winner = 0.0;  // d loss / d L_winner
  double grad_loser = 0.0;   // d loss / d L_loser
};

/// -log sigmoid(beta [(L_w - L_ref_w) - (L_l - L_ref_l)]).
DpoLoss dpo_loss(double winner, double loser, double ref_winner,
                 double ref_loser, const DpoConfig& cfg);

/// (best, worst) trajectory indices by return, or nothing when every return
/// in the batch is equal.
std::optional<std::pair<std::size_t, std::size_t>> select_preference_pair(
    std::span<const double> returns);

}  // namespace haepo
