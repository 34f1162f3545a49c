#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "haepo/trajectory.hpp"

namespace haepo {

/// Plackett-Luce first-choice weights of a batch.
struct PLWeights {
  std::vector<double> w;
  std::vector<double> log_w;

  std::size_t size() const { return w.size(); }
};

struct LossConfig {
  double beta_ent = 0.0;
  double lambda_kl = 0.0;
  NormalizationMode norm_mode = NormalizationMode::None;
};

void validate(const LossConfig& cfg);

struct LossBreakdown {
  double reward_term = 0.0;
  double entropy_term = 0.0;
  double kl_term = 0.0;
  double total = 0.0;
  std::vector<double> grad_L;  // d total / d L_k
  std::vector<double> D;       // log w_k - log w_k^ref
  bool degenerate_batch = false;
};

struct GradientForces {
  std::vector<double> reward;
  std::vector<double> entropy;
  std::vector<double> kl;
};

/// Softmax over cumulative log-likelihoods, evaluated after subtracting the
/// maximum so that scores of long episodes (L around -500) stay finite.
PLWeights pl_weights(std::span<const double> log_likelihoods);

/// J(k, j) = d w_k / d L_j = w_k (delta_kj - w_j).
Eigen::MatrixXd pl_weight_jacobian(const PLWeights& weights);

/// Trajectory-level objective
///
///   -sum_k w_k Rn_k + beta sum_k w_k log w_k + lambda sum_k w_k (log w_k - log w_ref_k)
///
/// where Rn is `returns` after cfg.norm_mode and w_ref = pl_weights(ref_log_likelihoods).
/// The normalized returns are constants for differentiation. grad_L is filled
/// with the exact derivative of `total` with respect to the log-likelihoods.
LossBreakdown haepo_loss(std::span<const double> log_likelihoods,
                         std::span<const double> ref_log_likelihoods,
                         std::span<const double> returns,
                         const LossConfig& cfg);

std::vector<double> haepo_gradient(std::span<const double> log_likelihoods,
                                   std::span<const double> ref_log_likelihoods,
                                   std::span<const double> returns,
                                   const LossConfig& cfg);

/// Splits grad_L into the reward-seeking, entropy and weight-space KL forces.
/// The three vectors add up to haepo_gradient().
GradientForces gradient_decomposition(
    std::span<const double> log_likelihoods,
    std::span<const double> ref_log_likelihoods,
    std::span<const double> returns, const LossConfig& cfg);

/// d total / d L_ref_k = lambda (w_ref_k - w_k).
std::vector<double> haepo_ref_gradient(
    std::span<const double> log_likelihoods,
    std::span<const double> ref_log_likelihoods, const LossConfig& cfg);

/// Parameter gradient sum_k grad_L[k] * score_k, where score_k = d L_k / d theta.
Eigen::VectorXd chain_to_policy(std::span<const double> grad_L,
                                std::span<const Eigen::VectorXd> scores);

/// Score-function estimator of d E[loss] / d theta for one sampled batch:
/// the chained weight gradient plus loss * d log p(batch) / d theta. Its
/// expectation over batches equals the gradient of the expected loss.
Eigen::VectorXd score_function_gradient(
    const LossBreakdown& loss, std::span<const Eigen::VectorXd> scores);

}  // namespace haepo
