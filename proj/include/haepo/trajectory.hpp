#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace haepo {

using Observation = std::vector<double>;

/// One complete episode. All four sequences share the same length.
struct TrajectoryRecord {
  std::vector<Observation> states;
  std::vector<std::size_t> actions;
  std::vector<double> rewards;
  std::vector<double> step_log_probs;

  std::size_t size() const { return actions.size(); }
};

/// Throws if the sequences disagree in length, are empty, or a log-prob is
/// not finite.
void validate(const TrajectoryRecord& traj);

/// Per-trajectory scores for a batch of M episodes.
struct BatchScores {
  std::vector<double> log_likelihoods;  // L_k
  std::vector<double> returns;          // R_k

  std::size_t size() const { return returns.size(); }
};

enum class NormalizationMode { Sum, ZScore, None };

NormalizationMode parse_normalization_mode(std::string_view name);
std::string_view to_string(NormalizationMode mode);

/// Sum of step log-probabilities.
double cumulative_log_likelihood(const TrajectoryRecord& traj);

/// sum_t gamma^(t-1) r_t. Throws for gamma outside [0, 1].
double discounted_return(std::span<const double> rewards, double gamma);

BatchScores score_batch(std::span<const TrajectoryRecord> batch, double gamma);

struct NormalizedReturns {
  std::vector<double> values;
  // Set when the batch carries no learning signal (zero sum, or zero spread
  // for z-scoring). values is then all zeros.
  bool degenerate = false;
};

/// Rescales a batch of returns. Sum mode subtracts `baseline` before dividing
/// by the batch sum; z-scoring uses the population standard deviation.
NormalizedReturns normalize_rewards(std::span<const double> returns,
                                    NormalizationMode mode,
                                    double baseline = 0.0);

}  // namespace haepo
