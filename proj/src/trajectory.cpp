#include "haepo/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "haepo/error.hpp"

namespace haepo {

void validate(const TrajectoryRecord& traj) {
  const std::size_t n = traj.actions.size();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "empty trajectory");
  if (traj.states.size() != n || traj.rewards.size() != n ||
      traj.step_log_probs.size() != n) {
    throw Error(ErrorCode::ShapeMismatch,
                "trajectory sequences differ in length");
  }
  for (double lp : traj.step_log_probs) {
    if (!std::isfinite(lp)) {
      throw Error(ErrorCode::NonFinite, "non-finite step log-probability");
    }
  }
}

NormalizationMode parse_normalization_mode(std::string_view name) {
  if (name == "sum") return NormalizationMode::Sum;
  if (name == "zscore") return NormalizationMode::ZScore;
  if (name == "none") return NormalizationMode::None;
  throw Error(ErrorCode::Config,
              "unknown normalization mode '" + std::string(name) + "'");
}

std::string_view to_string(NormalizationMode mode) {
  switch (mode) {
    case NormalizationMode::Sum:
      return "sum";
    case NormalizationMode::ZScore:
      return "zscore";
    case NormalizationMode::None:
      return "none";
  }
  return "none";
}

double cumulative_log_likelihood(const TrajectoryRecord& traj) {
  validate(traj);
  return std::accumulate(traj.step_log_probs.begin(),
                         traj.step_log_probs.end(), 0.0);
}

double discounted_return(std::span<const double> rewards, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw Error(ErrorCode::Config, "discount must lie in [0, 1]");
  }
  double total = 0.0;
  double discount = 1.0;
  for (double r : rewards) {
    total += discount * r;
    discount *= gamma;
  }
  return total;
}

BatchScores score_batch(std::span<const TrajectoryRecord> batch,
                        double gamma) {
  BatchScores scores;
  scores.log_likelihoods.reserve(batch.size());
  scores.returns.reserve(batch.size());
  for (const auto& traj : batch) {
    scores.log_likelihoods.push_back(cumulative_log_likelihood(traj));
    scores.returns.push_back(discounted_return(traj.rewards, gamma));
  }
  return scores;
}

NormalizedReturns normalize_rewards(std::span<const double> returns,
                                    NormalizationMode mode, double baseline) {
  const std::size_t m = returns.size();
  if (m == 0) throw Error(ErrorCode::InvalidArgument, "empty return batch");
  for (double r : returns) {
    if (!std::isfinite(r)) throw Error(ErrorCode::NonFinite, "non-finite return");
  }

  NormalizedReturns out;
  out.values.assign(returns.begin(), returns.end());
  switch (mode) {
    case NormalizationMode::None:
      break;
    case NormalizationMode::Sum: {
      double sum = 0.0;
      for (double& v : out.values) {
        v -= baseline;
        sum += v;
      }
      if (sum == 0.0) {
        out.values.assign(m, 0.0);
        out.degenerate = true;
        break;
      }
      for (double& v : out.values) v /= sum;
      break;
    }
    case NormalizationMode::ZScore: {
      const double mean =
          std::accumulate(returns.begin(), returns.end(), 0.0) /
          static_cast<double>(m);
      double var = 0.0;
      for (double r : returns) var += (r - mean) * (r - mean);
      var /= static_cast<double>(m);
      const double sd = std::sqrt(var);
      // Spreads at rounding-noise level relative to the returns' magnitude
      // are treated as constant batches.
      if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
        out.values.assign(m, 0.0);
        out.degenerate = true;
        break;
      }
      for (double& v : out.values) v = (v - mean) / sd;
      break;
    }
  }
  return out;
}

}  // namespace haepo
