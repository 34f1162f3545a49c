#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "haepo/trajectory.hpp"

namespace haepo {

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
std::vector<double> finite_difference_gradient(const ScalarFunction& f,
                                               std::span<const double> x,
                                               double eps);

struct GradCheckOptions {
  std::size_t min_batch = 2;
  std::size_t max_batch = 8;
  std::size_t trials = 100;
  double eps = 1e-6;
  double threshold = 1e-6;
  double beta_ent = 0.05;
  double lambda_kl = 0.05;
  std::uint64_t seed = 0;
};

struct GradCheckProbe {
  std::vector<double> log_likelihoods;
  std::vector<double> ref_log_likelihoods;
  std::vector<double> returns;
};

struct InputGroupResult {
  std::string name;
  double max_abs_error = 0.0;
  // Analytic gradient norm of the trial with the largest error.
  double gradient_norm = 0.0;
};

struct GradCheckReport {
  GradCheckOptions options;
  std::vector<InputGroupResult> groups;  // new_lp, old_lp, returns
  std::vector<GradCheckProbe> probes;
  bool passed = false;
};

/// Probes d loss / d L, d loss / d L_ref and d loss / d returns against
/// central differences on seeded random batches. L and L_ref are standard
/// normal draws, returns are |standard normal| draws, and the loss sees the
/// returns without further normalization.
GradCheckReport check_haepo_gradients(const GradCheckOptions& options);

std::string report_to_json(const GradCheckReport& report);
/// Plain-text summary: max errors then gradient norms per input group.
std::string report_to_text(const GradCheckReport& report);

}  // namespace haepo
