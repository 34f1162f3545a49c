#include "haepo/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

#include "haepo/error.hpp"
#include "haepo/loss.hpp"
#include "haepo/rng.hpp"

namespace haepo {
namespace {

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void record(InputGroupResult& group, const std::vector<double>& analytic,
            const std::vector<double>& numeric) {
  const double err = max_abs_diff(analytic, numeric);
  if (err >= group.max_abs_error) {
    group.max_abs_error = err;
    group.gradient_norm = norm(analytic);
  }
}

}  // namespace

std::vector<double> finite_difference_gradient(const ScalarFunction& f,
                                               std::span<const double> x,
                                               double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "eps must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double up = f(probe);
    probe[i] = x[i] - eps;
    const double down = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error(ErrorCode::NonFinite, "function is not finite near the probe point");
    }
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

GradCheckReport check_haepo_gradients(const GradCheckOptions& options) {
  if (options.trials == 0 || options.min_batch == 0 ||
      options.max_batch < options.min_batch) {
    throw Error(ErrorCode::Config, "invalid gradient-check options");
  }
  const LossConfig cfg{options.beta_ent, options.lambda_kl, NormalizationMode::None};

  GradCheckReport report;
  report.options = options;
  report.groups = {{"new_lp"}, {"old_lp"}, {"returns"}};

  Rng rng(options.seed, /*stream=*/0x6C3C);
  const std::size_t span = options.max_batch - options.min_batch + 1;
  for (std::size_t trial = 0; trial < options.trials; ++trial) {
    const std::size_t m = options.min_batch +
                          static_cast<std::size_t>(rng.uniform() * static_cast<double>(span));
    GradCheckProbe probe;
    for (std::size_t k = 0; k < m; ++k) probe.log_likelihoods.push_back(rng.normal());
    for (std::size_t k = 0; k < m; ++k) probe.ref_log_likelihoods.push_back(rng.normal());
    for (std::size_t k = 0; k < m; ++k) probe.returns.push_back(std::abs(rng.normal()));

    const auto& L = probe.log_likelihoods;
    const auto& L_ref = probe.ref_log_likelihoods;
    const auto& R = probe.returns;

    const LossBreakdown loss = haepo_loss(L, L_ref, R, cfg);
    record(report.groups[0], loss.grad_L,
           finite_difference_gradient(
               [&](std::span<const double> x) { return haepo_loss(x, L_ref, R, cfg).total; },
               L, options.eps));

    record(report.groups[1], haepo_ref_gradient(L, L_ref, cfg),
           finite_difference_gradient(
               [&](std::span<const double> x) { return haepo_loss(L, x, R, cfg).total; },
               L_ref, options.eps));

    // The loss is linear in the returns with slope -w.
    const PLWeights w = pl_weights(L);
    std::vector<double> grad_R(m);
    for (std::size_t k = 0; k < m; ++k) grad_R[k] = -w.w[k];
    record(report.groups[2], grad_R,
           finite_difference_gradient(
               [&](std::span<const double> x) { return haepo_loss(L, L_ref, x, cfg).total; },
               R, options.eps));

    report.probes.push_back(std::move(probe));
  }

  report.passed = std::all_of(report.groups.begin(), report.groups.end(),
                              [&](const InputGroupResult& g) {
                                return g.max_abs_error < options.threshold;
                              });
  return report;
}

std::string report_to_json(const GradCheckReport& report) {
  const auto& o = report.options;
  nlohmann::json j;
  j["epsilon"] = o.eps;
  j["threshold"] = o.threshold;
  j["trials"] = o.trials;
  j["batch_size_range"] = {o.min_batch, o.max_batch};
  j["beta_ent"] = o.beta_ent;
  j["lambda_kl"] = o.lambda_kl;
  j["seed"] = o.seed;
  j["passed"] = report.passed;
  for (const auto& g : report.groups) {
    j["max_abs_error"][g.name] = g.max_abs_error;
    j["gradient_norm"][g.name] = g.gradient_norm;
  }
  auto& probes = j["probes"] = nlohmann::json::array();
  for (const auto& p : report.probes) {
    probes.push_back({{"new_lp", p.log_likelihoods},
                      {"old_lp", p.ref_log_likelihoods},
                      {"returns", p.returns}});
  }
  return j.dump(2);
}

std::string report_to_text(const GradCheckReport& report) {
  std::ostringstream out;
  char line[128];
  out << "Maximum absolute gradient errors:\n";
  for (const auto& g : report.groups) {
    std::snprintf(line, sizeof line, "  %-8s: %.2e\n", g.name.c_str(), g.max_abs_error);
    out << line;
  }
  out << "Gradient norms:\n";
  for (const auto& g : report.groups) {
    std::snprintf(line, sizeof line, "  ||grad_%s|| = %.6f\n", g.name.c_str(), g.gradient_norm);
    out << line;
  }
  out << (report.passed ? "PASS" : "FAIL") << " (threshold "
      << report.options.threshold << ", eps " << report.options.eps << ")\n";
  return out.str();
}

}  // namespace haepo
