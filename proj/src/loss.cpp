#include "haepo/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "haepo/error.hpp"

namespace haepo {
namespace {

void check_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::NonFinite, std::string("non-finite entry in ") + what);
    }
  }
}

void check_batch(std::span<const double> L, std::span<const double> L_ref,
                 std::span<const double> R) {
  if (L.empty()) throw Error(ErrorCode::InvalidArgument, "empty batch");
  if (L_ref.size() != L.size() || R.size() != L.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                "log-likelihood, reference and return batches differ in size");
  }
  check_finite(L, "log-likelihoods");
  check_finite(L_ref, "reference log-likelihoods");
  check_finite(R, "returns");
}

double weighted_mean(const std::vector<double>& w, const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * x[k];
  return s;
}

// grad_j = w_j (c_j - sum_k w_k c_k): the coefficient vector c pulled back
// through the PL Jacobian.
std::vector<double> pull_back(const std::vector<double>& w,
                              const std::vector<double>& c) {
  const double mean = weighted_mean(w, c);
  std::vector<double> g(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) g[j] = w[j] * (c[j] - mean);
  return g;
}

struct Prepared {
  PLWeights w;
  PLWeights w_ref;
  NormalizedReturns returns;
  std::vector<double> D;
};

Prepared prepare(std::span<const double> L, std::span<const double> L_ref,
                 std::span<const double> R, const LossConfig& cfg) {
  validate(cfg);
  check_batch(L, L_ref, R);
  Prepared p{pl_weights(L), pl_weights(L_ref),
             normalize_rewards(R, cfg.norm_mode), {}};
  p.D.resize(L.size());
  for (std::size_t k = 0; k < L.size(); ++k) {
    p.D[k] = p.w.log_w[k] - p.w_ref.log_w[k];
  }
  return p;
}

std::vector<double> reward_coefficients(const Prepared& p) {
  std::vector<double> c(p.D.size());
  for (std::size_t k = 0; k < c.size(); ++k) c[k] = -p.returns.values[k];
  return c;
}

std::vector<double> entropy_coefficients(const Prepared& p, double beta) {
  std::vector<double> c(p.D.size());
  for (std::size_t k = 0; k < c.size(); ++k) c[k] = beta * (1.0 + p.w.log_w[k]);
  return c;
}

std::vector<double> kl_coefficients(const Prepared& p, double lambda) {
  std::vector<double> c(p.D.size());
  for (std::size_t k = 0; k < c.size(); ++k) c[k] = lambda * p.D[k];
  return c;
}

}  // namespace

void validate(const LossConfig& cfg) {
  if (!std::isfinite(cfg.beta_ent) || cfg.beta_ent < 0.0 ||
      !std::isfinite(cfg.lambda_kl) || cfg.lambda_kl < 0.0) {
    throw Error(ErrorCode::Config,
                "entropy and KL coefficients must be finite and non-negative");
  }
}

PLWeights pl_weights(std::span<const double> L) {
  if (L.empty()) throw Error(ErrorCode::InvalidArgument, "empty batch");
  check_finite(L, "log-likelihoods");

  const double max = *std::max_element(L.begin(), L.end());
  double sum = 0.0;
  for (double l : L) sum += std::exp(l - max);
  const double log_sum = std::log(sum);

  PLWeights out;
  out.w.resize(L.size());
  out.log_w.resize(L.size());
  for (std::size_t k = 0; k < L.size(); ++k) {
    // Shifting every score by a constant leaves L[k] - max unchanged.
    out.log_w[k] = (L[k] - max) - log_sum;
    out.w[k] = std::exp(out.log_w[k]);
  }
  return out;
}

Eigen::MatrixXd pl_weight_jacobian(const PLWeights& weights) {
  const auto m = static_cast<Eigen::Index>(weights.size());
  if (m == 0) throw Error(ErrorCode::InvalidArgument, "empty weights");
  Eigen::MatrixXd J(m, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    for (Eigen::Index j = 0; j < m; ++j) {
      J(k, j) = weights.w[k] * ((k == j ? 1.0 : 0.0) - weights.w[j]);
    }
  }
  return J;
}

namespace {

// w D - w + w_ref = w_ref (e^D (D - 1) + 1): sums to the same KL because both
// weight vectors sum to one, but every summand is non-negative, so rounding
// cannot drive the total below zero.
double kl_summand(double w, double w_ref, double D) {
  if (std::abs(D) >= 0.1) return w * (D - 1.0) + w_ref;
  double term = D * D / 2.0, series = term;
  for (int n = 3; n <= 12; ++n) {
    term *= D / n;
    series += term * (n - 1);
  }
  return w_ref * series;
}

}  // namespace

LossBreakdown haepo_loss(std::span<const double> L,
                         std::span<const double> L_ref,
                         std::span<const double> R, const LossConfig& cfg) {
  const Prepared p = prepare(L, L_ref, R, cfg);
  const auto& w = p.w.w;

  LossBreakdown out;
  out.degenerate_batch = p.returns.degenerate;
  for (std::size_t k = 0; k < w.size(); ++k) {
    out.reward_term -= w[k] * p.returns.values[k];
    out.entropy_term += w[k] * p.w.log_w[k];
    out.kl_term += kl_summand(w[k], p.w_ref.w[k], p.D[k]);
  }
  out.entropy_term *= cfg.beta_ent;
  out.kl_term *= cfg.lambda_kl;
  out.total = out.reward_term + out.entropy_term + out.kl_term;

  std::vector<double> c(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    c[k] = -p.returns.values[k] + cfg.beta_ent * (1.0 + p.w.log_w[k]) +
           cfg.lambda_kl * p.D[k];
  }
  out.grad_L = pull_back(w, c);
  out.D = p.D;
  return out;
}

std::vector<double> haepo_gradient(std::span<const double> L,
                                   std::span<const double> L_ref,
                                   std::span<const double> R,
                                   const LossConfig& cfg) {
  return haepo_loss(L, L_ref, R, cfg).grad_L;
}

GradientForces gradient_decomposition(std::span<const double> L,
                                      std::span<const double> L_ref,
                                      std::span<const double> R,
                                      const LossConfig& cfg) {
  const Prepared p = prepare(L, L_ref, R, cfg);
  GradientForces f;
  f.reward = pull_back(p.w.w, reward_coefficients(p));
  f.entropy = pull_back(p.w.w, entropy_coefficients(p, cfg.beta_ent));
  f.kl = pull_back(p.w.w, kl_coefficients(p, cfg.lambda_kl));
  return f;
}

std::vector<double> haepo_ref_gradient(std::span<const double> L,
                                       std::span<const double> L_ref,
                                       const LossConfig& cfg) {
  validate(cfg);
  if (L.size() != L_ref.size()) {
    throw Error(ErrorCode::ShapeMismatch, "reference batch size mismatch");
  }
  const PLWeights w = pl_weights(L);
  const PLWeights w_ref = pl_weights(L_ref);
  std::vector<double> g(L.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    g[k] = cfg.lambda_kl * (w_ref.w[k] - w.w[k]);
  }
  return g;
}

Eigen::VectorXd chain_to_policy(std::span<const double> grad_L,
                                std::span<const Eigen::VectorXd> scores) {
  if (grad_L.size() != scores.size() || scores.empty()) {
    throw Error(ErrorCode::ShapeMismatch,
                "one score vector per trajectory is required");
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(scores.front().size());
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (scores[k].size() != out.size()) {
      throw Error(ErrorCode::ShapeMismatch, "score vectors differ in size");
    }
    out += grad_L[k] * scores[k];
  }
  return out;
}

Eigen::VectorXd score_function_gradient(
    const LossBreakdown& loss, std::span<const Eigen::VectorXd> scores) {
  Eigen::VectorXd out = chain_to_policy(loss.grad_L, scores);
  for (const auto& s : scores) out += loss.total * s;
  return out;
}

}  // namespace haepo
