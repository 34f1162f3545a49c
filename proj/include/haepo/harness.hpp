#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "haepo/policy.hpp"
#include "haepo/trajectory.hpp"

namespace haepo {

enum class Algorithm { Haepo, HaepoNoReg, Ppo, Dpo };

Algorithm parse_algorithm(std::string_view name);
std::string_view to_string(Algorithm algo);

/// Policy class: a per-state logit table, one logit row shared by every
/// state, or the ReLU MLP (required for continuous observations).
enum class PolicyKind { Tabular, TabularShared, Mlp };

PolicyKind parse_policy_kind(std::string_view name);
std::string_view to_string(PolicyKind kind);

inline constexpr int kConfigSchemaVersion = 1;

/// Fully resolved settings of one experiment cell.
struct ExperimentConfig {
  std::string experiment = "bandit";
  Algorithm algorithm = Algorithm::Haepo;

  std::size_t bandit_arms = 10;
  double bandit_noise_std = 1.0;
  std::size_t bandit_pulls = 5000;
  int walk_goal = 10;
  std::size_t walk_max_steps = 500;
  std::size_t hidden_units = 128;
  PolicyKind policy = PolicyKind::Tabular;

  double learning_rate = 5e-3;
  std::size_t batch_size = 8;
  // Unset: bandits run bandit_pulls / batch_size updates, other experiments
  // run until time_budget_s is spent.
  std::optional<std::size_t> updates;
  // Stop once this much wall-clock time has elapsed; 0 disables the budget.
  double time_budget_s = 0.0;
  double beta_ent = 0.05;
  double lambda_kl = 0.05;
  NormalizationMode norm_mode = NormalizationMode::Sum;
  double gamma = 1.0;
  OptimizerMode optimizer = OptimizerMode::Sgd;
  double max_grad_norm = 0.0;  // 0 disables clipping
  double clip_epsilon = 0.2;
  int ppo_epochs = 1;
  double dpo_beta = 1.0;
  std::size_t ref_interval = 1;
  std::size_t smoothing_window = 100;
  // When false the wall_clock_s column is written as 0 so reruns are
  // byte-identical.
  bool record_timing = true;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};

  /// Update cap, or nothing when only the time budget bounds the run.
  std::optional<std::size_t> resolved_updates() const;
};

/// Paper-scale defaults for bandit, random-walk, chain-mdp, newsvendor and
/// cartpole.
ExperimentConfig default_config(std::string_view experiment);

void validate(const ExperimentConfig& cfg);

/// Assigns one key from the flat key-value format. Unknown keys throw.
void set_config_value(ExperimentConfig& cfg, std::string_view key,
                      std::string_view value);

/// Parses "key = value" lines ('#' starts a comment). The text must declare
/// schema_version first; `experiment`, when present, resets to that
/// experiment's defaults before the remaining keys apply.
ExperimentConfig parse_config_text(std::string_view text);
ExperimentConfig load_config_file(const std::filesystem::path& path);
std::string config_to_text(const ExperimentConfig& cfg);
std::string config_to_json(const ExperimentConfig& cfg);

struct MetricsRecord {
  std::size_t update = 0;
  std::uint64_t env_steps = 0;
  double mean_return = 0.0;
  double regret = 0.0;  // NaN outside bandit experiments
  double entropy = 0.0;
  double loss_total = 0.0;
  double loss_reward = 0.0;
  double loss_entropy = 0.0;
  double loss_kl = 0.0;
  double wall_clock_s = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const MetricsRecord& other) const;
};

struct RunResult {
  std::uint64_t seed = 0;
  std::vector<MetricsRecord> records;
  // Bandit only: one entry per pull, in pull order.
  std::vector<double> pull_regret;
  std::vector<double> pull_pseudo_regret;
  // Arm means of the bandit instance, for reference.
  std::vector<double> bandit_means;
  std::size_t degenerate_batches = 0;
  std::size_t skipped_updates = 0;
  bool aborted = false;
  std::string diagnostic;
};

/// Seeded training loop for one (config, seed) pair.
RunResult run_training(const ExperimentConfig& cfg, std::uint64_t seed);

/// First batch a fresh policy would collect for (cfg, seed); identical for
/// every algorithm.
std::vector<TrajectoryRecord> first_batch(const ExperimentConfig& cfg,
                                          std::uint64_t seed);

struct CurvePoint {
  double x = 0.0;
  double mean = 0.0;
  double std = 0.0;
};

struct Curve {
  std::string name;
  std::vector<CurvePoint> points;
};

/// Mean and population standard deviation of `values`.
CurvePoint mean_std(double x, std::span<const double> values);

/// Trailing moving average with the given window (shorter at the start).
std::vector<double> moving_average(std::span<const double> values,
                                   std::size_t window);

/// Linear interpolation of (xs, ys) at `at`, clamped to the end values.
double interpolate(std::span<const double> xs, std::span<const double> ys,
                   double at);

/// Per-update and (when timed) per-second curves across seeds.
std::vector<Curve> aggregate_runs(const ExperimentConfig& cfg,
                                  std::span<const RunResult> runs);

struct CellResult {
  std::string name;
  ExperimentConfig config;
  std::vector<RunResult> runs;
  std::vector<Curve> curves;
  std::vector<std::string> failures;
};

/// Runs every seed of one cell and aggregates the curves.
CellResult run_cell(const ExperimentConfig& cfg, std::string name = {});

struct SweepGrid {
  ExperimentConfig base;
  std::vector<double> learning_rates;
  std::vector<std::size_t> batch_sizes;
  std::vector<Algorithm> algorithms;
  std::vector<NormalizationMode> norm_modes;
};

std::vector<ExperimentConfig> expand_grid(const SweepGrid& grid);
std::string cell_name(const ExperimentConfig& cfg);
std::vector<CellResult> run_sweep(const SweepGrid& grid);

inline constexpr std::string_view kRunCsvHeader =
    "update,env_steps,mean_return,regret,entropy,loss_total,loss_reward,"
    "loss_entropy,loss_kl,wall_clock_s,seed";

std::string records_to_csv(std::span<const MetricsRecord> records);
std::vector<MetricsRecord> records_from_csv(std::string_view text);
std::string curve_to_csv(const Curve& curve);
Curve curve_from_csv(std::string name, std::string_view text);

/// Writes every run CSV, the aggregate curves and a manifest for the cells
/// under `out_dir`. Files are written to a temporary name and renamed.
void emit_results(std::span<const CellResult> cells,
                  const std::filesystem::path& out_dir);

std::string version_string();
std::string platform_string();

}  // namespace haepo
