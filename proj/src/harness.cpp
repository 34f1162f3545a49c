#include "haepo/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "haepo/baselines.hpp"
#include "haepo/environments.hpp"
#include "haepo/error.hpp"
#include "haepo/loss.hpp"

#ifndef HAEPO_VERSION
#define HAEPO_VERSION "unknown"
#endif

namespace haepo {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream ids keep environment noise, rollouts and initialisation independent.
constexpr std::uint64_t kRolloutStream = 1;
constexpr std::uint64_t kInitStream = 2;

EnvironmentSpec environment_spec(const ExperimentConfig& cfg, std::uint64_t seed) {
  EnvironmentSpec spec;
  spec.name = cfg.experiment;
  spec.bandit_arms = cfg.bandit_arms;
  spec.bandit_noise_std = cfg.bandit_noise_std;
  spec.walk_goal = cfg.walk_goal;
  spec.walk_max_steps = cfg.walk_max_steps;
  spec.seed = seed;
  return spec;
}

std::unique_ptr<Policy> make_policy(const ExperimentConfig& cfg,
                                    const Environment& env, std::uint64_t seed) {
  switch (cfg.policy) {
    case PolicyKind::Tabular:
      if (env.state_count() == 0) {
        throw Error(ErrorCode::Config, env.name() + " has no discrete state set");
      }
      return std::make_unique<TabularSoftmaxPolicy>(env.state_count(), env.action_count());
    case PolicyKind::TabularShared:
      return std::make_unique<TabularSoftmaxPolicy>(
          TabularSoftmaxPolicy::shared(env.action_count()));
    case PolicyKind::Mlp:
      break;
  }
  Rng init(seed, kInitStream);
  return std::make_unique<MlpPolicy>(env.observation_dim(), cfg.hidden_units,
                                     env.action_count(), init);
}

std::vector<TrajectoryRecord> collect(const Policy& policy, Environment& env,
                                      Rng& rng, std::size_t m) {
  std::vector<TrajectoryRecord> batch;
  batch.reserve(m);
  for (std::size_t k = 0; k < m; ++k) {
    batch.push_back(sample_trajectory(policy, env, rng, env.max_steps()));
  }
  return batch;
}

double mean_action_entropy(const Policy& policy,
                           std::span<const TrajectoryRecord> batch) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& traj : batch) {
    for (const auto& s : traj.states) {
      total += entropy(policy.action_distribution(s));
      ++n;
    }
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

struct UpdateOutcome {
  Eigen::VectorXd grad;
  LossBreakdown loss;
  bool skip = false;
};

UpdateOutcome haepo_update(const ExperimentConfig& cfg, const Policy& policy,
                           const BatchScores& scores,
                           std::span<const double> ref_L,
                           std::span<const TrajectoryRecord> batch) {
  LossConfig loss_cfg{cfg.beta_ent, cfg.lambda_kl, cfg.norm_mode};
  if (cfg.algorithm == Algorithm::HaepoNoReg) {
    loss_cfg.beta_ent = 0.0;
    loss_cfg.lambda_kl = 0.0;
  }
  UpdateOutcome out;
  out.loss = haepo_loss(scores.log_likelihoods, ref_L, scores.returns, loss_cfg);
  std::vector<Eigen::VectorXd> per_traj;
  per_traj.reserve(batch.size());
  for (const auto& traj : batch) {
    per_traj.push_back(accumulate_log_likelihood_gradient(policy, traj));
  }
  out.grad = chain_to_policy(out.loss.grad_L, per_traj);
  return out;
}

UpdateOutcome ppo_update(const ExperimentConfig& cfg, const Policy& policy,
                         const BatchScores& scores,
                         std::span<const TrajectoryRecord> batch) {
  const PpoConfig ppo{cfg.clip_epsilon, cfg.ppo_epochs};
  const auto traj_adv = batch_advantages(scores.returns);
  std::vector<double> new_lp, old_lp, adv;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const auto replay = replay_step_log_probs(policy, batch[k]);
    new_lp.insert(new_lp.end(), replay.begin(), replay.end());
    old_lp.insert(old_lp.end(), batch[k].step_log_probs.begin(),
                  batch[k].step_log_probs.end());
    adv.insert(adv.end(), batch[k].size(), traj_adv[k]);
  }
  const PpoLoss loss = ppo_loss(new_lp, old_lp, adv, ppo);

  UpdateOutcome out;
  out.loss.reward_term = loss.loss;
  out.loss.total = loss.loss;
  out.grad = Eigen::VectorXd::Zero(policy.parameter_count());
  std::size_t offset = 0;
  for (const auto& traj : batch) {
    out.grad += accumulate_weighted_gradient(
        policy, traj, std::span(loss.grad_new).subspan(offset, traj.size()));
    offset += traj.size();
  }
  return out;
}

UpdateOutcome dpo_update(const ExperimentConfig& cfg, const Policy& policy,
                         const BatchScores& scores, std::span<const double> ref_L,
                         std::span<const TrajectoryRecord> batch) {
  UpdateOutcome out;
  out.grad = Eigen::VectorXd::Zero(policy.parameter_count());
  const auto pair = select_preference_pair(scores.returns);
  if (!pair) {
    out.skip = true;
    return out;
  }
  const auto [win, lose] = *pair;
  const DpoLoss loss =
      dpo_loss(scores.log_likelihoods[win], scores.log_likelihoods[lose],
               ref_L[win], ref_L[lose], DpoConfig{cfg.dpo_beta});
  out.loss.reward_term = loss.loss;
  out.loss.total = loss.loss;
  out.grad = loss.grad_winner * accumulate_log_likelihood_gradient(policy, batch[win]) +
             loss.grad_loser * accumulate_log_likelihood_gradient(policy, batch[lose]);
  return out;
}

}  // namespace

std::vector<TrajectoryRecord> first_batch(const ExperimentConfig& cfg,
                                          std::uint64_t seed) {
  validate(cfg);
  auto env = make_environment(environment_spec(cfg, seed));
  auto policy = make_policy(cfg, *env, seed);
  Rng rng(seed, kRolloutStream);
  return collect(*policy, *env, rng, cfg.batch_size);
}

RunResult run_training(const ExperimentConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  RunResult result;
  result.seed = seed;

  auto env = make_environment(environment_spec(cfg, seed));
  auto* bandit = dynamic_cast<GaussianBandit*>(env.get());
  if (bandit) result.bandit_means = bandit->means();
  auto policy = make_policy(cfg, *env, seed);
  auto reference = policy->clone();
  Rng rng(seed, kRolloutStream);

  OptimizerConfig opt_cfg;
  opt_cfg.mode = cfg.optimizer;
  opt_cfg.learning_rate = cfg.learning_rate;
  if (cfg.max_grad_norm > 0.0) opt_cfg.max_grad_norm = cfg.max_grad_norm;
  Optimizer optimizer(opt_cfg, policy->parameter_count());

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  const auto updates = cfg.resolved_updates();
  std::uint64_t env_steps = 0;
  for (std::size_t u = 1; !updates || u <= *updates; ++u) {
    if (cfg.time_budget_s > 0.0 && elapsed() >= cfg.time_budget_s) break;

    const auto batch = collect(*policy, *env, rng, cfg.batch_size);
    const BatchScores scores = score_batch(batch, cfg.gamma);
    std::vector<double> ref_L(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k) {
      ref_L[k] = replay_log_likelihood(*reference, batch[k]);
    }

    MetricsRecord rec;
    rec.update = u;
    rec.seed = seed;
    double undiscounted = 0.0;
    for (const auto& traj : batch) {
      env_steps += traj.size();
      undiscounted += std::accumulate(traj.rewards.begin(), traj.rewards.end(), 0.0);
    }
    rec.env_steps = env_steps;
    rec.mean_return = undiscounted / static_cast<double>(batch.size());
    rec.entropy = mean_action_entropy(*policy, batch);
    rec.regret = kNaN;
    if (bandit) {
      double total = 0.0;
      for (const auto& traj : batch) {
        const double r = per_step_regret(*bandit, traj.rewards).front();
        const std::size_t arm = traj.actions.front();
        result.pull_regret.push_back(r);
        result.pull_pseudo_regret.push_back(
            per_step_pseudo_regret(*bandit, std::span(&arm, 1)).front());
        total += r;
      }
      rec.regret = total / static_cast<double>(batch.size());
    }

    try {
      UpdateOutcome outcome;
      switch (cfg.algorithm) {
        case Algorithm::Haepo:
        case Algorithm::HaepoNoReg:
          outcome = haepo_update(cfg, *policy, scores, ref_L, batch);
          break;
        case Algorithm::Ppo:
          outcome = ppo_update(cfg, *policy, scores, batch);
          break;
        case Algorithm::Dpo:
          outcome = dpo_update(cfg, *policy, scores, ref_L, batch);
          break;
      }
      if (outcome.loss.degenerate_batch) ++result.degenerate_batches;
      if (!std::isfinite(outcome.loss.total)) {
        throw Error(ErrorCode::NonFinite, "non-finite loss");
      }
      rec.loss_total = outcome.loss.total;
      rec.loss_reward = outcome.loss.reward_term;
      rec.loss_entropy = outcome.loss.entropy_term;
      rec.loss_kl = outcome.loss.kl_term;

      if (u % cfg.ref_interval == 0) reference->parameters() = policy->parameters();
      if (outcome.skip) {
        ++result.skipped_updates;
      } else {
        optimizer.apply(policy->parameters(), std::move(outcome.grad));
        // Further PPO epochs reuse the batch with the updated policy.
        for (int epoch = 1; cfg.algorithm == Algorithm::Ppo && epoch < cfg.ppo_epochs; ++epoch) {
          optimizer.apply(policy->parameters(), ppo_update(cfg, *policy, scores, batch).grad);
        }
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFinite) throw;
      result.aborted = true;
      result.diagnostic = "update " + std::to_string(u) + ": " + e.what();
      rec.wall_clock_s = cfg.record_timing ? elapsed() : 0.0;
      result.records.push_back(rec);
      break;
    }

    rec.wall_clock_s = cfg.record_timing ? elapsed() : 0.0;
    result.records.push_back(rec);
  }
  return result;
}

// -- aggregation -------------------------------------------------------------

CurvePoint mean_std(double x, std::span<const double> values) {
  CurvePoint p{x, 0.0, 0.0};
  if (values.empty()) return p;
  const double n = static_cast<double>(values.size());
  p.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - p.mean) * (v - p.mean);
  p.std = std::sqrt(var / n);
  return p;
}

std::vector<double> moving_average(std::span<const double> values,
                                   std::size_t window) {
  std::vector<double> out(values.size());
  double running = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    running += values[i];
    if (i >= window) running -= values[i - window];
    out[i] = running / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

double interpolate(std::span<const double> xs, std::span<const double> ys,
                   double at) {
  if (xs.empty() || xs.size() != ys.size()) {
    throw Error(ErrorCode::InvalidArgument, "interpolation needs matching samples");
  }
  if (at <= xs.front()) return ys.front();
  if (at >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), at);
  const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  const std::size_t lo = hi - 1;
  const double span = xs[hi] - xs[lo];
  if (span <= 0.0) return ys[hi];
  return ys[lo] + (ys[hi] - ys[lo]) * (at - xs[lo]) / span;
}

std::vector<Curve> aggregate_runs(const ExperimentConfig& cfg,
                                  std::span<const RunResult> runs) {
  std::vector<Curve> curves;
  if (runs.empty()) return curves;

  std::size_t common = std::numeric_limits<std::size_t>::max();
  for (const auto& r : runs) common = std::min(common, r.records.size());

  auto per_update = [&](const std::string& name, auto field) {
    Curve c{name, {}};
    std::vector<double> column(runs.size());
    for (std::size_t i = 0; i < common; ++i) {
      for (std::size_t s = 0; s < runs.size(); ++s) column[s] = field(runs[s].records[i]);
      c.points.push_back(mean_std(static_cast<double>(runs.front().records[i].update), column));
    }
    curves.push_back(std::move(c));
  };
  per_update("mean_return", [](const MetricsRecord& r) { return r.mean_return; });
  per_update("entropy", [](const MetricsRecord& r) { return r.entropy; });
  per_update("loss_total", [](const MetricsRecord& r) { return r.loss_total; });

  if (cfg.experiment == "bandit") {
    per_update("regret", [](const MetricsRecord& r) { return r.regret; });
    auto per_pull = [&](const std::string& name, auto member) {
      std::size_t pulls = std::numeric_limits<std::size_t>::max();
      for (const auto& r : runs) pulls = std::min(pulls, (r.*member).size());
      std::vector<std::vector<double>> smoothed;
      for (const auto& r : runs) smoothed.push_back(moving_average(r.*member, cfg.smoothing_window));
      Curve c{name, {}};
      std::vector<double> column(runs.size());
      for (std::size_t i = 0; i < pulls; ++i) {
        for (std::size_t s = 0; s < runs.size(); ++s) column[s] = smoothed[s][i];
        c.points.push_back(mean_std(static_cast<double>(i + 1), column));
      }
      curves.push_back(std::move(c));
    };
    per_pull("regret_per_pull", &RunResult::pull_regret);
    per_pull("pseudo_regret_per_pull", &RunResult::pull_pseudo_regret);
  }

  if (cfg.record_timing) {
    // Mean return against elapsed seconds on a shared one-second grid.
    double horizon = cfg.time_budget_s;
    if (horizon <= 0.0) {
      for (const auto& r : runs) {
        if (!r.records.empty()) horizon = std::max(horizon, r.records.back().wall_clock_s);
      }
    }
    Curve c{"mean_return_vs_time", {}};
    std::vector<std::vector<double>> xs, ys;
    for (const auto& r : runs) {
      if (r.records.empty()) continue;
      xs.emplace_back();
      ys.emplace_back();
      for (const auto& rec : r.records) {
        xs.back().push_back(rec.wall_clock_s);
        ys.back().push_back(rec.mean_return);
      }
    }
    if (!xs.empty()) {
      std::vector<double> column(xs.size());
      for (double t = 0.0; t <= std::ceil(horizon); t += 1.0) {
        for (std::size_t s = 0; s < xs.size(); ++s) column[s] = interpolate(xs[s], ys[s], t);
        c.points.push_back(mean_std(t, column));
      }
      curves.push_back(std::move(c));
    }
  }
  return curves;
}

// -- cells and sweeps --------------------------------------------------------

std::string cell_name(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << cfg.experiment << '_' << to_string(cfg.algorithm) << "_lr" << cfg.learning_rate
      << "_m" << cfg.batch_size << '_' << to_string(cfg.norm_mode);
  return out.str();
}

CellResult run_cell(const ExperimentConfig& cfg, std::string name) {
  validate(cfg);
  CellResult cell;
  cell.name = name.empty() ? cell_name(cfg) : std::move(name);
  cell.config = cfg;

  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(),
                                                     cfg.seeds.size()));
  std::vector<std::future<RunResult>> pending;
  std::size_t next = 0;
  auto launch = [&] {
    const std::uint64_t seed = cfg.seeds[next++];
    pending.push_back(std::async(std::launch::async, [&cfg, seed] {
      try {
        return run_training(cfg, seed);
      } catch (const std::exception& e) {
        RunResult failed;
        failed.seed = seed;
        failed.aborted = true;
        failed.diagnostic = e.what();
        return failed;
      }
    }));
  };
  while (next < cfg.seeds.size() && pending.size() < workers) launch();
  for (std::size_t i = 0; i < pending.size(); ++i) {
    cell.runs.push_back(pending[i].get());
    if (next < cfg.seeds.size()) launch();
  }

  for (const auto& r : cell.runs) {
    if (r.aborted) {
      cell.failures.push_back("seed " + std::to_string(r.seed) + ": " + r.diagnostic);
    }
  }
  cell.curves = aggregate_runs(cfg, cell.runs);
  return cell;
}

std::vector<ExperimentConfig> expand_grid(const SweepGrid& grid) {
  const auto lrs = grid.learning_rates.empty()
                       ? std::vector<double>{grid.base.learning_rate}
                       : grid.learning_rates;
  const auto batches = grid.batch_sizes.empty()
                           ? std::vector<std::size_t>{grid.base.batch_size}
                           : grid.batch_sizes;
  const auto algos = grid.algorithms.empty()
                         ? std::vector<Algorithm>{grid.base.algorithm}
                         : grid.algorithms;
  const auto norms = grid.norm_modes.empty()
                         ? std::vector<NormalizationMode>{grid.base.norm_mode}
                         : grid.norm_modes;
  std::vector<ExperimentConfig> cells;
  for (Algorithm algo : algos) {
    for (NormalizationMode norm : norms) {
      for (double lr : lrs) {
        for (std::size_t m : batches) {
          ExperimentConfig c = grid.base;
          c.algorithm = algo;
          c.norm_mode = norm;
          c.learning_rate = lr;
          c.batch_size = m;
          cells.push_back(std::move(c));
        }
      }
    }
  }
  return cells;
}

std::vector<CellResult> run_sweep(const SweepGrid& grid) {
  std::vector<CellResult> out;
  for (const auto& cfg : expand_grid(grid)) {
    try {
      out.push_back(run_cell(cfg));
    } catch (const Error& e) {
      CellResult failed;
      failed.name = cell_name(cfg);
      failed.config = cfg;
      failed.failures.push_back(e.what());
      out.push_back(std::move(failed));
    }
  }
  return out;
}

// -- CSV ---------------------------------------------------------------------

namespace {

void append_double(std::string& out, double v) {
  if (std::isnan(v)) {
    out += "nan";
    return;
  }
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

template <typename T>
void append_integer(std::string& out, T v) {
  char buf[24];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  while (true) {
    const auto comma = line.find(',');
    fields.push_back(line.substr(0, comma));
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return fields;
}

template <typename T>
T parse_field(std::string_view field) {
  T out{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(ErrorCode::InvalidArgument, "bad CSV field '" + std::string(field) + "'");
  }
  return out;
}

bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out << content;
    if (!out) throw Error(ErrorCode::Io, "failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace

bool MetricsRecord::operator==(const MetricsRecord& o) const {
  return update == o.update && env_steps == o.env_steps &&
         same(mean_return, o.mean_return) && same(regret, o.regret) &&
         same(entropy, o.entropy) && same(loss_total, o.loss_total) &&
         same(loss_reward, o.loss_reward) && same(loss_entropy, o.loss_entropy) &&
         same(loss_kl, o.loss_kl) && same(wall_clock_s, o.wall_clock_s) && seed == o.seed;
}

std::string records_to_csv(std::span<const MetricsRecord> records) {
  if (records.empty()) throw Error(ErrorCode::InvalidArgument, "no records to write");
  std::string out(kRunCsvHeader);
  out += '\n';
  for (const auto& r : records) {
    append_integer(out, r.update);
    out += ',';
    append_integer(out, r.env_steps);
    for (double v : {r.mean_return, r.regret, r.entropy, r.loss_total, r.loss_reward,
                     r.loss_entropy, r.loss_kl, r.wall_clock_s}) {
      out += ',';
      append_double(out, v);
    }
    out += ',';
    append_integer(out, r.seed);
    out += '\n';
  }
  return out;
}

std::vector<MetricsRecord> records_from_csv(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines.front() != kRunCsvHeader) {
    throw Error(ErrorCode::InvalidArgument, "run CSV header mismatch");
  }
  std::vector<MetricsRecord> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_fields(lines[i]);
    if (f.size() != 11) throw Error(ErrorCode::InvalidArgument, "run CSV row has wrong width");
    MetricsRecord r;
    r.update = parse_field<std::size_t>(f[0]);
    r.env_steps = parse_field<std::uint64_t>(f[1]);
    r.mean_return = parse_field<double>(f[2]);
    r.regret = parse_field<double>(f[3]);
    r.entropy = parse_field<double>(f[4]);
    r.loss_total = parse_field<double>(f[5]);
    r.loss_reward = parse_field<double>(f[6]);
    r.loss_entropy = parse_field<double>(f[7]);
    r.loss_kl = parse_field<double>(f[8]);
    r.wall_clock_s = parse_field<double>(f[9]);
    r.seed = parse_field<std::uint64_t>(f[10]);
    out.push_back(r);
  }
  return out;
}

std::string curve_to_csv(const Curve& curve) {
  if (curve.points.empty()) throw Error(ErrorCode::InvalidArgument, "empty curve");
  std::string out = "x,mean,std\n";
  for (const auto& p : curve.points) {
    append_double(out, p.x);
    out += ',';
    append_double(out, p.mean);
    out += ',';
    append_double(out, p.std);
    out += '\n';
  }
  return out;
}

Curve curve_from_csv(std::string name, std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines.front() != "x,mean,std") {
    throw Error(ErrorCode::InvalidArgument, "aggregate CSV header mismatch");
  }
  Curve c{std::move(name), {}};
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_fields(lines[i]);
    if (f.size() != 3) throw Error(ErrorCode::InvalidArgument, "aggregate CSV row has wrong width");
    c.points.push_back({parse_field<double>(f[0]), parse_field<double>(f[1]),
                        parse_field<double>(f[2])});
  }
  return c;
}

// -- emission ----------------------------------------------------------------

std::string version_string() { return HAEPO_VERSION; }

std::string platform_string() {
  std::ostringstream out;
#if defined(__linux__)
  out << "linux";
#elif defined(__APPLE__)
  out << "macos";
#elif defined(_WIN32)
  out << "windows";
#else
  out << "unknown-os";
#endif
#if defined(__x86_64__) || defined(_M_X64)
  out << "-x86_64";
#elif defined(__aarch64__)
  out << "-aarch64";
#endif
#if defined(__clang__)
  out << " clang " << __clang_major__ << '.' << __clang_minor__;
#elif defined(__GNUC__)
  out << " gcc " << __GNUC__ << '.' << __GNUC_MINOR__;
#endif
  return out.str();
}

void emit_results(std::span<const CellResult> cells,
                  const std::filesystem::path& out_dir) {
  if (cells.empty()) throw Error(ErrorCode::InvalidArgument, "nothing to emit");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + out_dir.string() + ": " + ec.message());

  nlohmann::json manifest;
  manifest["version"] = version_string();
  manifest["platform"] = platform_string();
  manifest["std_convention"] = "population";
  manifest["run_csv_header"] = std::string(kRunCsvHeader);
  auto& cell_list = manifest["cells"] = nlohmann::json::array();

  for (const auto& cell : cells) {
    const auto dir = out_dir / cell.name;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string());

    nlohmann::json entry;
    entry["name"] = cell.name;
    entry["config"] = nlohmann::json::parse(config_to_json(cell.config));
    entry["failures"] = cell.failures;
    auto& run_list = entry["runs"] = nlohmann::json::array();
    for (const auto& run : cell.runs) {
      nlohmann::json r{{"seed", run.seed},
                       {"aborted", run.aborted},
                       {"diagnostic", run.diagnostic},
                       {"updates", run.records.size()},
                       {"degenerate_batches", run.degenerate_batches},
                       {"skipped_updates", run.skipped_updates}};
      if (!run.bandit_means.empty()) r["bandit_means"] = run.bandit_means;
      if (!run.records.empty()) {
        const auto file = "seed_" + std::to_string(run.seed) + ".csv";
        write_atomically(dir / file, records_to_csv(run.records));
        r["csv"] = file;
      }
      run_list.push_back(std::move(r));
    }
    auto& curve_list = entry["curves"] = nlohmann::json::object();
    for (const auto& curve : cell.curves) {
      if (curve.points.empty()) continue;
      const auto file = "aggregate_" + curve.name + ".csv";
      write_atomically(dir / file, curve_to_csv(curve));
      curve_list[curve.name] = file;
    }
    cell_list.push_back(std::move(entry));
  }
  write_atomically(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace haepo
