// Command-line front end. Links only against the C interface.
#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "haepo/haepo.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitGate = 2;

struct CommonFlags {
  std::string experiment = "bandit";
  std::string config_path;
  std::vector<std::string> sets;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> algos;
  std::vector<double> lrs;
  std::vector<std::size_t> batches;
  std::vector<std::string> norms;
  std::string updates;
  double beta_ent = -1.0;
  double lambda_kl = -1.0;
  double time_budget_s = -1.0;
  std::string out_dir = "results";
};

int report(haepo_status status) {
  if (status == HAEPO_OK) return kExitOk;
  std::fprintf(stderr, "haepo: %s: %s\n", haepo_status_string(status), haepo_last_error());
  return status == HAEPO_ERR_GATE_FAILED ? kExitGate : kExitError;
}

void add_common(CLI::App* cmd, CommonFlags& f, bool lists) {
  cmd->add_option("--experiment", f.experiment,
                  "bandit, random-walk, chain-mdp, newsvendor or cartpole");
  cmd->add_option("--config", f.config_path, "config file (schema_version = 1)");
  cmd->add_option("--set", f.sets, "extra key=value overrides")->take_all();
  cmd->add_option("--seeds", f.seeds, "comma-separated seeds")->delimiter(',');
  cmd->add_option("--updates", f.updates, "updates per run, or auto");
  cmd->add_option("--beta-ent", f.beta_ent, "entropy weight");
  cmd->add_option("--lambda-kl", f.lambda_kl, "KL weight");
  cmd->add_option("--time-budget-s", f.time_budget_s, "wall-clock budget per run");
  cmd->add_option("--out-dir", f.out_dir, "output directory");
  const char* suffix = lists ? " (comma-separated)" : "";
  auto* algo = cmd->add_option("--algo", f.algos,
                               std::string("haepo, haepo-noreg, ppo or dpo") + suffix);
  auto* lr = cmd->add_option("--lr", f.lrs, std::string("learning rate") + suffix);
  auto* batch = cmd->add_option("--batch", f.batches, std::string("batch size M") + suffix);
  auto* norm = cmd->add_option("--norm", f.norms, std::string("sum, zscore or none") + suffix);
  for (auto* opt : {algo, lr, batch, norm}) {
    if (lists) {
      opt->delimiter(',');
    } else {
      opt->expected(1);
    }
  }
}

int set_key(haepo_config* cfg, const std::string& key, const std::string& value) {
  return report(haepo_config_set(cfg, key.c_str(), value.c_str()));
}

std::string join(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (auto s : seeds) out += (out.empty() ? "" : ",") + std::to_string(s);
  return out;
}

// Builds the base config; list flags apply only when they hold one value.
int build_config(const CommonFlags& f, haepo_config** out) {
  haepo_status st = f.config_path.empty() ? haepo_config_create(f.experiment.c_str(), out)
                                          : haepo_config_load(f.config_path.c_str(), out);
  if (st != HAEPO_OK) return report(st);
  haepo_config* cfg = *out;
  std::vector<std::pair<std::string, std::string>> kv;
  if (!f.seeds.empty()) kv.emplace_back("seeds", join(f.seeds));
  if (f.algos.size() == 1) kv.emplace_back("algorithm", f.algos[0]);
  if (f.lrs.size() == 1) kv.emplace_back("learning_rate", CLI::detail::to_string(f.lrs[0]));
  if (f.batches.size() == 1) kv.emplace_back("batch_size", std::to_string(f.batches[0]));
  if (f.norms.size() == 1) kv.emplace_back("norm", f.norms[0]);
  if (!f.updates.empty()) kv.emplace_back("updates", f.updates);
  if (f.beta_ent >= 0) kv.emplace_back("beta_ent", CLI::detail::to_string(f.beta_ent));
  if (f.lambda_kl >= 0) kv.emplace_back("lambda_kl", CLI::detail::to_string(f.lambda_kl));
  if (f.time_budget_s >= 0) {
    kv.emplace_back("time_budget_s", CLI::detail::to_string(f.time_budget_s));
  }
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "haepo: --set expects key=value, got '%s'\n", s.c_str());
      return kExitError;
    }
    kv.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [k, v] : kv) {
    if (int rc = set_key(cfg, k, v); rc != kExitOk) return rc;
  }
  return kExitOk;
}

void print_results(const haepo_results* results) {
  for (size_t c = 0; c < haepo_results_cell_count(results); ++c) {
    const size_t n = haepo_results_update_count(results, c);
    double final_return = 0.0;
    if (n > 0) haepo_results_mean_return(results, c, n, &final_return);
    std::printf("%s: %zu updates, final mean return %.4f\n", haepo_results_cell_name(results, c),
                n, final_return);
  }
}

int finish_runs(haepo_results* results, const std::string& out_dir) {
  int rc = report(haepo_results_emit(results, out_dir.c_str()));
  if (rc == kExitOk) {
    print_results(results);
    const size_t failures = haepo_results_failure_count(results);
    if (failures > 0) {
      std::fprintf(stderr, "haepo: %zu failed cells or aborted seeds\n", failures);
      rc = kExitError;
    }
    std::printf("results written to %s\n", out_dir.c_str());
  }
  haepo_results_destroy(results);
  return rc;
}

int cmd_run(const CommonFlags& f) {
  haepo_config* cfg = nullptr;
  int rc = build_config(f, &cfg);
  if (rc == kExitOk) {
    haepo_results* results = nullptr;
    rc = report(haepo_run(cfg, &results));
    if (rc == kExitOk) rc = finish_runs(results, f.out_dir);
  }
  haepo_config_destroy(cfg);
  return rc;
}

int cmd_sweep(const CommonFlags& f) {
  haepo_config* cfg = nullptr;
  int rc = build_config(f, &cfg);
  haepo_sweep* sweep = nullptr;
  if (rc == kExitOk) rc = report(haepo_sweep_create(cfg, &sweep));
  for (double lr : f.lrs) {
    if (rc == kExitOk) rc = report(haepo_sweep_add_lr(sweep, lr));
  }
  for (auto m : f.batches) {
    if (rc == kExitOk) rc = report(haepo_sweep_add_batch(sweep, m));
  }
  for (const auto& a : f.algos) {
    if (rc == kExitOk) rc = report(haepo_sweep_add_algorithm(sweep, a.c_str()));
  }
  for (const auto& n : f.norms) {
    if (rc == kExitOk) rc = report(haepo_sweep_add_norm(sweep, n.c_str()));
  }
  if (rc == kExitOk) {
    haepo_results* results = nullptr;
    rc = report(haepo_sweep_run(sweep, &results));
    if (rc == kExitOk) rc = finish_runs(results, f.out_dir);
  }
  haepo_sweep_destroy(sweep);
  haepo_config_destroy(cfg);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HAEPO training harness"};
  app.set_version_flag("--version", std::string(haepo_version()));
  app.require_subcommand(1);

  CommonFlags run_flags;
  auto* run = app.add_subcommand("run", "train one configuration over its seeds");
  add_common(run, run_flags, false);

  CommonFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "train every cell of a grid");
  add_common(sweep, sweep_flags, true);

  haepo_gradcheck_options gc;
  haepo_gradcheck_default_options(&gc);
  std::string gc_out;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the loss gradient");
  gradcheck->add_option("--trials", gc.trials, "random batches")->capture_default_str();
  gradcheck->add_option("--min-batch", gc.min_batch)->capture_default_str();
  gradcheck->add_option("--max-batch", gc.max_batch)->capture_default_str();
  gradcheck->add_option("--eps", gc.eps, "central-difference step")->capture_default_str();
  gradcheck->add_option("--threshold", gc.threshold, "max absolute error")->capture_default_str();
  gradcheck->add_option("--beta-ent", gc.beta_ent)->capture_default_str();
  gradcheck->add_option("--lambda-kl", gc.lambda_kl)->capture_default_str();
  gradcheck->add_option("--seed", gc.seed)->capture_default_str();
  gradcheck->add_option("--out-dir", gc_out, "write gradcheck.json here");

  std::vector<std::uint64_t> ablate_seeds = {0, 1, 2, 3, 4};
  std::string ablate_out;
  auto* ablate = app.add_subcommand("ablate-norm", "sum versus z-score on chain-mdp and newsvendor");
  ablate->add_option("--seeds", ablate_seeds, "comma-separated seeds")->delimiter(',');
  ablate->add_option("--out-dir", ablate_out, "write the four cells here");

  CLI11_PARSE(app, argc, argv);

  if (*run) return cmd_run(run_flags);
  if (*sweep) return cmd_sweep(sweep_flags);
  if (*gradcheck) {
    std::string json_path;
    if (!gc_out.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(gc_out, ec);
      json_path = (std::filesystem::path(gc_out) / "gradcheck.json").string();
    }
    haepo_gradcheck_summary s{};
    const haepo_status st =
        haepo_gradcheck(&gc, json_path.empty() ? nullptr : json_path.c_str(), &s);
    if (st == HAEPO_OK || st == HAEPO_ERR_GATE_FAILED) {
      std::printf("max abs error: new_lp %.3e  old_lp %.3e  returns %.3e\n",
                  s.max_error_new_lp, s.max_error_old_lp, s.max_error_returns);
      std::printf("gradient norm: new_lp %.6f  old_lp %.6f  returns %.6f\n", s.norm_new_lp,
                  s.norm_old_lp, s.norm_returns);
      std::printf("%s (threshold %.1e)\n", s.passed ? "PASS" : "FAIL", gc.threshold);
      std::fflush(stdout);
    }
    return report(st);
  }
  if (*ablate) {
    size_t needed = 0;
    std::string text(4096, '\0');
    const haepo_status st =
        haepo_ablate_norm(ablate_seeds.data(), ablate_seeds.size(),
                          ablate_out.empty() ? nullptr : ablate_out.c_str(), text.data(),
                          text.size(), &needed);
    if (st == HAEPO_OK || st == HAEPO_ERR_GATE_FAILED) {
      text.resize(std::min(needed, text.size() - 1));
      std::fputs(text.c_str(), stdout);
      std::fflush(stdout);
    }
    return report(st);
  }
  return kExitError;
}
