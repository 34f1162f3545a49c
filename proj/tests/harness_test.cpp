#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "haepo/ablation.hpp"
#include "haepo/error.hpp"
#include "haepo/harness.hpp"
#include "json.hpp"

using namespace haepo;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("haepo_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig quick(std::string experiment, std::size_t updates) {
  auto cfg = default_config(experiment);
  cfg.updates = updates;
  cfg.record_timing = false;
  cfg.seeds = {0, 1};
  return cfg;
}

}  // namespace

TEST_CASE("defaults per experiment") {
  auto bandit = default_config("bandit");
  CHECK(bandit.norm_mode == NormalizationMode::Sum);
  CHECK(bandit.resolved_updates() == 5000 / bandit.batch_size);
  CHECK(default_config("random-walk").batch_size == 32);
  CHECK(default_config("random-walk").beta_ent == 5e-5);
  CHECK(default_config("chain-mdp").learning_rate == 0.1);
  CHECK(default_config("chain-mdp").norm_mode == NormalizationMode::ZScore);
  CHECK(default_config("newsvendor").learning_rate == 1e-3);
  auto cp = default_config("cartpole");
  CHECK(cp.gamma == 0.99);
  CHECK(cp.optimizer == OptimizerMode::Adam);
  CHECK(cp.max_grad_norm == 0.5);
  CHECK_THROWS_AS(default_config("maze"), Error);
}

TEST_CASE("config text round-trip") {
  auto cfg = default_config("cartpole");
  cfg.learning_rate = 0.0123;
  cfg.seeds = {3, 9};
  cfg.algorithm = Algorithm::Ppo;
  const auto text = config_to_text(cfg);
  CHECK(text.rfind("schema_version = 1\n", 0) == 0);
  auto back = parse_config_text(text);
  CHECK(config_to_text(back) == config_to_text(cfg));
  CHECK(back.learning_rate == 0.0123);
  CHECK(back.seeds == std::vector<std::uint64_t>{3, 9});
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config_text("experiment = bandit\n"), Error);
  CHECK_THROWS_AS(parse_config_text("schema_version = 2\n"), Error);
  CHECK_THROWS_AS(parse_config_text("schema_version = 1\nlearnig_rate = 0.1\n"), Error);
  ExperimentConfig cfg = default_config("bandit");
  CHECK_THROWS_AS(set_config_value(cfg, "batch_size", "eight"), Error);
  CHECK_THROWS_AS(set_config_value(cfg, "norm", "max"), Error);
  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(validate(cfg), Error);
  auto cp = default_config("cartpole");
  cp.policy = PolicyKind::Tabular;
  CHECK_THROWS_AS(validate(cp), Error);
}

TEST_CASE("zero updates give empty metrics") {
  auto cfg = default_config("bandit");
  cfg.updates = 0;
  CHECK(run_training(cfg, 0).records.empty());
}

TEST_CASE("training records") {
  auto cfg = quick("chain-mdp", 12);
  auto run = run_training(cfg, 4);
  REQUIRE(run.records.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) {
    const auto& r = run.records[i];
    CHECK(r.update == i + 1);
    CHECK(r.env_steps == 8 * 5 * (i + 1));
    CHECK(r.mean_return >= 0.0);
    CHECK(r.mean_return <= 1.0);
    CHECK(std::isnan(r.regret));
    CHECK(r.wall_clock_s == 0.0);
    CHECK(r.seed == 4);
  }
  // The reference matches the policy on the first update.
  CHECK(run.records[0].loss_kl == 0.0);
}

TEST_CASE("bandit runs record every pull") {
  auto cfg = quick("bandit", 10);
  auto run = run_training(cfg, 1);
  CHECK(run.pull_regret.size() == 10 * cfg.batch_size);
  CHECK(run.pull_pseudo_regret.size() == run.pull_regret.size());
  CHECK(run.bandit_means.size() == 10);
  for (double r : run.pull_pseudo_regret) CHECK(r >= 0.0);
}

TEST_CASE("every algorithm runs on every experiment") {
  for (const char* exp : {"bandit", "random-walk", "chain-mdp", "newsvendor", "cartpole"}) {
    for (auto algo : {Algorithm::Haepo, Algorithm::HaepoNoReg, Algorithm::Ppo, Algorithm::Dpo}) {
      auto cfg = quick(exp, 3);
      cfg.algorithm = algo;
      cfg.hidden_units = 8;
      auto run = run_training(cfg, 0);
      CHECK(run.records.size() == 3);
      CHECK_FALSE(run.aborted);
    }
  }
}

TEST_CASE("identical seeds give identical runs") {
  auto cfg = quick("cartpole", 5);
  cfg.hidden_units = 16;
  auto a = run_training(cfg, 2);
  auto b = run_training(cfg, 2);
  CHECK(records_to_csv(a.records) == records_to_csv(b.records));
  auto c = run_training(cfg, 3);
  CHECK(records_to_csv(a.records) != records_to_csv(c.records));
}

TEST_CASE("time budget bounds a run") {
  auto cfg = default_config("chain-mdp");
  cfg.updates.reset();
  cfg.time_budget_s = 0.05;
  auto run = run_training(cfg, 0);
  REQUIRE(run.records.size() >= 2);
  // The budget is checked between updates, so the last record lands within
  // one update of it.
  double step = 0.0;
  for (std::size_t i = 1; i < run.records.size(); ++i) {
    step = std::max(step, run.records[i].wall_clock_s - run.records[i - 1].wall_clock_s);
  }
  CHECK(run.records.back().wall_clock_s + step >= 0.05);
  CHECK(run.records.back().wall_clock_s < 0.05 + step + 0.05);
}

TEST_CASE("first batch does not depend on the algorithm") {
  auto cfg = quick("random-walk", 1);
  auto a = first_batch(cfg, 5);
  cfg.algorithm = Algorithm::Dpo;
  auto b = first_batch(cfg, 5);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].actions == b[k].actions);
}

TEST_CASE("mean, std and moving average helpers") {
  std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  auto p = mean_std(0.0, v);
  CHECK(p.mean == 2.5);
  CHECK(p.std == doctest::Approx(std::sqrt(1.25)));
  auto ma = moving_average(v, 2);
  CHECK(ma == std::vector<double>{1.0, 1.5, 2.5, 3.5});
  std::vector<double> xs{0, 1, 2}, ys{0, 10, 30};
  CHECK(interpolate(xs, ys, 1.5) == 20.0);
  CHECK(interpolate(xs, ys, -1.0) == 0.0);
  CHECK(interpolate(xs, ys, 9.0) == 30.0);
}

TEST_CASE("one seed aggregates to itself") {
  auto cfg = quick("chain-mdp", 6);
  cfg.seeds = {7};
  auto cell = run_cell(cfg);
  auto run = run_training(cfg, 7);
  const auto& curve = cell.curves.front();
  CHECK(curve.name == "mean_return");
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(curve.points[i].mean == run.records[i].mean_return);
    CHECK(curve.points[i].std == 0.0);
  }
}

TEST_CASE("repeated seeds aggregate with zero spread") {
  auto cfg = quick("newsvendor", 5);
  cfg.seeds = {4, 4};
  auto cell = run_cell(cfg);
  for (const auto& c : cell.curves) {
    for (const auto& p : c.points) CHECK(p.std == 0.0);
  }
}

TEST_CASE("grid expansion and cell names") {
  SweepGrid grid;
  grid.base = default_config("bandit");
  grid.learning_rates = {1e-3, 2e-3};
  grid.batch_sizes = {8, 16, 32};
  auto cells = expand_grid(grid);
  CHECK(cells.size() == 6);
  CHECK(cell_name(cells.front()) == "bandit_haepo_lr0.001_m8_sum");
  grid.learning_rates.clear();
  CHECK(expand_grid(grid).size() == 3);
}

TEST_CASE("sweeps keep going past failing cells") {
  SweepGrid grid;
  grid.base = quick("chain-mdp", 3);
  grid.learning_rates = {0.1, -1.0};
  auto cells = run_sweep(grid);
  REQUIRE(cells.size() == 2);
  CHECK(cells[0].failures.empty());
  CHECK_FALSE(cells[1].failures.empty());
}

TEST_CASE("csv round-trip") {
  std::vector<MetricsRecord> recs(2);
  recs[0] = {1, 8, 0.1 + 0.2, std::numeric_limits<double>::quiet_NaN(), 0.6931471805599453,
             -1e-300, 1.0 / 3.0, 5e-5, 0.0, 0.25, 3};
  recs[1] = {2, 16, 12345.678901234567, 0.1, 0.0, 2.0, -7.0, 0.0, 1e300, 1.5, 3};
  const auto text = records_to_csv(recs);
  CHECK(text.rfind(std::string(kRunCsvHeader) + "\n", 0) == 0);
  auto back = records_from_csv(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == recs[0]);
  CHECK(back[1] == recs[1]);

  std::vector<MetricsRecord> one(1);
  auto one_text = records_to_csv(one);
  CHECK(std::count(one_text.begin(), one_text.end(), '\n') == 2);

  CHECK_THROWS_AS(curve_to_csv(Curve{"empty", {}}), Error);
  Curve c{"x", {{1.0, 0.5, 0.1}, {2.0, 1.0 / 7.0, 0.0}}};
  auto cb = curve_from_csv("x", curve_to_csv(c));
  CHECK(cb.points.size() == 2);
  CHECK(cb.points[1].mean == 1.0 / 7.0);
  CHECK_THROWS_AS(records_from_csv("update,foo\n1,2\n"), Error);
}

TEST_CASE("emitted results") {
  auto cfg = quick("bandit", 20);
  auto cell = run_cell(cfg);
  const auto dir = scratch_dir("emit");
  std::vector<CellResult> cells{cell};
  emit_results(cells, dir);
  const auto cell_dir = dir / cell.name;
  CHECK(std::filesystem::exists(cell_dir / "seed_0.csv"));
  CHECK(std::filesystem::exists(cell_dir / "aggregate_mean_return.csv"));
  CHECK(std::filesystem::exists(cell_dir / "aggregate_regret_per_pull.csv"));
  auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["std_convention"] == "population");
  CHECK(manifest["cells"][0]["config"]["optimizer"] == "sgd");
  auto back = records_from_csv(slurp(cell_dir / "seed_1.csv"));
  CHECK(back == cell.runs[1].records);
  for (const auto& entry : std::filesystem::directory_iterator(cell_dir)) {
    CHECK(entry.path().extension() != ".tmp");
  }
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(emit_results(std::span<const CellResult>{}, dir), Error);
}

TEST_CASE("windowed mean return") {
  CellResult cell;
  Curve c{"mean_return", {}};
  for (int i = 1; i <= 5; ++i) c.points.push_back({double(i), double(i), 0.0});
  cell.curves.push_back(c);
  CHECK(windowed_mean_return(cell, 5, 2) == 4.5);
  CHECK(windowed_mean_return(cell, 2, 10) == 1.5);
  CHECK(windowed_mean_return(cell, 3, 1) == 3.0);
}
