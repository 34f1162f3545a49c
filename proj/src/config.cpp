#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "json.hpp"

#include "haepo/error.hpp"
#include "haepo/harness.hpp"

namespace haepo {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(std::string_view key, std::string_view value) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(out)) {
    throw Error(ErrorCode::Config, "key '" + std::string(key) +
                                       "': expected a number, got '" + std::string(value) + "'");
  }
  return out;
}

template <typename Int>
Int to_integer(std::string_view key, std::string_view value) {
  Int out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw Error(ErrorCode::Config, "key '" + std::string(key) +
                                       "': expected an integer, got '" + std::string(value) + "'");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw Error(ErrorCode::Config, "key '" + std::string(key) + "': expected true/false");
}

std::vector<std::uint64_t> to_seed_list(std::string_view value) {
  std::vector<std::uint64_t> seeds;
  while (!value.empty()) {
    const auto comma = value.find(',');
    seeds.push_back(to_integer<std::uint64_t>("seeds", trim(value.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  return seeds;
}

using Setter = std::function<void(ExperimentConfig&, std::string_view, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"experiment", [](auto& c, auto, auto v) { c.experiment = std::string(v); }},
      {"algorithm", [](auto& c, auto, auto v) { c.algorithm = parse_algorithm(v); }},
      {"bandit_arms", [](auto& c, auto k, auto v) { c.bandit_arms = to_integer<std::size_t>(k, v); }},
      {"bandit_noise_std", [](auto& c, auto k, auto v) { c.bandit_noise_std = to_double(k, v); }},
      {"bandit_pulls", [](auto& c, auto k, auto v) { c.bandit_pulls = to_integer<std::size_t>(k, v); }},
      {"walk_goal", [](auto& c, auto k, auto v) { c.walk_goal = to_integer<int>(k, v); }},
      {"walk_max_steps", [](auto& c, auto k, auto v) { c.walk_max_steps = to_integer<std::size_t>(k, v); }},
      {"policy", [](auto& c, auto, auto v) { c.policy = parse_policy_kind(v); }},
      {"hidden_units", [](auto& c, auto k, auto v) { c.hidden_units = to_integer<std::size_t>(k, v); }},
      {"learning_rate", [](auto& c, auto k, auto v) { c.learning_rate = to_double(k, v); }},
      {"batch_size", [](auto& c, auto k, auto v) { c.batch_size = to_integer<std::size_t>(k, v); }},
      {"updates", [](auto& c, auto k, auto v) {
         if (v == "auto") {
           c.updates.reset();
         } else {
           c.updates = to_integer<std::size_t>(k, v);
         }
       }},
      {"time_budget_s", [](auto& c, auto k, auto v) { c.time_budget_s = to_double(k, v); }},
      {"beta_ent", [](auto& c, auto k, auto v) { c.beta_ent = to_double(k, v); }},
      {"lambda_kl", [](auto& c, auto k, auto v) { c.lambda_kl = to_double(k, v); }},
      {"norm", [](auto& c, auto, auto v) { c.norm_mode = parse_normalization_mode(v); }},
      {"gamma", [](auto& c, auto k, auto v) { c.gamma = to_double(k, v); }},
      {"optimizer", [](auto& c, auto, auto v) { c.optimizer = parse_optimizer_mode(v); }},
      {"max_grad_norm", [](auto& c, auto k, auto v) { c.max_grad_norm = to_double(k, v); }},
      {"clip_epsilon", [](auto& c, auto k, auto v) { c.clip_epsilon = to_double(k, v); }},
      {"ppo_epochs", [](auto& c, auto k, auto v) { c.ppo_epochs = to_integer<int>(k, v); }},
      {"dpo_beta", [](auto& c, auto k, auto v) { c.dpo_beta = to_double(k, v); }},
      {"ref_interval", [](auto& c, auto k, auto v) { c.ref_interval = to_integer<std::size_t>(k, v); }},
      {"smoothing_window", [](auto& c, auto k, auto v) { c.smoothing_window = to_integer<std::size_t>(k, v); }},
      {"record_timing", [](auto& c, auto k, auto v) { c.record_timing = to_bool(k, v); }},
      {"seeds", [](auto& c, auto, auto v) { c.seeds = to_seed_list(v); }},
  };
  return table;
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

Algorithm parse_algorithm(std::string_view name) {
  if (name == "haepo") return Algorithm::Haepo;
  if (name == "haepo-noreg") return Algorithm::HaepoNoReg;
  if (name == "ppo") return Algorithm::Ppo;
  if (name == "dpo") return Algorithm::Dpo;
  throw Error(ErrorCode::Config, "unknown algorithm '" + std::string(name) + "'");
}

std::string_view to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::Haepo:
      return "haepo";
    case Algorithm::HaepoNoReg:
      return "haepo-noreg";
    case Algorithm::Ppo:
      return "ppo";
    case Algorithm::Dpo:
      return "dpo";
  }
  return "haepo";
}

PolicyKind parse_policy_kind(std::string_view name) {
  if (name == "tabular") return PolicyKind::Tabular;
  if (name == "tabular-shared") return PolicyKind::TabularShared;
  if (name == "mlp") return PolicyKind::Mlp;
  throw Error(ErrorCode::Config, "unknown policy '" + std::string(name) + "'");
}

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Tabular:
      return "tabular";
    case PolicyKind::TabularShared:
      return "tabular-shared";
    case PolicyKind::Mlp:
      return "mlp";
  }
  return "tabular";
}

std::optional<std::size_t> ExperimentConfig::resolved_updates() const {
  if (updates || experiment != "bandit") return updates;
  return batch_size == 0 ? 0 : bandit_pulls / batch_size;
}

ExperimentConfig default_config(std::string_view experiment) {
  ExperimentConfig c;
  c.experiment = std::string(experiment);
  if (experiment == "bandit") {
    c.learning_rate = 5e-3;
    c.batch_size = 8;
    c.beta_ent = 5e-2;
    c.lambda_kl = 5e-2;
    c.norm_mode = NormalizationMode::Sum;
  } else if (experiment == "random-walk") {
    c.learning_rate = 0.1;
    c.batch_size = 32;
    c.updates = 100;
    c.beta_ent = 5e-5;
    c.lambda_kl = 5e-5;
    c.norm_mode = NormalizationMode::ZScore;
  } else if (experiment == "chain-mdp") {
    c.policy = PolicyKind::TabularShared;
    c.learning_rate = 0.1;
    c.batch_size = 8;
    c.updates = 200;
    c.beta_ent = 0.0;
    c.lambda_kl = 0.0;
    c.norm_mode = NormalizationMode::ZScore;
  } else if (experiment == "newsvendor") {
    c.learning_rate = 1e-3;
    c.batch_size = 8;
    c.updates = 200;
    c.beta_ent = 0.0;
    c.lambda_kl = 0.0;
    c.norm_mode = NormalizationMode::Sum;
  } else if (experiment == "cartpole") {
    c.learning_rate = 1e-2;
    c.batch_size = 8;
    c.updates = 500;
    c.beta_ent = 0.1;
    c.lambda_kl = 0.1;
    c.norm_mode = NormalizationMode::ZScore;
    c.policy = PolicyKind::Mlp;
    c.gamma = 0.99;
    c.optimizer = OptimizerMode::Adam;
    c.max_grad_norm = 0.5;
  } else {
    throw Error(ErrorCode::Config, "unknown experiment '" + std::string(experiment) + "'");
  }
  return c;
}

void validate(const ExperimentConfig& c) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::Config, msg); };
  default_config(c.experiment);  // rejects unknown experiment names
  if (c.seeds.empty()) fail("seed list is empty");
  if (c.batch_size == 0) fail("batch_size must be positive");
  if (!(c.learning_rate > 0.0)) fail("learning_rate must be positive");
  if (c.beta_ent < 0.0 || c.lambda_kl < 0.0) fail("beta_ent and lambda_kl must be non-negative");
  if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) fail("gamma must lie in [0, 1]");
  if (c.max_grad_norm < 0.0) fail("max_grad_norm must be non-negative");
  if (!(c.clip_epsilon > 0.0 && c.clip_epsilon < 1.0)) fail("clip_epsilon must lie in (0, 1)");
  if (c.ppo_epochs < 1) fail("ppo_epochs must be at least 1");
  if (!(c.dpo_beta > 0.0)) fail("dpo_beta must be positive");
  if (c.ref_interval == 0) fail("ref_interval must be positive");
  if (c.smoothing_window == 0) fail("smoothing_window must be positive");
  if (c.time_budget_s < 0.0) fail("time_budget_s must be non-negative");
  if (c.time_budget_s > 0.0 && !c.record_timing) fail("a time budget needs record_timing");
  if (c.bandit_arms == 0 || c.bandit_noise_std < 0.0) fail("invalid bandit parameters");
  if (c.walk_goal <= 0 || c.walk_max_steps == 0) fail("invalid random-walk parameters");
  if (c.hidden_units == 0) fail("hidden_units must be positive");
  if (c.experiment == "cartpole" && c.policy != PolicyKind::Mlp) {
    fail("cartpole has continuous observations and needs policy = mlp");
  }
  if (!c.resolved_updates() && c.time_budget_s <= 0.0) {
    fail("either updates or time_budget_s must be set");
  }
}

void set_config_value(ExperimentConfig& cfg, std::string_view key,
                      std::string_view value) {
  const auto it = setters().find(key);
  if (it == setters().end()) {
    throw Error(ErrorCode::Config, "unknown config key '" + std::string(key) + "'");
  }
  it->second(cfg, key, trim(value));
}

ExperimentConfig parse_config_text(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::Config, "line " + std::to_string(line_no) + ": expected key = value");
    }
    entries.emplace_back(std::string(trim(view.substr(0, eq))),
                         std::string(trim(view.substr(eq + 1))));
  }

  if (entries.empty() || entries.front().first != "schema_version") {
    throw Error(ErrorCode::Config, "config must start with schema_version");
  }
  if (to_integer<int>("schema_version", entries.front().second) != kConfigSchemaVersion) {
    throw Error(ErrorCode::Config, "unsupported config schema_version");
  }

  ExperimentConfig cfg;
  for (const auto& [key, value] : entries) {
    if (key == "experiment") cfg = default_config(value);
  }
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].first == "schema_version") {
      throw Error(ErrorCode::Config, "schema_version given twice");
    }
    set_config_value(cfg, entries[i].first, entries[i].second);
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string config_to_text(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "schema_version = " << kConfigSchemaVersion << '\n'
      << "experiment = " << c.experiment << '\n'
      << "algorithm = " << to_string(c.algorithm) << '\n'
      << "bandit_arms = " << c.bandit_arms << '\n'
      << "bandit_noise_std = " << format_double(c.bandit_noise_std) << '\n'
      << "bandit_pulls = " << c.bandit_pulls << '\n'
      << "walk_goal = " << c.walk_goal << '\n'
      << "walk_max_steps = " << c.walk_max_steps << '\n'
      << "policy = " << to_string(c.policy) << '\n'
      << "hidden_units = " << c.hidden_units << '\n'
      << "learning_rate = " << format_double(c.learning_rate) << '\n'
      << "batch_size = " << c.batch_size << '\n'
      << "updates = " << (c.updates ? std::to_string(*c.updates) : "auto") << '\n'
      << "time_budget_s = " << format_double(c.time_budget_s) << '\n'
      << "beta_ent = " << format_double(c.beta_ent) << '\n'
      << "lambda_kl = " << format_double(c.lambda_kl) << '\n'
      << "norm = " << to_string(c.norm_mode) << '\n'
      << "gamma = " << format_double(c.gamma) << '\n'
      << "optimizer = " << to_string(c.optimizer) << '\n'
      << "max_grad_norm = " << format_double(c.max_grad_norm) << '\n'
      << "clip_epsilon = " << format_double(c.clip_epsilon) << '\n'
      << "ppo_epochs = " << c.ppo_epochs << '\n'
      << "dpo_beta = " << format_double(c.dpo_beta) << '\n'
      << "ref_interval = " << c.ref_interval << '\n'
      << "smoothing_window = " << c.smoothing_window << '\n'
      << "record_timing = " << (c.record_timing ? "true" : "false") << '\n'
      << "seeds = ";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) out << (i ? "," : "") << c.seeds[i];
  out << '\n';
  return out.str();
}

std::string config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["experiment"] = c.experiment;
  j["algorithm"] = std::string(to_string(c.algorithm));
  j["bandit_arms"] = c.bandit_arms;
  j["bandit_noise_std"] = c.bandit_noise_std;
  j["bandit_pulls"] = c.bandit_pulls;
  j["walk_goal"] = c.walk_goal;
  j["walk_max_steps"] = c.walk_max_steps;
  j["policy"] = std::string(to_string(c.policy));
  j["hidden_units"] = c.hidden_units;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  if (const auto u = c.resolved_updates()) {
    j["updates"] = *u;
  } else {
    j["updates"] = nullptr;
  }
  j["time_budget_s"] = c.time_budget_s;
  j["beta_ent"] = c.beta_ent;
  j["lambda_kl"] = c.lambda_kl;
  j["norm"] = std::string(to_string(c.norm_mode));
  j["gamma"] = c.gamma;
  j["optimizer"] = std::string(to_string(c.optimizer));
  j["max_grad_norm"] = c.max_grad_norm;
  j["clip_epsilon"] = c.clip_epsilon;
  j["ppo_epochs"] = c.ppo_epochs;
  j["dpo_beta"] = c.dpo_beta;
  j["ref_interval"] = c.ref_interval;
  j["smoothing_window"] = c.smoothing_window;
  j["record_timing"] = c.record_timing;
  j["seeds"] = c.seeds;
  return j.dump();
}

}  // namespace haepo
