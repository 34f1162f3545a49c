#include <cmath>
#include <vector>

#include "doctest.h"
#include "haepo/environments.hpp"
#include "haepo/error.hpp"
#include "haepo/rng.hpp"

using namespace haepo;

TEST_CASE("chain pays only after five advances") {
  ChainMdp env;
  Rng rng(0);
  CHECK(env.reset(rng) == Observation{0.0});
  StepResult s;
  for (int t = 0; t < 5; ++t) {
    CHECK_FALSE(s.terminal);
    s = env.step(ChainMdp::kAdvance, rng);
  }
  CHECK(s.reward == 1.0);
  CHECK(s.terminal);
  CHECK(env.state() == 5);

  // Any stay leaves the chain short of state 5 after five steps.
  for (int stay_at = 0; stay_at < 5; ++stay_at) {
    env.reset(rng);
    double total = 0.0;
    for (int t = 0; t < 5; ++t) {
      s = env.step(t == stay_at ? ChainMdp::kStay : ChainMdp::kAdvance, rng);
      total += s.reward;
    }
    CHECK(s.terminal);
    CHECK(total == 0.0);
  }
  CHECK_THROWS_AS(env.step(2, rng), Error);
}

TEST_CASE("newsvendor profit") {
  NewsvendorEnv env;
  CHECK(env.profit(5, 5) == 20.0);
  CHECK(env.profit(10, 0) == -40.0);
  CHECK(env.profit(3, 7) == 10.0 * 3 - 6.0 * 3);
  for (std::size_t q = 0; q <= 10; ++q) {
    for (std::uint64_t d = 0; d < 30; ++d) {
      CHECK(env.profit(q, d) >= -60.0);
      CHECK(env.profit(q, d) <= 40.0);
    }
  }
  Rng rng(1);
  env.reset(rng);
  auto s = env.step(4, rng);
  CHECK(s.terminal);
  CHECK_THROWS_AS(env.step(11, rng), Error);
}

TEST_CASE("poisson sampler matches its mean and variance") {
  Rng rng(2);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = static_cast<double>(sample_poisson(5.0, rng));
    sum += d;
    sq += d * d;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean - 5.0) < 3.0 * std::sqrt(5.0 / n) * 1.5);
  CHECK(std::abs(var - 5.0) < 0.1);
}

TEST_CASE("random walk") {
  RandomWalkEnv env(10);
  Rng rng(3);
  env.reset(rng);
  CHECK(env.position() == 0);
  StepResult s;
  int steps = 0;
  while (!s.terminal) {
    s = env.step(1, rng);
    ++steps;
  }
  CHECK(steps == 10);
  CHECK(s.reward == 1.0);

  env.reset(rng);
  steps = 0;
  s = StepResult{};
  while (!s.terminal) {
    s = env.step(0, rng);
    ++steps;
  }
  CHECK(steps == 500);
  CHECK(s.reward == 0.0);
  CHECK(std::abs(env.position()) <= 500);

  // Alternating steps never reach the goal.
  env.reset(rng);
  s = StepResult{};
  double total = 0.0;
  for (int t = 0; !s.terminal; ++t) {
    s = env.step(t % 2, rng);
    total += s.reward;
  }
  CHECK(total == 0.0);
}

TEST_CASE("cartpole reset and dynamics are deterministic") {
  CartPoleEnv a, b;
  Rng ra(7), rb(7);
  CHECK(a.reset(ra) == b.reset(rb));
  for (double v : a.state()) CHECK(std::abs(v) <= 0.05);

  CartPoleEnv::State s{0.01, -0.02, 0.03, 0.04};
  CHECK(CartPoleEnv::integrate(s, 1) == CartPoleEnv::integrate(s, 1));

  // One Euler step recomputed from the textbook equations.
  const double force = 10.0;
  const double costh = std::cos(s[2]), sinth = std::sin(s[2]);
  const double temp = (force + 0.05 * s[3] * s[3] * sinth) / 1.1;
  const double thacc = (9.8 * sinth - costh * temp) / (0.5 * (4.0 / 3.0 - 0.1 * costh * costh / 1.1));
  const double xacc = temp - 0.05 * thacc * costh / 1.1;
  auto n = CartPoleEnv::integrate(s, 1);
  CHECK(n[0] == doctest::Approx(s[0] + 0.02 * s[1]).epsilon(1e-14));
  CHECK(n[1] == doctest::Approx(s[1] + 0.02 * xacc).epsilon(1e-14));
  CHECK(n[2] == doctest::Approx(s[2] + 0.02 * s[3]).epsilon(1e-14));
  CHECK(n[3] == doctest::Approx(s[3] + 0.02 * thacc).epsilon(1e-14));
}

TEST_CASE("cartpole episodes end on failure or at the cap") {
  CartPoleEnv env;
  Rng rng(8);
  env.reset(rng);
  int steps = 0;
  StepResult s;
  double total = 0.0;
  while (!s.terminal) {
    s = env.step(1, rng);
    total += s.reward;
    ++steps;
  }
  CHECK(steps < 500);
  CHECK(total == steps);
  CHECK(total >= 1.0);

  env.set_state({0.0, 0.0, 0.0, 0.0});
  steps = 0;
  s = StepResult{};
  // Bang-bang control on the pole angle keeps it up for the whole episode.
  while (!s.terminal) {
    const auto& st = env.state();
    s = env.step(st[2] + 0.5 * st[3] > 0 ? 1 : 0, rng);
    ++steps;
  }
  CHECK(steps == 500);
}

TEST_CASE("bandit regret") {
  GaussianBandit zero_noise(std::vector<double>{0.2, 0.8}, 0.0);
  Rng rng(9);
  std::vector<double> best, worst;
  for (int i = 0; i < 4; ++i) {
    best.push_back(zero_noise.step(1, rng).reward);
    worst.push_back(zero_noise.step(0, rng).reward);
  }
  for (double r : per_step_regret(zero_noise, best)) CHECK(r == 0.0);
  for (double r : per_step_regret(zero_noise, worst)) CHECK(r == doctest::Approx(0.6));
  std::vector<std::size_t> arms{0, 1};
  auto pseudo = per_step_pseudo_regret(zero_noise, arms);
  CHECK(pseudo[0] == doctest::Approx(0.6));
  CHECK(pseudo[1] == 0.0);
}

TEST_CASE("bandit means are fixed and drawn from the unit interval") {
  GaussianBandit a(10, 42), b(10, 42), c(10, 43);
  CHECK(a.means() == b.means());
  CHECK(a.means() != c.means());
  for (double m : a.means()) {
    CHECK(m >= 0.0);
    CHECK(m <= 1.0);
  }
}

TEST_CASE("uniform pulls match the enumerated expected regret") {
  GaussianBandit bandit(10, 5);
  double expected = 0.0;
  const double best = *std::max_element(bandit.means().begin(), bandit.means().end());
  for (double m : bandit.means()) expected += (best - m) / 10.0;
  CHECK(bandit.uniform_policy_regret() == doctest::Approx(expected).epsilon(1e-12));

  Rng rng(6);
  const int n = 100000;
  std::vector<double> rewards(n);
  for (auto& r : rewards) {
    const auto arm = static_cast<std::size_t>(rng.uniform() * 10.0);
    r = bandit.step(arm, rng).reward;
  }
  auto regret = per_step_regret(bandit, rewards);
  double mean = 0.0, sq = 0.0;
  for (double r : regret) {
    mean += r / n;
    sq += r * r / n;
  }
  const double se = std::sqrt((sq - mean * mean) / n);
  CHECK(std::abs(mean - expected) < 3.0 * se);
}

TEST_CASE("same seed gives the same trajectory for the same actions") {
  for (const char* name : {"bandit", "random-walk", "chain-mdp", "newsvendor", "cartpole"}) {
    EnvironmentSpec spec;
    spec.name = name;
    spec.seed = 77;
    auto a = make_environment(spec);
    auto b = make_environment(spec);
    Rng ra(1), rb(1);
    CHECK(a->reset(ra) == b->reset(rb));
    for (int t = 0; t < 20; ++t) {
      const std::size_t act = t % a->action_count();
      auto sa = a->step(act, ra);
      auto sb = b->step(act, rb);
      CHECK(sa.observation == sb.observation);
      CHECK(sa.reward == sb.reward);
      CHECK(sa.terminal == sb.terminal);
      if (sa.terminal) {
        a->reset(ra);
        b->reset(rb);
      }
    }
  }
  EnvironmentSpec bad;
  bad.name = "maze";
  CHECK_THROWS_AS(make_environment(bad), Error);
}
