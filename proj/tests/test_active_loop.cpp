// Copyright 2026 The ulfd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "ulfd/active_loop.hpp"
#include "ulfd/common.hpp"
#include "ulfd/env_suite.hpp"
#include "ulfd/experiments.hpp"

using namespace ulfd;

namespace {

// Small learner and short episodes so the loop tests stay fast.
RunConfig quick_config(std::vector<env::Context> contexts, std::uint64_t seed = 0) {
  for (auto& c : contexts) c.horizon = 60;
  RunConfig cfg;
  cfg.contexts = std::move(contexts);
  cfg.k = 2;
  cfg.demos_per_request = 1;
  cfg.learner.hidden_layers = {16, 16};
  cfg.learner.train.epochs = 30;
  cfg.learner.train.predict_mc_samples = 20;
  cfg.eval_episodes = 1;
  cfg.seed = seed;
  return cfg;
}

std::vector<env::Context> masses(std::initializer_list<double> ms) {
  std::vector<env::Context> out;
  for (double m : ms) out.push_back(env::make_double_integrator(m));
  return out;
}

}  // namespace

TEST_CASE("run_episode: disabled detector runs the full horizon") {
  const auto cfg = quick_config(masses({1.0}));
  const BbbPolicy policy = make_learner(cfg);
  ConfidenceDetector det(cfg.detector);
  det.disable();
  const auto ep = run_episode(policy, cfg.contexts[0], det, 2, Eigen::Vector2d(1.0, 0.0));
  CHECK_FALSE(ep.halted_at.has_value());
  CHECK(ep.trajectory.steps.size() == 60);
  CHECK(ep.sigmas.size() == 60);
}

TEST_CASE("run_episode: untrained policy with zero omega halts right after the grace period") {
  const auto cfg = quick_config(masses({1.0}));
  const BbbPolicy policy = make_learner(cfg);
  for (std::size_t t_start : {0, 5, 10}) {
    ConfidenceDetector det(DetectorParams{1.0, 10, t_start});
    const auto ep = run_episode(policy, cfg.contexts[0], det, 2, Eigen::Vector2d(1.0, 0.0));
    REQUIRE(ep.halted_at.has_value());
    CHECK(*ep.halted_at == t_start + 1);
    CHECK(ep.trajectory.steps.size() == t_start);
  }
}

TEST_CASE("run_episode: episodic sums match the logged steps") {
  const auto cfg = quick_config(masses({2.0}));
  const BbbPolicy policy = make_learner(cfg);
  ConfidenceDetector det(cfg.detector);
  det.disable();
  const auto ep = run_episode(policy, cfg.contexts[0], det, 2, Eigen::Vector2d(-0.5, 0.2), 0, true);
  const double sigma_sum = std::accumulate(ep.sigmas.begin(), ep.sigmas.end(), 0.0);
  double reward_sum = 0.0;
  for (const auto& s : ep.trajectory.steps) reward_sum += s.reward;
  CHECK(std::abs(ep.sigma_d - sigma_sum) < 1e-10);
  CHECK(std::abs(ep.r_d - reward_sum) < 1e-10);
  CHECK(ep.sigma_d >= 0.0);
  REQUIRE(ep.trace.size() == 60);
  CHECK(ep.trace[3].sigma == ep.sigmas[3]);
  for (const auto& s : ep.trajectory.steps) CHECK(std::abs(s.action[0]) <= cfg.contexts[0].action_limit);
}

TEST_CASE("evaluate_policy: the expert reproduces its own rollouts") {
  const auto ctx = env::make_double_integrator(1.0);
  const ExpertPolicy expert(ctx);
  ConfidenceDetector off;
  off.disable();
  const auto ep = run_episode(expert, ctx, off, 2, Eigen::Vector2d(1.0, 0.0));
  const double golden = env::rollout(env::Expert(ctx), Eigen::Vector2d(1.0, 0.0)).total_reward();
  CHECK(std::abs(ep.r_d - golden) < 1e-6);
  CHECK(ep.r_d == doctest::Approx(-0.639374).epsilon(1e-5));

  const auto ev = evaluate_policy(expert, ctx, 4, 2, 17);
  REQUIRE(ev.rewards.size() == 4);
  for (std::size_t e = 0; e < 4; ++e) {
    Rng rng(derive_seed(17, e));
    const double r = env::rollout(env::Expert(ctx), env::reset(ctx, rng)).total_reward();
    CHECK(std::abs(ev.rewards[e] - r) < 1e-6);
    CHECK(ev.sigmas[e] >= 0.0);
  }
  const auto again = evaluate_policy(expert, ctx, 4, 2, 17);
  CHECK(again.rewards == ev.rewards);
}

TEST_CASE("evaluate_policy: deterministic for a fixed learner and seed") {
  const auto cfg = quick_config(masses({1.0}));
  const BbbPolicy policy = make_learner(cfg);
  const auto a = evaluate_policy(policy, cfg.contexts[0], 2, 2, 3);
  const auto b = evaluate_policy(policy, cfg.contexts[0], 2, 2, 3);
  CHECK(a.rewards == b.rewards);
  CHECK(a.sigmas == b.sigmas);
  for (double s : a.sigmas) CHECK(s >= 0.0);
}

TEST_CASE("naive baseline queries every context; random never trains") {
  const auto cfg = quick_config(masses({0.5, 1.0, 2.0, 4.0, 6.0}));
  const auto naive = run_baseline(cfg, BaselineMode::kNaive);
  CHECK(naive.total_queries == 5);
  CHECK(naive.training_calls == 5);
  for (const auto& c : naive.contexts) CHECK(c.queried());
  const auto random = run_baseline(cfg, BaselineMode::kRandom);
  CHECK(random.total_queries == 0);
  CHECK(random.training_calls == 0);
  CHECK(random.dataset_windows == 0);
  CHECK(random.trained_contexts.empty());
}

TEST_CASE("naive baseline earns at least the random baseline's reward") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RunConfig cfg;
    cfg.contexts = env::double_integrator_family();
    cfg.eval_episodes = 1;
    cfg.seed = seed;
    const auto naive = run_baseline(cfg, BaselineMode::kNaive);
    const auto random = run_baseline(cfg, BaselineMode::kRandom);
    CHECK_MESSAGE(naive.cumulative_reward >= random.cumulative_reward, "seed " << seed);
  }
}

TEST_CASE("dataset grows by demos_per_request * (H - k + 1) per query") {
  auto cfg = quick_config(masses({0.5, 1.0, 3.0}));
  cfg.demos_per_request = 2;
  cfg.k = 3;
  const auto log = run_baseline(cfg, BaselineMode::kNaive);
  CHECK(log.dataset_windows == log.total_queries * 2 * (60 - 3 + 1));
  auto active = run_active_lfd(cfg);
  CHECK(active.dataset_windows == active.total_queries * 2 * (60 - 3 + 1));
}

TEST_CASE("omega trace follows every retraining over the trained contexts") {
  auto cfg = quick_config(masses({0.5, 1.0, 3.0}));
  const auto log = run_active_lfd(cfg);
  CHECK(log.omega_trace.size() == log.training_calls);
  CHECK(log.training_calls == log.total_queries);
  CHECK(log.query_context_indices.size() == log.total_queries);
  for (double w : log.omega_trace) CHECK(w > 0.0);
  // The first context always queries.
  REQUIRE_FALSE(log.query_context_indices.empty());
  CHECK(log.query_context_indices.front() == 0);
  CHECK(log.contexts[0].omega_at_entry == 0.0);
}

TEST_CASE("tiny threshold scale queries on every context") {
  auto cfg = quick_config(masses({0.5, 1.0, 2.0, 6.0}));
  cfg.detector.c = 1e-9;
  cfg.max_queries_per_context = 1;
  const auto log = run_active_lfd(cfg);
  CHECK(log.total_queries == 4);
  for (const auto& c : log.contexts) CHECK(c.queries == 1);
}

TEST_CASE("unreachable threshold after the first training gives one query") {
  auto cfg = quick_config(masses({0.5, 1.0, 2.0, 6.0}));
  cfg.detector.c = 1e300;
  const auto log = run_active_lfd(cfg);
  CHECK(log.total_queries == 1);
  CHECK(log.contexts[0].queries == 1);
}

TEST_CASE("query budget caps the run") {
  auto cfg = quick_config(masses({0.5, 1.0, 2.0}));
  cfg.max_total_queries = 3;
  const auto log = run_active_lfd(cfg);
  CHECK(log.total_queries <= cfg.contexts.size());
  for (const auto& c : log.contexts) CHECK(c.queries <= cfg.max_queries_per_context);
}

TEST_CASE("single context with the default experiment settings queries exactly once") {
  const exp::ExperimentConfig defaults;
  auto cfg = defaults.run_config({defaults.integrator(1.0)}, 0);
  cfg.max_total_queries = 0;  // only the per-context cap applies
  const auto log = run_active_lfd(cfg);
  CHECK(log.total_queries == 1);
  CHECK(log.contexts[0].queries == 1);
}

TEST_CASE("spearman_rank_corr") {
  CHECK(spearman_rank_corr({1, 2, 3, 4}, {1, 2, 3, 4}) == doctest::Approx(1.0));
  CHECK(spearman_rank_corr({1, 2, 3, 4}, {9, 5, 2, -1}) == doctest::Approx(-1.0));
  CHECK(spearman_rank_corr({1, 2, 3}, {1, 3, 2}) == doctest::Approx(0.5));
  // Ties take average ranks: ranks (1.5, 1.5, 3) against (1, 2, 3).
  CHECK(spearman_rank_corr({1, 1, 2}, {1, 2, 3}) == doctest::Approx(std::sqrt(3.0) / 2.0));
  CHECK_THROWS_AS(spearman_rank_corr({1, 2, 3}, {1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(spearman_rank_corr({1, 2}, {1, 2}), std::invalid_argument);
  CHECK(std::isnan(spearman_rank_corr({1, 1, 1}, {1, 2, 3})));
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(10), y(10);
    for (int i = 0; i < 10; ++i) {
      x[i] = standard_normal(rng);
      y[i] = standard_normal(rng);
    }
    const double r = spearman_rank_corr(x, y);
    CHECK(r >= -1.0);
    CHECK(r <= 1.0);
    std::vector<double> y3(10);
    for (int i = 0; i < 10; ++i) y3[i] = y[i] * y[i] * y[i];
    CHECK(spearman_rank_corr(x, y3) == doctest::Approx(r).epsilon(1e-12));
  }
}

TEST_CASE("summary and trace CSVs") {
  auto cfg = quick_config(masses({0.5, 1.0}));
  cfg.record_traces = true;
  const auto log = run_active_lfd(cfg);
  std::ostringstream s;
  write_run_summary_csv(s, log);
  CHECK(s.str().rfind("mode,index,context,omega_at_entry,queried", 0) == 0);
  const std::string body = s.str();
  CHECK(std::count(body.begin(), body.end(), '\n') == 3);
  std::ostringstream t;
  write_trace_csv(t, log.contexts[1].trace);
  CHECK(t.str().rfind("t,sigma_t,smoothed,c_omega,fired\n", 0) == 0);
}

TEST_CASE("run config validation") {
  RunConfig cfg;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.contexts = masses({1.0});
  cfg.demos_per_request = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
