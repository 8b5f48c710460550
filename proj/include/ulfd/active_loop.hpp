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

#ifndef ULFD_ACTIVE_LOOP_HPP_
#define ULFD_ACTIVE_LOOP_HPP_

// Sequential learning-from-demonstration over a list of contexts: execute the
// current policy, halt when the detector loses confidence, request
// demonstrations, retrain on the aggregated dataset and adapt the threshold.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ulfd/confidence_detector.hpp"
#include "ulfd/env_suite.hpp"
#include "ulfd/policy.hpp"
#include "ulfd/window_pipeline.hpp"

namespace ulfd {

struct RunConfig {
  std::vector<env::Context> contexts;
  std::size_t k = 2;
  DetectorParams detector;
  std::size_t demos_per_request = 3;
  BbbPolicyConfig learner;
  std::size_t eval_episodes = 3;
  std::uint64_t seed = 0;
  std::size_t max_queries_per_context = 3;
  // Total demonstration budget; 0 means unlimited.
  std::size_t max_total_queries = 0;
  bool record_traces = false;

  void validate() const;
};

struct StepTrace {
  std::size_t t = 0;
  double sigma = 0.0;
  double smoothed = 0.0;
  double threshold = 0.0;
  bool fired = false;
};

struct EpisodeResult {
  env::Trajectory trajectory;  // executed steps only
  std::vector<double> sigmas;  // sigma_t of every executed step
  double r_d = 0.0;
  double sigma_d = 0.0;
  std::optional<std::size_t> halted_at;  // detector step count at the halt
  std::vector<StepTrace> trace;
};

/// Runs one episode from `start`. Each step builds the current window,
/// predicts, feeds sigma_t to the detector and halts before acting if a query
/// fires. The detector's episode state is restarted first.
EpisodeResult run_episode(const Policy& policy, const env::Context& ctx,
                          ConfidenceDetector& detector, std::size_t k,
                          const env::State& start, std::size_t episode_id = 0,
                          bool record_trace = false);

struct EvaluationResult {
  std::vector<double> rewards;
  std::vector<double> sigmas;
  double mean_reward = 0.0;
  double mean_sigma = 0.0;
};

/// Full-horizon rollouts with the detector disabled. Episode e starts from
/// reset(ctx) seeded with derive_seed(seed, e).
EvaluationResult evaluate_policy(const Policy& policy, const env::Context& ctx,
                                 std::size_t episodes, std::size_t k,
                                 std::uint64_t seed);

struct ContextLog {
  std::size_t index = 0;
  std::string context_id;
  double omega_at_entry = 0.0;
  std::size_t queries = 0;
  // Metrics of the last (completed) episode executed in this context.
  double r_d = 0.0;
  double sigma_d = 0.0;
  std::vector<std::size_t> halted_at;
  EvaluationResult evaluation;
  std::vector<StepTrace> trace;

  bool queried() const { return queries > 0; }
};

struct RunLog {
  std::string mode;
  std::vector<ContextLog> contexts;
  std::size_t total_queries = 0;
  std::vector<std::size_t> query_context_indices;
  std::vector<double> omega_trace;
  std::vector<std::string> trained_contexts;
  std::size_t training_calls = 0;
  std::size_t dataset_windows = 0;
  // Sum over contexts of the mean evaluation reward measured when the learner
  // finished that context.
  double cumulative_reward = 0.0;
  bool aborted = false;
  std::string diagnostic;
};

BbbPolicy make_learner(const RunConfig& cfg);

/// Active learner. `policy` is updated in place and may be inspected after.
RunLog run_active_lfd(const RunConfig& cfg, BbbPolicy& policy);
RunLog run_active_lfd(const RunConfig& cfg);

enum class BaselineMode { kNaive, kRandom };

/// naive: query and retrain before executing every context (until the budget
/// runs out). random: never query and never train.
RunLog run_baseline(const RunConfig& cfg, BaselineMode mode, BbbPolicy& policy);
RunLog run_baseline(const RunConfig& cfg, BaselineMode mode);

/// Spearman rank correlation with average ranks for ties. Requires equal
/// lengths >= 3.
double spearman_rank_corr(const std::vector<double>& xs,
                          const std::vector<double>& ys);

/// Summary CSV, one row per context.
void write_run_summary_csv(std::ostream& out, const RunLog& log);
/// Per-step detector trace CSV for one context.
void write_trace_csv(std::ostream& out, const std::vector<StepTrace>& trace);

}  // namespace ulfd

#endif  // ULFD_ACTIVE_LOOP_HPP_
