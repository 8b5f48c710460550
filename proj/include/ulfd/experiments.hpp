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

#ifndef ULFD_EXPERIMENTS_HPP_
#define ULFD_EXPERIMENTS_HPP_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ulfd/active_loop.hpp"
#include "ulfd/env_suite.hpp"

namespace ulfd::exp {

enum class ExperimentKind {
  kBbbVsGp,
  kUncertaintyReward,
  kSanityOrder,
  kDataEfficiency,
  kCmSweep
};

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment(const std::string& name);
const std::vector<ExperimentKind>& all_experiments();

/// Flat key=value configuration. Every key has a default; unknown keys are
/// rejected so typos do not silently fall back to defaults.
class ExperimentConfig {
 public:
  ExperimentConfig();

  /// Reads `key = value` lines; blank lines and lines starting with '#' are
  /// skipped.
  void load_file(const std::string& path);
  void load_stream(std::istream& in, const std::string& origin = "<stream>");
  /// Applies one "key=value" assignment.
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<std::size_t> get_sizes(const std::string& key) const;
  std::vector<std::uint64_t> seeds() const;

  const std::map<std::string, std::string>& values() const { return values_; }

  /// Throws std::invalid_argument when a value does not parse or is out of
  /// range.
  void validate() const;

  // Typed views shared by the experiments.
  BbbPolicyConfig learner() const;
  DetectorParams detector() const;
  env::Context integrator(double mass) const;
  std::vector<env::Context> family() const;
  RunConfig run_config(std::vector<env::Context> contexts,
                       std::uint64_t seed) const;

 private:
  std::map<std::string, std::string> values_;
};

// --- bbb_vs_gp ---------------------------------------------------------------

struct BbbVsGpRow {
  std::uint64_t seed = 0;
  std::size_t k = 0;
  std::string learner;
  std::size_t input_dim = 0;
  std::size_t train_windows = 0;
  bool capped = false;
  double rmse = 0.0;
  double reward = 0.0;
};

struct BbbVsGpResult {
  std::vector<BbbVsGpRow> rows;
  /// Seed-averaged episodic reward for (learner, k); NaN when every seed was
  /// capped.
  double mean_reward(const std::string& learner, std::size_t k) const;
};

BbbVsGpResult run_bbb_vs_gp(const ExperimentConfig& cfg);

// --- uncertainty_reward --------------------------------------------------------

struct UncertaintyRow {
  std::uint64_t seed = 0;
  std::size_t context_index = 0;
  std::string context_id;
  std::size_t run = 0;
  bool trained = false;
  double sigma_d = 0.0;
  double r_d = 0.0;
};

struct UncertaintyResult {
  std::size_t train_index = 0;
  std::vector<std::string> context_ids;
  std::vector<UncertaintyRow> rows;
  std::vector<double> mean_sigma;   // per context, over seeds and runs
  std::vector<double> mean_reward;  // per context
  double spearman = 0.0;            // over all rows
};

UncertaintyResult run_uncertainty_reward(const ExperimentConfig& cfg);

// --- sanity_order -------------------------------------------------------------

struct SanityRow {
  std::uint64_t seed = 0;
  std::string mode;
  std::size_t queries = 0;
  std::vector<std::size_t> query_indices;
  double cumulative_reward = 0.0;
};

struct SanityResult {
  std::vector<std::string> context_ids;
  std::vector<SanityRow> rows;
};

SanityResult run_sanity_order(const ExperimentConfig& cfg);

// --- data_efficiency and cm_sweep -----------------------------------------------

struct EfficiencyRow {
  std::uint64_t seed = 0;
  std::string mode;
  double c = 0.0;
  std::size_t m = 0;
  std::string ordering;
  std::size_t queries = 0;
  double cumulative_reward = 0.0;  // final policy summed over all contexts
  double online_reward = 0.0;      // per-context evaluation at context finish
  bool aborted = false;
};

struct EfficiencyResult {
  std::vector<EfficiencyRow> rows;
  std::vector<const EfficiencyRow*> select(const std::string& mode) const;
};

/// Context order used for `seed`: a seeded permutation of the family.
std::vector<env::Context> shuffled_family(const ExperimentConfig& cfg,
                                          std::uint64_t seed);

EfficiencyResult run_data_efficiency(const ExperimentConfig& cfg);
EfficiencyResult run_cm_sweep(const ExperimentConfig& cfg);

// --- output ---------------------------------------------------------------------

/// Writes "# ..." lines carrying the version string, the experiment name and
/// every configuration entry.
void write_header_comment(std::ostream& out, ExperimentKind kind,
                          const ExperimentConfig& cfg);

void write_csv(std::ostream& out, const ExperimentConfig& cfg,
               const BbbVsGpResult& res);
void write_csv(std::ostream& out, const ExperimentConfig& cfg,
               const UncertaintyResult& res);
void write_csv(std::ostream& out, const ExperimentConfig& cfg,
               const SanityResult& res);
void write_csv(std::ostream& out, const ExperimentConfig& cfg, ExperimentKind kind,
               const EfficiencyResult& res);

/// Runs one experiment and writes `<out_dir>/<name>.csv`; returns the path.
std::string run_to_directory(ExperimentKind kind, const ExperimentConfig& cfg,
                             const std::string& out_dir);

}  // namespace ulfd::exp

#endif  // ULFD_EXPERIMENTS_HPP_
