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
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "ulfd/common.hpp"
#include "ulfd/experiments.hpp"

using namespace ulfd;
using namespace ulfd::exp;

namespace {

// Small enough for every experiment to finish in seconds.
ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  for (const char* kv : {"seeds=0,1", "masses=0.5,1,3", "horizon=30", "hidden=8,8", "epochs=5",
                         "predict_mc_samples=5", "demos_per_request=1", "eval_episodes=1",
                         "final_eval_episodes=1", "bvg.masses=0.5,2", "bvg.k_values=2,5",
                         "bvg.demos_per_context=1", "bvg.eval_episodes=1", "gp.steps=3",
                         "gp.optimization_subset=50", "ur.runs=2", "so.eval_episodes=1",
                         "cm.c_values=0.5,2", "cm.m_values=1,10"}) {
    cfg.apply_override(kv);
  }
  return cfg;
}

std::string body_of(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line))
    if (line.rfind("#", 0) != 0) out += line + "\n";
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("experiment names round-trip") {
  for (auto k : all_experiments()) CHECK(parse_experiment(to_string(k)) == k);
  CHECK(all_experiments().size() == 5);
  CHECK(to_string(ExperimentKind::kBbbVsGp) == "bbb_vs_gp");
  CHECK_THROWS_AS(parse_experiment("fig9"), std::invalid_argument);
}

TEST_CASE("config: defaults, file, overrides and precedence") {
  ExperimentConfig cfg;
  CHECK(cfg.get_size("k") == 2);
  CHECK(cfg.seeds() == std::vector<std::uint64_t>{0, 1, 2, 3, 4});
  CHECK(cfg.family().size() == 8);
  std::istringstream file("# comment\n\nk = 5\nc=2.5\nseeds = 3,4\n");
  cfg.load_stream(file);
  CHECK(cfg.get_size("k") == 5);
  CHECK(cfg.get_double("c") == 2.5);
  cfg.apply_override("k=1");
  CHECK(cfg.get_size("k") == 1);
  CHECK(cfg.seeds() == std::vector<std::uint64_t>{3, 4});
  CHECK(cfg.detector().c == 2.5);
  CHECK(cfg.detector().t_start == 100);
  cfg.apply_override("horizon=12");
  CHECK(cfg.detector().t_start == 10);
  cfg.apply_override("t_start=3");
  CHECK(cfg.detector().t_start == 3);
}

TEST_CASE("config: malformed input is rejected") {
  ExperimentConfig cfg;
  CHECK_THROWS_AS(cfg.apply_override("nonsense_key=1"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.apply_override("no_equals_sign"), std::invalid_argument);
  std::istringstream bad("typo_key = 3\n");
  CHECK_THROWS_AS(cfg.load_stream(bad), std::invalid_argument);
  cfg.apply_override("seeds=");
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  ExperimentConfig c2;
  c2.apply_override("epochs=lots");
  CHECK_THROWS_AS(c2.validate(), std::invalid_argument);
  ExperimentConfig c3;
  c3.apply_override("c=-1");
  CHECK_THROWS_AS(c3.validate(), std::invalid_argument);
}

TEST_CASE("header comment echoes the version and every key") {
  const auto cfg = tiny_config();
  std::ostringstream out;
  write_header_comment(out, ExperimentKind::kSanityOrder, cfg);
  const std::string h = out.str();
  CHECK(h.rfind(std::string("# ") + kVersion + "\n", 0) == 0);
  CHECK(h.find("# experiment=sanity_order\n") != std::string::npos);
  for (const auto& [key, value] : cfg.values())
    CHECK_MESSAGE(h.find("# " + key + "=" + value + "\n") != std::string::npos, key);
}

TEST_CASE("bbb_vs_gp: row shape and input dimensions") {
  const auto cfg = tiny_config();
  const auto res = run_bbb_vs_gp(cfg);
  CHECK(res.rows.size() == 2 * 2 * 2);
  std::set<std::string> learners;
  for (const auto& r : res.rows) {
    learners.insert(r.learner);
    if (r.k == 2) CHECK(r.input_dim == 6);
    if (r.k == 5) CHECK(r.input_dim == 18);
    CHECK_FALSE(r.capped);
    CHECK(std::isfinite(r.rmse));
  }
  CHECK(learners == std::set<std::string>{"bbb", "gp"});
}

TEST_CASE("bbb_vs_gp: oversize GP datasets become capped rows") {
  auto cfg = tiny_config();
  cfg.apply_override("gp.max_points=10");
  const auto res = run_bbb_vs_gp(cfg);
  for (const auto& r : res.rows) {
    if (r.learner == "gp") {
      CHECK(r.capped);
      CHECK(std::isnan(r.reward));
    } else {
      CHECK_FALSE(r.capped);
    }
  }
  CHECK(std::isnan(res.mean_reward("gp", 2)));
}

TEST_CASE("uncertainty_reward: runs per context and designated training context") {
  auto cfg = tiny_config();
  cfg.apply_override("ur.train_index=1");
  const auto res = run_uncertainty_reward(cfg);
  CHECK(res.rows.size() == 2 * 2 * 3);
  CHECK(res.train_index == 1);
  CHECK(res.mean_sigma.size() == 3);
  for (const auto& r : res.rows) CHECK(r.trained == (r.context_index == 1));
  CHECK(res.spearman >= -1.0);
  CHECK(res.spearman <= 1.0);
}

TEST_CASE("sanity_order: both learners respect the request budget") {
  const auto cfg = tiny_config();
  const auto res = run_sanity_order(cfg);
  CHECK(res.context_ids.size() == 3);
  CHECK(res.rows.size() == 2 * 2);
  for (const auto& r : res.rows) {
    CHECK(r.queries <= 2);
    CHECK(r.query_indices.size() == r.queries);
  }
}

TEST_CASE("data_efficiency: modes, orderings and random baseline") {
  const auto cfg = tiny_config();
  const auto res = run_data_efficiency(cfg);
  CHECK(res.rows.size() == 3 * 2);
  for (const auto* r : res.select("random")) CHECK(r->queries == 0);
  for (const auto* r : res.select("naive")) CHECK(r->queries == 3);
  for (const auto* r : res.select("active")) CHECK(r->queries <= 3);
  const auto a = shuffled_family(cfg, 0), b = shuffled_family(cfg, 0);
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].id == b[i].id);
  std::multiset<std::string> ids;
  for (const auto& c : a) ids.insert(c.id);
  CHECK(ids.size() == 3);
}

TEST_CASE("cm_sweep: one active row per grid cell and seed") {
  const auto cfg = tiny_config();
  const auto res = run_cm_sweep(cfg);
  CHECK(res.rows.size() == 2 * 2 * 2);
  std::set<std::pair<double, std::size_t>> cells;
  for (const auto& r : res.rows) {
    CHECK(r.mode == "active");
    cells.insert({r.c, r.m});
  }
  CHECK(cells.size() == 4);
}

TEST_CASE("every experiment writes byte-identical CSVs on rerun") {
  const auto cfg = tiny_config();
  const auto root = std::filesystem::temp_directory_path() / "ulfd_test_experiments";
  std::filesystem::remove_all(root);
  for (auto kind : all_experiments()) {
    const auto p1 = run_to_directory(kind, cfg, (root / "a").string());
    const auto p2 = run_to_directory(kind, cfg, (root / "b").string());
    CHECK(std::filesystem::path(p1).filename() == to_string(kind) + ".csv");
    const std::string a = slurp(p1), b = slurp(p2);
    CHECK_MESSAGE(a == b, to_string(kind));
    CHECK(a.rfind(std::string("# ") + kVersion, 0) == 0);
    CHECK_FALSE(body_of(a).empty());
  }
  std::filesystem::remove_all(root);
}

TEST_CASE("parallel jobs do not change results") {
  auto cfg = tiny_config();
  std::ostringstream one, two;
  write_csv(one, cfg, run_uncertainty_reward(cfg));
  cfg.apply_override("jobs=2");
  write_csv(two, cfg, run_uncertainty_reward(cfg));
  CHECK(body_of(one.str()) == body_of(two.str()));
}
