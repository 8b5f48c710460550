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

#include "ulfd/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ulfd/common.hpp"
#include "ulfd/csv.hpp"
#include "ulfd/policy.hpp"
#include "ulfd/window_pipeline.hpp"

namespace ulfd::exp {

namespace {

constexpr std::uint64_t kBvgDemoStream = 0x62766764ULL;
constexpr std::uint64_t kBvgHeldoutStream = 0x6276676fULL;
constexpr std::uint64_t kBvgEvalStream = 0x62766765ULL;
constexpr std::uint64_t kUrDemoStream = 0x75726400ULL;
constexpr std::uint64_t kUrEvalStream = 0x75726500ULL;
constexpr std::uint64_t kOrderStream = 0x6f726472ULL;
constexpr std::uint64_t kFinalEvalStream = 0x66696e6cULL;

const std::map<std::string, std::string>& default_values() {
  static const std::map<std::string, std::string> d = {
      {"seeds", "0,1,2,3,4"},
      {"env", "double_integrator"},
      {"masses", "0.5,0.75,1,1.5,2,3,4,6"},
      {"action_limit", "2"},
      {"dt", "0.05"},
      {"horizon", "200"},
      {"k", "2"},
      {"hidden", "64,64"},
      {"activation", "tanh"},
      {"epochs", "200"},
      {"batch_size", "64"},
      {"learning_rate", "0.001"},
      {"train_mc_samples", "2"},
      {"predict_mc_samples", "50"},
      {"warm_start", "true"},
      {"demos_per_request", "3"},
      {"eval_episodes", "3"},
      {"max_queries_per_context", "3"},
      {"budget", "contexts"},
      {"c", "1"},
      {"m", "10"},
      {"t_start", "auto"},
      {"jobs", "1"},
      {"final_eval_episodes", "3"},
      {"bvg.k_values", "1,2,5"},
      {"bvg.masses", "0.5,1,2,4"},
      {"bvg.demos_per_context", "3"},
      {"bvg.heldout_episodes", "1"},
      {"bvg.eval_episodes", "3"},
      {"gp.max_points", "2400"},
      {"gp.steps", "100"},
      {"gp.optimization_subset", "400"},
      {"gp.init_lengthscale", "1"},
      {"ur.train_index", "0"},
      {"ur.runs", "5"},
      {"so.masses", "1,1.1,6"},
      {"so.budget", "2"},
      {"so.eval_episodes", "10"},
      {"cm.c_values", "0.5,1,2"},
      {"cm.m_values", "1,10,50"},
  };
  return d;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end || !std::isfinite(x)) {
    throw std::invalid_argument("config key '" + key + "': not a number: '" + v + "'");
  }
  return x;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end) {
    throw std::invalid_argument("config key '" + key +
                                "': not a nonnegative integer: '" + v + "'");
  }
  return x;
}

// Runs fn(0..n-1) on up to `jobs` threads. Each index writes only its own
// result slot, so the output does not depend on scheduling.
void parallel_for(std::size_t n, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(jobs, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string join_indices(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(v[i]);
  }
  return out;
}

// Sum over contexts of the mean evaluation reward of the final policy.
double final_reward(const Policy& policy, const std::vector<env::Context>& contexts,
                    std::size_t k, std::size_t episodes, std::uint64_t seed) {
  double total = 0.0;
  for (const env::Context& ctx : contexts) {
    // Keyed by context id so every ordering sees the same start states.
    std::uint64_t h = 0;
    for (char ch : ctx.id) h = h * 131 + static_cast<unsigned char>(ch);
    total += evaluate_policy(policy, ctx, episodes, k,
                             derive_seed(seed, kFinalEvalStream, h))
                 .mean_reward;
  }
  return total;
}

double rmse_on(const Policy& policy, const std::vector<windows::TemporalWindow>& ws) {
  double se = 0.0;
  std::size_t n = 0;
  for (const auto& w : ws) {
    const PredictiveOutput p = policy.predict(w.features);
    se += (p.mean - w.target).squaredNorm();
    n += static_cast<std::size_t>(w.target.size());
  }
  return n ? std::sqrt(se / static_cast<double>(n)) : 0.0;
}

double mean_episode_reward(const Policy& policy,
                           const std::vector<env::Context>& contexts, std::size_t k,
                           std::size_t episodes, std::uint64_t seed) {
  std::vector<double> r;
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    const auto ev = evaluate_policy(policy, contexts[i], episodes, k,
                                    derive_seed(seed, kBvgEvalStream, i));
    r.insert(r.end(), ev.rewards.begin(), ev.rewards.end());
  }
  return mean_of(r);
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kBbbVsGp: return "bbb_vs_gp";
    case ExperimentKind::kUncertaintyReward: return "uncertainty_reward";
    case ExperimentKind::kSanityOrder: return "sanity_order";
    case ExperimentKind::kDataEfficiency: return "data_efficiency";
    case ExperimentKind::kCmSweep: return "cm_sweep";
  }
  return "unknown";
}

ExperimentKind parse_experiment(const std::string& name) {
  for (ExperimentKind k : all_experiments()) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown experiment: " + name);
}

const std::vector<ExperimentKind>& all_experiments() {
  static const std::vector<ExperimentKind> v = {
      ExperimentKind::kBbbVsGp, ExperimentKind::kUncertaintyReward,
      ExperimentKind::kSanityOrder, ExperimentKind::kDataEfficiency,
      ExperimentKind::kCmSweep};
  return v;
}

// --- ExperimentConfig --------------------------------------------------------

ExperimentConfig::ExperimentConfig() : values_(default_values()) {}

void ExperimentConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  load_stream(in, path);
}

void ExperimentConfig::load_stream(std::istream& in, const std::string& origin) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    try {
      apply_override(t);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": " +
                                  e.what());
    }
  }
}

void ExperimentConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw std::invalid_argument("expected key=value, got '" + assignment + "'");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("unknown config key: " + key);
  if (value.find('\n') != std::string::npos) {
    throw std::invalid_argument("config value for " + key + " spans lines");
  }
  it->second = value;
}

bool ExperimentConfig::has(const std::string& key) const {
  return values_.count(key) > 0;
}

const std::string& ExperimentConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("unknown config key: " + key);
  return it->second;
}

double ExperimentConfig::get_double(const std::string& key) const {
  return parse_double(key, get(key));
}

std::size_t ExperimentConfig::get_size(const std::string& key) const {
  return static_cast<std::size_t>(parse_unsigned(key, get(key)));
}

bool ExperimentConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config key '" + key + "': not a boolean: '" + v + "'");
}

std::vector<double> ExperimentConfig::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : split(get(key), ',')) out.push_back(parse_double(key, s));
  return out;
}

std::vector<std::size_t> ExperimentConfig::get_sizes(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& s : split(get(key), ',')) {
    out.push_back(static_cast<std::size_t>(parse_unsigned(key, s)));
  }
  return out;
}

std::vector<std::uint64_t> ExperimentConfig::seeds() const {
  std::vector<std::uint64_t> out;
  for (const auto& s : split(get("seeds"), ',')) out.push_back(parse_unsigned("seeds", s));
  return out;
}

void ExperimentConfig::validate() const {
  if (seeds().empty()) throw std::invalid_argument("seeds must be nonempty");
  env::parse_env_kind(get("env"));
  const auto act = get("activation");
  if (act != "tanh" && act != "relu") {
    throw std::invalid_argument("activation must be tanh or relu");
  }
  learner().train.validate();
  detector().validate();
  for (const auto& c : family()) c.validate();
  for (double m : get_doubles("bvg.masses")) integrator(m).validate();
  for (double m : get_doubles("so.masses")) integrator(m).validate();
  const auto ks = get_sizes("bvg.k_values");
  if (ks.empty() || std::find(ks.begin(), ks.end(), std::size_t{0}) != ks.end()) {
    throw std::invalid_argument("bvg.k_values must be positive");
  }
  if (get_size("demos_per_request") < 1) {
    throw std::invalid_argument("demos_per_request must be >= 1");
  }
  if (get_size("ur.train_index") >= family().size()) {
    throw std::invalid_argument("ur.train_index outside the context family");
  }
  if (get_size("ur.runs") < 1) throw std::invalid_argument("ur.runs must be >= 1");
  if (get_doubles("cm.c_values").empty() || get_sizes("cm.m_values").empty()) {
    throw std::invalid_argument("cm grid must be nonempty");
  }
  const std::string& b = get("budget");
  if (b != "contexts") parse_unsigned("budget", b);
  get_size("jobs");
  get_size("so.budget");
  get_size("gp.max_points");
  get_size("gp.steps");
  get_size("gp.optimization_subset");
  get_double("gp.init_lengthscale");
  get_bool("warm_start");
}

BbbPolicyConfig ExperimentConfig::learner() const {
  BbbPolicyConfig pc;
  pc.hidden_layers = get_sizes("hidden");
  pc.activation = get("activation") == "relu" ? bnn::Activation::kRectifier
                                              : bnn::Activation::kTanh;
  pc.train.epochs = get_size("epochs");
  pc.train.batch_size = get_size("batch_size");
  pc.train.learning_rate = get_double("learning_rate");
  pc.train.train_mc_samples = get_size("train_mc_samples");
  pc.train.predict_mc_samples = get_size("predict_mc_samples");
  pc.warm_start = get_bool("warm_start");
  return pc;
}

namespace {

// t_start=auto: at least m, and past the first half of the episode.
std::size_t auto_grace(std::size_t m, std::size_t horizon) {
  return std::max(m, horizon / 2);
}

}  // namespace

DetectorParams ExperimentConfig::detector() const {
  DetectorParams p;
  p.c = get_double("c");
  p.m = get_size("m");
  p.t_start = get("t_start") == "auto" ? auto_grace(p.m, get_size("horizon"))
                                       : get_size("t_start");
  return p;
}

env::Context ExperimentConfig::integrator(double mass) const {
  env::Context c = env::make_double_integrator(mass);
  c.action_limit = get_double("action_limit");
  c.dt = get_double("dt");
  c.horizon = get_size("horizon");
  return c;
}

std::vector<env::Context> ExperimentConfig::family() const {
  std::vector<env::Context> out;
  if (env::parse_env_kind(get("env")) == env::EnvKind::kPendulum) {
    out = env::pendulum_family();
    for (auto& c : out) {
      c.dt = get_double("dt");
      c.horizon = get_size("horizon");
    }
    return out;
  }
  for (double m : get_doubles("masses")) out.push_back(integrator(m));
  return out;
}

RunConfig ExperimentConfig::run_config(std::vector<env::Context> contexts,
                                       std::uint64_t seed) const {
  RunConfig rc;
  rc.k = get_size("k");
  rc.detector = detector();
  rc.demos_per_request = get_size("demos_per_request");
  rc.learner = learner();
  rc.eval_episodes = get_size("eval_episodes");
  rc.seed = seed;
  rc.max_queries_per_context = get_size("max_queries_per_context");
  const std::string& b = get("budget");
  rc.max_total_queries = b == "contexts" ? contexts.size() : get_size("budget");
  rc.contexts = std::move(contexts);
  return rc;
}

// --- bbb_vs_gp -------------------------------------------------------------------

double BbbVsGpResult::mean_reward(const std::string& learner, std::size_t k) const {
  std::vector<double> r;
  for (const auto& row : rows) {
    if (row.learner == learner && row.k == k && !row.capped) r.push_back(row.reward);
  }
  return mean_of(r);
}

BbbVsGpResult run_bbb_vs_gp(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<env::Context> contexts;
  for (double m : cfg.get_doubles("bvg.masses")) contexts.push_back(cfg.integrator(m));
  const auto seeds = cfg.seeds();
  const auto ks = cfg.get_sizes("bvg.k_values");
  const std::size_t n_demo = cfg.get_size("bvg.demos_per_context");
  const std::size_t n_held = cfg.get_size("bvg.heldout_episodes");
  const std::size_t n_eval = cfg.get_size("bvg.eval_episodes");
  gp::FitOptions fo;
  fo.steps = cfg.get_size("gp.steps");
  fo.max_points = cfg.get_size("gp.max_points");
  fo.optimization_subset = cfg.get_size("gp.optimization_subset");
  const double ls0 = cfg.get_double("gp.init_lengthscale");
  const BbbPolicyConfig pc = cfg.learner();

  std::vector<std::vector<BbbVsGpRow>> per_seed(seeds.size());
  parallel_for(seeds.size(), cfg.get_size("jobs"), [&](std::size_t si) {
    const std::uint64_t seed = seeds[si];
    // Demonstrations are shared by every k and both learners.
    std::vector<env::Trajectory> train, held;
    for (std::size_t c = 0; c < contexts.size(); ++c) {
      Rng rd(derive_seed(seed, kBvgDemoStream, c));
      auto d = env::get_demonstrations(contexts[c], n_demo, rd);
      train.insert(train.end(), d.begin(), d.end());
      Rng rh(derive_seed(seed, kBvgHeldoutStream, c));
      auto h = env::get_demonstrations(contexts[c], n_held, rh);
      held.insert(held.end(), h.begin(), h.end());
    }
    const env::Context& c0 = contexts.front();
    for (std::size_t k : ks) {
      const auto tw = windows::build_windows(train, k);
      const auto hw = windows::build_windows(held, k);
      const std::size_t dim = windows::window_dim(k, c0.state_dim(), c0.action_dim());

      BbbVsGpRow b{seed, k, "bbb", dim, tw.size(), false, 0.0, 0.0};
      BbbPolicy bbb(dim, c0.action_dim(), pc, derive_seed(seed, k));
      bbb.train(tw);
      b.rmse = rmse_on(bbb, hw);
      b.reward = mean_episode_reward(bbb, contexts, k, n_eval, seed);
      per_seed[si].push_back(b);

      BbbVsGpRow g{seed, k, "gp", dim, tw.size(), false, 0.0, 0.0};
      try {
        GpPolicy gpp(tw, fo, ls0);
        g.rmse = rmse_on(gpp, hw);
        g.reward = mean_episode_reward(gpp, contexts, k, n_eval, seed);
      } catch (const DatasetTooLarge&) {
        g.capped = true;
        g.rmse = std::numeric_limits<double>::quiet_NaN();
        g.reward = std::numeric_limits<double>::quiet_NaN();
      }
      per_seed[si].push_back(g);
    }
  });
  BbbVsGpResult res;
  for (auto& v : per_seed) res.rows.insert(res.rows.end(), v.begin(), v.end());
  return res;
}

// --- uncertainty_reward ------------------------------------------------------------

UncertaintyResult run_uncertainty_reward(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto contexts = cfg.family();
  const auto seeds = cfg.seeds();
  const std::size_t k = cfg.get_size("k");
  const std::size_t runs = cfg.get_size("ur.runs");
  UncertaintyResult res;
  res.train_index = cfg.get_size("ur.train_index");
  for (const auto& c : contexts) res.context_ids.push_back(c.id);

  std::vector<std::vector<UncertaintyRow>> per_seed(seeds.size());
  parallel_for(seeds.size(), cfg.get_size("jobs"), [&](std::size_t si) {
    const std::uint64_t seed = seeds[si];
    const env::Context& tc = contexts[res.train_index];
    Rng rd(derive_seed(seed, kUrDemoStream));
    const auto demos = env::get_demonstrations(tc, cfg.get_size("demos_per_request"), rd);
    BbbPolicy policy(windows::window_dim(k, tc.state_dim(), tc.action_dim()),
                     tc.action_dim(), cfg.learner(), seed);
    policy.train(windows::build_windows(demos, k));
    for (std::size_t ci = 0; ci < contexts.size(); ++ci) {
      const auto ev = evaluate_policy(policy, contexts[ci], runs, k,
                                      derive_seed(seed, kUrEvalStream, ci));
      for (std::size_t r = 0; r < runs; ++r) {
        per_seed[si].push_back({seed, ci, contexts[ci].id, r, ci == res.train_index,
                                ev.sigmas[r], ev.rewards[r]});
      }
    }
  });
  std::vector<double> xs, ys;
  std::vector<std::vector<double>> sig(contexts.size()), rew(contexts.size());
  for (auto& v : per_seed) {
    for (const auto& row : v) {
      xs.push_back(row.sigma_d);
      ys.push_back(row.r_d);
      sig[row.context_index].push_back(row.sigma_d);
      rew[row.context_index].push_back(row.r_d);
      res.rows.push_back(row);
    }
  }
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    res.mean_sigma.push_back(mean_of(sig[i]));
    res.mean_reward.push_back(mean_of(rew[i]));
  }
  res.spearman = xs.size() >= 3 ? spearman_rank_corr(xs, ys)
                                : std::numeric_limits<double>::quiet_NaN();
  return res;
}

// --- sanity_order --------------------------------------------------------------

SanityResult run_sanity_order(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<env::Context> contexts;
  for (double m : cfg.get_doubles("so.masses")) contexts.push_back(cfg.integrator(m));
  const auto seeds = cfg.seeds();
  const std::size_t k = cfg.get_size("k");
  const std::size_t eval_eps = cfg.get_size("so.eval_episodes");
  SanityResult res;
  for (const auto& c : contexts) res.context_ids.push_back(c.id);

  std::vector<std::vector<SanityRow>> per_seed(seeds.size());
  parallel_for(seeds.size(), cfg.get_size("jobs"), [&](std::size_t si) {
    const std::uint64_t seed = seeds[si];
    RunConfig rc = cfg.run_config(contexts, seed);
    rc.max_total_queries = cfg.get_size("so.budget");
    for (const char* mode : {"active", "naive"}) {
      BbbPolicy policy = make_learner(rc);
      const RunLog log = std::string(mode) == "active"
                             ? run_active_lfd(rc, policy)
                             : run_baseline(rc, BaselineMode::kNaive, policy);
      per_seed[si].push_back({seed, mode, log.total_queries, log.query_context_indices,
                              final_reward(policy, contexts, k, eval_eps, seed)});
    }
  });
  for (auto& v : per_seed) res.rows.insert(res.rows.end(), v.begin(), v.end());
  return res;
}

// --- data_efficiency / cm_sweep -----------------------------------------------------

std::vector<const EfficiencyRow*> EfficiencyResult::select(const std::string& mode) const {
  std::vector<const EfficiencyRow*> out;
  for (const auto& r : rows) {
    if (r.mode == mode) out.push_back(&r);
  }
  return out;
}

std::vector<env::Context> shuffled_family(const ExperimentConfig& cfg,
                                          std::uint64_t seed) {
  auto fam = cfg.family();
  Rng rng(derive_seed(seed, kOrderStream));
  // Explicit Fisher-Yates: std::shuffle's draw pattern is library-specific.
  for (std::size_t i = fam.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(fam[i - 1], fam[j]);
  }
  return fam;
}

namespace {

struct EfficiencyJob {
  std::uint64_t seed;
  std::string mode;
  DetectorParams detector;
};

EfficiencyRow run_efficiency_job(const ExperimentConfig& cfg, const EfficiencyJob& job) {
  const auto contexts = shuffled_family(cfg, job.seed);
  RunConfig rc = cfg.run_config(contexts, job.seed);
  rc.detector = job.detector;
  BbbPolicy policy = make_learner(rc);
  RunLog log;
  if (job.mode == "active") {
    log = run_active_lfd(rc, policy);
  } else if (job.mode == "naive") {
    log = run_baseline(rc, BaselineMode::kNaive, policy);
  } else {
    log = run_baseline(rc, BaselineMode::kRandom, policy);
  }
  EfficiencyRow row;
  row.seed = job.seed;
  row.mode = job.mode;
  row.c = job.detector.c;
  row.m = job.detector.m;
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    if (i) row.ordering += ';';
    row.ordering += contexts[i].id;
  }
  row.queries = log.total_queries;
  row.online_reward = log.cumulative_reward;
  row.aborted = log.aborted;
  row.cumulative_reward = final_reward(policy, contexts, rc.k,
                                       cfg.get_size("final_eval_episodes"), job.seed);
  return row;
}

EfficiencyResult run_jobs(const ExperimentConfig& cfg,
                          const std::vector<EfficiencyJob>& jobs) {
  EfficiencyResult res;
  res.rows.resize(jobs.size());
  parallel_for(jobs.size(), cfg.get_size("jobs"),
               [&](std::size_t i) { res.rows[i] = run_efficiency_job(cfg, jobs[i]); });
  return res;
}

}  // namespace

EfficiencyResult run_data_efficiency(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<EfficiencyJob> jobs;
  for (std::uint64_t seed : cfg.seeds()) {
    for (const char* mode : {"active", "naive", "random"}) {
      jobs.push_back({seed, mode, cfg.detector()});
    }
  }
  return run_jobs(cfg, jobs);
}

EfficiencyResult run_cm_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<EfficiencyJob> jobs;
  for (double c : cfg.get_doubles("cm.c_values")) {
    for (std::size_t m : cfg.get_sizes("cm.m_values")) {
      DetectorParams p = cfg.detector();
      p.c = c;
      p.m = m;
      if (cfg.get("t_start") == "auto") p.t_start = auto_grace(m, cfg.get_size("horizon"));
      p.validate();
      for (std::uint64_t seed : cfg.seeds()) jobs.push_back({seed, "active", p});
    }
  }
  return run_jobs(cfg, jobs);
}

// --- output ---------------------------------------------------------------------

void write_header_comment(std::ostream& out, ExperimentKind kind,
                          const ExperimentConfig& cfg) {
  out << "# " << kVersion << '\n';
  out << "# experiment=" << to_string(kind) << '\n';
  for (const auto& [key, value] : cfg.values()) out << "# " << key << '=' << value << '\n';
}

void write_csv(std::ostream& out, const ExperimentConfig& cfg, const BbbVsGpResult& res) {
  write_header_comment(out, ExperimentKind::kBbbVsGp, cfg);
  csv::write_row(out, {"seed", "k", "learner", "input_dim", "train_windows", "capped",
                       "heldout_rmse", "episodic_reward"});
  for (const auto& r : res.rows) {
    csv::write_row(out, {std::to_string(r.seed), std::to_string(r.k), r.learner,
                         std::to_string(r.input_dim), std::to_string(r.train_windows),
                         r.capped ? "1" : "0", csv::num(r.rmse), csv::num(r.reward)});
  }
}

void write_csv(std::ostream& out, const ExperimentConfig& cfg,
               const UncertaintyResult& res) {
  write_header_comment(out, ExperimentKind::kUncertaintyReward, cfg);
  out << "# spearman=" << csv::num(res.spearman) << '\n';
  for (std::size_t i = 0; i < res.context_ids.size(); ++i) {
    out << "# mean " << res.context_ids[i] << " sigma_d=" << csv::num(res.mean_sigma[i])
        << " r_d=" << csv::num(res.mean_reward[i]) << '\n';
  }
  csv::write_row(out, {"seed", "context_index", "context", "run", "trained", "sigma_d",
                       "r_d"});
  for (const auto& r : res.rows) {
    csv::write_row(out, {std::to_string(r.seed), std::to_string(r.context_index),
                         r.context_id, std::to_string(r.run), r.trained ? "1" : "0",
                         csv::num(r.sigma_d), csv::num(r.r_d)});
  }
}

void write_csv(std::ostream& out, const ExperimentConfig& cfg, const SanityResult& res) {
  write_header_comment(out, ExperimentKind::kSanityOrder, cfg);
  std::string order;
  for (std::size_t i = 0; i < res.context_ids.size(); ++i) {
    if (i) order += ';';
    order += res.context_ids[i];
  }
  out << "# ordering=" << order << '\n';
  csv::write_row(out, {"seed", "mode", "queries", "query_indices", "cumulative_reward"});
  for (const auto& r : res.rows) {
    csv::write_row(out, {std::to_string(r.seed), r.mode, std::to_string(r.queries),
                         join_indices(r.query_indices), csv::num(r.cumulative_reward)});
  }
}

void write_csv(std::ostream& out, const ExperimentConfig& cfg, ExperimentKind kind,
               const EfficiencyResult& res) {
  write_header_comment(out, kind, cfg);
  csv::write_row(out, {"seed", "mode", "c", "m", "ordering", "queries",
                       "cumulative_reward", "online_reward", "aborted"});
  for (const auto& r : res.rows) {
    csv::write_row(out, {std::to_string(r.seed), r.mode, csv::num(r.c),
                         std::to_string(r.m), r.ordering, std::to_string(r.queries),
                         csv::num(r.cumulative_reward), csv::num(r.online_reward),
                         r.aborted ? "1" : "0"});
  }
}

std::string run_to_directory(ExperimentKind kind, const ExperimentConfig& cfg,
                             const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::string path =
      (std::filesystem::path(out_dir) / (to_string(kind) + ".csv")).string();
  std::ostringstream body;
  switch (kind) {
    case ExperimentKind::kBbbVsGp: write_csv(body, cfg, run_bbb_vs_gp(cfg)); break;
    case ExperimentKind::kUncertaintyReward:
      write_csv(body, cfg, run_uncertainty_reward(cfg));
      break;
    case ExperimentKind::kSanityOrder: write_csv(body, cfg, run_sanity_order(cfg)); break;
    case ExperimentKind::kDataEfficiency:
      write_csv(body, cfg, kind, run_data_efficiency(cfg));
      break;
    case ExperimentKind::kCmSweep: write_csv(body, cfg, kind, run_cm_sweep(cfg)); break;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << body.str();
  if (!out) throw std::runtime_error("write failed: " + path);
  return path;
}

}  // namespace ulfd::exp
