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

#include "ulfd/active_loop.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <utility>

#include "ulfd/csv.hpp"

namespace ulfd {

namespace {

constexpr std::uint64_t kStartStream = 0x7374617274ULL;
constexpr std::uint64_t kDemoStream = 0x64656d6fULL;
constexpr std::uint64_t kEvalStream = 0x6576616cULL;
constexpr std::uint64_t kLearnerStream = 0x6c726e72ULL;

// Shared bookkeeping of one run: aggregated dataset, per-context demo
// windows, and the query/training counters.
class Session {
 public:
  Session(const RunConfig& cfg, BbbPolicy& policy, ConfidenceDetector& detector,
          RunLog& log)
      : cfg_(cfg), policy_(policy), detector_(detector), log_(log) {}

  bool budget_left() const {
    return cfg_.max_total_queries == 0 ||
           log_.total_queries < cfg_.max_total_queries;
  }

  // Requests demonstrations for context `index`, retrains and adapts omega.
  void query(std::size_t index, ContextLog& cl) {
    const env::Context& ctx = cfg_.contexts[index];
    Rng rng(derive_seed(cfg_.seed, kDemoStream, log_.total_queries));
    auto demos = env::get_demonstrations(ctx, cfg_.demos_per_request, rng);
    auto fresh = windows::build_windows(demos, cfg_.k);

    auto it = std::find_if(per_context_.begin(), per_context_.end(),
                           [&](const auto& p) { return p.first == ctx.id; });
    if (it == per_context_.end()) {
      per_context_.emplace_back(ctx.id, std::vector<windows::TemporalWindow>{});
      it = std::prev(per_context_.end());
      log_.trained_contexts.push_back(ctx.id);
    }
    it->second.insert(it->second.end(), fresh.begin(), fresh.end());
    dataset_.insert(dataset_.end(), std::make_move_iterator(fresh.begin()),
                    std::make_move_iterator(fresh.end()));
    log_.dataset_windows = dataset_.size();
    ++log_.total_queries;
    ++cl.queries;
    log_.query_context_indices.push_back(index);

    policy_.train(dataset_);
    ++log_.training_calls;

    std::vector<double> means;
    means.reserve(per_context_.size());
    for (const auto& [id, wins] : per_context_) {
      const auto sig = policy_.predict_sigmas(wins);
      means.push_back(std::accumulate(sig.begin(), sig.end(), 0.0) /
                      static_cast<double>(sig.size()));
    }
    detector_.update_threshold(means);
    log_.omega_trace.push_back(detector_.omega());
  }

  env::State start_state(std::size_t index, std::size_t attempt) const {
    Rng rng(derive_seed(cfg_.seed, kStartStream, index * 64 + attempt));
    return env::reset(cfg_.contexts[index], rng);
  }

  void finish_context(std::size_t index, ContextLog cl, const EpisodeResult& ep) {
    cl.r_d = ep.r_d;
    cl.sigma_d = ep.sigma_d;
    if (cfg_.record_traces) cl.trace = ep.trace;
    cl.evaluation =
        evaluate_policy(policy_, cfg_.contexts[index], cfg_.eval_episodes,
                        cfg_.k, derive_seed(cfg_.seed, kEvalStream, index));
    log_.cumulative_reward += cl.evaluation.mean_reward;
    log_.contexts.push_back(std::move(cl));
  }

  void abort(ContextLog cl, const std::string& why) {
    log_.aborted = true;
    log_.diagnostic = why;
    log_.contexts.push_back(std::move(cl));
  }

 private:
  const RunConfig& cfg_;
  BbbPolicy& policy_;
  ConfidenceDetector& detector_;
  RunLog& log_;
  std::vector<windows::TemporalWindow> dataset_;
  std::vector<std::pair<std::string, std::vector<windows::TemporalWindow>>>
      per_context_;
};

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t q = i; q <= j; ++q) ranks[idx[q]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

void RunConfig::validate() const {
  if (contexts.empty()) throw std::invalid_argument("context sequence is empty");
  if (demos_per_request < 1) {
    throw std::invalid_argument("demos_per_request must be >= 1");
  }
  if (k < 1) throw std::invalid_argument("window size k must be >= 1");
  for (const auto& c : contexts) {
    c.validate();
    if (c.horizon < k) throw std::invalid_argument("horizon shorter than window");
  }
  detector.validate();
  learner.train.validate();
}

EpisodeResult run_episode(const Policy& policy, const env::Context& ctx,
                          ConfidenceDetector& detector, std::size_t k,
                          const env::State& start, std::size_t episode_id,
                          bool record_trace) {
  detector.restart_episode();
  EpisodeResult res;
  res.trajectory.context_id = ctx.id;
  res.trajectory.episode = episode_id;
  windows::EpisodeHistory history;
  history.states.push_back(start);
  env::State s = start;
  for (std::size_t t = 0; t < ctx.horizon; ++t) {
    const PredictiveOutput pred = policy.predict(windows::bootstrap_window(history, k));
    detector.observe(pred.sigma_scalar);
    const bool fired = detector.should_query();
    if (record_trace) {
      res.trace.push_back(
          {t, pred.sigma_scalar, detector.smoothed(), detector.threshold(), fired});
    }
    if (fired) {
      res.halted_at = detector.t();
      break;
    }
    const env::Action a = env::clip_action(ctx, pred.mean);
    env::StepResult sr = env::step(ctx, s, a);
    res.trajectory.steps.push_back({s, a, sr.reward});
    res.sigmas.push_back(pred.sigma_scalar);
    res.r_d += sr.reward;
    res.sigma_d += pred.sigma_scalar;
    history.actions.push_back(a);
    history.rewards.push_back(sr.reward);
    history.states.push_back(sr.next);
    s = std::move(sr.next);
  }
  res.trajectory.terminal = s;
  return res;
}

EvaluationResult evaluate_policy(const Policy& policy, const env::Context& ctx,
                                 std::size_t episodes, std::size_t k,
                                 std::uint64_t seed) {
  EvaluationResult out;
  ConfidenceDetector off;
  off.disable();
  for (std::size_t e = 0; e < episodes; ++e) {
    Rng rng(derive_seed(seed, e));
    const EpisodeResult ep =
        run_episode(policy, ctx, off, k, env::reset(ctx, rng), e);
    out.rewards.push_back(ep.r_d);
    out.sigmas.push_back(ep.sigma_d);
  }
  if (episodes > 0) {
    const double n = static_cast<double>(episodes);
    out.mean_reward = std::accumulate(out.rewards.begin(), out.rewards.end(), 0.0) / n;
    out.mean_sigma = std::accumulate(out.sigmas.begin(), out.sigmas.end(), 0.0) / n;
  }
  return out;
}

BbbPolicy make_learner(const RunConfig& cfg) {
  cfg.validate();
  const env::Context& c0 = cfg.contexts.front();
  return BbbPolicy(windows::window_dim(cfg.k, c0.state_dim(), c0.action_dim()),
                   c0.action_dim(), cfg.learner,
                   derive_seed(cfg.seed, kLearnerStream));
}

RunLog run_active_lfd(const RunConfig& cfg, BbbPolicy& policy) {
  cfg.validate();
  RunLog log;
  log.mode = "active";
  ConfidenceDetector detector(cfg.detector);
  Session session(cfg, policy, detector, log);

  for (std::size_t i = 0; i < cfg.contexts.size(); ++i) {
    const env::Context& ctx = cfg.contexts[i];
    ContextLog cl;
    cl.index = i;
    cl.context_id = ctx.id;
    cl.omega_at_entry = detector.omega();
    EpisodeResult ep;
    for (std::size_t attempt = 0;; ++attempt) {
      const env::State start = session.start_state(i, attempt);
      ep = run_episode(policy, ctx, detector, cfg.k, start, attempt,
                       cfg.record_traces);
      if (!ep.halted_at) break;
      cl.halted_at.push_back(*ep.halted_at);
      if (cl.queries >= cfg.max_queries_per_context || !session.budget_left()) {
        // Out of queries: finish the episode without the detector.
        ConfidenceDetector off(cfg.detector);
        off.disable();
        ep = run_episode(policy, ctx, off, cfg.k, start, attempt, cfg.record_traces);
        break;
      }
      try {
        session.query(i, cl);
      } catch (const TrainingDiverged& e) {
        session.abort(std::move(cl), e.what());
        return log;
      }
    }
    session.finish_context(i, std::move(cl), ep);
  }
  return log;
}

RunLog run_active_lfd(const RunConfig& cfg) {
  BbbPolicy policy = make_learner(cfg);
  return run_active_lfd(cfg, policy);
}

RunLog run_baseline(const RunConfig& cfg, BaselineMode mode, BbbPolicy& policy) {
  cfg.validate();
  RunLog log;
  log.mode = mode == BaselineMode::kNaive ? "naive" : "random";
  ConfidenceDetector detector(cfg.detector);
  Session session(cfg, policy, detector, log);
  for (std::size_t i = 0; i < cfg.contexts.size(); ++i) {
    ContextLog cl;
    cl.index = i;
    cl.context_id = cfg.contexts[i].id;
    cl.omega_at_entry = detector.omega();
    if (mode == BaselineMode::kNaive && session.budget_left()) {
      try {
        session.query(i, cl);
      } catch (const TrainingDiverged& e) {
        session.abort(std::move(cl), e.what());
        return log;
      }
    }
    ConfidenceDetector off(cfg.detector);
    off.disable();
    const EpisodeResult ep =
        run_episode(policy, cfg.contexts[i], off, cfg.k, session.start_state(i, 0),
                    0, cfg.record_traces);
    session.finish_context(i, std::move(cl), ep);
  }
  return log;
}

RunLog run_baseline(const RunConfig& cfg, BaselineMode mode) {
  BbbPolicy policy = make_learner(cfg);
  return run_baseline(cfg, mode, policy);
}

double spearman_rank_corr(const std::vector<double>& xs,
                          const std::vector<double>& ys) {
  if (xs.size() != ys.size()) {
    throw std::invalid_argument("spearman inputs differ in length");
  }
  if (xs.size() < 3) throw std::invalid_argument("spearman needs >= 3 pairs");
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

void write_run_summary_csv(std::ostream& out, const RunLog& log) {
  csv::write_row(out, {"mode", "index", "context", "omega_at_entry", "queried",
                       "queries", "r_d", "sigma_d", "eval_mean_r_d",
                       "eval_mean_sigma_d"});
  for (const ContextLog& c : log.contexts) {
    csv::write_row(out, {log.mode, std::to_string(c.index), c.context_id,
                         csv::num(c.omega_at_entry), c.queried() ? "1" : "0",
                         std::to_string(c.queries), csv::num(c.r_d),
                         csv::num(c.sigma_d), csv::num(c.evaluation.mean_reward),
                         csv::num(c.evaluation.mean_sigma)});
  }
}

void write_trace_csv(std::ostream& out, const std::vector<StepTrace>& trace) {
  csv::write_row(out, {"t", "sigma_t", "smoothed", "c_omega", "fired"});
  for (const StepTrace& s : trace) {
    csv::write_row(out, {std::to_string(s.t), csv::num(s.sigma),
                         csv::num(s.smoothed), csv::num(s.threshold),
                         s.fired ? "1" : "0"});
  }
}

}  // namespace ulfd
