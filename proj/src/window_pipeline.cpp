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

#include "ulfd/window_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "ulfd/csv.hpp"

namespace ulfd::windows {

namespace {

std::string slot(const std::string& name, long offset) {
  return name + "@" + std::to_string(offset);
}

}  // namespace

std::size_t window_dim(std::size_t k, std::size_t dim_s, std::size_t dim_a) {
  if (k < 1) throw std::invalid_argument("window size k must be >= 1");
  return k * dim_s + (k - 1) * dim_a + (k - 1);
}

std::vector<TemporalWindow> build_windows(const env::Trajectory& traj,
                                          std::size_t k) {
  if (k < 1) throw std::invalid_argument("window size k must be >= 1");
  const std::size_t horizon = traj.steps.size();
  if (horizon < k) {
    throw TrajectoryTooShort("trajectory of length " + std::to_string(horizon) +
                             " is shorter than window " + std::to_string(k));
  }
  const auto ds = static_cast<Eigen::Index>(traj.steps[0].state.size());
  const auto da = static_cast<Eigen::Index>(traj.steps[0].action.size());
  const auto kk = static_cast<Eigen::Index>(k);
  const Eigen::Index dim = kk * ds + (kk - 1) * da + (kk - 1);

  std::vector<TemporalWindow> out;
  out.reserve(horizon - k + 1);
  for (std::size_t t = k - 1; t < horizon; ++t) {
    TemporalWindow w;
    w.features.resize(dim);
    const std::size_t first = t + 1 - k;
    for (Eigen::Index j = 0; j < kk; ++j) {
      w.features.segment(j * ds, ds) = traj.steps[first + j].state;
    }
    for (Eigen::Index j = 0; j + 1 < kk; ++j) {
      w.features.segment(kk * ds + j * da, da) = traj.steps[first + j].action;
      w.features[kk * ds + (kk - 1) * da + j] = traj.steps[first + j].reward;
    }
    w.target = traj.steps[t].action;
    w.source = {traj.context_id, traj.episode, t};
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<TemporalWindow> build_windows(
    const std::vector<env::Trajectory>& trajs, std::size_t k) {
  std::vector<TemporalWindow> out;
  for (const auto& traj : trajs) {
    auto part = build_windows(traj, k);
    out.insert(out.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return out;
}

Eigen::VectorXd bootstrap_window(const EpisodeHistory& history, std::size_t k) {
  if (k < 1) throw std::invalid_argument("window size k must be >= 1");
  if (history.states.empty()) {
    throw std::invalid_argument("bootstrap_window needs at least one state");
  }
  if (history.actions.size() + 1 != history.states.size() ||
      history.rewards.size() != history.actions.size()) {
    throw std::invalid_argument("inconsistent episode history");
  }
  const auto ds = static_cast<Eigen::Index>(history.states[0].size());
  const auto da = history.actions.empty()
                      ? Eigen::Index{1}
                      : static_cast<Eigen::Index>(history.actions[0].size());
  const auto kk = static_cast<Eigen::Index>(k);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(kk * ds + (kk - 1) * da + (kk - 1));

  // Slot j of the window corresponds to history index last - (k-1) + j.
  const auto last = static_cast<long>(history.states.size()) - 1;
  for (Eigen::Index j = 0; j < kk; ++j) {
    const long idx = last - (kk - 1) + j;
    const auto& s = history.states[static_cast<std::size_t>(std::max(idx, 0L))];
    f.segment(j * ds, ds) = s;
    if (j + 1 < kk && idx >= 0) {
      f.segment(kk * ds + j * da, da) = history.actions[static_cast<std::size_t>(idx)];
      f[kk * ds + (kk - 1) * da + j] = history.rewards[static_cast<std::size_t>(idx)];
    }
  }
  return f;
}

std::vector<std::string> feature_names(std::size_t k, std::size_t dim_s,
                                       std::size_t dim_a) {
  std::vector<std::string> names;
  const long kk = static_cast<long>(k);
  for (long j = 0; j < kk; ++j) {
    for (std::size_t i = 1; i <= dim_s; ++i) {
      names.push_back(slot("s" + std::to_string(i), j - kk + 1));
    }
  }
  for (long j = 0; j + 1 < kk; ++j) {
    for (std::size_t i = 1; i <= dim_a; ++i) {
      names.push_back(slot("a" + std::to_string(i), j - kk + 1));
    }
  }
  for (long j = 0; j + 1 < kk; ++j) names.push_back(slot("r", j - kk + 1));
  return names;
}

Normalizer::Normalizer(std::size_t dim)
    : Normalizer(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim)),
                 Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dim))) {}

Normalizer::Normalizer(Eigen::VectorXd mean, Eigen::VectorXd std)
    : mean_(std::move(mean)), std_(std::move(std)) {
  if (mean_.size() != std_.size()) {
    throw std::invalid_argument("normalizer mean/std size mismatch");
  }
  inv_std_ = std_.unaryExpr([](double s) { return s > kStdFloor ? 1.0 / s : 0.0; });
  std_ = std_.cwiseMax(kStdFloor);
}

Normalizer Normalizer::fit(const Eigen::MatrixXd& data) {
  if (data.cols() < 2) {
    throw std::invalid_argument("normalizer fit needs at least two samples");
  }
  Eigen::VectorXd mean = data.rowwise().mean();
  Eigen::VectorXd sd =
      ((data.colwise() - mean).array().square().rowwise().mean()).sqrt();
  return Normalizer(std::move(mean), std::move(sd));
}

Eigen::VectorXd Normalizer::apply(const Eigen::VectorXd& x) const {
  if (x.size() != mean_.size()) {
    throw std::invalid_argument("normalizer dimension mismatch");
  }
  return (x - mean_).cwiseProduct(inv_std_);
}

Eigen::MatrixXd Normalizer::apply(const Eigen::MatrixXd& data) const {
  if (data.rows() != mean_.size()) {
    throw std::invalid_argument("normalizer dimension mismatch");
  }
  return inv_std_.asDiagonal() * (data.colwise() - mean_);
}

Eigen::VectorXd Normalizer::invert(const Eigen::VectorXd& z) const {
  if (z.size() != mean_.size()) {
    throw std::invalid_argument("normalizer dimension mismatch");
  }
  return mean_ + z.cwiseProduct(std_);
}

Normalizer fit_normalizer(const std::vector<TemporalWindow>& windows) {
  Eigen::MatrixXd x, y;
  to_matrices(windows, x, y);
  return Normalizer::fit(x);
}

void to_matrices(const std::vector<TemporalWindow>& windows,
                 Eigen::MatrixXd& features, Eigen::MatrixXd& targets) {
  if (windows.empty()) {
    features.resize(0, 0);
    targets.resize(0, 0);
    return;
  }
  const Eigen::Index n = static_cast<Eigen::Index>(windows.size());
  features.resize(windows[0].features.size(), n);
  targets.resize(windows[0].target.size(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& w = windows[static_cast<std::size_t>(i)];
    if (w.features.size() != features.rows() || w.target.size() != targets.rows()) {
      throw std::invalid_argument("windows have inconsistent dimensions");
    }
    features.col(i) = w.features;
    targets.col(i) = w.target;
  }
}

void write_dataset_csv(std::ostream& out,
                       const std::vector<TemporalWindow>& windows,
                       std::size_t k, std::size_t dim_s, std::size_t dim_a) {
  std::vector<std::string> header{"context", "episode", "t"};
  for (auto& name : feature_names(k, dim_s, dim_a)) header.push_back(name);
  for (std::size_t i = 1; i <= dim_a; ++i) {
    header.push_back("target_a" + std::to_string(i));
  }
  csv::write_row(out, header);
  for (const auto& w : windows) {
    std::vector<std::string> row{w.source.context_id,
                                 std::to_string(w.source.episode),
                                 std::to_string(w.source.t)};
    for (Eigen::Index i = 0; i < w.features.size(); ++i) row.push_back(csv::num(w.features[i]));
    for (Eigen::Index i = 0; i < w.target.size(); ++i) row.push_back(csv::num(w.target[i]));
    csv::write_row(out, row);
  }
}

}  // namespace ulfd::windows
