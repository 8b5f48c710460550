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

#ifndef ULFD_WINDOW_PIPELINE_HPP_
#define ULFD_WINDOW_PIPELINE_HPP_

// Temporal-window features. A window ending at step t is laid out as
//   [s_{t-k+1} .. s_t | a_{t-k+1} .. a_{t-1} | r_{t-k+1} .. r_{t-1}]
// and its target is the expert action a_t.

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ulfd/env_suite.hpp"

namespace ulfd::windows {

struct WindowSource {
  std::string context_id;
  std::size_t episode = 0;
  std::size_t t = 0;
};

struct TemporalWindow {
  Eigen::VectorXd features;
  Eigen::VectorXd target;
  WindowSource source;
};

std::size_t window_dim(std::size_t k, std::size_t dim_s, std::size_t dim_a);

/// Exactly T - k + 1 windows, stride one. Throws TrajectoryTooShort if T < k.
std::vector<TemporalWindow> build_windows(const env::Trajectory& traj,
                                          std::size_t k);

/// Windows of several trajectories, concatenated in input order.
std::vector<TemporalWindow> build_windows(
    const std::vector<env::Trajectory>& trajs, std::size_t k);

/// Online record of an episode. `states` holds one more entry than `actions`
/// and `rewards`: the latest state has no action yet.
struct EpisodeHistory {
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> actions;
  std::vector<double> rewards;
};

/// Window ending at the latest state. Missing history is filled by repeating
/// the earliest state and zero actions and rewards.
/// Throws std::invalid_argument on an empty history.
Eigen::VectorXd bootstrap_window(const EpisodeHistory& history, std::size_t k);

/// Column names such as "s1@-1", "a1@-1", "r@-1", "s2@0".
std::vector<std::string> feature_names(std::size_t k, std::size_t dim_s,
                                       std::size_t dim_a);

class Normalizer {
 public:
  static constexpr double kStdFloor = 1e-8;

  Normalizer() = default;
  /// Identity transform of the given width.
  explicit Normalizer(std::size_t dim);
  Normalizer(Eigen::VectorXd mean, Eigen::VectorXd std);

  /// z-score fit over the columns of `data` (population std, floored).
  static Normalizer fit(const Eigen::MatrixXd& data);

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd apply(const Eigen::MatrixXd& data) const;
  Eigen::VectorXd invert(const Eigen::VectorXd& z) const;

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& std() const { return std_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd std_;
  // 1/std, or 0 for constant columns so they map to exactly zero.
  Eigen::VectorXd inv_std_;
};

Normalizer fit_normalizer(const std::vector<TemporalWindow>& windows);

/// Stacks features and targets into column-per-sample matrices.
void to_matrices(const std::vector<TemporalWindow>& windows,
                 Eigen::MatrixXd& features, Eigen::MatrixXd& targets);

/// Dataset CSV: header row of feature slots and targets, one row per window.
void write_dataset_csv(std::ostream& out,
                       const std::vector<TemporalWindow>& windows,
                       std::size_t k, std::size_t dim_s, std::size_t dim_a);

}  // namespace ulfd::windows

#endif  // ULFD_WINDOW_PIPELINE_HPP_
