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

#ifndef ULFD_POLICY_HPP_
#define ULFD_POLICY_HPP_

// Learned and scripted controllers acting on raw temporal-window features.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "ulfd/bayes_net.hpp"
#include "ulfd/env_suite.hpp"
#include "ulfd/gp_baseline.hpp"
#include "ulfd/predictive.hpp"
#include "ulfd/window_pipeline.hpp"

namespace ulfd {

class Policy {
 public:
  virtual ~Policy() = default;
  /// Predictive action distribution for one unnormalized window.
  virtual PredictiveOutput predict(const Eigen::VectorXd& features) const = 0;
  /// sigma_t for many windows at once (default: one predict per window).
  virtual std::vector<double> predict_sigmas(
      const std::vector<windows::TemporalWindow>& windows) const;
};

struct BbbPolicyConfig {
  std::vector<std::size_t> hidden_layers = {64, 64};
  bnn::Activation activation = bnn::Activation::kTanh;
  bnn::TrainConfig train;
  // Retrain from the current posterior instead of a fresh initialization.
  bool warm_start = true;
};

/// Bayes-by-Backprop policy. Inputs and targets are z-scored with statistics
/// refit on every training call; predictions are reported in action units.
/// Monte Carlo prediction uses a weight ensemble drawn once per training call.
class BbbPolicy : public Policy {
 public:
  BbbPolicy(std::size_t input_dim, std::size_t output_dim, BbbPolicyConfig cfg,
            std::uint64_t seed);

  /// Throws TrainingDiverged when the loss becomes non-finite; the policy
  /// keeps the last finite posterior in that case.
  void train(const std::vector<windows::TemporalWindow>& dataset);

  PredictiveOutput predict(const Eigen::VectorXd& features) const override;
  std::vector<double> predict_sigmas(
      const std::vector<windows::TemporalWindow>& windows) const override;

  bool trained() const { return train_calls_ > 0; }
  std::size_t train_calls() const { return train_calls_; }
  const bnn::VariationalPosterior& posterior() const { return posterior_; }
  const std::vector<double>& last_epoch_losses() const { return last_losses_; }

 private:
  void resample_ensemble();

  BbbPolicyConfig cfg_;
  std::uint64_t seed_;
  bnn::VariationalPosterior posterior_;
  windows::Normalizer input_norm_;
  Eigen::VectorXd target_mean_;
  Eigen::VectorXd target_scale_;
  bnn::SampledEnsemble ensemble_;
  std::size_t train_calls_ = 0;
  std::vector<double> last_losses_;
};

/// Exact GP policy with the same normalization conventions as BbbPolicy.
class GpPolicy : public Policy {
 public:
  GpPolicy(const std::vector<windows::TemporalWindow>& dataset,
           const gp::FitOptions& options, double init_lengthscale = 1.0);

  PredictiveOutput predict(const Eigen::VectorXd& features) const override;
  const gp::GpModel& model() const { return model_; }

 private:
  windows::Normalizer input_norm_;
  Eigen::VectorXd target_mean_;
  Eigen::VectorXd target_scale_;
  gp::GpModel model_;
};

/// The demonstrator wrapped as a window policy (reads the latest state slot).
class ExpertPolicy : public Policy {
 public:
  explicit ExpertPolicy(const env::Context& ctx);
  PredictiveOutput predict(const Eigen::VectorXd& features) const override;

 private:
  env::Expert expert_;
};

}  // namespace ulfd

#endif  // ULFD_POLICY_HPP_
