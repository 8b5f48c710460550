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

#ifndef ULFD_BAYES_NET_HPP_
#define ULFD_BAYES_NET_HPP_

// Mean-field Gaussian Bayesian MLP trained with Bayes-by-Backprop.
//
// Parameters are stored as one flat vector. For every layer the weight matrix
// (out x in, column-major) comes first, followed by the bias vector. Data
// matrices hold one sample per column.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ulfd/common.hpp"
#include "ulfd/predictive.hpp"

namespace ulfd::bnn {

enum class Activation { kTanh, kRectifier };

struct Architecture {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_layers = {64, 64};
  std::size_t output_dim = 1;
  Activation activation = Activation::kTanh;

  /// Throws std::invalid_argument on a zero dimension or no hidden layer.
  void validate() const;
  std::size_t parameter_count() const;
  std::size_t layer_count() const { return hidden_layers.size() + 1; }
  std::size_t layer_in(std::size_t layer) const;
  std::size_t layer_out(std::size_t layer) const;
  /// Offset of the layer's weight block in the flat parameter vector.
  std::size_t layer_offset(std::size_t layer) const;

  bool operator==(const Architecture&) const = default;
};

struct VariationalPosterior {
  Architecture arch;
  Eigen::VectorXd mu;
  Eigen::VectorXd rho;
  double likelihood_log_noise = 0.0;
  std::uint64_t seed = 0;

  /// softplus(rho), elementwise.
  Eigen::VectorXd sigma() const;
};

/// One concrete draw of every network parameter.
struct WeightSample {
  Eigen::VectorXd values;
};

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::size_t train_mc_samples = 2;
  std::size_t predict_mc_samples = 50;
  // Only per-batch-fraction KL weighting is implemented.
  enum class KlScaleMode { kPerBatchFraction } kl_scale_mode =
      KlScaleMode::kPerBatchFraction;
  std::uint64_t seed = 0;

  void validate() const;
};

double softplus(double x);
double inverse_softplus(double y);

VariationalPosterior init_posterior(const Architecture& arch,
                                    std::uint64_t seed);

/// w = mu + softplus(rho) * eps with eps ~ N(0, I).
WeightSample sample_weights(const VariationalPosterior& post, Rng& rng);
WeightSample sample_weights(const VariationalPosterior& post,
                            const Eigen::VectorXd& eps);

/// KL(q || N(0, I)) in closed form, summed over all parameters.
double kl_to_prior(const VariationalPosterior& post);

/// Deterministic forward pass of the network with concrete weights.
/// `inputs` is input_dim x n; returns output_dim x n.
Eigen::MatrixXd forward(const Architecture& arch, const Eigen::VectorXd& weights,
                        const Eigen::MatrixXd& inputs);

struct LossEvaluation {
  double loss = 0.0;
  double negative_log_likelihood = 0.0;
  double kl = 0.0;
  Eigen::VectorXd grad_mu;
  Eigen::VectorXd grad_rho;
  double grad_log_noise = 0.0;
};

/// Variational free energy of one minibatch for fixed reparameterization
/// noise: mean over `eps` draws of the batch Gaussian negative log-likelihood,
/// plus kl_scale * KL. Gradients are filled when `with_gradient` is set.
LossEvaluation elbo_loss_fixed_noise(const VariationalPosterior& post,
                                     const Eigen::MatrixXd& inputs,
                                     const Eigen::MatrixXd& targets,
                                     double kl_scale,
                                     std::span<const Eigen::VectorXd> eps,
                                     bool with_gradient);

/// Minibatch loss with fresh noise. KL is weighted by batch size / dataset size.
/// Throws TrainingDiverged when the loss is not finite.
double elbo_loss(const VariationalPosterior& post, const Eigen::MatrixXd& inputs,
                 const Eigen::MatrixXd& targets, std::size_t dataset_size,
                 const TrainConfig& cfg, Rng& rng);

struct TrainResult {
  VariationalPosterior posterior;
  // Mean minibatch loss of every completed epoch.
  std::vector<double> epoch_losses;
  bool diverged = false;
  std::string diagnostic;
};

/// Minibatch Adam on elbo_loss. On a non-finite loss, training stops and the
/// last finite posterior is returned with `diverged` set.
TrainResult train(const VariationalPosterior& post, const Eigen::MatrixXd& inputs,
                  const Eigen::MatrixXd& targets, const TrainConfig& cfg);

/// A fixed set of weight draws used as a Monte Carlo predictive ensemble.
class SampledEnsemble {
 public:
  SampledEnsemble() = default;
  SampledEnsemble(const VariationalPosterior& post, std::size_t samples,
                  Rng& rng);

  std::size_t size() const { return weights_.size(); }
  const Architecture& architecture() const { return arch_; }

  PredictiveOutput predict(const Eigen::VectorXd& x) const;
  /// Per-column predictive means and standard deviations.
  void predict_batch(const Eigen::MatrixXd& inputs, Eigen::MatrixXd& means,
                     Eigen::MatrixXd& stds) const;

 private:
  Architecture arch_;
  std::vector<Eigen::VectorXd> weights_;
};

/// Monte Carlo predictive with `samples` fresh weight draws (sample standard
/// deviation, denominator samples - 1). Requires samples >= 2.
PredictiveOutput predict(const VariationalPosterior& post,
                         const Eigen::VectorXd& x, std::size_t samples,
                         Rng& rng);

/// Summary statistics of per-sample network outputs (one column per sample).
PredictiveOutput summarize_samples(const Eigen::MatrixXd& outputs);

/// Versioned text record; doubles are written in hex-float form so a
/// write/read cycle is bit-exact.
void write_posterior(std::ostream& out, const VariationalPosterior& post);
VariationalPosterior read_posterior(std::istream& in);

}  // namespace ulfd::bnn

#endif  // ULFD_BAYES_NET_HPP_
