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

#ifndef ULFD_GP_BASELINE_HPP_
#define ULFD_GP_BASELINE_HPP_

// Exact GP regression with an ARD squared-exponential kernel, one independent
// GP per output dimension. Data matrices hold one sample per column.

#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "ulfd/common.hpp"
#include "ulfd/predictive.hpp"

namespace ulfd::gp {

struct KernelConfig {
  double signal_variance = 1.0;
  Eigen::VectorXd lengthscales;
  double noise_variance = 1e-2;
  double mean_constant = 0.0;

  /// Throws std::invalid_argument on non-positive hyperparameters or a
  /// lengthscale vector whose length differs from `input_dim`.
  void validate(std::size_t input_dim) const;
  static KernelConfig isotropic(std::size_t input_dim, double lengthscale,
                                double signal_variance, double noise_variance);
};

double kernel_eval(const KernelConfig& cfg, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& y);

/// Noise-free kernel matrix between the columns of `a` and `b`.
Eigen::MatrixXd cross_kernel(const KernelConfig& cfg, const Eigen::MatrixXd& a,
                             const Eigen::MatrixXd& b);

/// Lower Cholesky factor of K + noise*I with escalating diagonal jitter
/// (1e-8, x10 up to 1e-2). Throws IllConditionedKernel when all attempts fail.
Eigen::MatrixXd noisy_cholesky(const KernelConfig& cfg,
                               const Eigen::MatrixXd& inputs,
                               double* jitter_used = nullptr);

/// Log evidence of one output dimension.
double log_marginal_likelihood(const Eigen::MatrixXd& inputs,
                               const Eigen::VectorXd& targets,
                               const KernelConfig& cfg);

/// Log evidence summed over output dimensions (one config per row of targets).
double log_marginal_likelihood(const Eigen::MatrixXd& inputs,
                               const Eigen::MatrixXd& targets,
                               const std::vector<KernelConfig>& cfgs);

struct EvidenceGradient {
  double value = 0.0;
  // Ordered as (log lengthscale_1..d, log signal_variance, log noise_variance).
  Eigen::VectorXd grad_log_params;
};

EvidenceGradient log_marginal_likelihood_gradient(const Eigen::MatrixXd& inputs,
                                                  const Eigen::VectorXd& targets,
                                                  const KernelConfig& cfg);

struct FitOptions {
  std::size_t steps = 100;
  std::size_t max_points = 2000;
  // When nonzero, hyperparameters are optimized on an evenly strided subset
  // of at most this many points; the final model conditions on all points.
  std::size_t optimization_subset = 0;
  double initial_step = 0.1;
  // Lower bound on the optimized noise variance (targets are usually
  // standardized, so this is relative to unit variance).
  double min_noise_variance = 1e-4;
};

struct GpModel {
  std::vector<KernelConfig> kernels;  // one per output dimension
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;
  std::vector<Eigen::MatrixXd> cholesky;  // lower factors of K + noise*I
  std::vector<Eigen::VectorXd> alpha;
  // Objective value after every accepted optimization step, per output.
  std::vector<std::vector<double>> objective_trace;

  std::size_t input_dim() const { return static_cast<std::size_t>(inputs.rows()); }
  std::size_t output_dim() const { return kernels.size(); }
};

/// Builds a model for fixed hyperparameters (no optimization).
GpModel condition(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                  std::vector<KernelConfig> kernels,
                  std::size_t max_points = 2000);

/// Maximizes the log evidence over log hyperparameters by gradient ascent with
/// backtracking. The mean constant of each output is set to its target mean.
GpModel fit(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
            const KernelConfig& init, const FitOptions& options = {});

PredictiveOutput predict_gp(const GpModel& model, const Eigen::VectorXd& x);

/// Predictive variance before flooring at zero (single output dimension).
double raw_predictive_variance(const GpModel& model, std::size_t output,
                               const Eigen::VectorXd& x);

void write_model(std::ostream& out, const GpModel& model);
GpModel read_model(std::istream& in);

}  // namespace ulfd::gp

#endif  // ULFD_GP_BASELINE_HPP_
