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

#include "ulfd/policy.hpp"

#include <stdexcept>

namespace ulfd {

namespace {

constexpr std::uint64_t kEnsembleStream = 0x656e73ULL;

void fit_targets(const Eigen::MatrixXd& targets, Eigen::VectorXd& mean,
                 Eigen::VectorXd& scale) {
  mean = targets.rowwise().mean();
  scale = ((targets.colwise() - mean).array().square().rowwise().mean())
              .sqrt()
              .max(1e-6)
              .matrix();
}

}  // namespace

std::vector<double> Policy::predict_sigmas(
    const std::vector<windows::TemporalWindow>& windows) const {
  std::vector<double> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(predict(w.features).sigma_scalar);
  return out;
}

BbbPolicy::BbbPolicy(std::size_t input_dim, std::size_t output_dim,
                     BbbPolicyConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      seed_(seed),
      input_norm_(input_dim),
      target_mean_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(output_dim))),
      target_scale_(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(output_dim))) {
  bnn::Architecture arch;
  arch.input_dim = input_dim;
  arch.output_dim = output_dim;
  arch.hidden_layers = cfg_.hidden_layers;
  arch.activation = cfg_.activation;
  posterior_ = bnn::init_posterior(arch, seed_);
  resample_ensemble();
}

void BbbPolicy::resample_ensemble() {
  Rng rng(derive_seed(seed_, kEnsembleStream, train_calls_));
  ensemble_ = bnn::SampledEnsemble(posterior_, cfg_.train.predict_mc_samples, rng);
}

void BbbPolicy::train(const std::vector<windows::TemporalWindow>& dataset) {
  if (dataset.size() < 2) throw std::invalid_argument("need >= 2 windows to train");
  Eigen::MatrixXd x, y;
  windows::to_matrices(dataset, x, y);
  input_norm_ = windows::Normalizer::fit(x);
  fit_targets(y, target_mean_, target_scale_);
  const Eigen::MatrixXd xn = input_norm_.apply(x);
  const Eigen::MatrixXd yn =
      target_scale_.cwiseInverse().asDiagonal() * (y.colwise() - target_mean_);

  bnn::VariationalPosterior start =
      cfg_.warm_start ? posterior_
                      : bnn::init_posterior(posterior_.arch,
                                            derive_seed(seed_, train_calls_));
  bnn::TrainConfig tc = cfg_.train;
  tc.seed = derive_seed(cfg_.train.seed ^ seed_, train_calls_);
  bnn::TrainResult res = bnn::train(start, xn, yn, tc);
  posterior_ = std::move(res.posterior);
  last_losses_ = std::move(res.epoch_losses);
  ++train_calls_;
  resample_ensemble();
  if (res.diverged) throw TrainingDiverged(res.diagnostic);
}

PredictiveOutput BbbPolicy::predict(const Eigen::VectorXd& features) const {
  PredictiveOutput p = ensemble_.predict(input_norm_.apply(features));
  p.mean = target_mean_ + target_scale_.cwiseProduct(p.mean);
  return make_predictive(std::move(p.mean), target_scale_.cwiseProduct(p.std_per_dim));
}

std::vector<double> BbbPolicy::predict_sigmas(
    const std::vector<windows::TemporalWindow>& windows) const {
  if (windows.empty()) return {};
  Eigen::MatrixXd x, y, means, stds;
  windows::to_matrices(windows, x, y);
  ensemble_.predict_batch(input_norm_.apply(x), means, stds);
  const Eigen::VectorXd sig =
      (target_scale_.asDiagonal() * stds).colwise().mean().transpose();
  return {sig.data(), sig.data() + sig.size()};
}

GpPolicy::GpPolicy(const std::vector<windows::TemporalWindow>& dataset,
                   const gp::FitOptions& options, double init_lengthscale) {
  if (dataset.size() < 2) throw std::invalid_argument("need >= 2 windows to fit");
  Eigen::MatrixXd x, y;
  windows::to_matrices(dataset, x, y);
  input_norm_ = windows::Normalizer::fit(x);
  fit_targets(y, target_mean_, target_scale_);
  const Eigen::MatrixXd xn = input_norm_.apply(x);
  const Eigen::MatrixXd yn =
      target_scale_.cwiseInverse().asDiagonal() * (y.colwise() - target_mean_);
  const gp::KernelConfig init = gp::KernelConfig::isotropic(
      static_cast<std::size_t>(x.rows()), init_lengthscale, 1.0, 1e-2);
  model_ = gp::fit(xn, yn, init, options);
}

PredictiveOutput GpPolicy::predict(const Eigen::VectorXd& features) const {
  PredictiveOutput p = gp::predict_gp(model_, input_norm_.apply(features));
  p.mean = target_mean_ + target_scale_.cwiseProduct(p.mean);
  return make_predictive(std::move(p.mean), target_scale_.cwiseProduct(p.std_per_dim));
}

ExpertPolicy::ExpertPolicy(const env::Context& ctx) : expert_(ctx) {}

PredictiveOutput ExpertPolicy::predict(const Eigen::VectorXd& features) const {
  const Eigen::Index ds = static_cast<Eigen::Index>(expert_.context().state_dim());
  const Eigen::Index da = static_cast<Eigen::Index>(expert_.context().action_dim());
  // dim = k*ds + (k-1)*(da+1); recover k to locate the latest state.
  const Eigen::Index k = (features.size() + da + 1) / (ds + da + 1);
  if (k < 1 || k * ds + (k - 1) * (da + 1) != features.size()) {
    throw std::invalid_argument("feature length is not a window of this context");
  }
  const env::State s = features.segment((k - 1) * ds, ds);
  return make_predictive(expert_.act(s), Eigen::VectorXd::Zero(da));
}

}  // namespace ulfd
