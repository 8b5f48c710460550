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

#include "ulfd/bayes_net.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "ulfd/hexio.hpp"

namespace ulfd::bnn {

namespace {

constexpr double kInitMuStd = 0.1;
constexpr double kInitSigma = 0.05;
constexpr double kInitNoise = 0.1;
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::MatrixXd activate(Activation act, const Eigen::MatrixXd& z) {
  if (act == Activation::kTanh) return z.array().tanh().matrix();
  return z.cwiseMax(0.0);
}

// Derivative of the activation expressed through its output.
Eigen::MatrixXd activation_slope(Activation act, const Eigen::MatrixXd& a) {
  if (act == Activation::kTanh) return (1.0 - a.array().square()).matrix();
  return (a.array() > 0.0).cast<double>().matrix();
}

struct LayerView {
  Eigen::Map<const Eigen::MatrixXd> weight;
  Eigen::Map<const Eigen::VectorXd> bias;
};

LayerView layer_view(const Architecture& arch, const Eigen::VectorXd& params,
                     std::size_t layer) {
  const auto in = static_cast<Eigen::Index>(arch.layer_in(layer));
  const auto out = static_cast<Eigen::Index>(arch.layer_out(layer));
  const double* base = params.data() + arch.layer_offset(layer);
  return {Eigen::Map<const Eigen::MatrixXd>(base, out, in),
          Eigen::Map<const Eigen::VectorXd>(base + out * in, out)};
}

// Activations of every layer; front() is the input, back() the linear output.
std::vector<Eigen::MatrixXd> forward_cached(const Architecture& arch,
                                            const Eigen::VectorXd& weights,
                                            const Eigen::MatrixXd& inputs) {
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(arch.layer_count() + 1);
  acts.push_back(inputs);
  for (std::size_t l = 0; l < arch.layer_count(); ++l) {
    const LayerView v = layer_view(arch, weights, l);
    Eigen::MatrixXd z = v.weight * acts.back();
    z.colwise() += v.bias;
    if (l + 1 < arch.layer_count()) {
      acts.push_back(activate(arch.activation, z));
    } else {
      acts.push_back(std::move(z));
    }
  }
  return acts;
}

// Accumulates d(loss)/d(weights) into `grad` given d(loss)/d(output).
void backward(const Architecture& arch, const Eigen::VectorXd& weights,
              const std::vector<Eigen::MatrixXd>& acts, Eigen::MatrixXd delta,
              Eigen::Ref<Eigen::VectorXd> grad) {
  for (std::size_t l = arch.layer_count(); l-- > 0;) {
    const auto in = static_cast<Eigen::Index>(arch.layer_in(l));
    const auto out = static_cast<Eigen::Index>(arch.layer_out(l));
    double* g = grad.data() + arch.layer_offset(l);
    Eigen::Map<Eigen::MatrixXd>(g, out, in).noalias() +=
        delta * acts[l].transpose();
    Eigen::Map<Eigen::VectorXd>(g + out * in, out) += delta.rowwise().sum();
    if (l > 0) {
      const LayerView v = layer_view(arch, weights, l);
      Eigen::MatrixXd upstream = v.weight.transpose() * delta;
      delta = upstream.cwiseProduct(activation_slope(arch.activation, acts[l]));
    }
  }
}

}  // namespace

void Architecture::validate() const {
  if (input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
  if (output_dim < 1) throw std::invalid_argument("output_dim must be >= 1");
  if (hidden_layers.empty()) {
    throw std::invalid_argument("at least one hidden layer is required");
  }
  for (std::size_t h : hidden_layers) {
    if (h < 1) throw std::invalid_argument("hidden layer width must be >= 1");
  }
}

std::size_t Architecture::layer_in(std::size_t layer) const {
  return layer == 0 ? input_dim : hidden_layers[layer - 1];
}

std::size_t Architecture::layer_out(std::size_t layer) const {
  return layer < hidden_layers.size() ? hidden_layers[layer] : output_dim;
}

std::size_t Architecture::layer_offset(std::size_t layer) const {
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layer; ++l) {
    offset += layer_out(l) * (layer_in(l) + 1);
  }
  return offset;
}

std::size_t Architecture::parameter_count() const {
  return layer_offset(layer_count());
}

Eigen::VectorXd VariationalPosterior::sigma() const {
  return rho.unaryExpr([](double r) { return softplus(r); });
}

void TrainConfig::validate() const {
  if (batch_size < 1 || train_mc_samples < 1) {
    throw std::invalid_argument("train config counts must be >= 1");
  }
  if (predict_mc_samples < 2) {
    throw std::invalid_argument("predict_mc_samples must be >= 2");
  }
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("learning_rate must be positive");
  }
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double inverse_softplus(double y) {
  if (!(y > 0.0)) throw std::invalid_argument("softplus range is (0, inf)");
  // log(exp(y) - 1), written to stay accurate for large and small y.
  return y + std::log(-std::expm1(-y));
}

VariationalPosterior init_posterior(const Architecture& arch,
                                    std::uint64_t seed) {
  arch.validate();
  VariationalPosterior post;
  post.arch = arch;
  post.seed = seed;
  const auto n = static_cast<Eigen::Index>(arch.parameter_count());
  post.mu.resize(n);
  Rng rng(seed);
  fill_standard_normal(rng, post.mu);
  post.mu *= kInitMuStd;
  post.rho = Eigen::VectorXd::Constant(n, inverse_softplus(kInitSigma));
  post.likelihood_log_noise = std::log(kInitNoise);
  return post;
}

WeightSample sample_weights(const VariationalPosterior& post,
                            const Eigen::VectorXd& eps) {
  if (eps.size() != post.mu.size()) {
    throw std::invalid_argument("noise vector has wrong length");
  }
  return {post.mu + post.sigma().cwiseProduct(eps)};
}

WeightSample sample_weights(const VariationalPosterior& post, Rng& rng) {
  Eigen::VectorXd eps(post.mu.size());
  fill_standard_normal(rng, eps);
  return sample_weights(post, eps);
}

double kl_to_prior(const VariationalPosterior& post) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < post.mu.size(); ++i) {
    const double s = softplus(post.rho[i]);
    const double m = post.mu[i];
    kl += -std::log(s) + 0.5 * (s * s + m * m) - 0.5;
  }
  // Clamp roundoff around the exact zero at q == p.
  return std::max(kl, 0.0);
}

Eigen::MatrixXd forward(const Architecture& arch, const Eigen::VectorXd& weights,
                        const Eigen::MatrixXd& inputs) {
  if (static_cast<std::size_t>(inputs.rows()) != arch.input_dim) {
    throw std::invalid_argument("input dimension mismatch");
  }
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < arch.layer_count(); ++l) {
    const LayerView v = layer_view(arch, weights, l);
    Eigen::MatrixXd z = v.weight * a;
    z.colwise() += v.bias;
    a = (l + 1 < arch.layer_count()) ? activate(arch.activation, z)
                                     : std::move(z);
  }
  return a;
}

LossEvaluation elbo_loss_fixed_noise(const VariationalPosterior& post,
                                     const Eigen::MatrixXd& inputs,
                                     const Eigen::MatrixXd& targets,
                                     double kl_scale,
                                     std::span<const Eigen::VectorXd> eps,
                                     bool with_gradient) {
  const Architecture& arch = post.arch;
  if (inputs.cols() == 0) throw std::invalid_argument("empty batch");
  if (static_cast<std::size_t>(inputs.rows()) != arch.input_dim ||
      static_cast<std::size_t>(targets.rows()) != arch.output_dim ||
      targets.cols() != inputs.cols()) {
    throw std::invalid_argument("batch shape does not match architecture");
  }
  if (eps.empty()) throw std::invalid_argument("need at least one noise draw");

  const Eigen::Index n_params = post.mu.size();
  const Eigen::VectorXd sigma = post.sigma();
  const double noise_var = std::exp(2.0 * post.likelihood_log_noise);
  const double n_elem = static_cast<double>(targets.size());
  const double inv_m = 1.0 / static_cast<double>(eps.size());

  LossEvaluation ev;
  if (with_gradient) {
    ev.grad_mu = Eigen::VectorXd::Zero(n_params);
    ev.grad_rho = Eigen::VectorXd::Zero(n_params);
  }
  Eigen::VectorXd grad_w(with_gradient ? n_params : 0);

  double nll = 0.0;
  for (const Eigen::VectorXd& e : eps) {
    const Eigen::VectorXd w = post.mu + sigma.cwiseProduct(e);
    const auto acts = forward_cached(arch, w, inputs);
    const Eigen::MatrixXd residual = acts.back() - targets;
    const double sq = residual.squaredNorm();
    nll += n_elem * (kHalfLog2Pi + post.likelihood_log_noise) +
           0.5 * sq / noise_var;
    if (with_gradient) {
      grad_w.setZero();
      backward(arch, w, acts, residual / noise_var, grad_w);
      ev.grad_mu += inv_m * grad_w;
      ev.grad_rho += inv_m * grad_w.cwiseProduct(e);
      ev.grad_log_noise += inv_m * (n_elem - sq / noise_var);
    }
  }
  ev.negative_log_likelihood = nll * inv_m;
  ev.kl = kl_to_prior(post);
  ev.loss = ev.negative_log_likelihood + kl_scale * ev.kl;

  if (with_gradient) {
    for (Eigen::Index i = 0; i < n_params; ++i) {
      const double s = sigma[i];
      const double dsigma_drho = sigmoid(post.rho[i]);
      // grad_rho so far holds d(nll)/d(sigma) before the chain factor.
      ev.grad_rho[i] =
          (ev.grad_rho[i] + kl_scale * (s - 1.0 / s)) * dsigma_drho;
      ev.grad_mu[i] += kl_scale * post.mu[i];
    }
  }
  return ev;
}

double elbo_loss(const VariationalPosterior& post, const Eigen::MatrixXd& inputs,
                 const Eigen::MatrixXd& targets, std::size_t dataset_size,
                 const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (dataset_size < static_cast<std::size_t>(inputs.cols())) {
    throw std::invalid_argument("dataset smaller than batch");
  }
  std::vector<Eigen::VectorXd> eps(cfg.train_mc_samples,
                                   Eigen::VectorXd(post.mu.size()));
  for (auto& e : eps) fill_standard_normal(rng, e);
  const double scale = static_cast<double>(inputs.cols()) /
                       static_cast<double>(dataset_size);
  const double loss =
      elbo_loss_fixed_noise(post, inputs, targets, scale, eps, false).loss;
  if (!std::isfinite(loss)) throw TrainingDiverged("non-finite ELBO loss");
  return loss;
}

TrainResult train(const VariationalPosterior& post, const Eigen::MatrixXd& inputs,
                  const Eigen::MatrixXd& targets, const TrainConfig& cfg) {
  cfg.validate();
  if (inputs.cols() == 0) throw std::invalid_argument("empty dataset");
  if (inputs.cols() != targets.cols()) {
    throw std::invalid_argument("inputs and targets differ in sample count");
  }
  TrainResult result{post, {}, false, {}};
  if (cfg.epochs == 0) return result;

  VariationalPosterior& cur = result.posterior;
  const Eigen::Index n = inputs.cols();
  const Eigen::Index p = cur.mu.size();
  const std::size_t batch = std::min<std::size_t>(cfg.batch_size, n);

  // Adam state over (mu, rho, log_noise).
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(2 * p + 1);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(2 * p + 1);
  Eigen::VectorXd grad(2 * p + 1);
  double b1t = 1.0, b2t = 1.0;

  Rng rng(derive_seed(cfg.seed, 0x74726169ULL));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::vector<Eigen::VectorXd> eps(cfg.train_mc_samples, Eigen::VectorXd(p));
  Eigen::MatrixXd bx, by;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t len = std::min(batch, order.size() - start);
      bx.resize(inputs.rows(), static_cast<Eigen::Index>(len));
      by.resize(targets.rows(), static_cast<Eigen::Index>(len));
      for (std::size_t j = 0; j < len; ++j) {
        bx.col(static_cast<Eigen::Index>(j)) = inputs.col(order[start + j]);
        by.col(static_cast<Eigen::Index>(j)) = targets.col(order[start + j]);
      }
      for (auto& e : eps) fill_standard_normal(rng, e);
      const double scale = static_cast<double>(len) / static_cast<double>(n);
      const LossEvaluation ev =
          elbo_loss_fixed_noise(cur, bx, by, scale, eps, true);
      if (!std::isfinite(ev.loss) || !ev.grad_mu.allFinite() ||
          !ev.grad_rho.allFinite()) {
        result.diverged = true;
        result.diagnostic = "non-finite loss at epoch " +
                            std::to_string(epoch) + ", batch " +
                            std::to_string(batches);
        return result;
      }
      grad << ev.grad_mu, ev.grad_rho, ev.grad_log_noise;
      b1t *= kBeta1;
      b2t *= kBeta2;
      m1 = kBeta1 * m1 + (1.0 - kBeta1) * grad;
      m2 = kBeta2 * m2 + (1.0 - kBeta2) * grad.cwiseAbs2();
      const double lr = cfg.learning_rate * std::sqrt(1.0 - b2t) / (1.0 - b1t);
      const Eigen::VectorXd step =
          lr * m1.array() / (m2.array().sqrt() + kEps);
      cur.mu -= step.head(p);
      cur.rho -= step.segment(p, p);
      cur.likelihood_log_noise -= step[2 * p];
      epoch_loss += ev.loss;
      ++batches;
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(batches));
  }
  return result;
}

SampledEnsemble::SampledEnsemble(const VariationalPosterior& post,
                                 std::size_t samples, Rng& rng)
    : arch_(post.arch) {
  weights_.reserve(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    weights_.push_back(sample_weights(post, rng).values);
  }
}

PredictiveOutput summarize_samples(const Eigen::MatrixXd& outputs) {
  const Eigen::Index m = outputs.cols();
  if (m < 2) throw std::invalid_argument("need at least two samples");
  Eigen::VectorXd mean = outputs.rowwise().mean();
  Eigen::VectorXd var =
      (outputs.colwise() - mean).array().square().rowwise().sum() /
      static_cast<double>(m - 1);
  return make_predictive(std::move(mean), var.cwiseSqrt());
}

PredictiveOutput SampledEnsemble::predict(const Eigen::VectorXd& x) const {
  if (weights_.size() < 2) {
    throw std::invalid_argument("ensemble needs at least two samples");
  }
  Eigen::MatrixXd outputs(arch_.output_dim, weights_.size());
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    outputs.col(static_cast<Eigen::Index>(i)) = forward(arch_, weights_[i], x);
  }
  return summarize_samples(outputs);
}

void SampledEnsemble::predict_batch(const Eigen::MatrixXd& inputs,
                                    Eigen::MatrixXd& means,
                                    Eigen::MatrixXd& stds) const {
  if (weights_.size() < 2) {
    throw std::invalid_argument("ensemble needs at least two samples");
  }
  const auto out = static_cast<Eigen::Index>(arch_.output_dim);
  means = Eigen::MatrixXd::Zero(out, inputs.cols());
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(out, inputs.cols());
  // Welford accumulation over ensemble members.
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const Eigen::MatrixXd y = forward(arch_, weights_[i], inputs);
    const Eigen::MatrixXd delta = y - means;
    means += delta / static_cast<double>(i + 1);
    m2 += delta.cwiseProduct(y - means);
  }
  stds = (m2 / static_cast<double>(weights_.size() - 1)).cwiseSqrt();
}

PredictiveOutput predict(const VariationalPosterior& post,
                         const Eigen::VectorXd& x, std::size_t samples,
                         Rng& rng) {
  if (samples < 2) throw std::invalid_argument("predict needs M >= 2");
  if (static_cast<std::size_t>(x.size()) != post.arch.input_dim) {
    throw std::invalid_argument("feature dimension mismatch");
  }
  return SampledEnsemble(post, samples, rng).predict(x);
}

void write_posterior(std::ostream& out, const VariationalPosterior& post) {
  const Architecture& a = post.arch;
  out << "ulfd-bnn-posterior 1\n";
  out << "arch " << a.input_dim << ' ' << a.hidden_layers.size();
  for (std::size_t h : a.hidden_layers) out << ' ' << h;
  out << ' ' << a.output_dim << ' '
      << (a.activation == Activation::kTanh ? "tanh" : "rectifier") << '\n';
  out << "seed " << post.seed << '\n';
  out << "log_noise " << io::to_hex(post.likelihood_log_noise) << '\n';
  out << "params " << post.mu.size() << '\n';
  for (Eigen::Index i = 0; i < post.mu.size(); ++i) {
    out << io::to_hex(post.mu[i]) << ' ' << io::to_hex(post.rho[i]) << '\n';
  }
  out << "end\n";
}

VariationalPosterior read_posterior(std::istream& in) {
  io::expect_token(in, "ulfd-bnn-posterior");
  if (io::read_unsigned(in) != 1) {
    throw std::runtime_error("unsupported posterior record version");
  }
  VariationalPosterior post;
  io::expect_token(in, "arch");
  post.arch.input_dim = io::read_unsigned(in);
  post.arch.hidden_layers.resize(io::read_unsigned(in));
  for (auto& h : post.arch.hidden_layers) h = io::read_unsigned(in);
  post.arch.output_dim = io::read_unsigned(in);
  const std::string act = io::next_token(in);
  if (act == "tanh") {
    post.arch.activation = Activation::kTanh;
  } else if (act == "rectifier") {
    post.arch.activation = Activation::kRectifier;
  } else {
    throw std::runtime_error("unknown activation '" + act + "'");
  }
  post.arch.validate();
  io::expect_token(in, "seed");
  post.seed = io::read_unsigned(in);
  io::expect_token(in, "log_noise");
  post.likelihood_log_noise = io::read_hex(in);
  io::expect_token(in, "params");
  const auto count = io::read_unsigned(in);
  if (count != post.arch.parameter_count()) {
    throw std::runtime_error("parameter count does not match architecture");
  }
  post.mu.resize(static_cast<Eigen::Index>(count));
  post.rho.resize(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < post.mu.size(); ++i) {
    post.mu[i] = io::read_hex(in);
    post.rho[i] = io::read_hex(in);
  }
  io::expect_token(in, "end");
  return post;
}

}  // namespace ulfd::bnn
