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

#include "ulfd/gp_baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "ulfd/hexio.hpp"

namespace ulfd::gp {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);
constexpr double kLogParamBound = 12.0;

Eigen::VectorXd pack_log_params(const KernelConfig& cfg) {
  const Eigen::Index d = cfg.lengthscales.size();
  Eigen::VectorXd p(d + 2);
  p.head(d) = cfg.lengthscales.array().log();
  p[d] = std::log(cfg.signal_variance);
  p[d + 1] = std::log(cfg.noise_variance);
  return p;
}

KernelConfig unpack_log_params(const Eigen::VectorXd& p, double mean_constant) {
  const Eigen::Index d = p.size() - 2;
  KernelConfig cfg;
  cfg.lengthscales = p.head(d).array().exp();
  cfg.signal_variance = std::exp(p[d]);
  cfg.noise_variance = std::exp(p[d + 1]);
  cfg.mean_constant = mean_constant;
  return cfg;
}

void check_dataset(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                   std::size_t max_points) {
  if (inputs.cols() == 0) throw std::invalid_argument("GP needs >= 1 point");
  if (inputs.cols() != targets.cols()) {
    throw std::invalid_argument("inputs and targets differ in sample count");
  }
  if (static_cast<std::size_t>(inputs.cols()) > max_points) {
    throw DatasetTooLarge("GP dataset of " + std::to_string(inputs.cols()) +
                          " points exceeds cap of " +
                          std::to_string(max_points));
  }
}

// Evidence for one output under a factorization computed here.
double evidence(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                const KernelConfig& cfg) {
  const Eigen::MatrixXd chol = noisy_cholesky(cfg, inputs);
  const Eigen::VectorXd resid =
      targets.array() - cfg.mean_constant;
  const Eigen::VectorXd z =
      chol.triangularView<Eigen::Lower>().solve(resid);
  const double n = static_cast<double>(targets.size());
  return -0.5 * z.squaredNorm() - chol.diagonal().array().log().sum() -
         0.5 * n * kLog2Pi;
}

// Backtracking gradient ascent on one output's log hyperparameters.
KernelConfig optimize(const Eigen::MatrixXd& inputs,
                      const Eigen::VectorXd& targets, KernelConfig cfg,
                      const FitOptions& options, std::vector<double>& trace) {
  Eigen::VectorXd theta = pack_log_params(cfg);
  EvidenceGradient cur = log_marginal_likelihood_gradient(inputs, targets, cfg);
  trace.push_back(cur.value);
  Eigen::VectorXd lower =
      Eigen::VectorXd::Constant(theta.size(), -kLogParamBound);
  if (options.min_noise_variance > 0.0) {
    lower[lower.size() - 1] =
        std::max(-kLogParamBound, std::log(options.min_noise_variance));
  }
  double step = options.initial_step;
  for (std::size_t it = 0; it < options.steps; ++it) {
    const double gnorm = cur.grad_log_params.norm();
    if (!(gnorm > 1e-12)) break;
    const Eigen::VectorXd dir = cur.grad_log_params / std::max(1.0, gnorm);
    bool accepted = false;
    for (int tries = 0; tries < 30 && !accepted; ++tries) {
      const Eigen::VectorXd proposal =
          (theta + step * dir).cwiseMax(lower).cwiseMin(kLogParamBound);
      const KernelConfig cand = unpack_log_params(proposal, cfg.mean_constant);
      try {
        EvidenceGradient next =
            log_marginal_likelihood_gradient(inputs, targets, cand);
        if (std::isfinite(next.value) && next.value >= cur.value) {
          theta = proposal;
          cfg = cand;
          cur = std::move(next);
          accepted = true;
          step = std::min(step * 1.5, 2.0);
          break;
        }
      } catch (const IllConditionedKernel&) {
      }
      step *= 0.5;
    }
    if (!accepted) break;
    trace.push_back(cur.value);
  }
  return cfg;
}

}  // namespace

void KernelConfig::validate(std::size_t input_dim) const {
  if (static_cast<std::size_t>(lengthscales.size()) != input_dim) {
    throw std::invalid_argument("lengthscale count does not match input dim");
  }
  if (!(signal_variance > 0.0) || !(noise_variance > 0.0) ||
      !(lengthscales.array() > 0.0).all()) {
    throw std::invalid_argument("kernel hyperparameters must be positive");
  }
}

KernelConfig KernelConfig::isotropic(std::size_t input_dim, double lengthscale,
                                     double signal_variance,
                                     double noise_variance) {
  KernelConfig cfg;
  cfg.signal_variance = signal_variance;
  cfg.noise_variance = noise_variance;
  cfg.lengthscales = Eigen::VectorXd::Constant(
      static_cast<Eigen::Index>(input_dim), lengthscale);
  return cfg;
}

double kernel_eval(const KernelConfig& cfg, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& y) {
  if (x.size() != cfg.lengthscales.size() || y.size() != x.size()) {
    throw std::invalid_argument("kernel input dimension mismatch");
  }
  const double r2 = (x - y).cwiseQuotient(cfg.lengthscales).squaredNorm();
  return cfg.signal_variance * std::exp(-0.5 * r2);
}

Eigen::MatrixXd cross_kernel(const KernelConfig& cfg, const Eigen::MatrixXd& a,
                             const Eigen::MatrixXd& b) {
  const Eigen::VectorXd inv_l = cfg.lengthscales.cwiseInverse();
  const Eigen::MatrixXd as = inv_l.asDiagonal() * a;
  const Eigen::MatrixXd bs = inv_l.asDiagonal() * b;
  const Eigen::VectorXd an = as.colwise().squaredNorm().transpose();
  const Eigen::VectorXd bn = bs.colwise().squaredNorm().transpose();
  Eigen::MatrixXd r2 = -2.0 * as.transpose() * bs;
  r2.colwise() += an;
  r2.rowwise() += bn.transpose();
  return cfg.signal_variance * (-0.5 * r2.cwiseMax(0.0)).array().exp().matrix();
}

Eigen::MatrixXd noisy_cholesky(const KernelConfig& cfg,
                               const Eigen::MatrixXd& inputs,
                               double* jitter_used) {
  cfg.validate(static_cast<std::size_t>(inputs.rows()));
  Eigen::MatrixXd k = cross_kernel(cfg, inputs, inputs);
  k.diagonal().array() += cfg.noise_variance;
  double jitter = 0.0;
  while (true) {
    Eigen::MatrixXd kj = k;
    kj.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(kj);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd l = llt.matrixL();
      if ((l.diagonal().array() > 0.0).all() && l.allFinite()) {
        if (jitter_used != nullptr) *jitter_used = jitter;
        return l;
      }
    }
    jitter = (jitter == 0.0) ? 1e-8 : jitter * 10.0;
    if (jitter > 1e-2 * (1.0 + 1e-9)) {
      throw IllConditionedKernel("Cholesky failed after jitter escalation");
    }
  }
}

double log_marginal_likelihood(const Eigen::MatrixXd& inputs,
                               const Eigen::VectorXd& targets,
                               const KernelConfig& cfg) {
  if (inputs.cols() == 0) throw std::invalid_argument("GP needs >= 1 point");
  if (inputs.cols() != targets.size()) {
    throw std::invalid_argument("inputs and targets differ in sample count");
  }
  return evidence(inputs, targets, cfg);
}

double log_marginal_likelihood(const Eigen::MatrixXd& inputs,
                               const Eigen::MatrixXd& targets,
                               const std::vector<KernelConfig>& cfgs) {
  if (static_cast<std::size_t>(targets.rows()) != cfgs.size()) {
    throw std::invalid_argument("one kernel config per output is required");
  }
  double total = 0.0;
  for (std::size_t o = 0; o < cfgs.size(); ++o) {
    total += log_marginal_likelihood(
        inputs, targets.row(static_cast<Eigen::Index>(o)).transpose(), cfgs[o]);
  }
  return total;
}

EvidenceGradient log_marginal_likelihood_gradient(const Eigen::MatrixXd& inputs,
                                                  const Eigen::VectorXd& targets,
                                                  const KernelConfig& cfg) {
  const Eigen::Index n = inputs.cols();
  const Eigen::Index d = inputs.rows();
  const Eigen::MatrixXd chol = noisy_cholesky(cfg, inputs);
  const auto lower = chol.triangularView<Eigen::Lower>();
  const Eigen::VectorXd resid = targets.array() - cfg.mean_constant;
  Eigen::VectorXd alpha = lower.solve(resid);
  const double quad = alpha.squaredNorm();
  lower.transpose().solveInPlace(alpha);

  EvidenceGradient out;
  out.value = -0.5 * quad - chol.diagonal().array().log().sum() -
              0.5 * static_cast<double>(n) * kLog2Pi;

  Eigen::MatrixXd kinv = Eigen::MatrixXd::Identity(n, n);
  lower.solveInPlace(kinv);
  lower.transpose().solveInPlace(kinv);
  const Eigen::MatrixXd w = alpha * alpha.transpose() - kinv;
  const Eigen::MatrixXd kf = cross_kernel(cfg, inputs, inputs);
  const Eigen::MatrixXd wk = w.cwiseProduct(kf);

  out.grad_log_params.resize(d + 2);
  for (Eigen::Index j = 0; j < d; ++j) {
    const Eigen::RowVectorXd xs = inputs.row(j) / cfg.lengthscales[j];
    double acc = 0.0;
    for (Eigen::Index b = 0; b < n; ++b) {
      for (Eigen::Index a = 0; a < n; ++a) {
        const double diff = xs[a] - xs[b];
        acc += wk(a, b) * diff * diff;
      }
    }
    out.grad_log_params[j] = 0.5 * acc;
  }
  out.grad_log_params[d] = 0.5 * wk.sum();
  out.grad_log_params[d + 1] = 0.5 * cfg.noise_variance * w.trace();
  return out;
}

GpModel condition(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                  std::vector<KernelConfig> kernels, std::size_t max_points) {
  check_dataset(inputs, targets, max_points);
  if (static_cast<std::size_t>(targets.rows()) != kernels.size()) {
    throw std::invalid_argument("one kernel config per output is required");
  }
  GpModel model;
  model.kernels = std::move(kernels);
  model.inputs = inputs;
  model.targets = targets;
  model.objective_trace.resize(model.kernels.size());
  for (std::size_t o = 0; o < model.kernels.size(); ++o) {
    const KernelConfig& cfg = model.kernels[o];
    Eigen::MatrixXd chol = noisy_cholesky(cfg, inputs);
    Eigen::VectorXd alpha =
        targets.row(static_cast<Eigen::Index>(o)).transpose().array() -
        cfg.mean_constant;
    chol.triangularView<Eigen::Lower>().solveInPlace(alpha);
    chol.triangularView<Eigen::Lower>().transpose().solveInPlace(alpha);
    model.cholesky.push_back(std::move(chol));
    model.alpha.push_back(std::move(alpha));
  }
  return model;
}

GpModel fit(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
            const KernelConfig& init, const FitOptions& options) {
  check_dataset(inputs, targets, options.max_points);
  init.validate(static_cast<std::size_t>(inputs.rows()));

  Eigen::MatrixXd opt_inputs = inputs;
  Eigen::MatrixXd opt_targets = targets;
  const auto n = static_cast<std::size_t>(inputs.cols());
  if (options.optimization_subset > 0 && n > options.optimization_subset) {
    const std::size_t m = options.optimization_subset;
    opt_inputs.resize(inputs.rows(), static_cast<Eigen::Index>(m));
    opt_targets.resize(targets.rows(), static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) {
      const auto src = static_cast<Eigen::Index>(i * n / m);
      opt_inputs.col(static_cast<Eigen::Index>(i)) = inputs.col(src);
      opt_targets.col(static_cast<Eigen::Index>(i)) = targets.col(src);
    }
  }

  std::vector<KernelConfig> kernels;
  std::vector<std::vector<double>> traces(static_cast<std::size_t>(targets.rows()));
  for (Eigen::Index o = 0; o < targets.rows(); ++o) {
    KernelConfig cfg = init;
    cfg.mean_constant = targets.row(o).mean();
    kernels.push_back(optimize(opt_inputs, opt_targets.row(o).transpose(), cfg,
                               options, traces[static_cast<std::size_t>(o)]));
  }
  GpModel model = condition(inputs, targets, std::move(kernels), options.max_points);
  model.objective_trace = std::move(traces);
  return model;
}

double raw_predictive_variance(const GpModel& model, std::size_t output,
                               const Eigen::VectorXd& x) {
  const KernelConfig& cfg = model.kernels.at(output);
  const Eigen::VectorXd ks = cross_kernel(cfg, model.inputs, x);
  const Eigen::VectorXd v =
      model.cholesky[output].triangularView<Eigen::Lower>().solve(ks);
  return cfg.signal_variance - v.squaredNorm() + cfg.noise_variance;
}

PredictiveOutput predict_gp(const GpModel& model, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != model.input_dim()) {
    throw std::invalid_argument("query dimension does not match training data");
  }
  const auto out = static_cast<Eigen::Index>(model.output_dim());
  Eigen::VectorXd mean(out), sd(out);
  for (Eigen::Index o = 0; o < out; ++o) {
    const auto oi = static_cast<std::size_t>(o);
    const KernelConfig& cfg = model.kernels[oi];
    const Eigen::VectorXd ks = cross_kernel(cfg, model.inputs, x);
    mean[o] = cfg.mean_constant + ks.dot(model.alpha[oi]);
    const Eigen::VectorXd v =
        model.cholesky[oi].triangularView<Eigen::Lower>().solve(ks);
    const double var = cfg.signal_variance - v.squaredNorm() + cfg.noise_variance;
    sd[o] = std::sqrt(std::max(var, 0.0));
  }
  return make_predictive(std::move(mean), std::move(sd));
}

void write_model(std::ostream& out, const GpModel& model) {
  out << "ulfd-gp-model 1\n";
  out << "dims " << model.inputs.rows() << ' ' << model.kernels.size() << ' '
      << model.inputs.cols() << '\n';
  for (const KernelConfig& k : model.kernels) {
    out << "kernel " << io::to_hex(k.signal_variance) << ' '
        << io::to_hex(k.noise_variance) << ' ' << io::to_hex(k.mean_constant);
    for (Eigen::Index j = 0; j < k.lengthscales.size(); ++j) {
      out << ' ' << io::to_hex(k.lengthscales[j]);
    }
    out << '\n';
  }
  for (Eigen::Index c = 0; c < model.inputs.cols(); ++c) {
    out << "point";
    for (Eigen::Index r = 0; r < model.inputs.rows(); ++r) {
      out << ' ' << io::to_hex(model.inputs(r, c));
    }
    for (Eigen::Index r = 0; r < model.targets.rows(); ++r) {
      out << ' ' << io::to_hex(model.targets(r, c));
    }
    out << '\n';
  }
  out << "end\n";
}

GpModel read_model(std::istream& in) {
  io::expect_token(in, "ulfd-gp-model");
  if (io::read_unsigned(in) != 1) {
    throw std::runtime_error("unsupported GP record version");
  }
  io::expect_token(in, "dims");
  const auto d = static_cast<Eigen::Index>(io::read_unsigned(in));
  const auto outs = static_cast<Eigen::Index>(io::read_unsigned(in));
  const auto n = static_cast<Eigen::Index>(io::read_unsigned(in));
  std::vector<KernelConfig> kernels(static_cast<std::size_t>(outs));
  for (KernelConfig& k : kernels) {
    io::expect_token(in, "kernel");
    k.signal_variance = io::read_hex(in);
    k.noise_variance = io::read_hex(in);
    k.mean_constant = io::read_hex(in);
    k.lengthscales.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) k.lengthscales[j] = io::read_hex(in);
  }
  Eigen::MatrixXd inputs(d, n), targets(outs, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    io::expect_token(in, "point");
    for (Eigen::Index r = 0; r < d; ++r) inputs(r, c) = io::read_hex(in);
    for (Eigen::Index r = 0; r < outs; ++r) targets(r, c) = io::read_hex(in);
  }
  io::expect_token(in, "end");
  return condition(inputs, targets, std::move(kernels),
                   static_cast<std::size_t>(std::max<Eigen::Index>(n, 1)));
}

}  // namespace ulfd::gp
