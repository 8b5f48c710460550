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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "ulfd/bayes_net.hpp"
#include "ulfd/common.hpp"
#include "ulfd/policy.hpp"
#include "ulfd/window_pipeline.hpp"

using namespace ulfd;
using namespace ulfd::bnn;

namespace {

Architecture small_arch(std::size_t in = 3, std::size_t out = 2) {
  Architecture a;
  a.input_dim = in;
  a.hidden_layers = {8, 8};
  a.output_dim = out;
  return a;
}

// Posterior with given per-parameter mean and standard deviation, bypassing
// the network layout (only the KL and sampling code read it that way).
VariationalPosterior flat_posterior(const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma) {
  VariationalPosterior p;
  p.mu = mu;
  p.rho = sigma.unaryExpr([](double s) { return inverse_softplus(s); });
  return p;
}

double log_normal(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

}  // namespace

TEST_CASE("init_posterior: 6-64-64-1 has 4673 parameters") {
  Architecture a;
  a.input_dim = 6;
  a.output_dim = 1;
  const auto p = init_posterior(a, 0);
  CHECK(p.mu.size() == 6 * 64 + 64 + 64 * 64 + 64 + 64 * 1 + 1);
  CHECK(p.mu.size() == 4673);
  CHECK(p.rho.size() == 4673);
  CHECK(a.parameter_count() == 4673);
}

TEST_CASE("init_posterior: sigma starts at 0.05, noise at 0.1, deterministic") {
  const auto a = small_arch();
  const auto p = init_posterior(a, 7);
  const Eigen::VectorXd s = p.sigma();
  for (Eigen::Index i = 0; i < s.size(); ++i) CHECK(s[i] == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(p.likelihood_log_noise == doctest::Approx(std::log(0.1)));
  const auto q = init_posterior(a, 7);
  CHECK((p.mu.array() == q.mu.array()).all());
  CHECK((p.rho.array() == q.rho.array()).all());
  const auto r = init_posterior(a, 8);
  CHECK_FALSE((p.mu.array() == r.mu.array()).all());
}

TEST_CASE("init_posterior: means have standard deviation 0.1") {
  Architecture a;
  a.input_dim = 6;
  a.output_dim = 1;
  const auto p = init_posterior(a, 3);
  const double mean = p.mu.mean();
  const double sd = std::sqrt((p.mu.array() - mean).square().mean());
  CHECK(std::abs(mean) < 0.01);
  CHECK(sd == doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("softplus is positive at extremes and inverts") {
  CHECK(softplus(-50.0) > 0.0);
  CHECK(softplus(50.0) > 0.0);
  CHECK(softplus(50.0) == doctest::Approx(50.0));
  for (double y : {1e-6, 0.05, 0.5, 1.0, 3.0, 40.0}) {
    CHECK(softplus(inverse_softplus(y)) == doctest::Approx(y).epsilon(1e-12));
  }
}

TEST_CASE("sample_weights: reparameterization identities") {
  const auto a = small_arch();
  auto p = init_posterior(a, 1);
  const Eigen::Index n = p.mu.size();
  SUBCASE("eps = 0 gives the means") {
    const auto w = sample_weights(p, Eigen::VectorXd::Zero(n));
    CHECK((w.values.array() == p.mu.array()).all());
  }
  SUBCASE("eps = 1, mu = 0, sigma = 0.05 gives 0.05 everywhere") {
    p.mu.setZero();
    const auto w = sample_weights(p, Eigen::VectorXd::Ones(n));
    for (Eigen::Index i = 0; i < n; ++i) CHECK(w.values[i] == doctest::Approx(0.05).epsilon(1e-12));
  }
}

TEST_CASE("sample_weights: empirical std of one weight with sigma 0.5") {
  const auto p = flat_posterior(Eigen::VectorXd::Constant(1, 0.3), Eigen::VectorXd::Constant(1, 0.5));
  Rng rng(11);
  const int n = 100000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = sample_weights(p, rng).values[0];
    s += w;
    s2 += w * w;
  }
  const double mean = s / n;
  const double sd = std::sqrt(s2 / n - mean * mean);
  CHECK(std::abs(sd - 0.5) < 0.01);
  CHECK(std::abs(mean - 0.3) < 0.01);
}

TEST_CASE("kl_to_prior: closed-form values") {
  CHECK(kl_to_prior(flat_posterior(Eigen::VectorXd::Zero(5), Eigen::VectorXd::Ones(5))) ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK(kl_to_prior(flat_posterior(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1))) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(kl_to_prior(flat_posterior(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 2.0))) ==
        doctest::Approx(std::log(0.5) + 2.0 - 0.5).epsilon(1e-12));
  CHECK(std::log(0.5) + 2.0 - 0.5 == doctest::Approx(0.80685).epsilon(1e-5));
}

TEST_CASE("kl_to_prior: nonnegative, zero only at the prior") {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.05, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd mu(7), sd(7);
    for (int i = 0; i < 7; ++i) {
      mu[i] = standard_normal(rng);
      sd[i] = u(rng);
    }
    CHECK(kl_to_prior(flat_posterior(mu, sd)) > 0.0);
  }
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(4), sd = Eigen::VectorXd::Ones(4);
  CHECK(std::abs(kl_to_prior(flat_posterior(mu, sd))) < 1e-12);
  mu[2] = 1e-3;
  CHECK(kl_to_prior(flat_posterior(mu, sd)) > 0.0);
}

TEST_CASE("kl_to_prior matches a 10^6-sample Monte Carlo estimate within 1%") {
  Eigen::VectorXd mu(10), sd(10);
  mu << 0.3, -1.2, 0.8, 0.0, 2.0, -0.4, 1.1, -0.9, 0.5, 0.2;
  sd << 0.2, 0.5, 1.5, 0.8, 0.3, 2.0, 0.6, 0.1, 1.0, 0.4;
  const auto p = flat_posterior(mu, sd);
  const Eigen::VectorXd sig = p.sigma();
  Rng rng(2024);
  const int n = 1000000;
  double acc = 0.0;
  for (int s = 0; s < n; ++s) {
    const Eigen::VectorXd w = sample_weights(p, rng).values;
    double term = 0.0;
    for (int i = 0; i < 10; ++i) term += log_normal(w[i], mu[i], sig[i]) - log_normal(w[i], 0.0, 1.0);
    acc += term;
  }
  const double mc = acc / n;
  const double closed = kl_to_prior(p);
  CHECK(std::abs(mc - closed) / closed < 0.01);
}

TEST_CASE("elbo gradient matches central finite differences") {
  const auto a = small_arch(3, 2);
  auto p = init_posterior(a, 9);
  Rng rng(17);
  for (Eigen::Index i = 0; i < p.mu.size(); ++i) {
    p.mu[i] += 0.3 * standard_normal(rng);
    p.rho[i] = inverse_softplus(0.05 + 0.2 * std::abs(standard_normal(rng)));
  }
  p.likelihood_log_noise = std::log(0.3);
  Eigen::MatrixXd x(3, 12), y(2, 12);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index r = 0; r < 3; ++r) x(r, j) = standard_normal(rng);
    y(0, j) = std::sin(x(0, j)) + 0.1 * standard_normal(rng);
    y(1, j) = x(1, j) * x(2, j);
  }
  std::vector<Eigen::VectorXd> eps(2, Eigen::VectorXd(p.mu.size()));
  for (auto& e : eps) fill_standard_normal(rng, e);
  const double kl_scale = 12.0 / 100.0;
  const auto g = elbo_loss_fixed_noise(p, x, y, kl_scale, eps, true);
  REQUIRE(std::isfinite(g.loss));

  const double h = 1e-4;
  auto loss_at = [&](const VariationalPosterior& q) {
    return elbo_loss_fixed_noise(q, x, y, kl_scale, eps, false).loss;
  };
  auto rel_ok = [](double analytic, double numeric) {
    return std::abs(analytic - numeric) <=
           1e-3 * std::max(std::abs(analytic), std::abs(numeric)) + 1e-8;
  };
  std::uniform_int_distribution<Eigen::Index> pick(0, p.mu.size() - 1);
  for (int probe = 0; probe < 5; ++probe) {
    const Eigen::Index i = pick(rng);
    auto up = p, dn = p;
    up.mu[i] += h;
    dn.mu[i] -= h;
    const double fd_mu = (loss_at(up) - loss_at(dn)) / (2 * h);
    CHECK_MESSAGE(rel_ok(g.grad_mu[i], fd_mu), "mu[" << i << "] " << g.grad_mu[i] << " vs " << fd_mu);
    up = p;
    dn = p;
    up.rho[i] += h;
    dn.rho[i] -= h;
    const double fd_rho = (loss_at(up) - loss_at(dn)) / (2 * h);
    CHECK_MESSAGE(rel_ok(g.grad_rho[i], fd_rho), "rho[" << i << "] " << g.grad_rho[i] << " vs " << fd_rho);
  }
  auto up = p, dn = p;
  up.likelihood_log_noise += h;
  dn.likelihood_log_noise -= h;
  const double fd_noise = (loss_at(up) - loss_at(dn)) / (2 * h);
  CHECK(rel_ok(g.grad_log_noise, fd_noise));
}

TEST_CASE("elbo: zero-residual limit is the Gaussian log-normalizer") {
  const auto a = small_arch(2, 1);
  auto p = init_posterior(a, 4);
  p.rho.setConstant(-1e4);  // sigma underflows to zero
  p.likelihood_log_noise = std::log(0.2);
  Eigen::MatrixXd x(2, 5);
  x << 0.1, 0.2, -0.3, 0.4, 0.5, 1.0, -1.0, 0.5, 0.0, 0.2;
  const Eigen::MatrixXd y = forward(a, p.mu, x);
  std::vector<Eigen::VectorXd> eps(1, Eigen::VectorXd::Zero(p.mu.size()));
  const auto ev = elbo_loss_fixed_noise(p, x, y, 0.0, eps, false);
  // -sum ln N(y | y, 0.2^2) over 5 targets.
  const double expected = 5.0 * (std::log(0.2) + 0.5 * std::log(2.0 * std::numbers::pi));
  CHECK(ev.negative_log_likelihood == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("elbo: full batch uses KL scale 1") {
  const auto a = small_arch(2, 1);
  auto p = init_posterior(a, 4);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 16);
  Eigen::MatrixXd y = Eigen::MatrixXd::Random(1, 16);
  TrainConfig cfg;
  cfg.train_mc_samples = 1;
  Rng r1(3), r2(3);
  const double loss = elbo_loss(p, x, y, 16, cfg, r1);
  std::vector<Eigen::VectorXd> eps(1, Eigen::VectorXd(p.mu.size()));
  fill_standard_normal(r2, eps[0]);
  const auto ev = elbo_loss_fixed_noise(p, x, y, 1.0, eps, false);
  CHECK(loss == doctest::Approx(ev.loss).epsilon(1e-12));
  CHECK(ev.loss == doctest::Approx(ev.negative_log_likelihood + kl_to_prior(p)).epsilon(1e-12));
}

TEST_CASE("elbo_loss signals divergence on non-finite input") {
  const auto a = small_arch(2, 1);
  auto p = init_posterior(a, 4);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 4);
  x(0, 0) = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(1, 4);
  TrainConfig cfg;
  Rng rng(1);
  CHECK_THROWS_AS(elbo_loss(p, x, y, 4, cfg, rng), TrainingDiverged);
}

TEST_CASE("train: constant zero target is learned") {
  const auto a = small_arch(2, 1);
  const auto p = init_posterior(a, 2);
  Rng rng(8);
  Eigen::MatrixXd x(2, 128);
  for (Eigen::Index j = 0; j < x.cols(); ++j) x.col(j) << standard_normal(rng), standard_normal(rng);
  const Eigen::MatrixXd y = Eigen::MatrixXd::Zero(1, 128);
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.batch_size = 32;
  cfg.learning_rate = 1e-2;
  const auto res = train(p, x, y, cfg);
  REQUIRE_FALSE(res.diverged);
  Rng prng(1);
  for (Eigen::Index j = 0; j < 10; ++j) {
    CHECK(std::abs(predict(res.posterior, x.col(j), 50, prng).mean[0]) < 0.05);
  }
  CHECK(res.epoch_losses.back() <= res.epoch_losses.front());
}

TEST_CASE("train: zero epochs is a no-op; runs are deterministic") {
  const auto a = small_arch(2, 1);
  const auto p = init_posterior(a, 2);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 40);
  Eigen::MatrixXd y = x.row(0) - x.row(1);
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto same = train(p, x, y, cfg);
  CHECK((same.posterior.mu.array() == p.mu.array()).all());
  CHECK((same.posterior.rho.array() == p.rho.array()).all());
  CHECK(same.posterior.likelihood_log_noise == p.likelihood_log_noise);
  CHECK(same.epoch_losses.empty());

  cfg.epochs = 20;
  cfg.batch_size = 16;
  cfg.seed = 99;
  const auto r1 = train(p, x, y, cfg);
  const auto r2 = train(p, x, y, cfg);
  CHECK(r1.epoch_losses == r2.epoch_losses);
  CHECK((r1.posterior.mu.array() == r2.posterior.mu.array()).all());
  CHECK(r1.epoch_losses.back() <= r1.epoch_losses.front());
}

TEST_CASE("predict: degenerate posterior and argument checks") {
  const auto a = small_arch(3, 2);
  auto p = init_posterior(a, 6);
  p.rho.setConstant(-1e4);
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(3, -1.0, 1.0);
  Rng rng(1);
  const auto out = predict(p, x, 10, rng);
  CHECK(out.sigma_scalar == 0.0);
  CHECK(out.std_per_dim.isZero(0.0));
  const Eigen::VectorXd det = forward(a, p.mu, x);
  CHECK((out.mean - det).norm() < 1e-14);
  CHECK_THROWS_AS(predict(p, x, 1, rng), std::invalid_argument);
}

TEST_CASE("predictive summary arithmetic") {
  const auto out = make_predictive(Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(0.2, 0.4));
  CHECK(out.sigma_scalar == doctest::Approx(0.3));
  for (int dim : {1, 2, 4}) {
    Eigen::VectorXd sd = Eigen::VectorXd::LinSpaced(dim, 0.1, 0.9);
    const auto o = make_predictive(Eigen::VectorXd::Zero(dim), sd);
    CHECK(o.sigma_scalar * dim == sd.sum());
  }
}

TEST_CASE("predict: deterministic per seed, permutation invariant sigma") {
  const auto a = small_arch(3, 2);
  const auto p = init_posterior(a, 6);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 0.7);
  Rng r1(42), r2(42);
  const auto o1 = predict(p, x, 30, r1);
  const auto o2 = predict(p, x, 30, r2);
  CHECK((o1.mean.array() == o2.mean.array()).all());
  CHECK(o1.sigma_scalar == o2.sigma_scalar);

  Rng r3(5);
  Eigen::MatrixXd outs(2, 30);
  for (int s = 0; s < 30; ++s) outs.col(s) = forward(a, sample_weights(p, r3).values, x);
  std::vector<int> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[3], perm[17]);
  Eigen::MatrixXd shuffled(2, 30);
  for (int s = 0; s < 30; ++s) shuffled.col(s) = outs.col(perm[s]);
  const auto a1 = summarize_samples(outs);
  const auto a2 = summarize_samples(shuffled);
  CHECK(a1.sigma_scalar == doctest::Approx(a2.sigma_scalar).epsilon(1e-13));
  // Sample standard deviation with denominator M - 1.
  const double m0 = outs.row(0).mean();
  const double sd0 = std::sqrt((outs.row(0).array() - m0).square().sum() / 29.0);
  CHECK(a1.std_per_dim[0] == doctest::Approx(sd0).epsilon(1e-12));
}

TEST_CASE("sampled ensemble batch prediction agrees with single prediction") {
  const auto a = small_arch(3, 2);
  const auto p = init_posterior(a, 6);
  Rng rng(3);
  SampledEnsemble ens(p, 20, rng);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 7);
  Eigen::MatrixXd means, stds;
  ens.predict_batch(x, means, stds);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const auto o = ens.predict(x.col(j));
    CHECK((o.mean - means.col(j)).norm() < 1e-12);
    CHECK((o.std_per_dim - stds.col(j)).norm() < 1e-12);
  }
}

TEST_CASE("trained policy is less certain far from its demonstrations") {
  auto ctx = env::make_double_integrator(1.0);
  Rng rng(12);
  const auto demos = env::get_demonstrations(ctx, 3, rng);
  const auto ws = windows::build_windows(demos, 2);
  BbbPolicy policy(6, 1, BbbPolicyConfig{}, 5);
  policy.train(ws);
  double near = 0.0, far = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    const auto& w = ws[i * ws.size() / 100];
    near += policy.predict(w.features).sigma_scalar;
    Eigen::VectorXd shifted = w.features;
    shifted.head(4).array() += 10.0;  // both states of the k=2 window
    far += policy.predict(shifted).sigma_scalar;
  }
  CHECK(near / 100 < far / 100);
}

TEST_CASE("posterior text record round-trips bit-exactly") {
  const auto a = small_arch(3, 2);
  auto p = init_posterior(a, 21);
  p.likelihood_log_noise = -1.2345678901234567;
  std::stringstream ss;
  write_posterior(ss, p);
  const auto q = read_posterior(ss);
  CHECK(q.arch == p.arch);
  CHECK((q.mu.array() == p.mu.array()).all());
  CHECK((q.rho.array() == p.rho.array()).all());
  CHECK(q.likelihood_log_noise == p.likelihood_log_noise);
  CHECK(q.seed == p.seed);
  std::stringstream bad("ulfd-bnn-posterior 9\n");
  CHECK_THROWS(read_posterior(bad));
}

TEST_CASE("architecture validation") {
  Architecture a;
  a.hidden_layers = {};
  CHECK_THROWS_AS(a.validate(), std::invalid_argument);
  a.hidden_layers = {4, 0};
  CHECK_THROWS_AS(a.validate(), std::invalid_argument);
  TrainConfig c;
  c.predict_mc_samples = 1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
