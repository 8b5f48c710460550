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

#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ulfd/active_loop.hpp"
#include "ulfd/bayes_net.hpp"
#include "ulfd/common.hpp"
#include "ulfd/confidence_detector.hpp"
#include "ulfd/env_suite.hpp"
#include "ulfd/experiments.hpp"
#include "ulfd/gp_baseline.hpp"

namespace py = pybind11;
using namespace ulfd;

namespace {

// Trajectory as (states, actions, rewards) arrays, one row per step.
py::tuple trajectory_arrays(const env::Trajectory& tr) {
  const Eigen::Index n = static_cast<Eigen::Index>(tr.steps.size());
  const Eigen::Index ds = n ? tr.steps[0].state.size() : 0;
  const Eigen::Index da = n ? tr.steps[0].action.size() : 0;
  Eigen::MatrixXd s(n, ds), a(n, da);
  Eigen::VectorXd r(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.row(i) = tr.steps[static_cast<std::size_t>(i)].state.transpose();
    a.row(i) = tr.steps[static_cast<std::size_t>(i)].action.transpose();
    r(i) = tr.steps[static_cast<std::size_t>(i)].reward;
  }
  return py::make_tuple(s, a, r);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Core bindings of the ulfd library";
  m.attr("__version__") = std::string(kVersion);

  py::register_exception<Error>(m, "UlfdError", PyExc_RuntimeError);

  // --- environments ---
  py::class_<env::Context>(m, "Context")
      .def_readwrite("id", &env::Context::id)
      .def_readwrite("mass", &env::Context::mass)
      .def_readwrite("length", &env::Context::length)
      .def_readwrite("damping", &env::Context::damping)
      .def_readwrite("dt", &env::Context::dt)
      .def_readwrite("horizon", &env::Context::horizon)
      .def_readwrite("action_limit", &env::Context::action_limit)
      .def_property_readonly("kind",
                             [](const env::Context& c) { return env::to_string(c.kind); })
      .def("validate", &env::Context::validate)
      .def("__repr__", [](const env::Context& c) { return "<Context " + c.id + ">"; });

  m.def("make_double_integrator", &env::make_double_integrator, py::arg("mass"),
        py::arg("id") = std::string());
  m.def("make_pendulum", &env::make_pendulum, py::arg("mass"), py::arg("length"),
        py::arg("id") = std::string());
  m.def("double_integrator_family", &env::double_integrator_family);
  m.def("pendulum_family", &env::pendulum_family);
  m.def(
      "step",
      [](const env::Context& c, const Eigen::VectorXd& s, const Eigen::VectorXd& a) {
        env::StepResult r = env::step(c, s, a);
        return py::make_tuple(r.next, r.reward);
      },
      py::arg("context"), py::arg("state"), py::arg("action"));
  m.def(
      "reset",
      [](const env::Context& c, std::uint64_t seed) {
        Rng rng(seed);
        return env::reset(c, rng);
      },
      py::arg("context"), py::arg("seed"));
  m.def(
      "lqr_gain", [](const env::Context& c) { return env::solve_lqr(c).gain; },
      py::arg("context"));
  m.def("expert_action", &env::expert_action, py::arg("context"), py::arg("state"));
  m.def(
      "expert_rollout",
      [](const env::Context& c, const Eigen::VectorXd& start) {
        return trajectory_arrays(env::rollout(env::Expert(c), start));
      },
      py::arg("context"), py::arg("start"),
      "Expert rollout over the full horizon as (states, actions, rewards).");

  // --- Bayes-by-Backprop helpers ---
  m.def("softplus", &bnn::softplus);
  m.def("inverse_softplus", &bnn::inverse_softplus);
  m.def(
      "gaussian_kl",
      [](const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma) {
        if (mu.size() != sigma.size()) throw py::value_error("mu and sigma differ in length");
        bnn::VariationalPosterior p;
        p.mu = mu;
        p.rho = sigma.unaryExpr([](double s) { return bnn::inverse_softplus(s); });
        return bnn::kl_to_prior(p);
      },
      py::arg("mu"), py::arg("sigma"),
      "KL of a factorized Gaussian to the standard normal prior.");

  // --- Gaussian process ---
  m.def(
      "gp_fit_predict",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::MatrixXd& xq,
         double lengthscale, double signal_variance, double noise_variance,
         std::size_t steps) {
        gp::KernelConfig k = gp::KernelConfig::isotropic(
            static_cast<std::size_t>(x.rows()), lengthscale, signal_variance,
            noise_variance);
        gp::GpModel model;
        if (steps == 0) {
          k.mean_constant = y.mean();
          model = gp::condition(x, y.transpose(), {k});
        } else {
          gp::FitOptions fo;
          fo.steps = steps;
          model = gp::fit(x, y.transpose(), k, fo);
        }
        Eigen::VectorXd mean(xq.cols()), var(xq.cols());
        for (Eigen::Index i = 0; i < xq.cols(); ++i) {
          mean(i) = gp::predict_gp(model, xq.col(i)).mean(0);
          var(i) = gp::raw_predictive_variance(model, 0, xq.col(i));
        }
        return py::make_tuple(mean, var);
      },
      py::arg("x"), py::arg("y"), py::arg("xq"), py::arg("lengthscale") = 1.0,
      py::arg("signal_variance") = 1.0, py::arg("noise_variance") = 1e-2,
      py::arg("steps") = 0,
      "Inputs are column-major (dim x n). Returns (mean, latent variance) at xq.");

  // --- detector ---
  py::class_<DetectorParams>(m, "DetectorParams")
      .def(py::init<>())
      .def_readwrite("c", &DetectorParams::c)
      .def_readwrite("m", &DetectorParams::m)
      .def_readwrite("t_start", &DetectorParams::t_start);
  py::class_<ConfidenceDetector>(m, "ConfidenceDetector")
      .def(py::init<DetectorParams>(), py::arg("params") = DetectorParams{})
      .def("observe", &ConfidenceDetector::observe)
      .def("smoothed", &ConfidenceDetector::smoothed)
      .def("should_query", &ConfidenceDetector::should_query)
      .def("update_threshold",
           [](ConfidenceDetector& d, const std::vector<double>& v) {
             d.update_threshold(v);
           })
      .def("restart_episode", &ConfidenceDetector::restart_episode)
      .def("disable", &ConfidenceDetector::disable)
      .def_property_readonly("omega", &ConfidenceDetector::omega)
      .def_property_readonly("t", &ConfidenceDetector::t)
      .def_property_readonly("threshold", &ConfidenceDetector::threshold);

  m.def("spearman", &spearman_rank_corr, py::arg("x"), py::arg("y"));

  // --- experiments ---
  py::class_<exp::ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def("set", &exp::ExperimentConfig::set)
      .def("get", &exp::ExperimentConfig::get)
      .def("apply_override", &exp::ExperimentConfig::apply_override)
      .def("load_file", &exp::ExperimentConfig::load_file)
      .def("validate", &exp::ExperimentConfig::validate)
      .def("values", &exp::ExperimentConfig::values);
  m.def("experiments", [] {
    std::vector<std::string> names;
    for (auto k : exp::all_experiments()) names.push_back(exp::to_string(k));
    return names;
  });
  m.def(
      "run_experiment",
      [](const std::string& name, const exp::ExperimentConfig& cfg,
         const std::string& out_dir) {
        const auto kind = exp::parse_experiment(name);
        py::gil_scoped_release release;
        return exp::run_to_directory(kind, cfg, out_dir);
      },
      py::arg("name"), py::arg("config"), py::arg("out_dir"),
      "Runs one experiment and returns the path of the CSV it wrote.");
}
