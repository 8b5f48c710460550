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

#ifndef ULFD_ENV_SUITE_HPP_
#define ULFD_ENV_SUITE_HPP_

// Simulated task contexts with hidden dynamics variations and scripted experts.
//
// Both environments have a two-dimensional state and a scalar action:
//   double integrator: (x [m], v [m/s]), force [N]
//   pendulum:          (theta [rad], theta_dot [rad/s]), torque [N m]
// theta = 0 is hanging down, theta = pi is upright.

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ulfd/common.hpp"

namespace ulfd::env {

enum class EnvKind { kDoubleIntegrator, kPendulum };

const char* to_string(EnvKind kind);
EnvKind parse_env_kind(const std::string& name);

inline constexpr double kGravity = 9.81;

struct RewardWeights {
  double w_pos = 1.0;
  double w_vel = 0.1;
  double w_act = 0.001;
};

struct Context {
  std::string id;
  EnvKind kind = EnvKind::kDoubleIntegrator;
  double mass = 1.0;
  double length = 1.0;   // pendulum only
  double damping = 0.0;  // pendulum only
  double dt = 0.05;
  std::size_t horizon = 200;
  RewardWeights reward;
  double action_limit = 2.0;

  void validate() const;
  std::size_t state_dim() const { return 2; }
  std::size_t action_dim() const { return 1; }
};

using State = Eigen::VectorXd;
using Action = Eigen::VectorXd;

Context make_double_integrator(double mass, std::string id = {});
Context make_pendulum(double mass, double length, std::string id = {});

/// Masses {0.5, 0.75, 1, 1.5, 2, 3, 4, 6}.
std::vector<Context> double_integrator_family();
/// Masses {0.5, 1, 1.5, 2} x lengths {0.5, 1}.
std::vector<Context> pendulum_family();

double wrap_angle(double angle);  // into (-pi, pi]
/// Unsigned angle between `theta` and the upright position.
double distance_to_upright(double theta);

struct StepResult {
  State next;
  double reward = 0.0;
};

/// One semi-implicit Euler step. The action is clipped to the context limit.
/// Throws SimulationDiverged on a non-finite next state.
StepResult step(const Context& ctx, const State& s, const Action& a);

double reward(const Context& ctx, const State& s, const Action& clipped_action);

Action clip_action(const Context& ctx, const Action& a);

State reset(const Context& ctx, Rng& rng);

/// Total mechanical energy of the pendulum (zero at the pivot height).
double pendulum_energy(const Context& ctx, const State& s);

struct LqrSolution {
  Eigen::RowVectorXd gain;
  Eigen::Matrix2d cost_to_go;
  std::size_t iterations = 0;
  double closed_loop_spectral_radius = 0.0;
};

/// Discrete Riccati fixed-point iteration on the dynamics linearized at the
/// origin (integrator) or upright (pendulum), discretized exactly as `step`
/// integrates. Q = diag(w_pos, w_vel), R = max(w_act, 1e-3).
/// Throws RiccatiFailure without convergence in 1e5 iterations.
LqrSolution solve_lqr(const Context& ctx);

/// Scripted demonstrator: LQR for the integrator; energy-shaping swing-up with
/// an LQR catch near upright for the pendulum.
class Expert {
 public:
  explicit Expert(Context ctx);
  Action act(const State& s) const;
  const Context& context() const { return ctx_; }
  const Eigen::RowVectorXd& gain() const { return gain_; }

 private:
  Context ctx_;
  Eigen::RowVectorXd gain_;
};

Action expert_action(const Context& ctx, const State& s);

struct TimeStep {
  State state;
  Action action;
  double reward = 0.0;
};

struct Trajectory {
  std::string context_id;
  std::size_t episode = 0;
  std::vector<TimeStep> steps;
  State terminal;

  double total_reward() const;
};

/// Full-horizon expert rollout from `start`.
Trajectory rollout(const Expert& expert, const State& start,
                   std::size_t episode = 0);

std::vector<Trajectory> get_demonstrations(const Context& ctx,
                                           std::size_t n_episodes, Rng& rng);

/// CSV with columns t,s1,s2,a1,r and the context id in a leading comment.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

}  // namespace ulfd::env

#endif  // ULFD_ENV_SUITE_HPP_
