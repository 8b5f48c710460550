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

#include "ulfd/env_suite.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "ulfd/csv.hpp"

namespace ulfd::env {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kRiccatiTol = 1e-10;
constexpr std::size_t kRiccatiMaxIter = 100000;
constexpr double kMinActionWeight = 1e-3;
// Switch from energy pumping to the balancing LQR inside this region.
constexpr double kCatchAngle = 0.3;
constexpr double kCatchRate = 2.0;

std::string mass_label(const char* prefix, double mass) {
  return std::string(prefix) + "_m" + csv::num(mass);
}

// Continuous linear model (x_ddot = a21 x + a22 x_dot + b u) about the
// operating point the expert regulates to.
struct LinearModel {
  double a21, a22, b;
};

LinearModel linearize(const Context& ctx) {
  if (ctx.kind == EnvKind::kDoubleIntegrator) return {0.0, 0.0, 1.0 / ctx.mass};
  const double inertia = ctx.mass * ctx.length * ctx.length;
  return {kGravity / ctx.length, -ctx.damping / inertia, 1.0 / inertia};
}

}  // namespace

const char* to_string(EnvKind kind) {
  return kind == EnvKind::kDoubleIntegrator ? "double_integrator" : "pendulum";
}

EnvKind parse_env_kind(const std::string& name) {
  if (name == "double_integrator" || name == "integrator") {
    return EnvKind::kDoubleIntegrator;
  }
  if (name == "pendulum") return EnvKind::kPendulum;
  throw std::invalid_argument("unknown environment '" + name + "'");
}

void Context::validate() const {
  if (!(mass > 0.0)) throw std::invalid_argument("mass must be positive");
  if (kind == EnvKind::kPendulum && !(length > 0.0)) {
    throw std::invalid_argument("pendulum length must be positive");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (!(action_limit > 0.0)) {
    throw std::invalid_argument("action_limit must be positive");
  }
  if (reward.w_pos < 0.0 || reward.w_vel < 0.0 || reward.w_act < 0.0) {
    throw std::invalid_argument("reward weights must be nonnegative");
  }
}

Context make_double_integrator(double mass, std::string id) {
  Context ctx;
  ctx.kind = EnvKind::kDoubleIntegrator;
  ctx.mass = mass;
  ctx.id = id.empty() ? mass_label("di", mass) : std::move(id);
  ctx.validate();
  return ctx;
}

Context make_pendulum(double mass, double length, std::string id) {
  Context ctx;
  ctx.kind = EnvKind::kPendulum;
  ctx.mass = mass;
  ctx.length = length;
  ctx.damping = 0.01;
  ctx.action_limit = 0.5 * mass * kGravity * length;
  ctx.id = id.empty() ? mass_label("pend", mass) + "_l" + csv::num(length)
                      : std::move(id);
  ctx.validate();
  return ctx;
}

std::vector<Context> double_integrator_family() {
  std::vector<Context> out;
  for (double m : {0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0}) {
    out.push_back(make_double_integrator(m));
  }
  return out;
}

std::vector<Context> pendulum_family() {
  std::vector<Context> out;
  for (double l : {0.5, 1.0}) {
    for (double m : {0.5, 1.0, 1.5, 2.0}) out.push_back(make_pendulum(m, l));
  }
  return out;
}

double wrap_angle(double angle) {
  double a = std::fmod(angle + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

double distance_to_upright(double theta) {
  return std::abs(wrap_angle(theta - kPi));
}

Action clip_action(const Context& ctx, const Action& a) {
  if (static_cast<std::size_t>(a.size()) != ctx.action_dim()) {
    throw std::invalid_argument("action dimension mismatch");
  }
  return a.cwiseMax(-ctx.action_limit).cwiseMin(ctx.action_limit);
}

double reward(const Context& ctx, const State& s, const Action& clipped_action) {
  const double p = ctx.kind == EnvKind::kDoubleIntegrator
                       ? s[0]
                       : distance_to_upright(s[0]);
  const double q = s[1];
  const double u = clipped_action[0];
  const RewardWeights& w = ctx.reward;
  return -ctx.dt * (w.w_pos * p * p + w.w_vel * q * q + w.w_act * u * u);
}

StepResult step(const Context& ctx, const State& s, const Action& a) {
  if (s.size() != 2) throw std::invalid_argument("state dimension mismatch");
  const Action u = clip_action(ctx, a);
  State next(2);
  if (ctx.kind == EnvKind::kDoubleIntegrator) {
    const double v = s[1] + (u[0] / ctx.mass) * ctx.dt;
    next << s[0] + v * ctx.dt, v;
  } else {
    const double inertia = ctx.mass * ctx.length * ctx.length;
    const double acc = -(kGravity / ctx.length) * std::sin(s[0]) -
                       (ctx.damping / inertia) * s[1] + u[0] / inertia;
    const double w = s[1] + acc * ctx.dt;
    next << wrap_angle(s[0] + w * ctx.dt), w;
  }
  if (!next.allFinite()) throw SimulationDiverged("non-finite state in " + ctx.id);
  return {std::move(next), reward(ctx, s, u)};
}

State reset(const Context& ctx, Rng& rng) {
  State s(2);
  if (ctx.kind == EnvKind::kDoubleIntegrator) {
    std::uniform_real_distribution<double> pos(-2.0, 2.0), vel(-0.5, 0.5);
    s[0] = pos(rng);
    s[1] = vel(rng);
  } else {
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);
    s[0] = jitter(rng);
    s[1] = jitter(rng);
  }
  return s;
}

double pendulum_energy(const Context& ctx, const State& s) {
  const double ml = ctx.mass * ctx.length;
  return 0.5 * ml * ctx.length * s[1] * s[1] - ml * kGravity * std::cos(s[0]);
}

LqrSolution solve_lqr(const Context& ctx) {
  ctx.validate();
  const LinearModel lin = linearize(ctx);
  const double dt = ctx.dt;
  // Semi-implicit Euler: v' = v + dt*acc, x' = x + dt*v'.
  Eigen::Matrix2d a;
  a << 1.0 + dt * dt * lin.a21, dt * (1.0 + dt * lin.a22), dt * lin.a21,
      1.0 + dt * lin.a22;
  Eigen::Vector2d b(dt * dt * lin.b, dt * lin.b);
  Eigen::Matrix2d q = Eigen::Vector2d(ctx.reward.w_pos, ctx.reward.w_vel).asDiagonal();
  const double r = std::max(ctx.reward.w_act, kMinActionWeight);

  Eigen::Matrix2d p = q;
  for (std::size_t it = 1; it <= kRiccatiMaxIter; ++it) {
    const Eigen::RowVector2d pb_t = b.transpose() * p;
    const double denom = r + pb_t.dot(b);
    const Eigen::RowVector2d k = (pb_t * a) / denom;
    Eigen::Matrix2d next = q + a.transpose() * p * (a - b * k);
    next = 0.5 * (next + next.transpose());
    const double diff = (next - p).cwiseAbs().maxCoeff();
    p = next;
    if (!p.allFinite()) break;
    if (diff < kRiccatiTol) {
      LqrSolution sol;
      const Eigen::RowVector2d pbf = b.transpose() * p;
      sol.gain = (pbf * a) / (r + pbf.dot(b));
      sol.cost_to_go = p;
      sol.iterations = it;
      const Eigen::Matrix2d closed = a - b * sol.gain;
      sol.closed_loop_spectral_radius =
          closed.eigenvalues().cwiseAbs().maxCoeff();
      if (!(sol.closed_loop_spectral_radius < 1.0)) break;
      return sol;
    }
  }
  throw RiccatiFailure("Riccati iteration did not converge for " + ctx.id);
}

Expert::Expert(Context ctx) : ctx_(std::move(ctx)), gain_(solve_lqr(ctx_).gain) {}

Action Expert::act(const State& s) const {
  Action a(1);
  if (ctx_.kind == EnvKind::kDoubleIntegrator) {
    a[0] = -gain_.dot(s);
  } else {
    const double phi = wrap_angle(s[0] - kPi);
    if (std::abs(phi) < kCatchAngle && std::abs(s[1]) < kCatchRate) {
      a[0] = -(gain_[0] * phi + gain_[1] * s[1]);
    } else {
      const double target = ctx_.mass * kGravity * ctx_.length;
      const double deficit = target - pendulum_energy(ctx_, s);
      const double gain = 20.0 * ctx_.action_limit / target;
      a[0] = gain * deficit * (s[1] >= 0.0 ? 1.0 : -1.0);
    }
  }
  return clip_action(ctx_, a);
}

Action expert_action(const Context& ctx, const State& s) {
  return Expert(ctx).act(s);
}

double Trajectory::total_reward() const {
  double total = 0.0;
  for (const TimeStep& st : steps) total += st.reward;
  return total;
}

Trajectory rollout(const Expert& expert, const State& start,
                   std::size_t episode) {
  const Context& ctx = expert.context();
  Trajectory traj;
  traj.context_id = ctx.id;
  traj.episode = episode;
  traj.steps.reserve(ctx.horizon);
  State s = start;
  for (std::size_t t = 0; t < ctx.horizon; ++t) {
    const Action a = expert.act(s);
    StepResult res = step(ctx, s, a);
    traj.steps.push_back({s, a, res.reward});
    s = std::move(res.next);
  }
  traj.terminal = std::move(s);
  return traj;
}

std::vector<Trajectory> get_demonstrations(const Context& ctx,
                                           std::size_t n_episodes, Rng& rng) {
  if (n_episodes < 1) throw std::invalid_argument("n_episodes must be >= 1");
  const Expert expert(ctx);
  std::vector<Trajectory> out;
  out.reserve(n_episodes);
  for (std::size_t e = 0; e < n_episodes; ++e) {
    out.push_back(rollout(expert, reset(ctx, rng), e));
  }
  return out;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "# context=" << traj.context_id << " episode=" << traj.episode << '\n';
  const std::size_t ds = traj.steps.empty() ? 0 : traj.steps[0].state.size();
  const std::size_t da = traj.steps.empty() ? 0 : traj.steps[0].action.size();
  std::vector<std::string> header{"t"};
  for (std::size_t i = 1; i <= ds; ++i) header.push_back("s" + std::to_string(i));
  for (std::size_t i = 1; i <= da; ++i) header.push_back("a" + std::to_string(i));
  header.push_back("r");
  csv::write_row(out, header);
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    const TimeStep& st = traj.steps[t];
    std::vector<std::string> row{std::to_string(t)};
    for (Eigen::Index i = 0; i < st.state.size(); ++i) row.push_back(csv::num(st.state[i]));
    for (Eigen::Index i = 0; i < st.action.size(); ++i) row.push_back(csv::num(st.action[i]));
    row.push_back(csv::num(st.reward));
    csv::write_row(out, row);
  }
}

}  // namespace ulfd::env
