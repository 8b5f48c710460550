# Copyright 2026 The ulfd Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Active learning from demonstration with Bayesian neural network policies."""

from ulfd._core import (
    ConfidenceDetector,
    Context,
    DetectorParams,
    ExperimentConfig,
    UlfdError,
    __version__,
    double_integrator_family,
    expert_action,
    expert_rollout,
    experiments,
    gaussian_kl,
    gp_fit_predict,
    inverse_softplus,
    lqr_gain,
    make_double_integrator,
    make_pendulum,
    pendulum_family,
    reset,
    run_experiment,
    softplus,
    spearman,
    step,
)

__all__ = [
    "ConfidenceDetector",
    "Context",
    "DetectorParams",
    "ExperimentConfig",
    "UlfdError",
    "__version__",
    "double_integrator_family",
    "expert_action",
    "expert_rollout",
    "experiments",
    "gaussian_kl",
    "gp_fit_predict",
    "inverse_softplus",
    "lqr_gain",
    "make_double_integrator",
    "make_pendulum",
    "pendulum_family",
    "reset",
    "run_experiment",
    "softplus",
    "spearman",
    "step",
]
