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

#ifndef ULFD_PREDICTIVE_HPP_
#define ULFD_PREDICTIVE_HPP_

#include <Eigen/Dense>

namespace ulfd {

// Gaussian summary of a posterior predictive distribution over actions.
// Both the Bayesian network and the GP baseline return this type.
struct PredictiveOutput {
  Eigen::VectorXd mean;
  Eigen::VectorXd std_per_dim;
  // Arithmetic mean of std_per_dim.
  double sigma_scalar = 0.0;
};

inline PredictiveOutput make_predictive(Eigen::VectorXd mean,
                                        Eigen::VectorXd std_per_dim) {
  PredictiveOutput out;
  out.sigma_scalar = std_per_dim.size() > 0 ? std_per_dim.mean() : 0.0;
  out.mean = std::move(mean);
  out.std_per_dim = std::move(std_per_dim);
  return out;
}

}  // namespace ulfd

#endif  // ULFD_PREDICTIVE_HPP_
