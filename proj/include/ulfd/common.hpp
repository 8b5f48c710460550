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

#ifndef ULFD_COMMON_HPP_
#define ULFD_COMMON_HPP_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ulfd {

inline constexpr const char* kVersion = "ulfd 0.3.0";

using Rng = std::mt19937_64;

// Failure categories raised across the library. Precondition violations use
// std::invalid_argument.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SimulationDiverged : public Error {
 public:
  using Error::Error;
};

class RiccatiFailure : public Error {
 public:
  using Error::Error;
};

class IllConditionedKernel : public Error {
 public:
  using Error::Error;
};

class DatasetTooLarge : public Error {
 public:
  using Error::Error;
};

class TrajectoryTooShort : public Error {
 public:
  using Error::Error;
};

class NotReady : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

/// Deterministic seed for an independent random stream (splitmix64 mix of
/// base seed, stream tag and index).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                          std::uint64_t index = 0);

/// Draws one standard normal variate.
inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

/// Fills `out` with standard normal draws.
void fill_standard_normal(Rng& rng, Eigen::Ref<Eigen::VectorXd> out);

}  // namespace ulfd

#endif  // ULFD_COMMON_HPP_
