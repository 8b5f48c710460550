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

#ifndef ULFD_CONFIDENCE_DETECTOR_HPP_
#define ULFD_CONFIDENCE_DETECTOR_HPP_

#include <cstddef>
#include <deque>
#include <limits>
#include <span>

namespace ulfd {

struct DetectorParams {
  double c = 1.0;              // threshold scale
  std::size_t m = 10;          // moving-average window
  std::size_t t_start = 10;    // grace steps before queries may fire

  void validate() const;
};

/// Moving-average uncertainty monitor with a scaled adaptive threshold.
/// A query fires when the smoothed sigma exceeds c * omega after the grace
/// period. Omega starts at zero, so the very first context always queries.
class ConfidenceDetector {
 public:
  explicit ConfidenceDetector(DetectorParams params = {});

  /// Throws std::invalid_argument for negative or non-finite values.
  void observe(double sigma);
  /// Mean of the buffered values. Throws NotReady when nothing was observed.
  double smoothed() const;
  bool should_query() const;

  /// Sets omega to the mean of the per-context values and starts a new
  /// episode. Throws std::invalid_argument on an empty list.
  void update_threshold(std::span<const double> per_context_mean_sigmas);

  /// Clears the buffer and step counter; omega is kept.
  void restart_episode();

  /// Makes c * omega infinite so the detector never fires.
  void disable() { omega_ = std::numeric_limits<double>::infinity(); }
  void set_omega(double omega);

  double threshold() const;
  double omega() const { return omega_; }
  std::size_t t() const { return t_; }
  const std::deque<double>& buffer() const { return buffer_; }
  const DetectorParams& params() const { return params_; }

 private:
  DetectorParams params_;
  std::deque<double> buffer_;
  double sum_ = 0.0;
  double omega_ = 0.0;
  std::size_t t_ = 0;
};

}  // namespace ulfd

#endif  // ULFD_CONFIDENCE_DETECTOR_HPP_
