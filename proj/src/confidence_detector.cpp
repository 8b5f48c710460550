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

#include "ulfd/confidence_detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "ulfd/common.hpp"

namespace ulfd {

void DetectorParams::validate() const {
  if (!(c > 0.0)) throw std::invalid_argument("detector scale c must be positive");
  if (m < 1) throw std::invalid_argument("detector window m must be >= 1");
}

ConfidenceDetector::ConfidenceDetector(DetectorParams params)
    : params_(params) {
  params_.validate();
}

void ConfidenceDetector::observe(double sigma) {
  if (!std::isfinite(sigma) || sigma < 0.0) {
    throw std::invalid_argument("sigma must be finite and nonnegative");
  }
  buffer_.push_back(sigma);
  if (buffer_.size() > params_.m) buffer_.pop_front();
  // Recompute rather than keep a running sum so long episodes do not drift.
  sum_ = std::accumulate(buffer_.begin(), buffer_.end(), 0.0);
  ++t_;
}

double ConfidenceDetector::smoothed() const {
  if (buffer_.empty()) throw NotReady("detector has no observations yet");
  return sum_ / static_cast<double>(buffer_.size());
}

double ConfidenceDetector::threshold() const {
  if (std::isinf(omega_)) return omega_;
  return params_.c * omega_;
}

bool ConfidenceDetector::should_query() const {
  if (buffer_.empty() || t_ <= params_.t_start) return false;
  return smoothed() > threshold();
}

void ConfidenceDetector::update_threshold(
    std::span<const double> per_context_mean_sigmas) {
  if (per_context_mean_sigmas.empty()) {
    throw std::invalid_argument("update_threshold needs at least one context");
  }
  // Summed in sorted order so the result does not depend on context order.
  std::vector<double> values(per_context_mean_sigmas.begin(),
                             per_context_mean_sigmas.end());
  std::sort(values.begin(), values.end());
  double total = 0.0;
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("context uncertainty must be nonnegative");
    }
    total += v;
  }
  omega_ = total / static_cast<double>(per_context_mean_sigmas.size());
  restart_episode();
}

void ConfidenceDetector::restart_episode() {
  buffer_.clear();
  sum_ = 0.0;
  t_ = 0;
}

void ConfidenceDetector::set_omega(double omega) {
  if (!(omega >= 0.0)) throw std::invalid_argument("omega must be >= 0");
  omega_ = omega;
}

}  // namespace ulfd
