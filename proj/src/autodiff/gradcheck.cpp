// Copyright 2026 The mmvae-lab Authors. All Rights Reserved.
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

#include <algorithm>
#include <cmath>

#include "mmvae/tensor.hpp"

namespace mmvae {

std::vector<double> numeric_gradient(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, double step) {
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double original = probe[i];
    probe[i] = original + step;
    const double up = f(probe);
    probe[i] = original - step;
    const double down = f(probe);
    probe[i] = original;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

GradCheckResult compare_gradients(std::span<const double> analytic,
                                  std::span<const double> numeric,
                                  const GradCheckOptions& options) {
  if (analytic.size() != numeric.size()) {
    throw ShapeError("compare_gradients: " + std::to_string(analytic.size()) +
                     " analytic vs " + std::to_string(numeric.size()) +
                     " numeric entries");
  }
  GradCheckResult result;
  result.checked = analytic.size();
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i];
    const double n = numeric[i];
    const double abs_err = std::abs(a - n);
    const double denom = std::max(std::abs(a), std::abs(n));
    const double rel_err = denom > 0.0 ? abs_err / denom : 0.0;
    result.max_absolute_error = std::max(result.max_absolute_error, abs_err);
    if (abs_err > options.absolute_floor) {
      result.max_relative_error = std::max(result.max_relative_error, rel_err);
    }
    const bool pass = abs_err <= options.absolute_floor ||
                      abs_err <= options.relative_tolerance * denom;
    if (!pass) {
      ++result.failures;
      if (result.worst.size() < 10) result.worst.push_back({i, a, n});
    }
  }
  return result;
}

GradCheckResult check_gradient(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, std::span<const double> analytic,
    const GradCheckOptions& options) {
  const std::vector<double> numeric = numeric_gradient(f, x, options.step);
  return compare_gradients(analytic, numeric, options);
}

}  // namespace mmvae
