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

#include <cmath>

#include "mmvae/kernels.hpp"

namespace mmvae::kernels {
namespace {

void GemmNN(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* c_row = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double a_ip = a[i * k + p];
      const double* b_row = b + p * n;
      for (std::size_t j = 0; j < n; ++j) c_row[j] += a_ip * b_row[j];
    }
  }
}

void GemmTN(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* a_row = a + p * m;
    const double* b_row = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double a_pi = a_row[i];
      double* c_row = c + i * n;
      for (std::size_t j = 0; j < n; ++j) c_row[j] += a_pi * b_row[j];
    }
  }
}

void GemmNT(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* a_row = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* b_row = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a_row[p] * b_row[p];
      c[i * n + j] += acc;
    }
  }
}

void Axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void ColumnSum(const double* a, double* out, std::size_t rows,
               std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = a + i * cols;
    for (std::size_t j = 0; j < cols; ++j) out[j] += row[j];
  }
}

void AdamUpdate(double* param, const double* grad, double* m, double* v,
                std::size_t n, const AdamCoefficients& coeff) {
  const double one_minus_b1 = 1.0 - coeff.beta1;
  const double one_minus_b2 = 1.0 - coeff.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = coeff.beta1 * m[i] + one_minus_b1 * g;
    v[i] = coeff.beta2 * v[i] + one_minus_b2 * (g * g);
    const double m_hat = m[i] / coeff.bias_correction1;
    const double v_hat = v[i] / coeff.bias_correction2;
    param[i] -= coeff.learning_rate * m_hat / (std::sqrt(v_hat) + coeff.eps);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{GemmNN, GemmTN, GemmNT,
                                 Axpy,   ColumnSum, AdamUpdate};
  return table;
}

}  // namespace mmvae::kernels
