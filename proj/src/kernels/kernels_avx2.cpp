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

// AVX2 variants of the scalar kernels. Each one performs the same sequence
// of IEEE multiplies and adds per output element as its scalar reference
// (vectorized across independent outputs only, never across a reduction),
// so results are bitwise identical. This file is built with
// -ffp-contract=off; do not introduce _mm256_fmadd_pd here.

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mmvae/kernels.hpp"

namespace mmvae::kernels {
namespace {

// c_row[0..n) += sum_p coeff(p) * rows(p)[0..n), p in ascending order.
// `coeff` and `row` are callables so the nn and tn layouts share the loop.
template <typename Coeff, typename Row>
inline void AccumulateRows(double* c_row, std::size_t n, std::size_t k,
                           Coeff coeff, Row row) {
  std::size_t j = 0;
  for (; j + 16 <= n; j += 16) {
    __m256d c0 = _mm256_loadu_pd(c_row + j);
    __m256d c1 = _mm256_loadu_pd(c_row + j + 4);
    __m256d c2 = _mm256_loadu_pd(c_row + j + 8);
    __m256d c3 = _mm256_loadu_pd(c_row + j + 12);
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d a = _mm256_set1_pd(coeff(p));
      const double* b = row(p) + j;
      c0 = _mm256_add_pd(c0, _mm256_mul_pd(a, _mm256_loadu_pd(b)));
      c1 = _mm256_add_pd(c1, _mm256_mul_pd(a, _mm256_loadu_pd(b + 4)));
      c2 = _mm256_add_pd(c2, _mm256_mul_pd(a, _mm256_loadu_pd(b + 8)));
      c3 = _mm256_add_pd(c3, _mm256_mul_pd(a, _mm256_loadu_pd(b + 12)));
    }
    _mm256_storeu_pd(c_row + j, c0);
    _mm256_storeu_pd(c_row + j + 4, c1);
    _mm256_storeu_pd(c_row + j + 8, c2);
    _mm256_storeu_pd(c_row + j + 12, c3);
  }
  for (; j + 4 <= n; j += 4) {
    __m256d c0 = _mm256_loadu_pd(c_row + j);
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d a = _mm256_set1_pd(coeff(p));
      c0 = _mm256_add_pd(c0, _mm256_mul_pd(a, _mm256_loadu_pd(row(p) + j)));
    }
    _mm256_storeu_pd(c_row + j, c0);
  }
  for (; j < n; ++j) {
    double acc = c_row[j];
    for (std::size_t p = 0; p < k; ++p) acc += coeff(p) * row(p)[j];
    c_row[j] = acc;
  }
}

void GemmNN(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* a_row = a + i * k;
    AccumulateRows(
        c + i * n, n, k, [a_row](std::size_t p) { return a_row[p]; },
        [b, n](std::size_t p) { return b + p * n; });
  }
}

// The scalar reference walks p in the outer loop; per output element the
// order of additions is still p ascending, which is what AccumulateRows
// reproduces with i in the outer loop.
void GemmTN(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    AccumulateRows(
        c + i * n, n, k, [a, m, i](std::size_t p) { return a[p * m + i]; },
        [b, n](std::size_t p) { return b + p * n; });
  }
}

void GemmNT(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n) {
  // Transpose b (n x k) into scratch (k x n) so the dot products can be
  // vectorized across j while each one still sums over p in order.
  thread_local std::vector<double> bt;
  thread_local std::vector<double> acc;
  bt.resize(k * n);
  acc.resize(n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  const double* bt_data = bt.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* a_row = a + i * k;
    std::fill(acc.begin(), acc.end(), 0.0);
    AccumulateRows(
        acc.data(), n, k, [a_row](std::size_t p) { return a_row[p]; },
        [bt_data, n](std::size_t p) { return bt_data + p * n; });
    double* c_row = c + i * n;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      _mm256_storeu_pd(c_row + j, _mm256_add_pd(_mm256_loadu_pd(c_row + j),
                                                _mm256_loadu_pd(acc.data() + j)));
    }
    for (; j < n; ++j) c_row[j] += acc[j];
  }
}

void Axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(a, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void ColumnSum(const double* a, double* out, std::size_t rows,
               std::size_t cols) {
  std::size_t j = 0;
  for (; j + 4 <= cols; j += 4) {
    __m256d acc = _mm256_loadu_pd(out + j);
    for (std::size_t i = 0; i < rows; ++i)
      acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i * cols + j));
    _mm256_storeu_pd(out + j, acc);
  }
  for (; j < cols; ++j) {
    double acc = out[j];
    for (std::size_t i = 0; i < rows; ++i) acc += a[i * cols + j];
    out[j] = acc;
  }
}

void AdamUpdate(double* param, const double* grad, double* m, double* v,
                std::size_t n, const AdamCoefficients& coeff) {
  const double one_minus_b1 = 1.0 - coeff.beta1;
  const double one_minus_b2 = 1.0 - coeff.beta2;
  const __m256d b1 = _mm256_set1_pd(coeff.beta1);
  const __m256d b2 = _mm256_set1_pd(coeff.beta2);
  const __m256d omb1 = _mm256_set1_pd(one_minus_b1);
  const __m256d omb2 = _mm256_set1_pd(one_minus_b2);
  const __m256d bc1 = _mm256_set1_pd(coeff.bias_correction1);
  const __m256d bc2 = _mm256_set1_pd(coeff.bias_correction2);
  const __m256d lr = _mm256_set1_pd(coeff.learning_rate);
  const __m256d eps = _mm256_set1_pd(coeff.eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)),
                                     _mm256_mul_pd(omb1, g));
    const __m256d vi = _mm256_add_pd(
        _mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
        _mm256_mul_pd(omb2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d m_hat = _mm256_div_pd(mi, bc1);
    const __m256d v_hat = _mm256_div_pd(vi, bc2);
    const __m256d step = _mm256_div_pd(
        _mm256_mul_pd(lr, m_hat), _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
  }
  for (; i < n; ++i) {
    const double g = grad[i];
    m[i] = coeff.beta1 * m[i] + one_minus_b1 * g;
    v[i] = coeff.beta2 * v[i] + one_minus_b2 * (g * g);
    const double m_hat = m[i] / coeff.bias_correction1;
    const double v_hat = v[i] / coeff.bias_correction2;
    param[i] -= coeff.learning_rate * m_hat / (std::sqrt(v_hat) + coeff.eps);
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{GemmNN, GemmTN, GemmNT,
                                 Axpy,   ColumnSum, AdamUpdate};
  return table;
}

}  // namespace mmvae::kernels
