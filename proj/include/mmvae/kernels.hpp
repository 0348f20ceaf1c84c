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

#pragma once

#include <cstddef>
#include <string_view>

namespace mmvae::kernels {

// Dense double-precision inner loops used by the tensor ops and the
// optimizer. Every kernel has a scalar reference implementation; vector
// variants are selected at runtime and must agree with the reference
// (see tests/kernels_test.cpp).
//
// All matrices are row-major and contiguous. The gemm family accumulates
// into `c` (callers zero it first when they want plain assignment).

enum class Backend { kScalar, kAvx2 };

struct AdamCoefficients {
  double learning_rate;
  double beta1;
  double beta2;
  double eps;
  // 1 - beta^t for the current step t.
  double bias_correction1;
  double bias_correction2;
};

struct KernelTable {
  // c[m x n] += a[m x k] * b[k x n]
  void (*gemm_nn)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n);
  // c[m x n] += a[k x m]^T * b[k x n]
  void (*gemm_tn)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n);
  // c[m x n] += a[m x k] * b[n x k]^T
  void (*gemm_nt)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t k, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out[j] += sum_i a[i x n + j]
  void (*column_sum)(const double* a, double* out, std::size_t rows,
                     std::size_t cols);
  // In-place Adam update of `param` given `grad`; `m` and `v` are the
  // first and second moment buffers.
  void (*adam_update)(double* param, const double* grad, double* m, double* v,
                      std::size_t n, const AdamCoefficients& coeff);
};

const KernelTable& scalar_table();
#if defined(MMVAE_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

// True when `backend` was compiled in and the host CPU supports it.
bool supported(Backend backend);

// The table used by tensor ops. Defaults to the widest supported backend.
const KernelTable& active();
Backend active_backend();

// Throws std::invalid_argument if `backend` is not supported on this host.
void select(Backend backend);

const KernelTable& table(Backend backend);

std::string_view name(Backend backend);

// RAII override of the active backend, mainly for equivalence tests.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend backend) : previous_(active_backend()) {
    select(backend);
  }
  ~ScopedBackend() { select(previous_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

}  // namespace mmvae::kernels
