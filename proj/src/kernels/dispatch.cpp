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

#include <atomic>
#include <stdexcept>
#include <string>

#include "mmvae/kernels.hpp"

namespace mmvae::kernels {
namespace {

bool CpuHasAvx2() {
#if defined(MMVAE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool has_avx2 = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") != 0;
  }();
  return has_avx2;
#else
  return false;
#endif
}

Backend DetectBest() {
  return CpuHasAvx2() ? Backend::kAvx2 : Backend::kScalar;
}

std::atomic<Backend>& ActiveSlot() {
  static std::atomic<Backend> slot{DetectBest()};
  return slot;
}

}  // namespace

bool supported(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
      return CpuHasAvx2();
  }
  return false;
}

const KernelTable& table(Backend backend) {
  if (!supported(backend)) {
    throw std::invalid_argument("kernel backend '" + std::string(name(backend)) +
                                "' is not supported on this host");
  }
#if defined(MMVAE_HAVE_AVX2)
  if (backend == Backend::kAvx2) return avx2_table();
#endif
  return scalar_table();
}

const KernelTable& active() {
#if defined(MMVAE_HAVE_AVX2)
  if (ActiveSlot().load(std::memory_order_relaxed) == Backend::kAvx2)
    return avx2_table();
#endif
  return scalar_table();
}

Backend active_backend() { return ActiveSlot().load(); }

void select(Backend backend) {
  table(backend);  // validates
  ActiveSlot().store(backend);
}

std::string_view name(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace mmvae::kernels
