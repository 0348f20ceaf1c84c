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


#include "mmvae/kernels.hpp"

#include <cstring>
#include <vector>

#include "gtest/gtest.h"
#include "oracles.hpp"

namespace mmvae::kernels {
namespace {

using testing::NaiveMatmul;
using testing::RandomVector;

struct Dims {
  std::size_t m, k, n;
};

const Dims kDims[] = {{1, 1, 1},  {3, 5, 7},   {4, 4, 4},    {5, 3, 16},
                      {17, 9, 33}, {64, 32, 32}, {128, 2, 35}, {2, 31, 19}};

bool BitwiseEqual(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void RequireAvx2() {
  if (!supported(Backend::kAvx2)) GTEST_SKIP() << "no AVX2 on this host";
}

TEST(KernelsTest, ScalarGemmMatchesNaiveProduct) {
  const auto& t = scalar_table();
  for (const auto& d : kDims) {
    const auto a = RandomVector(d.m * d.k, 1);
    const auto b = RandomVector(d.k * d.n, 2);
    std::vector<double> c(d.m * d.n, 0.0);
    t.gemm_nn(a.data(), b.data(), c.data(), d.m, d.k, d.n);
    const auto ref = NaiveMatmul(a, b, d.m, d.k, d.n);
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c[i], ref[i], 1e-13);
  }
}

TEST(KernelsTest, TransposedLayoutsAgreeWithExplicitTranspose) {
  const auto& t = scalar_table();
  for (const auto& d : kDims) {
    const auto a = RandomVector(d.m * d.k, 3);
    const auto b = RandomVector(d.k * d.n, 4);
    const auto ref = NaiveMatmul(a, b, d.m, d.k, d.n);
    std::vector<double> at(d.k * d.m), bt(d.n * d.k);
    for (std::size_t i = 0; i < d.m; ++i)
      for (std::size_t p = 0; p < d.k; ++p) at[p * d.m + i] = a[i * d.k + p];
    for (std::size_t p = 0; p < d.k; ++p)
      for (std::size_t j = 0; j < d.n; ++j) bt[j * d.k + p] = b[p * d.n + j];
    std::vector<double> c_tn(d.m * d.n, 0.0), c_nt(d.m * d.n, 0.0);
    t.gemm_tn(at.data(), b.data(), c_tn.data(), d.m, d.k, d.n);
    t.gemm_nt(a.data(), bt.data(), c_nt.data(), d.m, d.k, d.n);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      EXPECT_NEAR(c_tn[i], ref[i], 1e-13);
      EXPECT_NEAR(c_nt[i], ref[i], 1e-13);
    }
  }
}

TEST(KernelsTest, GemmAccumulatesIntoOutput) {
  const auto& t = scalar_table();
  const std::vector<double> a{1, 2, 3, 4}, id{1, 0, 0, 1};
  std::vector<double> c{10, 10, 10, 10};
  t.gemm_nn(a.data(), id.data(), c.data(), 2, 2, 2);
  EXPECT_EQ(c, (std::vector<double>{11, 12, 13, 14}));
}

TEST(KernelsTest, Avx2GemmIsBitwiseEqualToScalar) {
  RequireAvx2();
  const auto& s = scalar_table();
  const auto& v = avx2_table();
  for (const auto& d : kDims) {
    const auto a = RandomVector(d.m * d.k, 5, 3.0);
    const auto b = RandomVector(d.k * d.n, 6, 3.0);
    const auto at = RandomVector(d.k * d.m, 7, 3.0);
    const auto bt = RandomVector(d.n * d.k, 8, 3.0);
    const auto c0 = RandomVector(d.m * d.n, 9);
    auto cs = c0, cv = c0;
    s.gemm_nn(a.data(), b.data(), cs.data(), d.m, d.k, d.n);
    v.gemm_nn(a.data(), b.data(), cv.data(), d.m, d.k, d.n);
    EXPECT_TRUE(BitwiseEqual(cs, cv)) << "gemm_nn " << d.m << "x" << d.k << "x" << d.n;
    cs = c0, cv = c0;
    s.gemm_tn(at.data(), b.data(), cs.data(), d.m, d.k, d.n);
    v.gemm_tn(at.data(), b.data(), cv.data(), d.m, d.k, d.n);
    EXPECT_TRUE(BitwiseEqual(cs, cv)) << "gemm_tn " << d.m << "x" << d.k << "x" << d.n;
    cs = c0, cv = c0;
    s.gemm_nt(a.data(), bt.data(), cs.data(), d.m, d.k, d.n);
    v.gemm_nt(a.data(), bt.data(), cv.data(), d.m, d.k, d.n);
    EXPECT_TRUE(BitwiseEqual(cs, cv)) << "gemm_nt " << d.m << "x" << d.k << "x" << d.n;
  }
}

TEST(KernelsTest, Avx2VectorKernelsAreBitwiseEqualToScalar) {
  RequireAvx2();
  const auto& s = scalar_table();
  const auto& v = avx2_table();
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 64u, 1001u}) {
    const auto x = RandomVector(n, 10);
    const auto y0 = RandomVector(n, 11);
    auto ys = y0, yv = y0;
    s.axpy(-0.37, x.data(), ys.data(), n);
    v.axpy(-0.37, x.data(), yv.data(), n);
    EXPECT_TRUE(BitwiseEqual(ys, yv)) << "axpy n=" << n;

    for (std::size_t rows : {1u, 5u, 128u}) {
      const auto a = RandomVector(rows * n, 12);
      std::vector<double> os(n, 0.5), ov(n, 0.5);
      s.column_sum(a.data(), os.data(), rows, n);
      v.column_sum(a.data(), ov.data(), rows, n);
      EXPECT_TRUE(BitwiseEqual(os, ov)) << "column_sum rows=" << rows << " n=" << n;
    }

    const AdamCoefficients coeff{1e-3, 0.9, 0.999, 1e-8, 1.0 - 0.9 * 0.9, 1.0 - 0.999 * 0.999};
    auto ps = RandomVector(n, 13), pv = ps;
    auto ms = RandomVector(n, 14, 0.1), mv = ms;
    auto vs = RandomVector(n, 15, 0.1), vv = vs;
    for (double& q : vs) q = q * q;
    vv = vs;
    const auto g = RandomVector(n, 16);
    for (int step = 0; step < 3; ++step) {
      s.adam_update(ps.data(), g.data(), ms.data(), vs.data(), n, coeff);
      v.adam_update(pv.data(), g.data(), mv.data(), vv.data(), n, coeff);
    }
    EXPECT_TRUE(BitwiseEqual(ps, pv)) << "adam param n=" << n;
    EXPECT_TRUE(BitwiseEqual(ms, mv)) << "adam m n=" << n;
    EXPECT_TRUE(BitwiseEqual(vs, vv)) << "adam v n=" << n;
  }
}

TEST(KernelsTest, ScopedBackendRestoresPreviousSelection) {
  const Backend before = active_backend();
  {
    ScopedBackend scoped(Backend::kScalar);
    EXPECT_EQ(active_backend(), Backend::kScalar);
    EXPECT_EQ(&active(), &scalar_table());
  }
  EXPECT_EQ(active_backend(), before);
}

TEST(KernelsTest, DefaultsToWidestSupportedBackend) {
  EXPECT_TRUE(supported(Backend::kScalar));
  if (supported(Backend::kAvx2)) {
    EXPECT_EQ(active_backend(), Backend::kAvx2);
  } else {
    EXPECT_EQ(active_backend(), Backend::kScalar);
    EXPECT_THROW(select(Backend::kAvx2), std::invalid_argument);
  }
  EXPECT_EQ(name(Backend::kAvx2), "avx2");
}

}  // namespace
}  // namespace mmvae::kernels
