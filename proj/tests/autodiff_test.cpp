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
#include <cstring>
#include <functional>
#include <numbers>
#include <vector>

#include "gtest/gtest.h"
#include "mmvae/kernels.hpp"
#include "mmvae/tensor.hpp"
#include "oracles.hpp"

namespace mmvae {
namespace {

using testing::RandomVector;

Tensor Matrix(std::size_t r, std::size_t c, std::uint64_t seed, double scale = 1.0) {
  return Tensor({r, c}, RandomVector(r * c, seed, scale));
}

TEST(AutodiffTest, MatmulWithIdentity) {
  const Tensor a = Tensor::FromRows({{1, 2}, {3, 4}});
  const Tensor id = Tensor::FromRows({{1, 0}, {0, 1}});
  const Tensor c = matmul(a, id);
  EXPECT_EQ(c.shape(), (Shape{2, 2}));
  EXPECT_EQ(std::vector<double>(c.data().begin(), c.data().end()),
            (std::vector<double>{1, 2, 3, 4}));
}

TEST(AutodiffTest, SoftplusAtZero) {
  EXPECT_NEAR(softplus(Tensor::Scalar(0.0)).item(), 0.6931472, 1e-7);
  EXPECT_DOUBLE_EQ(softplus(Tensor::Scalar(0.0)).item(), std::log(2.0));
}

TEST(AutodiffTest, TanhGradientAtZeroIsOne) {
  Tape tape;
  const Tensor x = tape.variable(Tensor::Zeros(2, 3));
  const auto g = backward(tape, sum(tanh(x)));
  const Tensor gx = g.of(x);
  for (double v : gx.data()) EXPECT_EQ(v, 1.0);
}

TEST(AutodiffTest, SumGradientIsOnes) {
  Tape tape;
  const Tensor x = tape.variable(Matrix(3, 4, 1));
  const auto g = backward(tape, sum(x));
  EXPECT_EQ(g.of(x).shape(), x.shape());
  const Tensor gx = g.of(x);
  for (double v : gx.data()) EXPECT_EQ(v, 1.0);
}

TEST(AutodiffTest, QuadraticGradient) {
  Tape tape;
  const Tensor x = tape.variable(Tensor::FromRows({{1, -2}}));
  const auto g = backward(tape, scale(sum(mul(x, x)), 0.5));
  EXPECT_EQ(g.of(x)(0, 0), 1.0);
  EXPECT_EQ(g.of(x)(0, 1), -2.0);
}

TEST(AutodiffTest, UnreachableLeafGetsZeroGradient) {
  Tape tape;
  const Tensor x = tape.variable(Matrix(2, 2, 2));
  const Tensor y = tape.variable(Matrix(2, 2, 3));
  const auto g = backward(tape, sum(x));
  const Tensor gy = g.of(y);
  for (double v : gy.data()) EXPECT_EQ(v, 0.0);
}

TEST(AutodiffTest, NonScalarRootIsRejected) {
  Tape tape;
  const Tensor x = tape.variable(Matrix(2, 2, 4));
  EXPECT_THROW(backward(tape, tanh(x)), std::exception);
}

TEST(AutodiffTest, ShapeErrorsNameBothShapes) {
  try {
    add(Tensor::Zeros(2, 3), Tensor::Zeros(3, 2));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("2"), std::string::npos);
    EXPECT_NE(what.find("3"), std::string::npos);
  }
  EXPECT_THROW(matmul(Tensor::Zeros(2, 3), Tensor::Zeros(2, 3)), ShapeError);
  EXPECT_THROW(broadcast_add_row(Tensor::Zeros(2, 3), Tensor::Zeros(1, 2)), ShapeError);
}

TEST(AutodiffTest, LogOfNonPositiveIsDomainError) {
  EXPECT_THROW(log(Tensor::FromRows({{1.0, 0.0}})), DomainError);
  EXPECT_THROW(log(Tensor::FromRows({{-1.0}})), DomainError);
}

TEST(AutodiffTest, OverflowIsTrappedAsNonFinite) {
  EXPECT_THROW(exp(Tensor::FromRows({{1000.0}})), NonFiniteError);
}

TEST(AutodiffTest, LogsumexpIsShiftStable) {
  const Tensor a = Tensor::FromRows({{1000.0, 1000.0}, {-1000.0, -1000.0}});
  const Tensor r = logsumexp_rows(a);
  EXPECT_NEAR(r(0, 0), 1000.0 + std::log(2.0), 1e-12);
  EXPECT_NEAR(r(1, 0), -1000.0 + std::log(2.0), 1e-12);
}

// Each case maps a leaf to a scalar through one op, weighted so that every
// output entry gets a distinct cotangent.
struct OpCase {
  const char* name;
  Shape shape;
  std::function<Tensor(const Tensor&)> f;
  double scale = 1.0;
  bool positive = false;  // inputs drawn from [0.5, 0.5 + scale]
};

std::vector<OpCase> OpCases() {
  const Tensor w34 = Matrix(3, 4, 100);
  const Tensor w44 = Matrix(4, 4, 101);
  const Tensor w31 = Matrix(3, 1, 102);
  const Tensor row = Matrix(1, 4, 103);
  const Tensor col = Matrix(3, 1, 104);
  auto weighted = [w34](const Tensor& t) { return sum(mul(t, w34)); };
  return {
      {"add", {3, 4}, [=](const Tensor& x) { return weighted(add(x, w34)); }},
      {"sub", {3, 4}, [=](const Tensor& x) { return weighted(sub(w34, x)); }},
      {"mul", {3, 4}, [=](const Tensor& x) { return weighted(mul(x, x)); }},
      {"div", {3, 4}, [=](const Tensor& x) { return weighted(div(w34, x)); }, 1.0, true},
      {"matmul", {3, 4}, [=](const Tensor& x) { return sum(mul(matmul(x, w44), w34)); }},
      {"scale", {3, 4}, [=](const Tensor& x) { return weighted(scale(x, -1.7)); }},
      {"add_scalar", {3, 4}, [=](const Tensor& x) { return weighted(add_scalar(x, 3.0)); }},
      {"neg", {3, 4}, [=](const Tensor& x) { return weighted(neg(x)); }},
      {"square", {3, 4}, [=](const Tensor& x) { return weighted(square(x)); }},
      {"tanh", {3, 4}, [=](const Tensor& x) { return weighted(tanh(x)); }, 2.0},
      {"relu", {3, 4}, [=](const Tensor& x) { return weighted(relu(x)); }},
      {"exp", {3, 4}, [=](const Tensor& x) { return weighted(exp(x)); }},
      {"log", {3, 4}, [=](const Tensor& x) { return weighted(log(x)); }, 1.0, true},
      {"softplus", {3, 4}, [=](const Tensor& x) { return weighted(softplus(x)); }, 3.0},
      {"clamp", {3, 4}, [=](const Tensor& x) { return weighted(clamp(x, -0.5, 0.5)); }},
      {"mean", {3, 4}, [=](const Tensor& x) { return mean(mul(x, x)); }},
      {"row_sum", {3, 4}, [=](const Tensor& x) { return sum(mul(row_sum(x), w31)); }},
      {"logsumexp_rows", {3, 4},
       [=](const Tensor& x) { return sum(mul(logsumexp_rows(x), w31)); }, 3.0},
      {"log_softmax_rows", {3, 4}, [=](const Tensor& x) { return weighted(log_softmax_rows(x)); },
       3.0},
      {"broadcast_add_row(matrix)", {3, 4},
       [=](const Tensor& x) { return weighted(broadcast_add_row(x, row)); }},
      {"broadcast_add_row(row)", {1, 4},
       [=](const Tensor& x) { return weighted(broadcast_add_row(w34, x)); }},
      {"broadcast_mul_col(matrix)", {3, 4},
       [=](const Tensor& x) { return weighted(broadcast_mul_col(x, col)); }},
      {"broadcast_mul_col(col)", {3, 1},
       [=](const Tensor& x) { return weighted(broadcast_mul_col(w34, x)); }},
      {"slice_rows", {3, 4},
       [=](const Tensor& x) { return sum(mul(slice_rows(x, 1, 3), slice_rows(w34, 0, 2))); }},
      {"slice_cols", {3, 4},
       [=](const Tensor& x) { return sum(mul(slice_cols(x, 1, 3), slice_cols(w34, 2, 4))); }},
      {"concat_cols", {3, 1},
       [=](const Tensor& x) {
         const Tensor parts[] = {x, col, mul(x, x)};
         return sum(mul(concat_cols(parts), slice_cols(w34, 0, 3)));
       }},
      {"concat_rows", {1, 4},
       [=](const Tensor& x) {
         const Tensor parts[] = {x, row, mul(x, x)};
         return weighted(concat_rows(parts));
       }},
      {"tile_rows", {1, 4}, [=](const Tensor& x) { return weighted(tile_rows(x, 3)); }},
      {"repeat_cols", {3, 1}, [=](const Tensor& x) { return weighted(repeat_cols(x, 4)); }},
  };
}

TEST(AutodiffTest, EveryOpMatchesFiniteDifferencesAtRandomPoints) {
  for (const auto& op : OpCases()) {
    for (std::uint64_t point = 0; point < 20; ++point) {
      auto x0 = RandomVector(ShapeSize(op.shape), 1000 + point, op.scale);
      if (op.positive) {
        for (double& v : x0) v = std::abs(v) + 0.5;
      }
      Tape tape;
      const Tensor x = tape.variable(Tensor(op.shape, x0));
      const auto analytic = backward(tape, op.f(x)).of(x);
      const auto f = [&](std::span<const double> v) {
        return op.f(Tensor(op.shape, {v.begin(), v.end()})).item();
      };
      const auto result = check_gradient(f, x0, analytic.data());
      EXPECT_TRUE(result.ok()) << op.name << " at point " << point << ": max rel "
                               << result.max_relative_error;
    }
  }
}

TEST(AutodiffTest, AdjointIsLinear) {
  Tape tape;
  const Tensor x = tape.variable(Matrix(3, 4, 20));
  const Tensor w = Matrix(4, 2, 21);
  const Tensor a = sum(tanh(matmul(x, w)));
  const Tensor b = sum(exp(scale(x, 0.3)));
  const auto ga = backward(tape, a).of(x);
  const auto gb = backward(tape, b).of(x);
  const auto gab = backward(tape, add(a, b)).of(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(gab.at(i), ga.at(i) + gb.at(i), 1e-14);
  }
}

TEST(AutodiffTest, ReplayingTheTapeIsBitwiseIdentical) {
  Tape tape;
  const Tensor x = tape.variable(Matrix(5, 3, 22));
  const Tensor root = sum(log_softmax_rows(tanh(matmul(x, Matrix(3, 3, 23)))));
  const auto g1 = backward(tape, root).of(x);
  const auto g2 = backward(tape, root).of(x);
  EXPECT_EQ(std::memcmp(g1.data().data(), g2.data().data(), g1.size() * sizeof(double)), 0);
}

TEST(AutodiffTest, BackendsProduceIdenticalGradients) {
  if (!kernels::supported(kernels::Backend::kAvx2)) GTEST_SKIP() << "no AVX2 on this host";
  auto run = [](kernels::Backend backend) {
    kernels::ScopedBackend scoped(backend);
    Tape tape;
    const Tensor x = tape.variable(Matrix(37, 13, 24));
    const Tensor w = tape.variable(Matrix(13, 21, 25));
    const Tensor b = tape.variable(Matrix(1, 21, 26));
    const Tensor h = tanh(broadcast_add_row(matmul(x, w), b));
    const Tensor root = sum(matmul(h, Matrix(21, 5, 27)));
    const auto g = backward(tape, root);
    std::vector<double> out;
    for (const Tensor* t : {&x, &w, &b}) {
      const auto gi = g.of(*t);
      out.insert(out.end(), gi.data().begin(), gi.data().end());
    }
    out.push_back(root.item());
    return out;
  };
  const auto s = run(kernels::Backend::kScalar);
  const auto v = run(kernels::Backend::kAvx2);
  ASSERT_EQ(s.size(), v.size());
  EXPECT_EQ(std::memcmp(s.data(), v.data(), s.size() * sizeof(double)), 0);
}

TEST(AutodiffTest, ConstantsStayOffTheTape) {
  Tape tape;
  const Tensor c = exp(Matrix(2, 2, 28));
  EXPECT_FALSE(c.requires_grad());
  EXPECT_EQ(tape.size(), 0u);
  const Tensor x = tape.variable(Matrix(2, 2, 29));
  const Tensor y = mul(x, c);
  EXPECT_TRUE(y.requires_grad());
  EXPECT_FALSE(y.detach().requires_grad());
}

TEST(AutodiffTest, TapeOrderIsTopological) {
  Tape tape;
  const Tensor x = tape.variable(Matrix(2, 2, 30));
  const Tensor y = sum(mul(tanh(x), exp(x)));
  for (NodeId id = 0; id < tape.size(); ++id) {
    for (NodeId parent : tape.node(id).parents) EXPECT_LT(parent, id);
  }
  EXPECT_EQ(*y.node(), tape.size() - 1);
}

TEST(AutodiffTest, GradCheckUtilityFlagsWrongGradients) {
  const std::vector<double> x{0.3, -1.2};
  const auto f = [](std::span<const double> v) { return v[0] * v[0] + std::sin(v[1]); };
  const std::vector<double> good{0.6, std::cos(-1.2)};
  const std::vector<double> bad{0.6, std::cos(-1.2) * 1.01};
  EXPECT_TRUE(check_gradient(f, x, good).ok());
  const auto r = check_gradient(f, x, bad);
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(r.failures, 1u);
  EXPECT_EQ(r.worst.front().index, 1u);
}

TEST(AutodiffTest, GradCheckHonorsAbsoluteFloor) {
  const std::vector<double> a{1e-9}, n{3e-9};
  EXPECT_TRUE(compare_gradients(a, n).ok());
  const std::vector<double> a2{1.0}, n2{1.0 + 2e-4};
  EXPECT_FALSE(compare_gradients(a2, n2).ok());
}

}  // namespace
}  // namespace mmvae
