#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "vrec/autodiff_check.hpp"
#include "vrec/ops.hpp"
#include "vrec/optim.hpp"

namespace vrec {
namespace {

using testing::random_tensor;

TEST(Ops, SoftmaxOfEqualLogitsIsUniform) {
  const auto p = ops::softmax(Tensor::vector({0, 0, 0}));
  for (double v : p.data()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Ops, IdentityMatmul) {
  Rng rng(1);
  const auto a = random_tensor({3, 4}, rng);
  const auto eye = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const auto out = ops::matmul(eye, a);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(out.data()[i], a.data()[i]);
}

TEST(Ops, SoftmaxRowsAreDistributions) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto logits = random_tensor({4, 7}, rng, 5.0);
    const auto p = ops::softmax(logits);
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 7; ++c) {
        EXPECT_GT(p.at(r, c), 0.0);
        EXPECT_LT(p.at(r, c), 1.0);
        total += p.at(r, c);
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Ops, ShapeMismatchNamesOperatorAndShapes) {
  try {
    ops::matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL() << "expected a shape error";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2,3]"), std::string::npos) << msg;
  }
  EXPECT_THROW(ops::add(Tensor::zeros({2}), Tensor::zeros({3})), std::invalid_argument);
}

TEST(Ops, ForwardIsBitReproducible) {
  Rng rng(3);
  const auto x = random_tensor({5, 8}, rng);
  const auto g = random_tensor({8}, rng);
  const auto b = random_tensor({8}, rng);
  const auto a = ops::gelu(ops::layer_norm(x, g, b));
  const auto c = ops::gelu(ops::layer_norm(x, g, b));
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a.data()[i], c.data()[i]);
}

TEST(Ops, CausalSoftmaxIsExactlyZeroAboveDiagonal) {
  Rng rng(4);
  const auto p = ops::causal_softmax(random_tensor({4, 4}, rng));
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = r + 1; c < 4; ++c) EXPECT_EQ(p.at(r, c), 0.0);
}

TEST(Autodiff, SumGivesOnes) {
  auto x = Tensor::vector({1, -2, 3, 4}).set_requires_grad();
  ops::sum(x).backward();
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Autodiff, HalfSquaredNormGivesInput) {
  auto x = Tensor::vector({0.5, -1.5, 2.0}).set_requires_grad();
  ops::scale(ops::sum(ops::mul(x, x)), 0.5).backward();
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(x.grad()[i], x.data()[i]);
}

TEST(Autodiff, RepeatedBackwardAccumulates) {
  auto x = Tensor::vector({1, 2}).set_requires_grad();
  const auto loss = ops::sum(x);
  loss.backward();
  loss.backward();
  EXPECT_EQ(x.grad()[0], 2.0);
  x.zero_grad();
  loss.backward();
  EXPECT_EQ(x.grad()[1], 1.0);
}

TEST(Autodiff, NonScalarLossFails) {
  auto x = Tensor::vector({1, 2}).set_requires_grad();
  EXPECT_THROW(ops::scale(x, 2.0).backward(), std::invalid_argument);
}

TEST(Autodiff, NoGradGuardRecordsNoGraph) {
  auto x = Tensor::vector({1, 2}).set_requires_grad();
  NoGradGuard guard;
  EXPECT_FALSE(ops::sum(x).requires_grad());
}

TEST(GradCheck, FlagsAWrongGradient) {
  Rng rng(1);
  auto x = random_tensor({5}, rng);
  // The detached factor hides half of d(x^2)/dx.
  EXPECT_NEAR(grad_check([&] { return ops::sum(ops::mul(x, x.detach())); }, {x}), 0.5, 1e-6);
}

TEST(GradCheck, QuadraticFormIsExact) {
  Rng rng(5);
  auto a = random_tensor({4, 4}, rng);
  auto x = random_tensor({4}, rng);
  const double err = grad_check([&] { return ops::sum(ops::mul(x, ops::matmul(a, x))); }, {a, x});
  EXPECT_LT(err, 1e-8);
}

TEST(GradCheck, SoftmaxCrossEntropyMatchesAnalyticGradient) {
  auto logits = Tensor::vector({0.3, -1.2, 2.0, 0.1}).set_requires_grad();
  const std::size_t target = 2;
  const auto loss = ops::scale(ops::element(ops::log_softmax(logits), target), -1.0);
  loss.backward();
  const auto p = ops::softmax(logits.detach());
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(logits.grad()[i], p.at(i) - (i == target ? 1.0 : 0.0), 1e-15);
  }
}

TEST(GradCheck, TwoLayerNet) {
  Rng rng(6);
  auto x = random_tensor({3, 5}, rng);
  auto w1 = random_tensor({5, 6}, rng, 0.5);
  auto b1 = random_tensor({6}, rng, 0.1);
  auto w2 = random_tensor({6, 2}, rng, 0.5);
  auto loss = [&] { return ops::mean(ops::matmul(ops::gelu(ops::add_bias(ops::matmul(x, w1), b1)), w2)); };
  EXPECT_LT(grad_check(loss, {w1, b1, w2}), 1e-5);
}

TEST(GradCheck, ThreeLayerNetWidth16) {
  Rng rng(7);
  auto x = random_tensor({4, 16}, rng);
  auto w1 = random_tensor({16, 16}, rng, 0.3);
  auto w2 = random_tensor({16, 16}, rng, 0.3);
  auto w3 = random_tensor({16, 5}, rng, 0.3);
  auto g = random_tensor({16}, rng);
  auto b = random_tensor({16}, rng);
  auto loss = [&] {
    auto h = ops::gelu(ops::matmul(x, w1));
    h = ops::layer_norm(ops::gelu(ops::matmul(h, w2)), g, b);
    return ops::mean(ops::log_softmax(ops::matmul(h, w3)));
  };
  EXPECT_LT(grad_check(loss, {w1, w2, w3, g, b}), 1e-5);
}

TEST(GradCheck, EntropyAndIndexingOps) {
  Rng rng(8);
  auto a = random_tensor({3, 4}, rng);
  auto loss = [&] {
    auto e = ops::entropy_from_logits(ops::row(a, 1));
    auto c = ops::sum(ops::column(a, 2));
    auto r = ops::reciprocal(ops::add_scalar(ops::mul(e, e), 1.0));
    return ops::add(ops::add(r, c), ops::sum(ops::relu(ops::concat_rows({ops::row(a, 0), ops::row(a, 2)}))));
  };
  EXPECT_LT(grad_check(loss, {a}), 1e-5);
}

TEST(Rng, SameSeedAndStreamReproduce) {
  Rng a(11, 3), b(11, 3), c(11, 4);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformAndNormalMoments) {
  Rng rng(12);
  double su = 0, sn = 0, sn2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    su += rng.uniform();
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.01);
}

TEST(Adam, ZeroLearningRateLeavesParametersBitIdentical) {
  Rng rng(13);
  auto w = random_tensor({3, 3}, rng);
  const auto before = w.to_vector();
  Adam opt({w}, {.lr = 0.0, .clip_norm = 1.0});
  for (int i = 0; i < 3; ++i) {
    opt.zero_grad();
    ops::sum(ops::mul(w, w)).backward();
    opt.step();
  }
  EXPECT_EQ(w.to_vector(), before);
}

TEST(Adam, MinimizesQuadratic) {
  auto w = Tensor::vector({3.0, -2.0}).set_requires_grad();
  Adam opt({w}, {.lr = 0.1});
  for (int i = 0; i < 500; ++i) {
    opt.zero_grad();
    ops::sum(ops::mul(w, w)).backward();
    opt.step();
  }
  EXPECT_LT(std::abs(w.at(0)) + std::abs(w.at(1)), 1e-2);
}

}  // namespace
}  // namespace vrec
