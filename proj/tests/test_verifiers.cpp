#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "test_util.hpp"
#include "vrec/autodiff_check.hpp"
#include "vrec/ops.hpp"

namespace vrec {
namespace {

VerifierBankConfig bank_config(std::vector<int> classes, int d = 4, bool router = true) {
  VerifierBankConfig c;
  c.d_model = d;
  for (std::size_t i = 0; i < classes.size(); ++i) c.verifiers.push_back({"v" + std::to_string(i), classes[i]});
  c.use_router = router;
  c.seed = 3;
  return c;
}

// Overwrites the bias so the verifier's logits for input r equal `target`.
void force_logits(Verifier& v, const std::vector<double>& r, const std::vector<double>& target) {
  auto b = v.last.bias.mutable_data();
  for (std::size_t j = 0; j < target.size(); ++j) {
    double dot = 0.0;
    for (std::size_t c = 0; c < r.size(); ++c) dot += r[c] * v.last.weight.at(c, j);
    b[j] = target[j] - dot;
  }
}

TEST(Router, ZeroLogitsGiveUniformWeights) {
  VerifierBank bank(bank_config({3, 3, 3}));
  for (auto& v : bank.named_parameters())
    if (v.name.rfind("router", 0) == 0) std::fill(v.value.mutable_data().begin(), v.value.mutable_data().end(), 0.0);
  const auto w = route(bank, Tensor::vector({1, 2, 3, 4}));
  for (double x : w.data()) EXPECT_DOUBLE_EQ(x, 1.0 / 3.0);
}

TEST(Router, SingleVerifierWeightIsOne) {
  VerifierBank bank(bank_config({5}));
  EXPECT_DOUBLE_EQ(route(bank, Tensor::vector({3, -1, 2, 9})).item(), 1.0);
}

TEST(Router, WeightsSumToOne) {
  VerifierBank bank(bank_config({2, 3, 4, 5}));
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    double total = 0.0;
    for (double x : route(bank, testing::random_tensor({4}, rng, 3.0)).to_vector()) {
      EXPECT_GT(x, 0.0);
      total += x;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Predict, ZeroWeightsGiveUniform) {
  VerifierBank bank(bank_config({4}));
  auto& v = bank.verifier(0);
  std::fill(v.last.weight.mutable_data().begin(), v.last.weight.mutable_data().end(), 0.0);
  for (double p : predict(v, Tensor::vector({1, 2, 3, 4})).to_vector()) EXPECT_DOUBLE_EQ(p, 0.25);
}

TEST(Predict, HandSetTwoByTwo) {
  VerifierBank bank(bank_config({2}, 2));
  auto& v = bank.verifier(0);
  auto w = v.last.weight.mutable_data();
  w[0] = 1.0, w[1] = 2.0, w[2] = 3.0, w[3] = 4.0;  // rows are input dims
  const auto p = predict(v, Tensor::vector({1, 0}));
  // softmax([1, 2]) evaluated by hand
  EXPECT_NEAR(p.at(0), 0.2689414213699951, 1e-15);
  EXPECT_NEAR(p.at(1), 0.7310585786300049, 1e-15);
}

TEST(Predict, MlpVerifierKeepsPrototypesInReasoningSpace) {
  auto cfg = bank_config({3}, 6);
  cfg.hidden_layers = 2;
  cfg.hidden_width = 16;
  VerifierBank bank(cfg);
  const auto& v = bank.verifier(0);
  ASSERT_EQ(v.hidden.size(), 2u);
  EXPECT_EQ(v.last.weight.shape(), (Shape{6, 3}));
  double total = 0.0;
  for (double p : predict(v, Tensor::vector({1, 2, 3, 4, 5, 6})).to_vector()) total += p;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Entropy, ReferenceValues) {
  EXPECT_NEAR(entropy(std::vector<double>(20, 0.05)), 2.995732273553991, 1e-12);
  EXPECT_EQ(entropy(std::vector<double>{0, 1, 0}), 0.0);
  EXPECT_NEAR(entropy(std::vector<double>{0.5, 0.5}), 0.6931471805599453, 1e-15);
}

TEST(Entropy, BoundsOnRandomDistributions) {
  Rng rng(2);
  for (std::size_t d : {2u, 4u, 20u}) {
    for (int t = 0; t < 1000; ++t) {
      const auto p = testing::random_distribution(d, rng);
      const double h = entropy(p);
      EXPECT_GE(h, 0.0);
      EXPECT_LE(h, std::log(static_cast<double>(d)) + 1e-12);
    }
  }
}

TEST(Entropy, TensorFormMatchesDistributionForm) {
  const auto logits = Tensor::vector({0.5, -1.0, 2.0, 0.0});
  EXPECT_NEAR(ops::entropy_from_logits(logits).item(), entropy(ops::softmax(logits).data()), 1e-14);
}

TEST(Guidance, PicksArgmaxColumnExactly) {
  VerifierBank bank(bank_config({3}));
  const auto& v = bank.verifier(0);
  const auto g = guidance(v, std::vector<double>{0.2, 0.7, 0.1});
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(g.at(c), v.last.weight.at(c, 1));
}

TEST(Guidance, TiesGoToLowestIndex) {
  VerifierBank bank(bank_config({2}));
  const auto& v = bank.verifier(0);
  const auto g = guidance(v, std::vector<double>{0.5, 0.5});
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(g.at(c), v.last.weight.at(c, 0));
  EXPECT_EQ(argmax_class(std::vector<double>{0.1, 0.45, 0.45}), 1);
}

TEST(Confidence, ClampedInverseEntropy) {
  EXPECT_DOUBLE_EQ(confidence(2.0), 0.5);
  EXPECT_DOUBLE_EQ(confidence(1.0), 1.0);
  EXPECT_DOUBLE_EQ(confidence(0.0), 1.0);
  EXPECT_DOUBLE_EQ(confidence(0.3), 1.0);
  double prev = 1.0;
  for (double f = 0.0; f < 10.0; f += 0.01) {
    const double c = confidence(f);
    EXPECT_GT(c, 0.0);
    EXPECT_LE(c, prev);
    prev = c;
  }
}

// Logits of the form [s, 0, ..., 0] over d classes with entropy exactly `target`.
std::vector<double> logits_with_entropy(std::size_t d, double target) {
  double lo = 0.0, hi = 50.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    std::vector<double> z(d, 0.0);
    z[0] = mid;
    (oracle::entropy(oracle::softmax(z)) > target ? lo : hi) = mid;
  }
  std::vector<double> z(d, 0.0);
  z[0] = 0.5 * (lo + hi);
  return z;
}

TEST(Adjust, FullConfidenceReplacesWithPrototype) {
  VerifierBank bank(bank_config({3}, 4, false));
  const std::vector<double> r{0.3, -0.2, 0.9, 0.1};
  force_logits(bank.verifier(0), r, {0.0, 30.0, 0.0});
  const auto verdict = verify_and_adjust(bank, Tensor::vector(r));
  EXPECT_DOUBLE_EQ(verdict.verifiers[0].confidence.item(), 1.0);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(verdict.adjusted.at(c), bank.verifier(0).last.weight.at(c, 1));
}

TEST(Adjust, HalfConfidenceBlendsEvenly) {
  VerifierBank bank(bank_config({8}, 4, false));
  const std::vector<double> r{0.3, -0.2, 0.9, 0.1};
  force_logits(bank.verifier(0), r, logits_with_entropy(8, 2.0));
  const auto verdict = verify_and_adjust(bank, Tensor::vector(r));
  EXPECT_NEAR(verdict.verifiers[0].entropy.item(), 2.0, 1e-12);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_NEAR(verdict.adjusted.at(c), 0.5 * r[c] + 0.5 * bank.verifier(0).last.weight.at(c, 0), 1e-12);
  }
}

TEST(Adjust, TwoVerifiersAverage) {
  // c1 = 1 and c2 = 0.5: r* = (g1 + 0.5 r + 0.5 g2) / 2
  VerifierBank bank(bank_config({3, 8}, 4, false));
  const std::vector<double> r{0.3, -0.2, 0.9, 0.1};
  force_logits(bank.verifier(0), r, {0.0, 0.0, 25.0});
  force_logits(bank.verifier(1), r, logits_with_entropy(8, 2.0));
  const auto verdict = verify_and_adjust(bank, Tensor::vector(r));
  for (std::size_t c = 0; c < 4; ++c) {
    const double g1 = bank.verifier(0).last.weight.at(c, 2), g2 = bank.verifier(1).last.weight.at(c, 0);
    EXPECT_NEAR(verdict.adjusted.at(c), 0.5 * (g1 + 0.5 * r[c] + 0.5 * g2), 1e-12);
  }
}

TEST(Adjust, MatchesReferenceOnRandomBanks) {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    auto cfg = bank_config({2 + static_cast<int>(rng.below(6)), 2 + static_cast<int>(rng.below(20))}, 6,
                           rng.bernoulli(0.5));
    cfg.seed = static_cast<std::uint64_t>(t);
    VerifierBank bank(cfg);
    std::vector<double> r(6);
    for (auto& x : r) x = rng.normal(0.0, 2.0);
    const auto verdict = verify_and_adjust(bank, Tensor::vector(r));
    const auto ref = oracle::adjust(bank, r);
    for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(verdict.adjusted.at(c), ref.adjusted[c], 1e-12);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(verdict.verifiers[i].predicted_class, ref.classes[i]);
  }
}

TEST(Adjust, NormBoundedByInputsAndPrototypes) {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    auto cfg = bank_config({4, 6}, 5);
    cfg.seed = static_cast<std::uint64_t>(t);
    VerifierBank bank(cfg);
    const auto r = testing::random_tensor({5}, rng, 3.0);
    const auto verdict = verify_and_adjust(bank, r);
    auto norm = [](std::span<const double> v) {
      double s = 0;
      for (double x : v) s += x * x;
      return std::sqrt(s);
    };
    double bound = norm(r.data());
    for (const auto& o : verdict.verifiers) bound = std::max(bound, norm(o.guidance.data()));
    EXPECT_LE(norm(verdict.adjusted.data()), bound + 1e-12);
  }
}

TEST(Adjust, DifferentiableEndToEnd) {
  auto cfg = bank_config({3, 4}, 5);
  cfg.hidden_layers = 1;
  VerifierBank bank(cfg);
  Rng rng(6);
  auto r = testing::random_tensor({5}, rng);
  auto params = bank.parameters();
  params.push_back(r);
  auto loss = [&] { return ops::sum(ops::mul(verify_and_adjust(bank, r).adjusted, Tensor::vector({1, -2, 0.5, 3, 1}))); };
  EXPECT_LT(grad_check(loss, params), 1e-5);
}

}  // namespace
}  // namespace vrec
