#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "vrec/evaluation.hpp"

namespace vrec {
namespace {

// 20 (rank, K) cases; rank 0 means the target is absent from the top 10.
struct Case {
  int rank;  // 0 = absent
  std::size_t k;
  double recall;
  double ndcg;
};

const Case kTable[] = {
    {1, 1, 1, 1.0},  {1, 3, 1, 1.0},  {1, 5, 1, 1.0},  {1, 10, 1, 1.0},
    {2, 1, 0, 0.0},  {2, 3, 1, 0.6309297535714575}, {2, 5, 1, 0.6309297535714575}, {2, 10, 1, 0.6309297535714575},
    {3, 1, 0, 0.0},  {3, 3, 1, 0.5},  {3, 5, 1, 0.5},  {3, 10, 1, 0.5},
    {4, 3, 0, 0.0},  {4, 5, 1, 0.43067655807339306}, {5, 5, 1, 0.38685280723454163}, {5, 3, 0, 0.0},
    {0, 1, 0, 0.0},  {0, 5, 0, 0.0},  {0, 10, 0, 0.0}, {10, 10, 1, 0.2890648263178879},
};

std::vector<int> ranking_with_target_at(int rank, int target) {
  std::vector<int> r;
  for (int i = 100; r.size() < 10; ++i) r.push_back(i);
  if (rank > 0) r[static_cast<std::size_t>(rank - 1)] = target;
  return r;
}

TEST(Metrics, EnumeratedTable) {
  for (const auto& c : kTable) {
    const auto r = ranking_with_target_at(c.rank, 7);
    // Brute-force recomputation straight from the definition.
    double rec = 0, dcg = 0;
    for (std::size_t i = 0; i < c.k && i < r.size(); ++i)
      if (r[i] == 7) {
        rec = 1;
        dcg = 1.0 / std::log2(static_cast<double>(i) + 2.0);
      }
    EXPECT_EQ(recall_at_k(r, 7, c.k), c.recall) << c.rank << "@" << c.k;
    EXPECT_EQ(recall_at_k(r, 7, c.k), rec);
    EXPECT_NEAR(ndcg_at_k(r, 7, c.k), c.ndcg, 1e-15) << c.rank << "@" << c.k;
    EXPECT_EQ(ndcg_at_k(r, 7, c.k), dcg);
  }
  EXPECT_EQ(ndcg_at_k(ranking_with_target_at(3, 7), 7, 5), 0.5);
}

TEST(Metrics, ShortRankingAndZeroK) {
  const std::vector<int> r{4, 2};
  EXPECT_EQ(recall_at_k(r, 2, 10), 1.0);
  EXPECT_EQ(recall_at_k(r, 9, 10), 0.0);
  EXPECT_EQ(recall_at_k(r, 4, 0), 0.0);
}

TEST(Metrics, BatchMeanFromRankings) {
  std::vector<Sample> samples(4);
  std::vector<std::vector<int>> rankings;
  for (int i = 0; i < 4; ++i) {
    samples[static_cast<std::size_t>(i)].target = i;
    rankings.push_back({50, 51, 52, 53, 54});
  }
  rankings[2][0] = 2;
  const auto m = metrics_from_rankings(rankings, samples, {1, 5});
  EXPECT_EQ(m.count, 4u);
  EXPECT_EQ(m.recall_at(1), 0.25);
  EXPECT_EQ(m.recall_at(5), 0.25);
  EXPECT_EQ(m.ndcg_at(5), 0.25);
  EXPECT_THROW(m.recall_at(3), std::exception);
}

class EvaluateTest : public ::testing::Test {
 protected:
  testing::TinyComposite t = testing::TinyComposite::make();
  std::vector<Sample> samples;
  void SetUp() override {
    for (int i = 0; i < 40; ++i) samples.push_back(Sample{i, {i % 10, (i * 3) % 10, (i * 7) % 10}, (i * 5) % 10, 0});
  }
};

TEST_F(EvaluateTest, DeterministicAcrossThreadCounts) {
  EvalOptions one, many;
  one.threads = 1;
  many.threads = 4;
  const auto a = evaluate(t.backbone, &t.bank, samples, 2, one);
  const auto b = evaluate(t.backbone, &t.bank, samples, 2, many);
  EXPECT_EQ(a.recall, b.recall);
  EXPECT_EQ(a.ndcg, b.ndcg);
  EXPECT_EQ(a.fingerprint, b.fingerprint);
  EXPECT_EQ(a.count, 40u);
}

TEST_F(EvaluateTest, AgreesWithRecomputationFromRankings) {
  std::vector<std::vector<int>> rankings;
  EvalOptions o;
  o.rankings = &rankings;
  const auto a = evaluate(t.backbone, &t.bank, samples, 2, o);
  ASSERT_EQ(rankings.size(), samples.size());
  EXPECT_EQ(rankings[0].size(), 10u);
  const auto b = metrics_from_rankings(rankings, samples, o.ks);
  EXPECT_EQ(a.recall, b.recall);
  EXPECT_EQ(a.ndcg, b.ndcg);
  // Each ranking is the reasoning pipeline's own top-K.
  for (std::size_t i = 0; i < samples.size(); i += 7) {
    const auto res = run_reasoning(t.backbone, &t.bank, samples[i].history, 2);
    EXPECT_EQ(rankings[i], recommend(t.backbone, res, 10));
  }
}

TEST_F(EvaluateTest, PerfectRankerScoresOne) {
  std::vector<std::vector<int>> rankings;
  for (const auto& s : samples) rankings.push_back({s.target, 99, 98});
  const auto m = metrics_from_rankings(rankings, samples, {1, 5});
  EXPECT_EQ(m.recall_at(1), 1.0);
  EXPECT_EQ(m.ndcg_at(5), 1.0);
}

TEST_F(EvaluateTest, FingerprintTracksParameters) {
  const auto before = parameter_fingerprint(t.backbone, &t.bank, 2);
  EXPECT_NE(before, parameter_fingerprint(t.backbone, &t.bank, 3));
  EXPECT_NE(before, parameter_fingerprint(t.backbone, nullptr, 2));
  t.bank.verifier(0).last.bias.mutable_data()[0] += 1e-9;
  EXPECT_NE(before, parameter_fingerprint(t.backbone, &t.bank, 2));
}

}  // namespace
}  // namespace vrec
