#pragma once

// Top-K metrics for a single held-out target and the batch evaluator.

#include <span>
#include <string>
#include <vector>

#include "vrec/backbone.hpp"
#include "vrec/datasets.hpp"
#include "vrec/verifiers.hpp"

namespace vrec {

double recall_at_k(std::span<const int> ranked, int target, std::size_t k);
// 1 / log2(rank + 1) for a 1-based rank <= K, else 0.
double ndcg_at_k(std::span<const int> ranked, int target, std::size_t k);

struct MetricsReport {
  std::vector<int> ks;
  std::vector<double> recall;  // aligned with ks
  std::vector<double> ndcg;
  std::size_t count = 0;
  std::string fingerprint;
  double wall_seconds = 0.0;

  double recall_at(int k) const;
  double ndcg_at(int k) const;
};

struct EvalOptions {
  std::vector<int> ks{5, 10};
  unsigned threads = 0;  // 0 = hardware concurrency
  // When set, receives the top-max(ks) ranking of every sample.
  std::vector<std::vector<int>>* rankings = nullptr;
};

MetricsReport evaluate(const Backbone& backbone, const VerifierBank* bank,
                       const std::vector<Sample>& samples, int m, const EvalOptions& options = {});

// Metrics recomputed from stored rankings (used by the CLI and for audits).
MetricsReport metrics_from_rankings(const std::vector<std::vector<int>>& rankings,
                                    const std::vector<Sample>& samples, const std::vector<int>& ks);

std::string parameter_fingerprint(const Backbone& backbone, const VerifierBank* bank, int m);

}  // namespace vrec
