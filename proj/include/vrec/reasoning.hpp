#pragma once

// Interleaved reason-verify loop. History tokens sit at positions 0..L-1 and
// the adjusted latent steps at L..L+m-1. Step t re-encodes the history plus
// the t-1 adjusted steps so far and reads r_t from the last position; the
// recommendation is read from position L+m-1 (L-1 when m = 0).

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "vrec/backbone.hpp"
#include "vrec/verifiers.hpp"

namespace vrec {

struct ReasoningStep {
  Tensor raw;       // r_t
  Tensor adjusted;  // r*_t (== raw when no bank is attached)
  std::optional<StepVerdict> verdict;
};

struct ReasoningTrace {
  std::vector<ReasoningStep> steps;
  std::size_t m() const { return steps.size(); }
};

struct ReasoningResult {
  ReasoningTrace trace;
  Tensor hidden;              // final encoding [L+m, d_model]
  std::size_t read_position;  // where the recommendation is read
};

ReasoningResult run_reasoning(const Backbone& backbone, const VerifierBank* bank,
                              std::span<const int> history, int m);

// Logits over items at the read position.
Tensor recommendation_scores(const Backbone& backbone, const ReasoningResult& result);
std::vector<int> recommend(const Backbone& backbone, const ReasoningResult& result, std::size_t k);
int recommend_greedy(const Backbone& backbone, const ReasoningResult& result);

struct HomogeneityReport {
  double mean_cosine = 0.0;
  std::vector<std::array<double, 2>> projection;  // PCA, one row per trace
};

// Mean pairwise cosine similarity of r*_t (1-based step t) across traces.
HomogeneityReport homogeneity(std::span<const ReasoningTrace> traces, std::size_t step);
double mean_pairwise_cosine(const std::vector<std::vector<double>>& vectors);

struct TraceExportOptions {
  bool include_vectors = false;
};

// One JSON object per line: step entropies, router weights, chosen classes,
// optionally raw and adjusted vectors.
void write_trace_jsonl(std::ostream& out, std::size_t sample_index, int target,
                       const ReasoningTrace& trace, const TraceExportOptions& options);

}  // namespace vrec
