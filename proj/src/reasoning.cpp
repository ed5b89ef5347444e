#include "vrec/reasoning.hpp"

#include <array>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <Eigen/Dense>

#include "json.hpp"

#include "vrec/ops.hpp"

namespace vrec {

ReasoningResult run_reasoning(const Backbone& backbone, const VerifierBank* bank,
                              std::span<const int> history, int m) {
  if (m < 0) throw std::invalid_argument("run_reasoning: m must be non-negative");
  if (history.empty()) throw std::invalid_argument("run_reasoning: empty history");
  const std::size_t L = history.size();
  const std::size_t total = L + static_cast<std::size_t>(m);
  if (total > static_cast<std::size_t>(backbone.config().max_positions)) {
    throw std::invalid_argument("run_reasoning: history " + std::to_string(L) + " + m " +
                                std::to_string(m) + " exceeds max_positions " +
                                std::to_string(backbone.config().max_positions));
  }
  std::vector<int> tokens(history.begin(), history.end());
  std::vector<Injection> latents;
  ReasoningResult result;
  for (int t = 0; t < m; ++t) {
    const Tensor hidden = backbone.encode(tokens, latents);
    ReasoningStep step;
    step.raw = ops::row(hidden, tokens.size() - 1);
    if (bank) {
      step.verdict = verify_and_adjust(*bank, step.raw);
      step.adjusted = step.verdict->adjusted;
    } else {
      step.adjusted = step.raw;
    }
    latents.push_back({tokens.size(), step.adjusted});
    tokens.push_back(backbone.config().latent_token());
    result.trace.steps.push_back(std::move(step));
  }
  result.hidden = backbone.encode(tokens, latents);
  result.read_position = tokens.size() - 1;
  return result;
}

Tensor recommendation_scores(const Backbone& backbone, const ReasoningResult& result) {
  return backbone.next_item_scores(result.hidden, result.read_position);
}

std::vector<int> recommend(const Backbone& backbone, const ReasoningResult& result, std::size_t k) {
  return rank_items(recommendation_scores(backbone, result).data(), k);
}

int recommend_greedy(const Backbone& backbone, const ReasoningResult& result) {
  return argmax_item(recommendation_scores(backbone, result).data());
}

double mean_pairwise_cosine(const std::vector<std::vector<double>>& vectors) {
  if (vectors.size() < 2) throw std::invalid_argument("homogeneity: need at least two vectors");
  const std::size_t n = vectors.size();
  // Normalize once; sum of all normalized vectors gives the pair sum in O(n d).
  std::vector<double> total(vectors[0].size(), 0.0);
  double self = 0.0;
  for (const auto& v : vectors) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    for (std::size_t j = 0; j < v.size(); ++j) total[j] += v[j] / norm;
    self += 1.0;
  }
  double sq = 0.0;
  for (double x : total) sq += x * x;
  return (sq - self) / static_cast<double>(n * (n - 1));
}

HomogeneityReport homogeneity(std::span<const ReasoningTrace> traces, std::size_t step) {
  if (traces.size() < 2) throw std::invalid_argument("homogeneity: need at least two traces");
  if (step == 0) throw std::invalid_argument("homogeneity: steps are 1-based");
  std::vector<std::vector<double>> vecs;
  for (const auto& tr : traces) {
    if (step > tr.m()) throw std::invalid_argument("homogeneity: trace shorter than requested step");
    vecs.push_back(tr.steps[step - 1].adjusted.to_vector());
  }
  HomogeneityReport report;
  report.mean_cosine = mean_pairwise_cosine(vecs);

  const auto n = static_cast<Eigen::Index>(vecs.size());
  const auto d = static_cast<Eigen::Index>(vecs[0].size());
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = vecs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  X.rowwise() -= X.colwise().mean();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(X.transpose() * X);
  // Eigenvalues ascend; the last two columns are the leading components.
  for (Eigen::Index i = 0; i < n; ++i) {
    std::array<double, 2> p{0.0, 0.0};
    for (int c = 0; c < 2 && c < d; ++c) {
      auto axis = eig.eigenvectors().col(d - 1 - c);
      // Sign convention: largest-magnitude loading positive.
      Eigen::Index idx;
      axis.cwiseAbs().maxCoeff(&idx);
      const double sign = axis(idx) < 0 ? -1.0 : 1.0;
      p[static_cast<std::size_t>(c)] = sign * X.row(i).dot(axis);
    }
    report.projection.push_back(p);
  }
  return report;
}

void write_trace_jsonl(std::ostream& out, std::size_t sample_index, int target,
                       const ReasoningTrace& trace, const TraceExportOptions& options) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& step : trace.steps) {
    nlohmann::json s;
    if (step.verdict) {
      s["router_weights"] = step.verdict->weights.to_vector();
      nlohmann::json entropies = nlohmann::json::array(), classes = nlohmann::json::array();
      for (const auto& v : step.verdict->verifiers) {
        entropies.push_back(v.entropy.item());
        classes.push_back(v.predicted_class);
      }
      s["entropy"] = entropies;
      s["class"] = classes;
    }
    if (options.include_vectors) {
      s["raw"] = step.raw.to_vector();
      s["adjusted"] = step.adjusted.to_vector();
    }
    steps.push_back(std::move(s));
  }
  out << nlohmann::json{{"sample", sample_index}, {"target", target}, {"steps", steps}}.dump()
      << '\n';
}

}  // namespace vrec
