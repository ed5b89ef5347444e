#include "vrec/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "vrec/reasoning.hpp"
#include "vrec/rng.hpp"

namespace vrec {
namespace {

std::size_t rank_of(std::span<const int> ranked, int target, std::size_t k) {
  const std::size_t limit = std::min(k, ranked.size());
  for (std::size_t i = 0; i < limit; ++i)
    if (ranked[i] == target) return i + 1;
  return 0;
}

}  // namespace

double recall_at_k(std::span<const int> ranked, int target, std::size_t k) {
  return rank_of(ranked, target, k) > 0 ? 1.0 : 0.0;
}

double ndcg_at_k(std::span<const int> ranked, int target, std::size_t k) {
  const auto rank = rank_of(ranked, target, k);
  return rank > 0 ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

double MetricsReport::recall_at(int k) const {
  for (std::size_t i = 0; i < ks.size(); ++i)
    if (ks[i] == k) return recall[i];
  throw std::out_of_range("MetricsReport: K=" + std::to_string(k) + " not evaluated");
}

double MetricsReport::ndcg_at(int k) const {
  for (std::size_t i = 0; i < ks.size(); ++i)
    if (ks[i] == k) return ndcg[i];
  throw std::out_of_range("MetricsReport: K=" + std::to_string(k) + " not evaluated");
}

MetricsReport metrics_from_rankings(const std::vector<std::vector<int>>& rankings,
                                    const std::vector<Sample>& samples,
                                    const std::vector<int>& ks) {
  if (rankings.size() != samples.size()) {
    throw std::invalid_argument("metrics_from_rankings: ranking count differs from sample count");
  }
  MetricsReport report;
  report.ks = ks;
  report.recall.assign(ks.size(), 0.0);
  report.ndcg.assign(ks.size(), 0.0);
  report.count = samples.size();
  for (std::size_t s = 0; s < samples.size(); ++s) {
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const auto k = static_cast<std::size_t>(ks[i]);
      report.recall[i] += recall_at_k(rankings[s], samples[s].target, k);
      report.ndcg[i] += ndcg_at_k(rankings[s], samples[s].target, k);
    }
  }
  if (!samples.empty()) {
    for (auto& v : report.recall) v /= static_cast<double>(samples.size());
    for (auto& v : report.ndcg) v /= static_cast<double>(samples.size());
  }
  return report;
}

std::string parameter_fingerprint(const Backbone& backbone, const VerifierBank* bank, int m) {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(m));
  auto absorb = [&h](const std::vector<NamedTensor>& params) {
    for (const auto& p : params) {
      for (double v : p.value.data()) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        h = mix64(h ^ bits);
      }
    }
  };
  absorb(backbone.named_parameters());
  if (bank) absorb(bank->named_parameters());
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

MetricsReport evaluate(const Backbone& backbone, const VerifierBank* bank,
                       const std::vector<Sample>& samples, int m, const EvalOptions& options) {
  if (options.ks.empty()) throw std::invalid_argument("evaluate: no K values");
  const auto start = std::chrono::steady_clock::now();
  const auto max_k = static_cast<std::size_t>(
      std::min(*std::max_element(options.ks.begin(), options.ks.end()),
               backbone.config().n_items));

  std::vector<std::vector<int>> rankings(samples.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    NoGradGuard no_grad;
    for (std::size_t s = begin; s < end; ++s) {
      const auto result = run_reasoning(backbone, bank, samples[s].history, m);
      rankings[s] = recommend(backbone, result, max_k);
    }
  };
  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(samples.size() / 16 + 1)));
  if (threads == 1) {
    work(0, samples.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (samples.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = std::min(samples.size(), t * chunk);
      const std::size_t e = std::min(samples.size(), b + chunk);
      pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }

  auto report = metrics_from_rankings(rankings, samples, options.ks);
  report.fingerprint = parameter_fingerprint(backbone, bank, m);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (options.rankings) *options.rankings = std::move(rankings);
  return report;
}

}  // namespace vrec
