#pragma once

// Small models and corpora shared by the unit tests and the acceptance run.

#include <vector>

#include "vrec/backbone.hpp"
#include "vrec/datasets.hpp"
#include "vrec/reasoning.hpp"
#include "vrec/rng.hpp"
#include "vrec/training.hpp"
#include "vrec/verifiers.hpp"

namespace vrec::testing {

// d_M = 8, m = 2, n = 2 verifiers with d_i = 4.
struct TinyComposite {
  Backbone backbone;
  VerifierBank bank;
  std::vector<GroupLabeling> labelings;
  Sample sample;
  TrainHyper hyper;
  int m = 2;

  static TinyComposite make(std::uint64_t seed = 5) {
    ModelConfig mc;
    mc.n_items = 10;
    mc.d_model = 8;
    mc.heads = 2;
    mc.max_positions = 10;
    mc.seed = seed;
    VerifierBankConfig bc;
    bc.d_model = 8;
    bc.verifiers = {{"cf", 4}, {"title", 4}};
    bc.seed = seed + 1;
    TinyComposite t{Backbone(mc), VerifierBank(bc), {}, {}, {}, 2};
    GroupLabeling a{"cf", 4, {}}, b{"title", 4, {}};
    for (int i = 0; i < 10; ++i) {
      a.labels.push_back(i % 4);
      b.labels.push_back((i / 3) % 4);
    }
    t.labelings = {a, b};
    t.sample = Sample{0, {1, 4, 2, 7}, 6, 0};
    t.hyper.beta = 0.5;
    t.hyper.gamma = 0.5;
    return t;
  }

  // Moves every parameter away from its initialisation.
  TinyComposite& perturb(double stddev, std::uint64_t seed = 99) {
    Rng rng(seed);
    for (auto& p : parameters())
      for (auto& x : p.mutable_data()) x += rng.normal(0.0, stddev);
    return *this;
  }

  std::vector<Tensor> parameters() const {
    auto p = backbone.parameters();
    for (auto& t : bank.parameters()) p.push_back(t);
    return p;
  }

  Tensor total() const { return finetune_objective(backbone, &bank, sample, labelings, hyper, m).total; }
};

inline int greedy_replay(const Backbone& backbone, const std::vector<int>& history, int m) {
  // Reasoning without verifiers, written against the encoder directly.
  std::vector<int> tokens = history;
  std::vector<Injection> injected;
  std::size_t read = history.size() - 1;
  for (int t = 0; t < m; ++t) {
    const auto h = backbone.encode(tokens, injected);
    std::vector<double> r(h.cols());
    for (std::size_t c = 0; c < r.size(); ++c) r[c] = h.at(read, c);
    read = tokens.size();
    tokens.push_back(backbone.config().latent_token());
    injected.push_back({read, Tensor::vector(r)});
  }
  const auto h = backbone.encode(tokens, injected);
  const auto scores = backbone.next_item_scores(h, read).to_vector();
  int best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

}  // namespace vrec::testing
