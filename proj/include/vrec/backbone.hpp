#pragma once

// Small pre-LayerNorm causal transformer over single-token item ids. Latent
// reasoning steps enter as injected input embeddings at reserved positions;
// the output projection is tied to the item rows of the token embedding.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vrec/tensor.hpp"

namespace vrec {

struct ModelConfig {
  int n_items = 0;
  int d_model = 32;
  int layers = 1;
  int heads = 2;
  int max_positions = 24;
  int reasoning_steps = 4;  // m
  std::uint64_t seed = 42;

  // Items occupy ids [0, n_items); one reserved placeholder follows for
  // latent positions.
  int vocab() const { return n_items + 1; }
  int latent_token() const { return n_items; }
  void validate() const;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct Injection {
  std::size_t position;
  Tensor vector;  // [d_model]
};

class Backbone {
 public:
  explicit Backbone(const ModelConfig& cfg);

  // Copies share parameter storage; clone() does not.
  Backbone clone() const;

  const ModelConfig& config() const { return cfg_; }
  std::vector<NamedTensor> named_parameters() const;
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;
  static std::size_t expected_parameter_count(const ModelConfig& cfg);

  // Hidden states [T, d_model] after the final layer norm. Tokens at
  // injected positions are ignored in favour of the injected vector.
  Tensor encode(std::span<const int> tokens, std::span<const Injection> injected = {}) const;

  // Logits over items at one position of `hidden`.
  Tensor next_item_scores(const Tensor& hidden, std::size_t position) const;

  const Tensor& token_embedding() const { return tok_emb_; }

 private:
  struct Block {
    Tensor ln1_gain, ln1_bias;
    std::vector<Tensor> wq, wk, wv;  // one [d, d/heads] matrix per head
    Tensor wo, bo;
    Tensor ln2_gain, ln2_bias;
    Tensor w1, b1, w2, b2;
  };

  ModelConfig cfg_;
  Tensor tok_emb_;
  Tensor pos_emb_;
  std::vector<Block> blocks_;
  Tensor lnf_gain_, lnf_bias_;
};

// Top-K item ids by descending score; equal scores rank the lower id first.
std::vector<int> rank_items(std::span<const double> scores, std::size_t k);
// Greedy choice: argmax with the same tie rule.
int argmax_item(std::span<const double> scores);

}  // namespace vrec
