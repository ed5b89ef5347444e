#include "vrec/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "vrec/ops.hpp"
#include "vrec/rng.hpp"

namespace vrec {

void ModelConfig::validate() const {
  if (n_items <= 0) throw std::invalid_argument("ModelConfig: n_items must be positive");
  if (d_model <= 0 || layers < 0 || heads <= 0 || max_positions <= 0) {
    throw std::invalid_argument("ModelConfig: sizes must be positive");
  }
  if (d_model % heads != 0) {
    throw std::invalid_argument("ModelConfig: d_model=" + std::to_string(d_model) +
                                " is not divisible by heads=" + std::to_string(heads));
  }
  if (reasoning_steps < 0) throw std::invalid_argument("ModelConfig: reasoning steps must be >= 0");
}

namespace {

Tensor normal_param(Rng& rng, Shape shape, double stddev = 0.02) {
  auto t = Tensor::zeros(std::move(shape));
  for (auto& v : t.mutable_data()) v = rng.normal(0.0, stddev);
  t.set_requires_grad(true);
  return t;
}

Tensor const_param(Shape shape, double value) {
  auto t = Tensor::full(std::move(shape), value);
  t.set_requires_grad(true);
  return t;
}

}  // namespace

Backbone::Backbone(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const auto d = static_cast<std::size_t>(cfg_.d_model);
  const auto dh = d / static_cast<std::size_t>(cfg_.heads);
  Rng rng(cfg_.seed, 0xBAC0);
  tok_emb_ = normal_param(rng, {static_cast<std::size_t>(cfg_.vocab()), d});
  pos_emb_ = normal_param(rng, {static_cast<std::size_t>(cfg_.max_positions), d});
  for (int l = 0; l < cfg_.layers; ++l) {
    Block b;
    b.ln1_gain = const_param({d}, 1.0);
    b.ln1_bias = const_param({d}, 0.0);
    for (int h = 0; h < cfg_.heads; ++h) {
      b.wq.push_back(normal_param(rng, {d, dh}));
      b.wk.push_back(normal_param(rng, {d, dh}));
      b.wv.push_back(normal_param(rng, {d, dh}));
    }
    b.wo = normal_param(rng, {d, d});
    b.bo = const_param({d}, 0.0);
    b.ln2_gain = const_param({d}, 1.0);
    b.ln2_bias = const_param({d}, 0.0);
    b.w1 = normal_param(rng, {d, 4 * d});
    b.b1 = const_param({4 * d}, 0.0);
    b.w2 = normal_param(rng, {4 * d, d});
    b.b2 = const_param({d}, 0.0);
    blocks_.push_back(std::move(b));
  }
  lnf_gain_ = const_param({d}, 1.0);
  lnf_bias_ = const_param({d}, 0.0);
}

Backbone Backbone::clone() const {
  Backbone copy(cfg_);
  auto dst = copy.named_parameters();
  auto src = named_parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    std::copy(src[i].value.data().begin(), src[i].value.data().end(),
              dst[i].value.mutable_data().begin());
  }
  return copy;
}

std::vector<NamedTensor> Backbone::named_parameters() const {
  std::vector<NamedTensor> out{{"tok_emb", tok_emb_}, {"pos_emb", pos_emb_}};
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const auto& b = blocks_[l];
    const std::string p = "blocks." + std::to_string(l) + ".";
    out.push_back({p + "ln1.gain", b.ln1_gain});
    out.push_back({p + "ln1.bias", b.ln1_bias});
    for (std::size_t h = 0; h < b.wq.size(); ++h) {
      const std::string hp = p + "attn.head" + std::to_string(h) + ".";
      out.push_back({hp + "wq", b.wq[h]});
      out.push_back({hp + "wk", b.wk[h]});
      out.push_back({hp + "wv", b.wv[h]});
    }
    out.push_back({p + "attn.wo", b.wo});
    out.push_back({p + "attn.bo", b.bo});
    out.push_back({p + "ln2.gain", b.ln2_gain});
    out.push_back({p + "ln2.bias", b.ln2_bias});
    out.push_back({p + "mlp.w1", b.w1});
    out.push_back({p + "mlp.b1", b.b1});
    out.push_back({p + "mlp.w2", b.w2});
    out.push_back({p + "mlp.b2", b.b2});
  }
  out.push_back({"lnf.gain", lnf_gain_});
  out.push_back({"lnf.bias", lnf_bias_});
  return out;
}

std::vector<Tensor> Backbone::parameters() const {
  std::vector<Tensor> out;
  for (auto& nt : named_parameters()) out.push_back(nt.value);
  return out;
}

std::size_t Backbone::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.numel();
  return n;
}

std::size_t Backbone::expected_parameter_count(const ModelConfig& cfg) {
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const std::size_t embeddings = (static_cast<std::size_t>(cfg.vocab()) +
                                  static_cast<std::size_t>(cfg.max_positions)) * d;
  // two layer norms, q/k/v + output projection with bias, 4x MLP with biases
  const std::size_t block = 4 * d + 4 * d * d + d + (d * 4 * d + 4 * d) + (4 * d * d + d);
  return embeddings + static_cast<std::size_t>(cfg.layers) * block + 2 * d;
}

Tensor Backbone::encode(std::span<const int> tokens, std::span<const Injection> injected) const {
  const std::size_t T = tokens.size();
  if (T == 0) throw std::invalid_argument("encode: empty input");
  if (T > static_cast<std::size_t>(cfg_.max_positions)) {
    throw std::invalid_argument("encode: sequence length " + std::to_string(T) +
                                " exceeds max_positions " + std::to_string(cfg_.max_positions));
  }
  const auto d = static_cast<std::size_t>(cfg_.d_model);
  std::vector<const Tensor*> slot(T, nullptr);
  for (const auto& inj : injected) {
    if (inj.position >= T) throw std::invalid_argument("encode: injection position out of range");
    if (inj.vector.numel() != d) {
      throw std::invalid_argument("encode: injected vector has shape " +
                                  shape_str(inj.vector.shape()) + ", expected [" +
                                  std::to_string(d) + "]");
    }
    slot[inj.position] = &inj.vector;
  }

  // Contiguous token runs are gathered in one lookup.
  std::vector<Tensor> parts;
  std::size_t t = 0;
  while (t < T) {
    if (slot[t]) {
      parts.push_back(*slot[t]);
      ++t;
      continue;
    }
    std::size_t end = t;
    while (end < T && !slot[end]) ++end;
    parts.push_back(ops::embedding(tok_emb_, tokens.subspan(t, end - t)));
    t = end;
  }
  Tensor x = parts.size() == 1 && parts[0].dim() == 2 ? parts[0] : ops::concat_rows(parts);
  x = ops::add(x, ops::slice_rows(pos_emb_, 0, T));

  const double inv_sqrt_dh =
      1.0 / std::sqrt(static_cast<double>(cfg_.d_model / cfg_.heads));
  for (const auto& b : blocks_) {
    const Tensor h = ops::layer_norm(x, b.ln1_gain, b.ln1_bias);
    std::vector<Tensor> heads;
    for (std::size_t k = 0; k < b.wq.size(); ++k) {
      const Tensor q = ops::matmul(h, b.wq[k]);
      const Tensor key = ops::matmul(h, b.wk[k]);
      const Tensor v = ops::matmul(h, b.wv[k]);
      const Tensor scores = ops::scale(ops::matmul(q, ops::transpose(key)), inv_sqrt_dh);
      heads.push_back(ops::matmul(ops::causal_softmax(scores), v));
    }
    const Tensor attn = heads.size() == 1 ? heads[0] : ops::concat_cols(heads);
    x = ops::add(x, ops::add_bias(ops::matmul(attn, b.wo), b.bo));
    const Tensor h2 = ops::layer_norm(x, b.ln2_gain, b.ln2_bias);
    const Tensor mlp = ops::add_bias(
        ops::matmul(ops::gelu(ops::add_bias(ops::matmul(h2, b.w1), b.b1)), b.w2), b.b2);
    x = ops::add(x, mlp);
  }
  return ops::layer_norm(x, lnf_gain_, lnf_bias_);
}

Tensor Backbone::next_item_scores(const Tensor& hidden, std::size_t position) const {
  const auto items = ops::slice_rows(tok_emb_, 0, static_cast<std::size_t>(cfg_.n_items));
  return ops::matmul(items, ops::row(hidden, position));
}

std::vector<int> rank_items(std::span<const double> scores, std::size_t k) {
  if (k > scores.size()) {
    throw std::invalid_argument("rank_items: K=" + std::to_string(k) + " exceeds " +
                                std::to_string(scores.size()) + " items");
  }
  std::vector<int> ids(scores.size());
  std::iota(ids.begin(), ids.end(), 0);
  auto better = [&](int a, int b) {
    if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)]) {
      return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    }
    return a < b;
  };
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(), better);
  ids.resize(k);
  return ids;
}

int argmax_item(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("argmax_item: empty scores");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return static_cast<int>(best);
}

}  // namespace vrec
