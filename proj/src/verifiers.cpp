#include "vrec/verifiers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vrec/ops.hpp"
#include "vrec/rng.hpp"

namespace vrec {

void VerifierBankConfig::validate() const {
  if (verifiers.empty()) throw std::invalid_argument("VerifierBank: at least one verifier required");
  if (d_model <= 0) throw std::invalid_argument("VerifierBank: d_model must be positive");
  for (const auto& v : verifiers) {
    if (v.num_classes <= 0) {
      throw std::invalid_argument("VerifierBank: verifier '" + v.name + "' needs d_i > 0");
    }
  }
  if (hidden_layers < 0 || (hidden_layers > 1 && hidden_width <= 0)) {
    throw std::invalid_argument("VerifierBank: invalid hidden layer settings");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("VerifierBank: epsilon must be positive");
}

namespace {

DenseLayer dense(Rng& rng, std::size_t in, std::size_t out) {
  DenseLayer layer{Tensor::zeros({in, out}), Tensor::zeros({out})};
  const double stddev = 1.0 / std::sqrt(static_cast<double>(in));
  for (auto& v : layer.weight.mutable_data()) v = rng.normal(0.0, stddev);
  layer.weight.set_requires_grad(true);
  layer.bias.set_requires_grad(true);
  return layer;
}

}  // namespace

VerifierBank::VerifierBank(const VerifierBankConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const auto d = static_cast<std::size_t>(cfg_.d_model);
  Rng rng(cfg_.seed, 0x7E41F);
  for (const auto& spec : cfg_.verifiers) {
    Verifier v;
    v.name = spec.name;
    v.num_classes = spec.num_classes;
    std::size_t in = d;
    for (int l = 0; l < cfg_.hidden_layers; ++l) {
      const bool last_hidden = l + 1 == cfg_.hidden_layers;
      const std::size_t out = last_hidden ? d : static_cast<std::size_t>(cfg_.hidden_width);
      v.hidden.push_back(dense(rng, in, out));
      in = out;
    }
    v.last = dense(rng, d, static_cast<std::size_t>(spec.num_classes));
    verifiers_.push_back(std::move(v));
  }
  const std::size_t n = verifiers_.size();
  router_w_ = Tensor::zeros({n, d});
  for (auto& v : router_w_.mutable_data()) v = rng.normal(0.0, 0.02);
  router_w_.set_requires_grad(true);
  router_b_ = Tensor::zeros({n});
  router_b_.set_requires_grad(true);
}

VerifierBank VerifierBank::clone() const {
  VerifierBank copy(cfg_);
  auto dst = copy.named_parameters();
  auto src = named_parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    std::copy(src[i].value.data().begin(), src[i].value.data().end(),
              dst[i].value.mutable_data().begin());
  }
  return copy;
}

std::vector<NamedTensor> VerifierBank::named_parameters() const {
  std::vector<NamedTensor> out{{"router.weight", router_w_}, {"router.bias", router_b_}};
  for (std::size_t i = 0; i < verifiers_.size(); ++i) {
    const auto& v = verifiers_[i];
    const std::string p = "verifier" + std::to_string(i) + ".";
    for (std::size_t l = 0; l < v.hidden.size(); ++l) {
      out.push_back({p + "hidden" + std::to_string(l) + ".weight", v.hidden[l].weight});
      out.push_back({p + "hidden" + std::to_string(l) + ".bias", v.hidden[l].bias});
    }
    out.push_back({p + "last.weight", v.last.weight});
    out.push_back({p + "last.bias", v.last.bias});
  }
  return out;
}

std::vector<Tensor> VerifierBank::parameters() const {
  std::vector<Tensor> out;
  for (auto& nt : named_parameters()) out.push_back(nt.value);
  return out;
}

Tensor route(const VerifierBank& bank, const Tensor& r) {
  if (!bank.config().use_router) return Tensor::full({bank.size()}, 1.0);
  return ops::softmax(ops::add_bias(ops::matmul(bank.router_weight(), r), bank.router_bias()));
}

Tensor verifier_logits(const Verifier& verifier, const Tensor& input) {
  Tensor x = input;
  for (const auto& layer : verifier.hidden) {
    x = ops::gelu(ops::add_bias(ops::matmul(x, layer.weight), layer.bias));
  }
  return ops::add_bias(ops::matmul(x, verifier.last.weight), verifier.last.bias);
}

Tensor predict(const Verifier& verifier, const Tensor& input) {
  return ops::softmax(verifier_logits(verifier, input));
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return std::max(h, 0.0);
}

int argmax_class(std::span<const double> p) {
  if (p.empty()) throw std::invalid_argument("argmax_class: empty distribution");
  std::size_t best = 0;
  for (std::size_t j = 1; j < p.size(); ++j)
    if (p[j] > p[best]) best = j;
  return static_cast<int>(best);
}

Tensor guidance(const Verifier& verifier, std::span<const double> p) {
  return ops::column(verifier.last.weight, static_cast<std::size_t>(argmax_class(p)));
}

double confidence(double f, double epsilon) { return std::min(1.0, 1.0 / std::max(f, epsilon)); }

Tensor confidence(const Tensor& f, double epsilon) {
  return ops::clamp_max(ops::reciprocal(ops::clamp_min(f, epsilon)), 1.0);
}

StepVerdict verify_and_adjust(const VerifierBank& bank, const Tensor& r) {
  StepVerdict verdict;
  verdict.weights = route(bank, r);
  const double inv_n = 1.0 / static_cast<double>(bank.size());
  Tensor acc;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto& v = bank.verifier(i);
    VerifierOutcome out;
    const Tensor input = ops::mul_scalar(r, ops::element(verdict.weights, i));
    const Tensor logits = verifier_logits(v, input);
    out.probs = ops::softmax(logits);
    out.entropy = ops::entropy_from_logits(logits);
    out.confidence = confidence(out.entropy, bank.config().epsilon);
    out.predicted_class = argmax_class(out.probs.data());
    out.guidance = ops::column(v.last.weight, static_cast<std::size_t>(out.predicted_class));
    const Tensor keep = ops::add_scalar(ops::scale(out.confidence, -1.0), 1.0);  // 1 - c_i
    const Tensor term =
        ops::add(ops::mul_scalar(r, keep), ops::mul_scalar(out.guidance, out.confidence));
    acc = acc.defined() ? ops::add(acc, term) : term;
    verdict.verifiers.push_back(std::move(out));
  }
  verdict.adjusted = ops::scale(acc, inv_n);
  return verdict;
}

}  // namespace vrec
