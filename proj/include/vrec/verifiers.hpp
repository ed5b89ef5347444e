#pragma once

// Mixture of preference verifiers with a personalized router.
//
// Each verifier classifies a (router-scaled) reasoning vector into d_i
// group-level preference classes. Its prediction entropy is the evaluation
// feedback f_i, the last-layer weight column of the predicted class is the
// guidance prototype g_i, and c_i = min(1, 1 / max(f_i, eps)) blends the two:
//
//   r* = (1/n) * sum_i [(1 - c_i) r + c_i g_i]

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vrec/backbone.hpp"
#include "vrec/tensor.hpp"

namespace vrec {

struct DenseLayer {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
};

struct Verifier {
  std::string name;
  int num_classes = 0;
  std::vector<DenseLayer> hidden;  // gelu after each
  DenseLayer last;                 // weight is W^i, [d_model, num_classes]
};

struct VerifierSpec {
  std::string name;
  int num_classes = 0;
};

struct VerifierBankConfig {
  int d_model = 32;
  std::vector<VerifierSpec> verifiers;
  // Hidden layers map d_model -> width -> ... -> d_model so prototypes stay
  // in the reasoning space. 0 gives the linear verifier.
  int hidden_layers = 0;
  int hidden_width = 256;
  double epsilon = 1e-6;
  // Without routing every verifier sees the unscaled representation.
  bool use_router = true;
  std::uint64_t seed = 42;

  void validate() const;
};

struct VerifierOutcome {
  Tensor probs;       // [d_i]
  Tensor entropy;     // scalar f_i
  Tensor confidence;  // scalar c_i
  int predicted_class = 0;
  Tensor guidance;    // [d_model], exact copy of W^i[:, j*]
};

struct StepVerdict {
  Tensor weights;  // router output, [n]
  std::vector<VerifierOutcome> verifiers;
  Tensor adjusted;  // r*
};

class VerifierBank {
 public:
  explicit VerifierBank(const VerifierBankConfig& cfg);

  VerifierBank clone() const;

  const VerifierBankConfig& config() const { return cfg_; }
  std::size_t size() const { return verifiers_.size(); }
  const Verifier& verifier(std::size_t i) const { return verifiers_.at(i); }
  Verifier& verifier(std::size_t i) { return verifiers_.at(i); }
  const Tensor& router_weight() const { return router_w_; }  // [n, d_model]
  const Tensor& router_bias() const { return router_b_; }    // [n]
  void set_use_router(bool on) { cfg_.use_router = on; }

  std::vector<NamedTensor> named_parameters() const;
  std::vector<Tensor> parameters() const;

 private:
  VerifierBankConfig cfg_;
  std::vector<Verifier> verifiers_;
  Tensor router_w_;
  Tensor router_b_;
};

// softmax(A r + b); all ones when routing is disabled.
Tensor route(const VerifierBank& bank, const Tensor& r);
Tensor verifier_logits(const Verifier& verifier, const Tensor& input);
Tensor predict(const Verifier& verifier, const Tensor& input);
// Shannon entropy in nats with 0 log 0 = 0.
double entropy(std::span<const double> p);
// Lowest index among the maxima.
int argmax_class(std::span<const double> p);
Tensor guidance(const Verifier& verifier, std::span<const double> p);
double confidence(double f, double epsilon = 1e-6);
Tensor confidence(const Tensor& f, double epsilon = 1e-6);

StepVerdict verify_and_adjust(const VerifierBank& bank, const Tensor& r);

}  // namespace vrec
