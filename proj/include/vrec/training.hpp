#pragma once

// Training stages:
//   stage 0  pretrain_backbone        reason-then-recommend with L_r only
//   stage 1  collect_verifier_dataset greedy replay; positives carry the
//                                     target's group labels, negatives none
//            pretrain_verifiers       L_v with the backbone frozen
//   stage 2  finetune                 L_r + beta L_v + gamma L_m, jointly

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vrec/backbone.hpp"
#include "vrec/datasets.hpp"
#include "vrec/reasoning.hpp"
#include "vrec/verifiers.hpp"

namespace vrec {

struct TrainHyper {
  double lr = 1e-3;
  double verifier_lr = 1e-3;
  int pretrain_epochs = 6;
  int verifier_epochs = 20;
  int finetune_epochs = 4;
  int batch_size = 32;
  double alpha = 1.0;  // negative-sample weight in L_v
  double beta = 0.5;   // L_v weight
  double gamma = 0.5;  // L_m weight
  double clip_norm = 1.0;
  std::uint64_t seed = 42;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double rec_loss = 0.0;
  double verifier_loss = 0.0;
  double mono_loss = 0.0;
  double total = 0.0;
  double val_recall5 = 0.0;
  double wall_seconds = 0.0;
};

struct BatchLog {
  double rec_loss = 0.0;
  double verifier_loss = 0.0;
  double mono_loss = 0.0;
  double total = 0.0;
};

struct TrainReport {
  std::vector<EpochLog> epochs;
  std::vector<BatchLog> batches;
};

// Negative log-probability of the target under softmax(logits).
Tensor recommendation_loss(const Tensor& logits, int target);

TrainReport pretrain_backbone(Backbone& backbone, const std::vector<Sample>& train,
                              const TrainHyper& hyper, int m,
                              const std::vector<Sample>* valid = nullptr);

struct VerifierSample {
  std::vector<std::vector<double>> steps;  // r*_t for t = 1..m
  std::optional<std::vector<int>> labels;  // one class per verifier; empty for negatives
  int predicted = -1;
  int target = -1;
};

VerifierSample make_verifier_sample(const ReasoningTrace& trace, int predicted, int target,
                                    const std::vector<GroupLabeling>& labelings);

std::vector<VerifierSample> collect_verifier_dataset(const Backbone& backbone,
                                                     const std::vector<Sample>& train,
                                                     const std::vector<GroupLabeling>& labelings,
                                                     int m);

// Positive: mean over steps and verifiers of -log p_i[P_i]. Negative: mean of
// -alpha * H(p_i), so minimizing it pushes negatives towards uniform.
Tensor verifier_loss(const VerifierBank& bank, std::span<const Tensor> steps,
                     const std::optional<std::vector<int>>& labels, double alpha);

struct VerifierStats {
  double loss = 0.0;
  double positive_accuracy = 0.0;
  double negative_entropy = 0.0;             // mean f over negatives, nats
  double negative_entropy_normalized = 0.0;  // mean f / ln d_i
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

VerifierStats verifier_stats(const VerifierBank& bank, const std::vector<VerifierSample>& data,
                             double alpha);

struct VerifierEpochLog {
  int epoch = 0;
  VerifierStats stats;
};

std::vector<VerifierEpochLog> pretrain_verifiers(VerifierBank& bank,
                                                 const std::vector<VerifierSample>& data,
                                                 const TrainHyper& hyper);

// Mean over verifiers and steps t = 2..m of max(0, f_t - f_{t-1}).
Tensor monotonicity_loss(const ReasoningTrace& trace);
double monotonicity_loss(const std::vector<std::vector<double>>& entropies);  // [step][verifier]

struct FinetuneTerms {
  Tensor rec;
  Tensor verifier;
  Tensor mono;
  Tensor total;
};

// Per-sample objective of the joint stage; without a bank it is L_r alone.
FinetuneTerms finetune_objective(const Backbone& backbone, const VerifierBank* bank,
                                 const Sample& sample, const std::vector<GroupLabeling>& labelings,
                                 const TrainHyper& hyper, int m);

TrainReport finetune(Backbone& backbone, VerifierBank* bank, const std::vector<Sample>& train,
                     const std::vector<GroupLabeling>& labelings, const TrainHyper& hyper, int m,
                     const std::vector<Sample>* valid = nullptr);

}  // namespace vrec
