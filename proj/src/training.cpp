#include "vrec/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "vrec/evaluation.hpp"
#include "vrec/ops.hpp"
#include "vrec/optim.hpp"
#include "vrec/rng.hpp"

namespace vrec {

void TrainHyper::validate() const {
  if (alpha < 0 || beta < 0 || gamma < 0) {
    throw std::invalid_argument("TrainHyper: alpha, beta and gamma must be non-negative");
  }
  if (batch_size <= 0) throw std::invalid_argument("TrainHyper: batch size must be positive");
  if (lr < 0 || verifier_lr < 0) throw std::invalid_argument("TrainHyper: negative learning rate");
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size, Rng rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t b = 0; b < n; b += static_cast<std::size_t>(batch_size)) {
    const std::size_t e = std::min(n, b + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                         order.begin() + static_cast<std::ptrdiff_t>(e));
  }
  return batches;
}

void check_finite(double value, const char* stage, int epoch) {
  if (!std::isfinite(value)) {
    throw std::runtime_error(std::string(stage) + ": loss diverged (non-finite) in epoch " +
                             std::to_string(epoch));
  }
}

double validation_recall5(const Backbone& backbone, const VerifierBank* bank,
                          const std::vector<Sample>* valid, int m) {
  if (!valid || valid->empty()) return 0.0;
  EvalOptions options;
  options.ks = {5};
  return evaluate(backbone, bank, *valid, m, options).recall_at(5);
}

std::vector<int> target_labels(const std::vector<GroupLabeling>& labelings, int item) {
  std::vector<int> labels;
  for (const auto& l : labelings) {
    if (item < 0 || static_cast<std::size_t>(item) >= l.labels.size()) {
      throw std::invalid_argument("labeling '" + l.dimension + "' does not cover item " +
                                  std::to_string(item));
    }
    labels.push_back(l.labels[static_cast<std::size_t>(item)]);
  }
  return labels;
}

}  // namespace

Tensor recommendation_loss(const Tensor& logits, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= logits.numel()) {
    throw std::invalid_argument("recommendation_loss: target " + std::to_string(target) +
                                " out of range");
  }
  return ops::scale(ops::element(ops::log_softmax(logits), static_cast<std::size_t>(target)), -1.0);
}

FinetuneTerms finetune_objective(const Backbone& backbone, const VerifierBank* bank,
                                 const Sample& sample, const std::vector<GroupLabeling>& labelings,
                                 const TrainHyper& hyper, int m) {
  const auto result = run_reasoning(backbone, bank, sample.history, m);
  FinetuneTerms terms;
  terms.rec = recommendation_loss(recommendation_scores(backbone, result), sample.target);
  if (!bank || m == 0) {
    terms.verifier = Tensor::scalar(0.0);
    terms.mono = Tensor::scalar(0.0);
    terms.total = terms.rec;
    return terms;
  }
  std::vector<Tensor> adjusted;
  for (const auto& step : result.trace.steps) adjusted.push_back(step.adjusted);
  terms.verifier = verifier_loss(*bank, adjusted, target_labels(labelings, sample.target), hyper.alpha);
  terms.mono = monotonicity_loss(result.trace);
  terms.total = ops::add(ops::add(terms.rec, ops::scale(terms.verifier, hyper.beta)),
                         ops::scale(terms.mono, hyper.gamma));
  return terms;
}

namespace {

TrainReport train_loop(const char* stage, Backbone& backbone, VerifierBank* bank,
                       const std::vector<Sample>& train,
                       const std::vector<GroupLabeling>& labelings, const TrainHyper& hyper, int m,
                       int epochs, const std::vector<Sample>* valid, std::uint64_t stream) {
  hyper.validate();
  if (train.empty()) throw std::invalid_argument(std::string(stage) + ": no training samples");
  auto params = backbone.parameters();
  if (bank) {
    auto extra = bank->parameters();
    params.insert(params.end(), extra.begin(), extra.end());
  }
  Adam optimizer(params, {.lr = hyper.lr, .clip_norm = hyper.clip_norm});
  TrainReport report;
  const auto start = Clock::now();
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    Rng rng(hyper.seed, stream + static_cast<std::uint64_t>(epoch));
    EpochLog log;
    log.epoch = epoch;
    for (const auto& batch : make_batches(train.size(), hyper.batch_size, rng)) {
      optimizer.zero_grad();
      std::vector<Tensor> rec, ver, mono, total;
      for (auto idx : batch) {
        auto terms = finetune_objective(backbone, bank, train[idx], labelings, hyper, m);
        rec.push_back(terms.rec);
        ver.push_back(terms.verifier);
        mono.push_back(terms.mono);
        total.push_back(terms.total);
      }
      const Tensor loss = ops::mean(ops::stack_scalars(total));
      BatchLog b;
      b.total = loss.item();
      check_finite(b.total, stage, epoch);
      {
        NoGradGuard no_grad;
        b.rec_loss = ops::mean(ops::stack_scalars(rec)).item();
        b.verifier_loss = ops::mean(ops::stack_scalars(ver)).item();
        b.mono_loss = ops::mean(ops::stack_scalars(mono)).item();
      }
      loss.backward();
      optimizer.step();
      const double w = static_cast<double>(batch.size()) / static_cast<double>(train.size());
      log.rec_loss += w * b.rec_loss;
      log.verifier_loss += w * b.verifier_loss;
      log.mono_loss += w * b.mono_loss;
      log.total += w * b.total;
      report.batches.push_back(b);
    }
    log.val_recall5 = validation_recall5(backbone, bank, valid, m);
    log.wall_seconds = seconds_since(start);
    report.epochs.push_back(log);
  }
  return report;
}

}  // namespace

TrainReport pretrain_backbone(Backbone& backbone, const std::vector<Sample>& train,
                              const TrainHyper& hyper, int m, const std::vector<Sample>* valid) {
  return train_loop("pretrain_backbone", backbone, nullptr, train, {}, hyper, m,
                    hyper.pretrain_epochs, valid, 10'000);
}

VerifierSample make_verifier_sample(const ReasoningTrace& trace, int predicted, int target,
                                    const std::vector<GroupLabeling>& labelings) {
  VerifierSample vs;
  vs.predicted = predicted;
  vs.target = target;
  for (const auto& step : trace.steps) vs.steps.push_back(step.adjusted.to_vector());
  // Labels are validated for every sample so an incomplete labeling fails fast.
  auto labels = target_labels(labelings, target);
  if (predicted == target) vs.labels = std::move(labels);
  return vs;
}

std::vector<VerifierSample> collect_verifier_dataset(const Backbone& backbone,
                                                     const std::vector<Sample>& train,
                                                     const std::vector<GroupLabeling>& labelings,
                                                     int m) {
  NoGradGuard no_grad;
  std::vector<VerifierSample> out;
  out.reserve(train.size());
  for (const auto& s : train) {
    const auto result = run_reasoning(backbone, nullptr, s.history, m);
    out.push_back(make_verifier_sample(result.trace, recommend_greedy(backbone, result), s.target,
                                       labelings));
  }
  return out;
}

Tensor verifier_loss(const VerifierBank& bank, std::span<const Tensor> steps,
                     const std::optional<std::vector<int>>& labels, double alpha) {
  if (steps.empty()) throw std::invalid_argument("verifier_loss: empty trace");
  if (labels && labels->size() != bank.size()) {
    throw std::invalid_argument("verifier_loss: expected " + std::to_string(bank.size()) +
                                " labels, got " + std::to_string(labels->size()));
  }
  std::vector<Tensor> terms;
  for (const auto& r : steps) {
    const Tensor w = route(bank, r);
    for (std::size_t i = 0; i < bank.size(); ++i) {
      const auto& v = bank.verifier(i);
      const Tensor logits = verifier_logits(v, ops::mul_scalar(r, ops::element(w, i)));
      if (labels) {
        const int cls = (*labels)[i];
        if (cls < 0 || cls >= v.num_classes) {
          throw std::invalid_argument("verifier_loss: label " + std::to_string(cls) +
                                      " out of range for verifier '" + v.name + "'");
        }
        terms.push_back(ops::scale(ops::element(ops::log_softmax(logits), static_cast<std::size_t>(cls)), -1.0));
      } else {
        terms.push_back(ops::scale(ops::entropy_from_logits(logits), -alpha));
      }
    }
  }
  return ops::mean(ops::stack_scalars(terms));
}

VerifierStats verifier_stats(const VerifierBank& bank, const std::vector<VerifierSample>& data,
                             double alpha) {
  NoGradGuard no_grad;
  VerifierStats stats;
  std::size_t pos_checks = 0, pos_hits = 0, neg_terms = 0;
  double loss = 0.0;
  for (const auto& sample : data) {
    std::vector<Tensor> steps;
    for (const auto& v : sample.steps) steps.push_back(Tensor::vector(v));
    loss += verifier_loss(bank, steps, sample.labels, alpha).item();
    sample.labels ? ++stats.positives : ++stats.negatives;
    for (const auto& r : steps) {
      const Tensor w = route(bank, r);
      for (std::size_t i = 0; i < bank.size(); ++i) {
        const auto& v = bank.verifier(i);
        const Tensor p = predict(v, ops::mul_scalar(r, ops::element(w, i)));
        if (sample.labels) {
          ++pos_checks;
          pos_hits += argmax_class(p.data()) == (*sample.labels)[i];
        } else {
          const double f = entropy(p.data());
          stats.negative_entropy += f;
          stats.negative_entropy_normalized += f / std::log(static_cast<double>(v.num_classes));
          ++neg_terms;
        }
      }
    }
  }
  if (!data.empty()) stats.loss = loss / static_cast<double>(data.size());
  if (pos_checks) stats.positive_accuracy = static_cast<double>(pos_hits) / static_cast<double>(pos_checks);
  if (neg_terms) {
    stats.negative_entropy /= static_cast<double>(neg_terms);
    stats.negative_entropy_normalized /= static_cast<double>(neg_terms);
  }
  return stats;
}

std::vector<VerifierEpochLog> pretrain_verifiers(VerifierBank& bank,
                                                 const std::vector<VerifierSample>& data,
                                                 const TrainHyper& hyper) {
  hyper.validate();
  if (data.empty()) throw std::invalid_argument("pretrain_verifiers: empty verifier dataset");
  std::vector<std::vector<Tensor>> inputs;
  for (const auto& sample : data) {
    std::vector<Tensor> steps;
    for (const auto& v : sample.steps) steps.push_back(Tensor::vector(v));
    inputs.push_back(std::move(steps));
  }
  Adam optimizer(bank.parameters(), {.lr = hyper.verifier_lr, .clip_norm = hyper.clip_norm});
  std::vector<VerifierEpochLog> logs;
  for (int epoch = 1; epoch <= hyper.verifier_epochs; ++epoch) {
    Rng rng(hyper.seed, 20'000 + static_cast<std::uint64_t>(epoch));
    for (const auto& batch : make_batches(data.size(), hyper.batch_size, rng)) {
      optimizer.zero_grad();
      std::vector<Tensor> losses;
      for (auto idx : batch) {
        losses.push_back(verifier_loss(bank, inputs[idx], data[idx].labels, hyper.alpha));
      }
      const Tensor loss = ops::mean(ops::stack_scalars(losses));
      check_finite(loss.item(), "pretrain_verifiers", epoch);
      loss.backward();
      optimizer.step();
    }
    logs.push_back({epoch, verifier_stats(bank, data, hyper.alpha)});
  }
  return logs;
}

Tensor monotonicity_loss(const ReasoningTrace& trace) {
  std::vector<Tensor> hinges;
  for (std::size_t t = 1; t < trace.steps.size(); ++t) {
    const auto& prev = trace.steps[t - 1].verdict;
    const auto& cur = trace.steps[t].verdict;
    if (!prev || !cur) throw std::invalid_argument("monotonicity_loss: trace lacks verifier feedback");
    for (std::size_t i = 0; i < cur->verifiers.size(); ++i) {
      hinges.push_back(ops::relu(ops::sub(cur->verifiers[i].entropy, prev->verifiers[i].entropy)));
    }
  }
  if (hinges.empty()) return Tensor::scalar(0.0);
  return ops::mean(ops::stack_scalars(hinges));
}

double monotonicity_loss(const std::vector<std::vector<double>>& entropies) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 1; t < entropies.size(); ++t) {
    for (std::size_t i = 0; i < entropies[t].size(); ++i) {
      total += std::max(0.0, entropies[t][i] - entropies[t - 1][i]);
      ++count;
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

TrainReport finetune(Backbone& backbone, VerifierBank* bank, const std::vector<Sample>& train,
                     const std::vector<GroupLabeling>& labelings, const TrainHyper& hyper, int m,
                     const std::vector<Sample>* valid) {
  if (bank && labelings.size() != bank->size()) {
    throw std::invalid_argument("finetune: need one labeling per verifier");
  }
  return train_loop("finetune", backbone, bank, train, labelings, hyper, m, hyper.finetune_epochs,
                    valid, 30'000);
}

}  // namespace vrec
