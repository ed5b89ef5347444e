#pragma once

// Run configuration and the end-to-end pipeline used by the CLI, the
// ablation/sweep/step-scan harnesses and the acceptance suite.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "vrec/backbone.hpp"
#include "vrec/datasets.hpp"
#include "vrec/evaluation.hpp"
#include "vrec/labeling.hpp"
#include "vrec/training.hpp"
#include "vrec/verifiers.hpp"

namespace vrec {

struct RunConfig {
  std::uint64_t seed = 42;
  std::optional<SynthConfig> synthetic;
  std::filesystem::path items_path;
  std::filesystem::path interactions_path;

  ModelConfig model;  // n_items is filled from the data
  std::vector<std::string> dimensions{"cf", "title"};
  std::map<std::string, int> num_classes;  // per dimension; default 20
  std::size_t title_dim = 256;
  CfOptions cf;

  int verifier_hidden_layers = 0;
  int verifier_hidden_width = 256;
  double epsilon = 1e-6;
  bool use_verifier = true;
  bool use_router = true;
  bool pretrain_verifiers = true;

  TrainHyper train;
  std::vector<int> ks{5, 10};
  unsigned threads = 0;
  std::filesystem::path out_dir = "runs/default";

  // Propagates `seed` into every seeded component.
  void apply_seed(std::uint64_t s);
  void validate() const;
  int classes_for(const std::string& dimension) const;
};

// Missing keys keep their defaults. The schema is documented in README.md.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig load_config(const std::filesystem::path& path);
std::string config_fingerprint(const RunConfig& cfg);

struct PreparedData {
  Corpus corpus;
  Split split;
  std::optional<GroupLabeling> planted;
};

PreparedData prepare_data(const RunConfig& cfg);
std::vector<GroupLabeling> build_labelings(const RunConfig& cfg, const PreparedData& data);
VerifierBankConfig bank_config(const RunConfig& cfg, const std::vector<GroupLabeling>& labelings);
ModelConfig model_config(const RunConfig& cfg, const PreparedData& data);

struct StageOutputs {
  std::optional<Backbone> backbone;
  std::optional<VerifierBank> bank;
  TrainReport pretrain;
  std::vector<VerifierSample> verifier_data;
  std::vector<VerifierEpochLog> verifier_logs;
  TrainReport finetune;
};

// Runs every stage after the backbone pre-training, starting from `pretrained`.
StageOutputs run_after_pretrain(const RunConfig& cfg, const PreparedData& data,
                                const std::vector<GroupLabeling>& labelings,
                                const Backbone& pretrained);

struct ExperimentResult {
  StageOutputs stages;
  MetricsReport valid;
  MetricsReport test;
};

ExperimentResult run_experiment(const RunConfig& cfg);

}  // namespace vrec
