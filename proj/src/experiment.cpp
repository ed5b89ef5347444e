#include "vrec/experiment.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "vrec/rng.hpp"

namespace vrec {

using nlohmann::json;

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  model.seed = s;
  train.seed = s;
  cf.seed = s;
  if (synthetic) synthetic->seed = s;
}

int RunConfig::classes_for(const std::string& dimension) const {
  auto it = num_classes.find(dimension);
  return it == num_classes.end() ? kDefaultClusterCount : it->second;
}

void RunConfig::validate() const {
  if (!synthetic && (items_path.empty() || interactions_path.empty())) {
    throw std::invalid_argument("config: data needs either \"synthetic\" or items/interactions paths");
  }
  if (use_verifier && dimensions.empty()) {
    throw std::invalid_argument("config: verifiers enabled but no labeling dimension given");
  }
  for (const auto& d : dimensions) parse_dimension(d);
  if (ks.empty()) throw std::invalid_argument("config: eval.ks must not be empty");
  train.validate();
  if (synthetic) synthetic->validate();
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& field) {
  if (j.contains(key) && !j[key].is_null()) field = j[key].get<T>();
}

}  // namespace

RunConfig config_from_json(const json& j) {
  RunConfig c;
  if (j.contains("data")) {
    const auto& d = j["data"];
    if (d.contains("synthetic")) {
      SynthConfig s;
      const auto& sj = d["synthetic"];
      read(sj, "n_users", s.n_users);
      read(sj, "n_items", s.n_items);
      read(sj, "n_groups", s.n_groups);
      read(sj, "stickiness", s.stickiness);
      read(sj, "min_length", s.min_length);
      read(sj, "max_length", s.max_length);
      c.synthetic = s;
    }
    if (d.contains("items")) c.items_path = d["items"].get<std::string>();
    if (d.contains("interactions")) c.interactions_path = d["interactions"].get<std::string>();
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    read(m, "d_model", c.model.d_model);
    read(m, "layers", c.model.layers);
    read(m, "heads", c.model.heads);
    read(m, "max_positions", c.model.max_positions);
    read(m, "m", c.model.reasoning_steps);
  }
  if (j.contains("labeling")) {
    const auto& l = j["labeling"];
    read(l, "dimensions", c.dimensions);
    read(l, "d_i", c.num_classes);
    read(l, "title_dim", c.title_dim);
    if (l.contains("cf")) {
      read(l["cf"], "dim", c.cf.dim);
      read(l["cf"], "epochs", c.cf.epochs);
      read(l["cf"], "lr", c.cf.lr);
      read(l["cf"], "l2", c.cf.l2);
    }
  }
  if (j.contains("verifier")) {
    const auto& v = j["verifier"];
    read(v, "enabled", c.use_verifier);
    read(v, "router", c.use_router);
    read(v, "pretrain", c.pretrain_verifiers);
    read(v, "hidden_layers", c.verifier_hidden_layers);
    read(v, "hidden_width", c.verifier_hidden_width);
    read(v, "epsilon", c.epsilon);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    read(t, "lr", c.train.lr);
    read(t, "verifier_lr", c.train.verifier_lr);
    read(t, "pretrain_epochs", c.train.pretrain_epochs);
    read(t, "verifier_epochs", c.train.verifier_epochs);
    read(t, "finetune_epochs", c.train.finetune_epochs);
    read(t, "batch_size", c.train.batch_size);
    read(t, "alpha", c.train.alpha);
    read(t, "beta", c.train.beta);
    read(t, "gamma", c.train.gamma);
    read(t, "clip_norm", c.train.clip_norm);
  }
  if (j.contains("eval")) {
    read(j["eval"], "ks", c.ks);
    read(j["eval"], "threads", c.threads);
  }
  if (j.contains("out")) c.out_dir = j["out"].get<std::string>();
  std::uint64_t seed = c.seed;
  read(j, "seed", seed);
  c.apply_seed(seed);
  return c;
}

json config_to_json(const RunConfig& c) {
  json data;
  if (c.synthetic) {
    const auto& s = *c.synthetic;
    data["synthetic"] = {{"n_users", s.n_users},       {"n_items", s.n_items},
                         {"n_groups", s.n_groups},     {"stickiness", s.stickiness},
                         {"min_length", s.min_length}, {"max_length", s.max_length}};
  } else {
    data["items"] = c.items_path.string();
    data["interactions"] = c.interactions_path.string();
  }
  return {
      {"seed", c.seed},
      {"data", data},
      {"model",
       {{"d_model", c.model.d_model},
        {"layers", c.model.layers},
        {"heads", c.model.heads},
        {"max_positions", c.model.max_positions},
        {"m", c.model.reasoning_steps}}},
      {"labeling",
       {{"dimensions", c.dimensions},
        {"d_i", c.num_classes},
        {"title_dim", c.title_dim},
        {"cf", {{"dim", c.cf.dim}, {"epochs", c.cf.epochs}, {"lr", c.cf.lr}, {"l2", c.cf.l2}}}}},
      {"verifier",
       {{"enabled", c.use_verifier},
        {"router", c.use_router},
        {"pretrain", c.pretrain_verifiers},
        {"hidden_layers", c.verifier_hidden_layers},
        {"hidden_width", c.verifier_hidden_width},
        {"epsilon", c.epsilon}}},
      {"train",
       {{"lr", c.train.lr},
        {"verifier_lr", c.train.verifier_lr},
        {"pretrain_epochs", c.train.pretrain_epochs},
        {"verifier_epochs", c.train.verifier_epochs},
        {"finetune_epochs", c.train.finetune_epochs},
        {"batch_size", c.train.batch_size},
        {"alpha", c.train.alpha},
        {"beta", c.train.beta},
        {"gamma", c.train.gamma},
        {"clip_norm", c.train.clip_norm}}},
      {"eval", {{"ks", c.ks}, {"threads", c.threads}}},
      {"out", c.out_dir.string()},
  };
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  auto cfg = config_from_json(j);
  // Relative data paths resolve against the config file's directory.
  const auto base = path.parent_path();
  if (!cfg.items_path.empty() && cfg.items_path.is_relative()) cfg.items_path = base / cfg.items_path;
  if (!cfg.interactions_path.empty() && cfg.interactions_path.is_relative()) {
    cfg.interactions_path = base / cfg.interactions_path;
  }
  return cfg;
}

std::string config_fingerprint(const RunConfig& cfg) {
  auto j = config_to_json(cfg);
  j.erase("out");
  j["eval"].erase("threads");
  std::uint64_t h = 0;
  for (unsigned char c : j.dump()) h = mix64(h ^ c);
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

PreparedData prepare_data(const RunConfig& cfg) {
  cfg.validate();
  PreparedData data;
  if (cfg.synthetic) {
    auto synth = generate_synthetic(*cfg.synthetic);
    data.corpus = std::move(synth.corpus);
    data.planted = std::move(synth.groups);
  } else {
    data.corpus = ingest(cfg.items_path, cfg.interactions_path);
  }
  data.split = chronological_split(data.corpus.logs);
  if (data.split.train.empty()) throw std::runtime_error("prepare_data: no training samples");
  return data;
}

std::vector<GroupLabeling> build_labelings(const RunConfig& cfg, const PreparedData& data) {
  std::vector<GroupLabeling> out;
  for (const auto& name : cfg.dimensions) {
    LabelingOptions options;
    options.num_classes = cfg.classes_for(name);
    options.title_dim = cfg.title_dim;
    options.cf = cfg.cf;
    out.push_back(build_labeling(parse_dimension(name), data.corpus.items, data.split.train,
                                 options, cfg.seed));
  }
  return out;
}

VerifierBankConfig bank_config(const RunConfig& cfg, const std::vector<GroupLabeling>& labelings) {
  VerifierBankConfig bc;
  bc.d_model = cfg.model.d_model;
  for (const auto& l : labelings) bc.verifiers.push_back({l.dimension, l.num_classes});
  bc.hidden_layers = cfg.verifier_hidden_layers;
  bc.hidden_width = cfg.verifier_hidden_width;
  bc.epsilon = cfg.epsilon;
  bc.use_router = cfg.use_router;
  bc.seed = cfg.seed;
  return bc;
}

ModelConfig model_config(const RunConfig& cfg, const PreparedData& data) {
  ModelConfig mc = cfg.model;
  mc.n_items = static_cast<int>(data.corpus.items.size());
  mc.seed = cfg.seed;
  return mc;
}

StageOutputs run_after_pretrain(const RunConfig& cfg, const PreparedData& data,
                                const std::vector<GroupLabeling>& labelings,
                                const Backbone& pretrained) {
  const int m = cfg.model.reasoning_steps;
  StageOutputs out;
  out.backbone.emplace(pretrained.clone());
  if (cfg.use_verifier && m > 0) {
    out.bank.emplace(bank_config(cfg, labelings));
    if (cfg.pretrain_verifiers) {
      out.verifier_data = collect_verifier_dataset(*out.backbone, data.split.train, labelings, m);
      out.verifier_logs = pretrain_verifiers(*out.bank, out.verifier_data, cfg.train);
    }
  }
  out.finetune = finetune(*out.backbone, out.bank ? &*out.bank : nullptr, data.split.train,
                          labelings, cfg.train, m, &data.split.valid);
  return out;
}

ExperimentResult run_experiment(const RunConfig& cfg) {
  const auto data = prepare_data(cfg);
  const auto labelings = cfg.use_verifier ? build_labelings(cfg, data) : std::vector<GroupLabeling>{};
  Backbone backbone(model_config(cfg, data));
  const auto pretrain = pretrain_backbone(backbone, data.split.train, cfg.train,
                                          cfg.model.reasoning_steps, &data.split.valid);
  ExperimentResult result;
  result.stages = run_after_pretrain(cfg, data, labelings, backbone);
  result.stages.pretrain = pretrain;
  EvalOptions eo;
  eo.ks = cfg.ks;
  eo.threads = cfg.threads;
  const auto* bank = result.stages.bank ? &*result.stages.bank : nullptr;
  result.valid = evaluate(*result.stages.backbone, bank, data.split.valid, cfg.model.reasoning_steps, eo);
  result.test = evaluate(*result.stages.backbone, bank, data.split.test, cfg.model.reasoning_steps, eo);
  return result;
}

}  // namespace vrec
