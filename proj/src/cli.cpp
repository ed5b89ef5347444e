#include "vrec/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"

#include "vrec/checkpoint.hpp"
#include "vrec/experiment.hpp"
#include "vrec/harness.hpp"
#include "vrec/reasoning.hpp"

namespace vrec {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> m;
  std::string steps;
  std::string variants;
  std::string param;
  std::string values;
  std::string checkpoint;
  std::size_t samples = 0;
  bool vectors = false;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

std::vector<int> split_ints(const std::string& text) {
  std::vector<int> out;
  for (const auto& p : split_list(text)) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(p, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != p.size()) throw UsageError("expected a comma-separated integer list, got '" + text + "'");
    out.push_back(v);
  }
  return out;
}

// Config file < VREC_SEED < --seed; --out and --m override the file too.
RunConfig resolve_config(const Flags& f) {
  if (f.config.empty()) throw UsageError("--config is required for this command");
  RunConfig cfg = load_config(f.config);
  if (const char* env = std::getenv("VREC_SEED"); env && *env) {
    try {
      cfg.apply_seed(std::stoull(env));
    } catch (const std::exception&) {
      throw UsageError(std::string("VREC_SEED is not an unsigned integer: ") + env);
    }
  }
  if (f.seed) cfg.apply_seed(*f.seed);
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (f.m) {
    if (*f.m < 0) throw UsageError("--m must be non-negative");
    cfg.model.reasoning_steps = *f.m;
  }
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  return cfg;
}

fs::path ckpt_dir(const RunConfig& cfg) {
  const auto dir = cfg.out_dir / "checkpoints";
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_train_log(const fs::path& path, const TrainReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,L_r,L_v,L_m,total,val_recall@5,wall_seconds\n";
  out << std::setprecision(10);
  for (const auto& e : report.epochs) {
    out << e.epoch << ',' << e.rec_loss << ',' << e.verifier_loss << ',' << e.mono_loss << ',' << e.total
        << ',' << e.val_recall5 << ',' << e.wall_seconds << '\n';
  }
}

void write_verifier_log(const fs::path& path, const std::vector<VerifierEpochLog>& logs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,L_v,positive_accuracy,negative_entropy,negative_entropy_normalized,positives,negatives\n";
  out << std::setprecision(10);
  for (const auto& l : logs) {
    const auto& s = l.stats;
    out << l.epoch << ',' << s.loss << ',' << s.positive_accuracy << ',' << s.negative_entropy << ','
        << s.negative_entropy_normalized << ',' << s.positives << ',' << s.negatives << '\n';
  }
}

std::vector<GroupLabeling> labelings_for(const RunConfig& cfg, const PreparedData& data) {
  return cfg.use_verifier ? build_labelings(cfg, data) : std::vector<GroupLabeling>{};
}

Backbone load_backbone(const fs::path& path, const RunConfig& cfg) {
  auto ckpt = load_checkpoint(path);
  if (!ckpt.backbone) throw std::runtime_error(path.string() + ": no backbone stored");
  if (ckpt.backbone->config().seed != cfg.seed) {
    throw std::runtime_error(path.string() + ": checkpoint was trained with seed " +
                             std::to_string(ckpt.backbone->config().seed) + ", config asks for " +
                             std::to_string(cfg.seed));
  }
  return std::move(*ckpt.backbone);
}

json verifier_sample_json(const VerifierSample& s) {
  return {{"target", s.target},
          {"predicted", s.predicted},
          {"labels", s.labels ? json(*s.labels) : json(nullptr)},
          {"steps", s.steps}};
}

std::vector<VerifierSample> read_verifier_data(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string() + " (run collect-verifier-data first)");
  std::vector<VerifierSample> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      VerifierSample s;
      s.target = j.at("target").get<int>();
      s.predicted = j.at("predicted").get<int>();
      if (!j.at("labels").is_null()) s.labels = j["labels"].get<std::vector<int>>();
      s.steps = j.at("steps").get<std::vector<std::vector<double>>>();
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void write_metrics(const fs::path& dir, const MetricsReport& valid, const MetricsReport& test,
                   const RunConfig& cfg) {
  ReportRow row{"eval", "", valid, test};
  write_rows_csv(dir / "metrics.csv", {row});
  auto j = rows_json({row}).at(0);
  j["config_fingerprint"] = config_fingerprint(cfg);
  j["m"] = cfg.model.reasoning_steps;
  write_json(dir / "metrics.json", j);
}

int cmd_gen_data(const Flags& f, std::ostream& out) {
  const auto cfg = resolve_config(f);
  if (!cfg.synthetic) throw UsageError("gen-data needs a config with data.synthetic");
  const auto synth = generate_synthetic(*cfg.synthetic);
  const auto dir = cfg.out_dir / "data";
  fs::create_directories(dir);
  write_items(dir / "items.jsonl", synth.corpus.items);
  write_interactions(dir / "interactions.jsonl", synth.corpus.logs);
  write_labeling(dir / "planted.jsonl", synth.groups);
  out << "wrote " << synth.corpus.items.size() << " items and " << synth.corpus.logs.size()
      << " interaction logs to " << dir.string() << '\n';
  return 0;
}

int cmd_label(const Flags& f, std::ostream& out) {
  const auto cfg = resolve_config(f);
  const auto data = prepare_data(cfg);
  const auto dir = cfg.out_dir / "labelings";
  fs::create_directories(dir);
  for (const auto& l : build_labelings(cfg, data)) {
    write_labeling(dir / (l.dimension + ".jsonl"), l);
    out << l.dimension << ": d_i=" << l.num_classes;
    if (data.planted) out << " purity vs planted groups " << cluster_purity(l.labels, data.planted->labels);
    out << '\n';
  }
  return 0;
}

int cmd_pretrain_backbone(const Flags& f, std::ostream& out) {
  const auto cfg = resolve_config(f);
  const auto data = prepare_data(cfg);
  Backbone backbone(model_config(cfg, data));
  const auto report = pretrain_backbone(backbone, data.split.train, cfg.train, cfg.model.reasoning_steps,
                                        &data.split.valid);
  save_checkpoint(ckpt_dir(cfg) / "backbone.ckpt", &backbone, nullptr);
  write_train_log(cfg.out_dir / "pretrain_log.csv", report);
  out << "backbone: " << backbone.parameter_count() << " parameters, final L_r "
      << report.epochs.back().rec_loss << '\n';
  return 0;
}

int cmd_collect(const Flags& f, std::ostream& out) {
  const auto cfg = resolve_config(f);
  const auto data = prepare_data(cfg);
  const auto labelings = build_labelings(cfg, data);
  const auto backbone = load_backbone(ckpt_dir(cfg) / "backbone.ckpt", cfg);
  const auto dataset = collect_verifier_dataset(backbone, data.split.train, labelings, cfg.model.reasoning_steps);
  std::ofstream file(cfg.out_dir / "verifier_data.jsonl");
  std::size_t positives = 0;
  for (const auto& s : dataset) {
    file << verifier_sample_json(s).dump() << '\n';
    positives += s.labels.has_value();
  }
  if (!file) throw std::runtime_error("failed writing verifier_data.jsonl");
  out << "verifier data: " << positives << " positives, " << dataset.size() - positives << " negatives\n";
  return 0;
}

int cmd_pretrain_verifiers(const Flags& f, std::ostream& out) {
  const auto cfg = resolve_config(f);
  const auto data = prepare_data(cfg);
  const auto labelings = build_labelings(cfg, data);
  const auto dataset = read_verifier_data(cfg.out_dir / "verifier_data.jsonl");
  VerifierBank bank(bank_config(cfg, labelings));
  const auto logs = pretrain_verifiers(bank, dataset, cfg.train);
  save_checkpoint(ckpt_dir(cfg) / "verifiers.ckpt", nullptr, &bank);
  write_verifier_log(cfg.out_dir / "verifier_log.csv", logs);
  const auto& s = logs.back().stats;
  out << "verifiers: positive accuracy " << s.positive_accuracy << ", negative entropy "
      << s.negative_entropy_normalized << " of the maximum\n";
  return 0;
}

int cmd_finetune(const Flags& f, std::ostream& out) {
  const auto cfg = resolve_config(f);
  const auto data = prepare_data(cfg);
  const auto labelings = labelings_for(cfg, data);
  auto backbone = load_backbone(ckpt_dir(cfg) / "backbone.ckpt", cfg);
  std::optional<VerifierBank> bank;
  if (cfg.use_verifier && cfg.model.reasoning_steps > 0) {
    if (cfg.pretrain_verifiers) {
      auto ckpt = load_checkpoint(ckpt_dir(cfg) / "verifiers.ckpt");
      if (!ckpt.bank) throw std::runtime_error("verifiers.ckpt holds no verifier bank");
      bank.emplace(std::move(*ckpt.bank));
      bank->set_use_router(cfg.use_router);
    } else {
      bank.emplace(bank_config(cfg, labelings));
    }
  }
  const auto report = finetune(backbone, bank ? &*bank : nullptr, data.split.train, labelings, cfg.train,
                               cfg.model.reasoning_steps, &data.split.valid);
  save_checkpoint(ckpt_dir(cfg) / "vrec.ckpt", &backbone, bank ? &*bank : nullptr);
  write_train_log(cfg.out_dir / "finetune_log.csv", report);
  out << "finetune: final total loss " << report.epochs.back().total << '\n';
  return 0;
}

struct Loaded {
  Backbone backbone;
  std::optional<VerifierBank> bank;
};

Loaded load_model(const Flags& f, const RunConfig& cfg) {
  const fs::path path = f.checkpoint.empty() ? ckpt_dir(cfg) / "vrec.ckpt" : fs::path(f.checkpoint);
  auto ckpt = load_checkpoint(path);
  if (!ckpt.backbone) throw std::runtime_error(path.string() + ": no backbone stored");
  Loaded l{std::move(*ckpt.backbone), std::move(ckpt.bank)};
  if (l.bank) l.bank->set_use_router(cfg.use_router);
  return l;
}

int cmd_eval(const Flags& f, std::ostream& out) {
  const auto cfg = resolve_config(f);
  const auto data = prepare_data(cfg);
  const auto model = load_model(f, cfg);
  EvalOptions eo;
  eo.ks = cfg.ks;
  eo.threads = cfg.threads;
  const auto* bank = model.bank ? &*model.bank : nullptr;
  const int m = cfg.model.reasoning_steps;
  const auto valid = evaluate(model.backbone, bank, data.split.valid, m, eo);
  const auto test = evaluate(model.backbone, bank, data.split.test, m, eo);
  write_metrics(cfg.out_dir, valid, test, cfg);
  for (int k : cfg.ks) {
    out << "test recall@" << k << " " << test.recall_at(k) << "  ndcg@" << k << " " << test.ndcg_at(k) << '\n';
  }
  return 0;
}

void emit_rows(const fs::path& dir, const std::string& stem, const std::vector<ReportRow>& rows,
               std::ostream& out) {
  write_rows_csv(dir / (stem + ".csv"), rows);
  write_json(dir / (stem + ".json"), rows_json(rows));
  write_plot_csv(dir / (stem + "_plot.csv"), rows);
  for (const auto& r : rows) {
    out << r.series << (r.value.empty() ? "" : "=" + r.value) << "  test recall@5 "
        << r.test.recall_at(5) << '\n';
  }
}

int cmd_ablate(const Flags& f, std::ostream& out) {
  const auto cfg = resolve_config(f);
  const auto variants = split_list(f.variants);
  for (const auto& v : variants) {
    const auto& known = known_variants();
    if (std::find(known.begin(), known.end(), v) == known.end()) throw UsageError("unknown variant '" + v + "'");
  }
  emit_rows(cfg.out_dir, "ablation", ablate(cfg, variants), out);
  return 0;
}

int cmd_sweep(const Flags& f, std::ostream& out) {
  const auto cfg = resolve_config(f);
  const auto& known = known_sweep_params();
  if (std::find(known.begin(), known.end(), f.param) == known.end()) {
    throw UsageError("--param must be one of beta, gamma, alpha, d_i, verifier-width, verifier-depth");
  }
  const auto values = split_list(f.values);
  if (values.empty()) throw UsageError("--values is required");
  emit_rows(cfg.out_dir, "sweep_" + f.param, sweep(cfg, f.param, values), out);
  return 0;
}

int cmd_step_scan(const Flags& f, std::ostream& out) {
  const auto cfg = resolve_config(f);
  const auto steps = split_ints(f.steps.empty() ? "1,2,4,6,8,10" : f.steps);
  emit_rows(cfg.out_dir, "steps", step_scalability(cfg, steps), out);
  return 0;
}

int cmd_bench(const Flags& f, std::ostream& out) {
  const auto cfg = resolve_config(f);
  const auto data = prepare_data(cfg);
  const auto steps = split_ints(f.steps.empty() ? "1,2,4,6,8,10" : f.steps);
  const fs::path path = f.checkpoint.empty() ? ckpt_dir(cfg) / "vrec.ckpt" : fs::path(f.checkpoint);
  std::optional<Backbone> backbone;
  std::optional<VerifierBank> bank;
  bool trained = false;
  if (fs::exists(path)) {
    auto model = load_model(f, cfg);
    backbone.emplace(std::move(model.backbone));
    if (model.bank) bank.emplace(std::move(*model.bank));
    trained = true;
  }
  // Timing does not depend on the parameter values, so untrained weights
  // stand in when no fine-tuned checkpoint exists.
  if (!backbone) backbone.emplace(model_config(cfg, data));
  if (!bank) bank.emplace(bank_config(cfg, build_labelings(cfg, data)));
  const auto report = timing_overhead(*backbone, *bank, data.split.test, steps,
                                      f.samples > 0 ? f.samples : 100, 10);
  write_timing_csv(cfg.out_dir / "bench.csv", report);
  auto j = timing_json(report);
  j["trained_checkpoint"] = trained;
  write_json(cfg.out_dir / "bench.json", j);
  for (const auto& r : report.rows) {
    out << "m=" << r.m << "  without " << r.seconds_without * 1e3 << " ms  with " << r.seconds_with * 1e3
        << " ms  overhead " << r.overhead_percent << "%\n";
  }
  out << "published reference average: " << report.reference_overhead_percent
      << "% (LLM scale, not reproduced here)\n";
  return 0;
}

int cmd_inspect(const Flags& f, std::ostream& out) {
  const auto cfg = resolve_config(f);
  const auto data = prepare_data(cfg);
  const auto model = load_model(f, cfg);
  const auto* bank = model.bank ? &*model.bank : nullptr;
  const int m = cfg.model.reasoning_steps;
  if (m < 1) throw UsageError("inspect needs at least one reasoning step");
  const auto& samples = data.split.test;
  const std::size_t n = f.samples > 0 ? std::min(f.samples, samples.size()) : samples.size();
  const auto dir = cfg.out_dir / "inspect";
  fs::create_directories(dir);

  NoGradGuard no_grad;
  std::vector<ReasoningTrace> traces;
  std::ofstream trace_file(dir / "traces.jsonl");
  for (std::size_t i = 0; i < n; ++i) {
    auto result = run_reasoning(model.backbone, bank, samples[i].history, m);
    write_trace_jsonl(trace_file, i, samples[i].target, result.trace, {f.vectors});
    traces.push_back(std::move(result.trace));
  }
  json summary = json::array();
  for (int t = 1; t <= m; ++t) {
    const auto h = homogeneity(traces, static_cast<std::size_t>(t));
    summary.push_back({{"step", t}, {"mean_cosine", h.mean_cosine}});
    std::ofstream proj(dir / ("projection_step" + std::to_string(t) + ".csv"));
    proj << "x,y,series\n" << std::setprecision(10);
    for (std::size_t i = 0; i < h.projection.size(); ++i) {
      proj << h.projection[i][0] << ',' << h.projection[i][1] << ",target_item_" << samples[i].target << '\n';
    }
    out << "step " << t << ": mean pairwise cosine " << h.mean_cosine << '\n';
  }
  write_json(dir / "homogeneity.json", {{"samples", n}, {"steps", summary}});
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent-reasoning recommender with a mixture of preference verifiers", "vrec"};
  app.require_subcommand(1);
  app.footer("Exit codes: 0 success, 1 runtime failure, 2 usage error.");
  Flags f;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "run configuration (JSON)");
    sub->add_option("--seed", f.seed, "override the configured seed");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--m", f.m, "number of reasoning steps");
  };
  struct Command {
    const char* name;
    const char* help;
    int (*fn)(const Flags&, std::ostream&);
  };
  const std::vector<Command> commands{
      {"gen-data", "write the synthetic corpus as JSON-lines", cmd_gen_data},
      {"label", "build group-level preference labelings", cmd_label},
      {"pretrain-backbone", "stage 0: train the reasoning backbone with L_r", cmd_pretrain_backbone},
      {"collect-verifier-data", "stage 1: greedy replay into positive/negative traces", cmd_collect},
      {"pretrain-verifiers", "stage 1: train the verifier bank on collected traces", cmd_pretrain_verifiers},
      {"finetune", "stage 2: joint fine-tuning with L_r + beta L_v + gamma L_m", cmd_finetune},
      {"eval", "Recall@K / NDCG@K on the validation and test splits", cmd_eval},
      {"ablate", "ablation matrix over --variants", cmd_ablate},
      {"sweep", "one run per value of --param", cmd_sweep},
      {"step-scan", "one run per reasoning-step count in --steps", cmd_step_scan},
      {"bench", "per-sample inference time with and without verification", cmd_bench},
      {"inspect", "homogeneity diagnostic, PCA projection and trace export", cmd_inspect},
  };
  std::vector<std::pair<CLI::App*, int (*)(const Flags&, std::ostream&)>> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    add_common(sub);
    subs.emplace_back(sub, c.fn);
  }
  app.get_subcommand("ablate")->add_option("--variants", f.variants,
                                           "comma list: w/o-verifier, single-v-c, single-v-t, single-v-cf, "
                                           "w/o-lm, w/o-router, w/o-pretrain");
  app.get_subcommand("sweep")->add_option("--param", f.param, "beta|gamma|alpha|d_i|verifier-width|verifier-depth")
      ->required();
  app.get_subcommand("sweep")->add_option("--values", f.values, "comma list of values")->required();
  app.get_subcommand("step-scan")->add_option("--steps", f.steps, "comma list of step counts");
  app.get_subcommand("bench")->add_option("--steps", f.steps, "comma list of step counts");
  app.get_subcommand("bench")->add_option("--samples", f.samples, "timed samples per condition (min 100)");
  for (const char* name : {"eval", "bench", "inspect"}) {
    app.get_subcommand(name)->add_option("--checkpoint", f.checkpoint, "checkpoint (default OUT/checkpoints/vrec.ckpt)");
  }
  app.get_subcommand("inspect")->add_option("--samples", f.samples, "number of test samples to trace");
  app.get_subcommand("inspect")->add_flag("--vectors", f.vectors, "include raw and adjusted vectors in traces");

  if (argc > 1 && argv[1][0] != '-' && app.get_subcommand_no_throw(argv[1]) == nullptr) {
    err << "error: unknown subcommand '" << argv[1] << "'\n\n" << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    err << '\n' << app.help();
    return 2;
  }
  if (f.samples > 0 && f.samples < 100 && app.got_subcommand("bench")) {
    err << "error: bench needs at least 100 timed samples\n";
    return 2;
  }
  for (const auto& [sub, fn] : subs) {
    if (!sub->parsed()) continue;
    try {
      return fn(f, out);
    } catch (const UsageError& e) {
      err << "error: " << e.what() << "\n\n" << sub->help();
      return 2;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return 1;
    }
  }
  return 2;
}

int run_cli(int argc, const char* const* argv) { return run_cli(argc, argv, std::cout, std::cerr); }

}  // namespace vrec
