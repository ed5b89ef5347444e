#include "vrec/harness.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include "vrec/reasoning.hpp"

namespace vrec {

using nlohmann::json;

const std::vector<std::string>& known_variants() {
  static const std::vector<std::string> names{"full",   "w/o-verifier", "single-v-c", "single-v-t",
                                              "single-v-cf", "w/o-lm",   "w/o-router", "w/o-pretrain"};
  return names;
}

RunConfig apply_variant(const RunConfig& base, const std::string& variant) {
  RunConfig c = base;
  if (variant == "full") {
  } else if (variant == "w/o-verifier") {
    c.use_verifier = false;
  } else if (variant == "single-v-c") {
    c.dimensions = {"category"};
  } else if (variant == "single-v-t") {
    c.dimensions = {"title"};
  } else if (variant == "single-v-cf") {
    c.dimensions = {"cf"};
  } else if (variant == "w/o-lm") {
    c.train.gamma = 0.0;
  } else if (variant == "w/o-router") {
    c.use_router = false;
  } else if (variant == "w/o-pretrain") {
    c.pretrain_verifiers = false;
  } else {
    throw std::invalid_argument("unknown variant '" + variant + "'");
  }
  return c;
}

namespace {

Backbone pretrain(const RunConfig& cfg, const PreparedData& data) {
  Backbone backbone(model_config(cfg, data));
  pretrain_backbone(backbone, data.split.train, cfg.train, cfg.model.reasoning_steps, &data.split.valid);
  return backbone;
}

ReportRow finish(const RunConfig& cfg, const PreparedData& data, const Backbone& pretrained,
                 std::string series, std::string value) {
  const auto labelings = cfg.use_verifier ? build_labelings(cfg, data) : std::vector<GroupLabeling>{};
  const auto stages = run_after_pretrain(cfg, data, labelings, pretrained);
  EvalOptions eo;
  eo.ks = cfg.ks;
  eo.threads = cfg.threads;
  const auto* bank = stages.bank ? &*stages.bank : nullptr;
  ReportRow row{std::move(series), std::move(value), {}, {}};
  row.valid = evaluate(*stages.backbone, bank, data.split.valid, cfg.model.reasoning_steps, eo);
  row.test = evaluate(*stages.backbone, bank, data.split.test, cfg.model.reasoning_steps, eo);
  return row;
}

std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

std::vector<ReportRow> ablate(const RunConfig& base, const std::vector<std::string>& variants) {
  std::vector<RunConfig> configs{base};
  for (const auto& v : variants) configs.push_back(apply_variant(base, v));
  const auto data = prepare_data(base);
  for (auto& c : configs) c.validate();
  const auto pretrained = pretrain(base, data);
  std::vector<ReportRow> rows;
  rows.push_back(finish(configs[0], data, pretrained, "full", ""));
  for (std::size_t i = 0; i < variants.size(); ++i) {
    rows.push_back(finish(configs[i + 1], data, pretrained, variants[i], ""));
  }
  return rows;
}

const std::vector<std::string>& known_sweep_params() {
  static const std::vector<std::string> names{"beta", "gamma", "alpha", "d_i", "verifier-width",
                                              "verifier-depth"};
  return names;
}

RunConfig apply_sweep_value(const RunConfig& base, const std::string& param, const std::string& value) {
  RunConfig c = base;
  auto as_double = [&] {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size()) throw std::invalid_argument("sweep " + param + ": bad value '" + value + "'");
    return v;
  };
  auto as_int = [&] {
    const double v = as_double();
    if (v != static_cast<int>(v)) throw std::invalid_argument("sweep " + param + ": expected integer, got " + value);
    return static_cast<int>(v);
  };
  if (param == "beta") {
    c.train.beta = as_double();
  } else if (param == "gamma") {
    c.train.gamma = as_double();
  } else if (param == "alpha") {
    c.train.alpha = as_double();
  } else if (param == "d_i") {
    // Either a class count for every clustered dimension or a "+"-joined
    // list of dimensions, e.g. "category+title+cf".
    if (!value.empty() && std::isdigit(static_cast<unsigned char>(value[0]))) {
      const int k = as_int();
      for (const auto& d : c.dimensions) c.num_classes[d] = k;
    } else {
      c.dimensions.clear();
      std::stringstream ss(value);
      std::string part;
      while (std::getline(ss, part, '+')) c.dimensions.push_back(part);
    }
  } else if (param == "verifier-width") {
    c.verifier_hidden_width = as_int();
  } else if (param == "verifier-depth") {
    // Depth counts the last layer, so depth h means h-1 hidden layers.
    const int h = as_int();
    if (h < 1) throw std::invalid_argument("sweep verifier-depth: depth must be >= 1");
    c.verifier_hidden_layers = h - 1;
  } else {
    throw std::invalid_argument("unknown sweep parameter '" + param + "'");
  }
  return c;
}

std::vector<ReportRow> sweep(const RunConfig& base, const std::string& param,
                             const std::vector<std::string>& values) {
  if (values.empty()) throw std::invalid_argument("sweep: no values given");
  std::vector<RunConfig> configs;
  for (const auto& v : values) {
    configs.push_back(apply_sweep_value(base, param, v));
    configs.back().validate();
  }
  // None of the swept parameters touches the backbone pre-training stage.
  const auto data = prepare_data(base);
  const auto pretrained = pretrain(base, data);
  std::vector<ReportRow> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    rows.push_back(finish(configs[i], data, pretrained, param, values[i]));
  }
  return rows;
}

std::vector<ReportRow> step_scalability(const RunConfig& base, const std::vector<int>& steps) {
  const auto data = prepare_data(base);
  std::vector<ReportRow> rows;
  for (int m : steps) {
    if (m < 0) throw std::invalid_argument("step-scan: negative step count");
    RunConfig c = base;
    c.model.reasoning_steps = m;
    const auto pretrained = pretrain(c, data);
    rows.push_back(finish(c, data, pretrained, "steps", std::to_string(m)));
  }
  return rows;
}

TimingReport timing_overhead(const Backbone& backbone, const VerifierBank& bank,
                             const std::vector<Sample>& samples, const std::vector<int>& steps,
                             std::size_t min_samples, std::size_t warmup) {
  if (samples.empty()) throw std::invalid_argument("bench: no samples");
  using clock = std::chrono::steady_clock;
  NoGradGuard no_grad;
  TimingReport report;
  report.samples = std::max<std::size_t>(min_samples, 1);
  report.warmup = warmup;

  auto time_one = [&](const VerifierBank* b, const Sample& s, int m) {
    const auto start = clock::now();
    const auto result = run_reasoning(backbone, b, s.history, m);
    const int item = recommend_greedy(backbone, result);
    const auto stop = clock::now();
    if (item < 0) throw std::logic_error("bench: invalid recommendation");
    return std::chrono::duration<double>(stop - start).count();
  };
  auto median = [](std::vector<double> v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    const double hi = *mid;
    return 0.5 * (hi + *std::max_element(v.begin(), mid));
  };

  for (int m : steps) {
    for (std::size_t i = 0; i < warmup; ++i) {
      const auto& s = samples[i % samples.size()];
      time_one(nullptr, s, m);
      time_one(&bank, s, m);
    }
    std::vector<double> without, with;
    for (std::size_t i = 0; i < report.samples; ++i) {
      const auto& s = samples[i % samples.size()];
      // Alternate the order so neither condition always runs on a warm cache.
      if (i % 2 == 0) {
        without.push_back(time_one(nullptr, s, m));
        with.push_back(time_one(&bank, s, m));
      } else {
        with.push_back(time_one(&bank, s, m));
        without.push_back(time_one(nullptr, s, m));
      }
    }
    TimingRow row;
    row.m = m;
    row.seconds_without = median(without);
    row.seconds_with = median(with);
    row.overhead_percent = 100.0 * (row.seconds_with - row.seconds_without) / row.seconds_without;
    report.rows.push_back(row);
  }
  return report;
}

void write_rows_csv(const std::filesystem::path& path, const std::vector<ReportRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto ks = rows.empty() ? std::vector<int>{} : rows.front().test.ks;
  out << "series,value,split,count";
  for (int k : ks) out << ",recall@" << k << ",ndcg@" << k;
  out << ",fingerprint\n";
  for (const auto& r : rows) {
    for (const auto* split : {&r.valid, &r.test}) {
      out << r.series << ',' << r.value << ',' << (split == &r.valid ? "valid" : "test") << ','
          << split->count;
      for (int k : ks) out << ',' << format_number(split->recall_at(k)) << ',' << format_number(split->ndcg_at(k));
      out << ',' << split->fingerprint << '\n';
    }
  }
}

namespace {

json metrics_json(const MetricsReport& m) {
  json j{{"count", m.count}, {"fingerprint", m.fingerprint}, {"wall_seconds", m.wall_seconds}};
  for (int k : m.ks) {
    j["recall@" + std::to_string(k)] = m.recall_at(k);
    j["ndcg@" + std::to_string(k)] = m.ndcg_at(k);
  }
  return j;
}

}  // namespace

json rows_json(const std::vector<ReportRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"series", r.series}, {"value", r.value}, {"valid", metrics_json(r.valid)},
                   {"test", metrics_json(r.test)}});
  }
  return out;
}

void write_plot_csv(const std::filesystem::path& path, const std::vector<ReportRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "x,y,series\n";
  for (const auto& r : rows) {
    const std::string x = r.value.empty() ? r.series : r.value;
    for (int k : r.test.ks) {
      out << x << ',' << format_number(r.test.recall_at(k)) << ",recall@" << k << '\n';
      out << x << ',' << format_number(r.test.ndcg_at(k)) << ",ndcg@" << k << '\n';
    }
  }
}

void write_timing_csv(const std::filesystem::path& path, const TimingReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "m,seconds_without,seconds_with,overhead_percent\n";
  for (const auto& r : report.rows) {
    out << r.m << ',' << format_number(r.seconds_without) << ',' << format_number(r.seconds_with) << ','
        << format_number(r.overhead_percent) << '\n';
  }
}

json timing_json(const TimingReport& report) {
  json rows = json::array();
  double sum = 0.0;
  for (const auto& r : report.rows) {
    rows.push_back({{"m", r.m},
                    {"seconds_without", r.seconds_without},
                    {"seconds_with", r.seconds_with},
                    {"overhead_percent", r.overhead_percent}});
    sum += r.overhead_percent;
  }
  return {{"rows", rows},
          {"samples", report.samples},
          {"warmup", report.warmup},
          {"mean_overhead_percent", report.rows.empty() ? 0.0 : sum / static_cast<double>(report.rows.size())},
          {"reference",
           {{"overhead_percent", report.reference_overhead_percent},
            {"note", "published LLM-scale average; not reproducible at this scale"}}}};
}

}  // namespace vrec
