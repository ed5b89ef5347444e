#pragma once

// Experiment harnesses: ablation matrix, hyper-parameter sweeps, reasoning
// step scans and the verifier timing benchmark, plus their CSV/JSON reports.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "vrec/experiment.hpp"

namespace vrec {

struct ReportRow {
  std::string series;  // variant name, swept parameter or "steps"
  std::string value;   // swept value; empty for ablation rows
  MetricsReport valid;
  MetricsReport test;
};

// "full", "w/o-verifier", "single-v-c", "single-v-t", "single-v-cf",
// "w/o-lm", "w/o-router", "w/o-pretrain".
const std::vector<std::string>& known_variants();
RunConfig apply_variant(const RunConfig& base, const std::string& variant);

// One row for the base configuration ("full") followed by one per variant.
// All rows start from the same pre-trained backbone.
std::vector<ReportRow> ablate(const RunConfig& base, const std::vector<std::string>& variants);

// beta | gamma | alpha | d_i | verifier-width | verifier-depth
const std::vector<std::string>& known_sweep_params();
RunConfig apply_sweep_value(const RunConfig& base, const std::string& param, const std::string& value);
std::vector<ReportRow> sweep(const RunConfig& base, const std::string& param,
                             const std::vector<std::string>& values);

// Full pipeline per reasoning-step count; m = 0 trains the plain backbone.
std::vector<ReportRow> step_scalability(const RunConfig& base, const std::vector<int>& steps);

struct TimingRow {
  int m = 0;
  double seconds_without = 0.0;  // median per-sample seconds
  double seconds_with = 0.0;
  double overhead_percent = 0.0;
};

struct TimingReport {
  std::vector<TimingRow> rows;
  std::size_t samples = 0;
  std::size_t warmup = 0;
  double reference_overhead_percent = 0.59;  // published average, context only
};

TimingReport timing_overhead(const Backbone& backbone, const VerifierBank& bank,
                             const std::vector<Sample>& samples, const std::vector<int>& steps,
                             std::size_t min_samples = 100, std::size_t warmup = 10);

void write_rows_csv(const std::filesystem::path& path, const std::vector<ReportRow>& rows);
nlohmann::json rows_json(const std::vector<ReportRow>& rows);
// (x, y, series) rows with y = test Recall@K for every K.
void write_plot_csv(const std::filesystem::path& path, const std::vector<ReportRow>& rows);
void write_timing_csv(const std::filesystem::path& path, const TimingReport& report);
nlohmann::json timing_json(const TimingReport& report);

}  // namespace vrec
