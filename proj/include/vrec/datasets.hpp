#pragma once

// Interaction ingestion, a synthetic corpus with planted item groups, and the
// per-user chronological split into next-item prediction samples.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vrec {

inline constexpr std::size_t kMaxHistory = 10;

struct Item {
  int id = 0;
  std::optional<std::string> title;
  std::optional<std::string> category;
};

struct InteractionLog {
  std::string user;
  std::vector<int> items;
  std::vector<std::int64_t> timestamps;
};

struct Sample {
  int user = 0;  // index into the log list
  std::vector<int> history;
  int target = 0;
  std::int64_t target_time = 0;
};

struct GroupLabeling {
  std::string dimension;
  int num_classes = 0;
  std::vector<int> labels;  // item id -> class

  int operator[](int item) const { return labels.at(static_cast<std::size_t>(item)); }
};

struct Corpus {
  std::vector<Item> items;
  std::vector<InteractionLog> logs;
};

// Reads the JSON-lines items and interactions files. Item ids are re-indexed
// densely in ascending order of the original id; each log is sorted
// by timestamp (stable). Throws std::runtime_error naming file and line.
Corpus ingest(const std::filesystem::path& items_path,
              const std::filesystem::path& interactions_path);

void write_items(const std::filesystem::path& path, const std::vector<Item>& items);
void write_interactions(const std::filesystem::path& path, const std::vector<InteractionLog>& logs);

struct SynthConfig {
  int n_users = 200;
  int n_items = 120;
  int n_groups = 4;
  double stickiness = 0.9;
  int min_length = 21;
  int max_length = 31;
  std::uint64_t seed = 42;

  void validate() const;
};

struct SyntheticCorpus {
  Corpus corpus;
  GroupLabeling groups;  // planted ground truth
};

// Each user walks a sticky Markov chain over groups: stay with probability
// `stickiness`, otherwise jump uniformly to one of the other groups. Items are
// drawn uniformly inside the current group. Item i belongs to group
// i * n_groups / n_items. Titles share a per-group keyword; categories name
// the group.
SyntheticCorpus generate_synthetic(const SynthConfig& cfg);

struct Split {
  std::vector<Sample> train;
  std::vector<Sample> valid;
  std::vector<Sample> test;
  std::size_t skipped_users = 0;
};

// Per user, prediction points are positions 1..L-1. The last floor(0.1 n)
// go to test, the floor(0.1 n) before them to valid, the rest to train.
// Histories keep the most recent kMaxHistory items. Logs shorter than 3 are
// skipped and counted.
Split chronological_split(const std::vector<InteractionLog>& logs);

}  // namespace vrec
