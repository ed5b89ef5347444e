#include "vrec/datasets.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

#include "vrec/rng.hpp"

namespace vrec {
namespace {

using nlohmann::json;

[[noreturn]] void parse_error(const std::filesystem::path& path, std::size_t line,
                              const std::string& what) {
  throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + what);
}

std::optional<std::string> optional_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn fn) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
      fn(obj, lineno);
    } catch (const json::exception& e) {
      parse_error(path, lineno, e.what());
    }
  }
}

std::string make_word(Rng& rng, int syllables) {
  static constexpr char kConsonants[] = "bcdfghklmnprstvz";
  static constexpr char kVowels[] = "aeiou";
  std::string w;
  for (int s = 0; s < syllables; ++s) {
    w += kConsonants[rng.below(sizeof(kConsonants) - 1)];
    w += kVowels[rng.below(sizeof(kVowels) - 1)];
  }
  return w;
}

}  // namespace

Corpus ingest(const std::filesystem::path& items_path,
              const std::filesystem::path& interactions_path) {
  struct RawItem {
    long long id;
    std::optional<std::string> title, category;
  };
  std::vector<RawItem> raw;
  std::map<long long, std::size_t> seen;
  for_each_line(items_path, [&](const json& obj, std::size_t lineno) {
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_number_integer()) {
      parse_error(items_path, lineno, "item needs an integer \"id\"");
    }
    const long long id = obj["id"].get<long long>();
    if (!seen.emplace(id, raw.size()).second) {
      parse_error(items_path, lineno, "duplicate item id " + std::to_string(id));
    }
    raw.push_back({id, optional_string(obj, "title"), optional_string(obj, "category")});
  });

  std::vector<std::size_t> order(raw.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return raw[a].id < raw[b].id; });
  std::map<long long, int> dense;
  Corpus corpus;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& r = raw[order[k]];
    dense[r.id] = static_cast<int>(k);
    corpus.items.push_back({static_cast<int>(k), r.title, r.category});
  }

  for_each_line(interactions_path, [&](const json& obj, std::size_t lineno) {
    if (!obj.is_object() || !obj.contains("user") || !obj.contains("items") ||
        !obj.contains("timestamps")) {
      parse_error(interactions_path, lineno, "expected {\"user\", \"items\", \"timestamps\"}");
    }
    const auto ids = obj["items"].get<std::vector<long long>>();
    const auto ts = obj["timestamps"].get<std::vector<std::int64_t>>();
    if (ids.size() != ts.size()) {
      parse_error(interactions_path, lineno, "items and timestamps differ in length");
    }
    std::vector<std::pair<std::int64_t, int>> events;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto it = dense.find(ids[i]);
      if (it == dense.end()) {
        parse_error(interactions_path, lineno, "unknown item id " + std::to_string(ids[i]));
      }
      events.emplace_back(ts[i], it->second);
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    InteractionLog log;
    log.user = obj["user"].is_string() ? obj["user"].get<std::string>() : obj["user"].dump();
    for (const auto& [t, item] : events) {
      log.timestamps.push_back(t);
      log.items.push_back(item);
    }
    corpus.logs.push_back(std::move(log));
  });
  return corpus;
}

void write_items(const std::filesystem::path& path, const std::vector<Item>& items) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& item : items) {
    json obj = {{"id", item.id},
                {"title", item.title ? json(*item.title) : json(nullptr)},
                {"category", item.category ? json(*item.category) : json(nullptr)}};
    out << obj.dump() << '\n';
  }
}

void write_interactions(const std::filesystem::path& path,
                        const std::vector<InteractionLog>& logs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& log : logs) {
    json obj = {{"user", log.user}, {"items", log.items}, {"timestamps", log.timestamps}};
    out << obj.dump() << '\n';
  }
}

void SynthConfig::validate() const {
  if (n_users <= 0 || n_items <= 0 || n_groups <= 0) {
    throw std::invalid_argument("SynthConfig: counts must be positive");
  }
  if (n_groups > n_items) throw std::invalid_argument("SynthConfig: n_groups exceeds n_items");
  if (!(stickiness >= 0.0 && stickiness <= 1.0)) {
    throw std::invalid_argument("SynthConfig: stickiness must lie in [0,1]");
  }
  if (min_length < 1 || max_length < min_length) {
    throw std::invalid_argument("SynthConfig: invalid sequence-length range");
  }
}

SyntheticCorpus generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  SyntheticCorpus out;
  out.groups.dimension = "planted";
  out.groups.num_classes = cfg.n_groups;

  std::vector<std::vector<int>> members(static_cast<std::size_t>(cfg.n_groups));
  for (int i = 0; i < cfg.n_items; ++i) {
    const int g = static_cast<int>(static_cast<long long>(i) * cfg.n_groups / cfg.n_items);
    members[static_cast<std::size_t>(g)].push_back(i);
    out.groups.labels.push_back(g);
  }

  Rng names(cfg.seed, 1);
  std::vector<std::string> keywords;
  for (int g = 0; g < cfg.n_groups; ++g) keywords.push_back(make_word(names, 4));
  for (int i = 0; i < cfg.n_items; ++i) {
    const auto& kw = keywords[static_cast<std::size_t>(out.groups.labels[i])];
    const auto filler = make_word(names, 2);
    out.corpus.items.push_back({i, kw + " " + filler + " " + kw.substr(0, 5),
                                "group-" + std::to_string(out.groups.labels[i])});
  }

  for (int u = 0; u < cfg.n_users; ++u) {
    Rng rng(cfg.seed, 1000 + static_cast<std::uint64_t>(u));
    InteractionLog log;
    log.user = "u" + std::to_string(u);
    const int span = cfg.max_length - cfg.min_length + 1;
    const int length = cfg.min_length + static_cast<int>(rng.below(static_cast<std::uint64_t>(span)));
    int group = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.n_groups)));
    std::int64_t t = static_cast<std::int64_t>(rng.below(1000));
    for (int k = 0; k < length; ++k) {
      if (k > 0 && cfg.n_groups > 1 && !rng.bernoulli(cfg.stickiness)) {
        int next = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.n_groups - 1)));
        group = next >= group ? next + 1 : next;
      }
      const auto& pool = members[static_cast<std::size_t>(group)];
      log.items.push_back(pool[rng.below(pool.size())]);
      t += 1 + static_cast<std::int64_t>(rng.below(100));
      log.timestamps.push_back(t);
    }
    out.corpus.logs.push_back(std::move(log));
  }
  return out;
}

Split chronological_split(const std::vector<InteractionLog>& logs) {
  Split split;
  for (std::size_t u = 0; u < logs.size(); ++u) {
    const auto& log = logs[u];
    if (log.items.size() < 3) {
      ++split.skipped_users;
      continue;
    }
    const std::size_t n = log.items.size() - 1;
    const std::size_t n_eval = n / 10;  // floor(0.1 n)
    const std::size_t n_train = n - 2 * n_eval;
    for (std::size_t k = 1; k <= n; ++k) {
      Sample s;
      s.user = static_cast<int>(u);
      const std::size_t begin = k > kMaxHistory ? k - kMaxHistory : 0;
      s.history.assign(log.items.begin() + static_cast<std::ptrdiff_t>(begin),
                       log.items.begin() + static_cast<std::ptrdiff_t>(k));
      s.target = log.items[k];
      s.target_time = log.timestamps[k];
      const std::size_t point = k - 1;
      if (point < n_train) {
        split.train.push_back(std::move(s));
      } else if (point < n_train + n_eval) {
        split.valid.push_back(std::move(s));
      } else {
        split.test.push_back(std::move(s));
      }
    }
  }
  return split;
}

}  // namespace vrec
