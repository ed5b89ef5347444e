#include "vrec/labeling.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include "json.hpp"

#include "vrec/rng.hpp"

namespace vrec {
namespace {

double squared_distance(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double diff = a[j] - b[j];
    s += diff * diff;
  }
  return s;
}

std::uint64_t fnv1a(std::string_view text, std::uint64_t seed) {
  std::uint64_t h = 0xCBF29CE484222325ULL ^ mix64(seed);
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

void normalize_rows(Matrix& m) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    double* r = m.row(i);
    double n = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) n += r[j] * r[j];
    n = std::sqrt(n);
    if (n > 0.0)
      for (std::size_t j = 0; j < m.cols; ++j) r[j] /= n;
  }
}

}  // namespace

GroupLabeling label_by_category(const std::vector<Item>& items) {
  GroupLabeling out;
  out.dimension = "category";
  std::map<std::string, int> index;
  for (const auto& item : items) {
    if (!item.category) {
      throw std::invalid_argument("label_by_category: item " + std::to_string(item.id) +
                                  " has no category");
    }
    auto [it, inserted] = index.emplace(*item.category, static_cast<int>(index.size()));
    out.labels.push_back(it->second);
  }
  out.num_classes = static_cast<int>(index.size());
  return out;
}

TitleEmbedding embed_titles(const std::vector<Item>& items, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw std::invalid_argument("embed_titles: dim must be positive");
  TitleEmbedding out;
  out.vectors = Matrix(items.size(), dim);
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::string title = items[i].title.value_or("");
    if (title.empty()) {
      ++out.empty_titles;
      continue;
    }
    std::transform(title.begin(), title.end(), title.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    double* row = out.vectors.row(i);
    if (title.size() < 3) {
      row[fnv1a(title, seed) % dim] += 1.0;
    } else {
      for (std::size_t p = 0; p + 3 <= title.size(); ++p) {
        row[fnv1a(std::string_view(title).substr(p, 3), seed) % dim] += 1.0;
      }
    }
  }
  normalize_rows(out.vectors);
  return out;
}

double CfModel::score(int user, const std::vector<int>& history, int item) const {
  const std::size_t d = item_embeddings.cols;
  std::vector<double> q(user_embeddings.row(static_cast<std::size_t>(user)),
                        user_embeddings.row(static_cast<std::size_t>(user)) + d);
  for (int h : history) {
    const double* v = item_embeddings.row(static_cast<std::size_t>(h));
    for (std::size_t j = 0; j < d; ++j) q[j] += v[j] / static_cast<double>(history.size());
  }
  const double* v = item_embeddings.row(static_cast<std::size_t>(item));
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) s += q[j] * v[j];
  return s;
}

CfModel train_cf(const std::vector<Sample>& samples, std::size_t n_items,
                 const CfOptions& options) {
  if (samples.empty()) throw std::invalid_argument("train_cf: no training samples");
  if (n_items < 2) throw std::invalid_argument("train_cf: need at least two items");
  int n_users = 0;
  for (const auto& s : samples) n_users = std::max(n_users, s.user + 1);

  const std::size_t d = options.dim;
  CfModel model;
  model.item_embeddings = Matrix(n_items, d);
  model.user_embeddings = Matrix(static_cast<std::size_t>(n_users), d);
  Rng init(options.seed, 0);
  for (auto& v : model.item_embeddings.values) v = init.normal(0.0, 0.1);
  for (auto& v : model.user_embeddings.values) v = init.normal(0.0, 0.1);

  auto draw_negative = [n_items](Rng& rng, int target) {
    auto j = static_cast<int>(rng.below(n_items - 1));
    return j >= target ? j + 1 : j;
  };

  {
    Rng neg(options.seed, 1);
    double total = 0.0;
    for (const auto& s : samples) {
      const int j = draw_negative(neg, s.target);
      total += softplus(-(model.score(s.user, s.history, s.target) -
                          model.score(s.user, s.history, j)));
    }
    model.epoch_loss.push_back(total / static_cast<double>(samples.size()));
  }

  std::vector<std::size_t> order(samples.size());
  std::vector<double> q(d), dq(d);
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    Rng rng(options.seed, 100 + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    double total = 0.0;
    for (auto idx : order) {
      const auto& s = samples[idx];
      const int j = draw_negative(rng, s.target);
      double* u = model.user_embeddings.row(static_cast<std::size_t>(s.user));
      double* vp = model.item_embeddings.row(static_cast<std::size_t>(s.target));
      double* vn = model.item_embeddings.row(static_cast<std::size_t>(j));
      const double inv_h = 1.0 / static_cast<double>(std::max<std::size_t>(1, s.history.size()));
      for (std::size_t k = 0; k < d; ++k) q[k] = u[k];
      for (int h : s.history) {
        const double* v = model.item_embeddings.row(static_cast<std::size_t>(h));
        for (std::size_t k = 0; k < d; ++k) q[k] += v[k] * inv_h;
      }
      double x = 0.0;
      for (std::size_t k = 0; k < d; ++k) x += q[k] * (vp[k] - vn[k]);
      total += softplus(-x);
      const double gx = -sigmoid(-x);  // d loss / d x
      for (std::size_t k = 0; k < d; ++k) dq[k] = gx * (vp[k] - vn[k]);
      const double lr = options.lr, l2 = options.l2;
      for (std::size_t k = 0; k < d; ++k) {
        const double gp = gx * q[k];
        vp[k] -= lr * (gp + l2 * vp[k]);
        vn[k] -= lr * (-gp + l2 * vn[k]);
        u[k] -= lr * (dq[k] + l2 * u[k]);
      }
      for (int h : s.history) {
        double* v = model.item_embeddings.row(static_cast<std::size_t>(h));
        for (std::size_t k = 0; k < d; ++k) v[k] -= lr * dq[k] * inv_h;
      }
    }
    model.epoch_loss.push_back(total / static_cast<double>(samples.size()));
  }
  return model;
}

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, int max_iters) {
  const std::size_t n = points.rows, d = points.cols;
  if (k == 0 || k > n) {
    throw std::invalid_argument("kmeans: k=" + std::to_string(k) + " must lie in [1, " +
                                std::to_string(n) + "]");
  }
  KMeansResult res;
  res.centers = Matrix(k, d);
  Rng rng(seed, 7);

  // k-means++ seeding
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t first = rng.below(n);
  std::copy_n(points.row(first), d, res.centers.row(0));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points.row(i), res.centers.row(c - 1), d));
      total += nearest[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        if (nearest[i] > 0.0 && target < nearest[i]) {
          pick = i;
          break;
        }
        target -= nearest[i];
      }
    } else {
      pick = rng.below(n);
    }
    std::copy_n(points.row(pick), d, res.centers.row(c));
  }

  std::vector<int> assign(n, -1);
  std::vector<double> dist(n, 0.0);
  auto assign_all = [&]() {
    bool changed = false;
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = squared_distance(points.row(i), res.centers.row(0), d);
      for (std::size_t c = 1; c < k; ++c) {
        const double dc = squared_distance(points.row(i), res.centers.row(c), d);
        if (dc < best_d) {
          best_d = dc;
          best = static_cast<int>(c);
        }
      }
      changed = changed || assign[i] != best;
      assign[i] = best;
      dist[i] = best_d;
      objective += best_d;
    }
    res.objective.push_back(objective);
    return changed;
  };

  assign_all();
  for (int iter = 0; iter < max_iters; ++iter) {
    res.iterations = iter + 1;
    std::vector<std::size_t> counts(k, 0);
    std::fill(res.centers.values.begin(), res.centers.values.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[static_cast<std::size_t>(assign[i])];
      double* c = res.centers.row(static_cast<std::size_t>(assign[i]));
      for (std::size_t j = 0; j < d; ++j) c[j] += points.row(i)[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      double* center = res.centers.row(c);
      if (counts[c] > 0) {
        for (std::size_t j = 0; j < d; ++j) center[j] /= static_cast<double>(counts[c]);
        continue;
      }
      std::size_t far = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (dist[i] > dist[far]) far = i;
      std::copy_n(points.row(far), d, center);
      dist[far] = 0.0;
    }
    if (!assign_all()) break;
  }
  res.assignments = std::move(assign);
  return res;
}

LabelDimension parse_dimension(const std::string& name) {
  if (name == "category") return LabelDimension::Category;
  if (name == "title") return LabelDimension::Title;
  if (name == "cf") return LabelDimension::Cf;
  throw std::invalid_argument("unknown labeling dimension '" + name +
                              "' (expected category, title or cf)");
}

std::string dimension_name(LabelDimension dim) {
  switch (dim) {
    case LabelDimension::Category: return "category";
    case LabelDimension::Title: return "title";
    case LabelDimension::Cf: return "cf";
  }
  return "?";
}

GroupLabeling build_labeling(LabelDimension dimension, const std::vector<Item>& items,
                             const std::vector<Sample>& train, const LabelingOptions& options,
                             std::uint64_t seed) {
  if (dimension == LabelDimension::Category) return label_by_category(items);
  if (options.num_classes <= 0) throw std::invalid_argument("build_labeling: d_i must be positive");

  Matrix points;
  if (dimension == LabelDimension::Title) {
    for (const auto& item : items) {
      if (!item.title) {
        throw std::invalid_argument("build_labeling: item " + std::to_string(item.id) +
                                    " has no title");
      }
    }
    points = embed_titles(items, options.title_dim, seed).vectors;
  } else {
    auto cf_options = options.cf;
    cf_options.seed = seed;
    points = train_cf(train, items.size(), cf_options).item_embeddings;
    normalize_rows(points);
  }
  auto clusters = kmeans(points, static_cast<std::size_t>(options.num_classes), seed);
  return {dimension_name(dimension), options.num_classes, std::move(clusters.assignments)};
}

double cluster_purity(const std::vector<int>& clusters, const std::vector<int>& truth) {
  if (clusters.size() != truth.size() || clusters.empty()) {
    throw std::invalid_argument("cluster_purity: size mismatch");
  }
  std::map<int, std::map<int, std::size_t>> table;
  for (std::size_t i = 0; i < clusters.size(); ++i) ++table[clusters[i]][truth[i]];
  std::size_t agree = 0;
  for (const auto& [cluster, counts] : table) {
    std::size_t best = 0;
    for (const auto& [label, count] : counts) best = std::max(best, count);
    agree += best;
  }
  return static_cast<double>(agree) / static_cast<double>(clusters.size());
}

void write_labeling(const std::filesystem::path& path, const GroupLabeling& labeling) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << nlohmann::json{{"dimension", labeling.dimension}, {"d_i", labeling.num_classes}}.dump()
      << '\n';
  for (std::size_t i = 0; i < labeling.labels.size(); ++i) {
    out << nlohmann::json{{"item", i}, {"class", labeling.labels[i]}}.dump() << '\n';
  }
}

GroupLabeling read_labeling(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  GroupLabeling out;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty labeling file");
  auto header = nlohmann::json::parse(line);
  out.dimension = header.at("dimension").get<std::string>();
  out.num_classes = header.at("d_i").get<int>();
  std::map<int, int> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto obj = nlohmann::json::parse(line);
    const int cls = obj.at("class").get<int>();
    if (cls < 0 || cls >= out.num_classes) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": class out of range");
    }
    labels[obj.at("item").get<int>()] = cls;
  }
  for (const auto& [item, cls] : labels) {
    if (item != static_cast<int>(out.labels.size())) {
      throw std::runtime_error(path.string() + ": labeling does not cover item " +
                               std::to_string(out.labels.size()));
    }
    out.labels.push_back(cls);
  }
  return out;
}

}  // namespace vrec
