#pragma once

// Group-level preference labels for the verifiers: category passthrough,
// k-means over hashed title trigrams, and k-means over collaborative-filtering
// item embeddings.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vrec/datasets.hpp"

namespace vrec {

// Row-major N x d point set.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}
  double* row(std::size_t i) { return values.data() + i * cols; }
  const double* row(std::size_t i) const { return values.data() + i * cols; }
};

GroupLabeling label_by_category(const std::vector<Item>& items);

struct TitleEmbedding {
  Matrix vectors;
  std::size_t empty_titles = 0;
};

// Character trigrams of the lower-cased title hashed into `dim` buckets;
// counts are L2-normalized. Titles shorter than three characters hash as a
// single gram, empty or missing titles give a zero row.
TitleEmbedding embed_titles(const std::vector<Item>& items, std::size_t dim, std::uint64_t seed);

struct CfModel {
  Matrix item_embeddings;
  Matrix user_embeddings;
  std::vector<double> epoch_loss;  // index 0 is the loss before any update

  // (user + mean of history item embeddings) . item
  double score(int user, const std::vector<int>& history, int item) const;
};

struct CfOptions {
  std::size_t dim = 16;
  int epochs = 20;
  double lr = 0.05;
  double l2 = 1e-4;
  std::uint64_t seed = 42;
};

// Pairwise (BPR-style) factorization: the observed next item is pushed above
// one uniformly sampled negative through a logistic loss.
CfModel train_cf(const std::vector<Sample>& samples, std::size_t n_items, const CfOptions& options);

struct KMeansResult {
  std::vector<int> assignments;
  Matrix centers;
  std::vector<double> objective;  // after every Lloyd iteration
  int iterations = 0;
};

// k-means++ seeding followed by Lloyd iterations until assignments stop
// changing. An empty cluster is re-seeded at the point farthest from its
// assigned center. Distance ties go to the lowest center index.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, int max_iters = 100);

enum class LabelDimension { Category, Title, Cf };

LabelDimension parse_dimension(const std::string& name);
std::string dimension_name(LabelDimension dim);

inline constexpr int kDefaultClusterCount = 20;

struct LabelingOptions {
  int num_classes = kDefaultClusterCount;  // ignored for Category
  std::size_t title_dim = 256;
  CfOptions cf;
};

GroupLabeling build_labeling(LabelDimension dimension, const std::vector<Item>& items,
                             const std::vector<Sample>& train, const LabelingOptions& options,
                             std::uint64_t seed);

// Fraction of items whose cluster's majority planted group matches their own.
double cluster_purity(const std::vector<int>& clusters, const std::vector<int>& truth);

// {"dimension": str, "d_i": int} header, then one {"item", "class"} per line.
void write_labeling(const std::filesystem::path& path, const GroupLabeling& labeling);
GroupLabeling read_labeling(const std::filesystem::path& path);

}  // namespace vrec
