#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pcrowd/datasets.hpp"
#include "pcrowd/persona_corpus.hpp"
#include "pcrowd/run_store.hpp"
#include "pcrowd/stats.hpp"

namespace pcrowd {

using Vector = std::vector<double>;

// One point in either embedding space.
struct SpacePoint {
  std::string persona_id;
  Vector vector;
};
using PersonaEmbedding = SpacePoint;
using LabelVector = SpacePoint;

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<Vector> embed(const std::vector<std::string>& texts) = 0;
};

// Lowercased alphanumeric word tokens hashed (FNV-1a) into `dimension`
// buckets, counted, then scaled to unit length.
class HashingEmbedder final : public EmbeddingProvider {
 public:
  explicit HashingEmbedder(std::size_t dimension = 384);
  std::size_t dimension() const override { return dimension_; }
  std::vector<Vector> embed(const std::vector<std::string>& texts) override;
  Vector embed_one(std::string_view text) const;

 private:
  std::size_t dimension_;
};

// POST {"texts": [...]} -> {"vectors": [[...], ...]}.
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(std::string url, std::size_t dimension,
                        std::chrono::milliseconds timeout = std::chrono::seconds(60),
                        std::size_t batch_size = 256);
  std::size_t dimension() const override { return dimension_; }
  std::vector<Vector> embed(const std::vector<std::string>& texts) override;

 private:
  std::string url_;
  std::size_t dimension_;
  std::chrono::milliseconds timeout_;
  std::size_t batch_size_;
};

std::vector<PersonaEmbedding> embed_personas(const std::vector<Persona>& personas,
                                             EmbeddingProvider& provider);

// Likert vectors in dataset instance order for every persona in the group.
// Reads T3 records; throws MissingLabelsError listing absent pairs.
std::vector<LabelVector> label_vectors(const RunStore& store,
                                       const std::vector<std::string>& persona_ids,
                                       const MultiLabelDataset& dataset);

double cosine_similarity(std::span<const double> u, std::span<const double> v);
// 1 - cos(u, v), in [0, 2]. Throws on zero vectors or dimension mismatch.
double cosine_distance(std::span<const double> u, std::span<const double> v);

struct Cluster {
  std::size_t cluster_id = 0;
  std::vector<std::string> members;
  Vector representative;  // leader (threshold) or centroid (k-means)
};

struct Clustering {
  std::vector<Cluster> clusters;
  std::vector<std::string> unassigned;

  std::size_t retained() const;
};

// Greedy leader clustering in input order. Clusters smaller than min_size
// are dissolved into `unassigned`; surviving clusters are renumbered in
// founding order.
Clustering threshold_cluster(std::span<const SpacePoint> points, double similarity_threshold,
                             std::size_t min_size);

struct KMeansResult {
  Clustering clustering;
  std::vector<std::size_t> assignment;  // per input point
  // Sum of squared distances after each assignment step.
  std::vector<double> objective_trace;
  std::size_t iterations = 0;
};

// k-means++ seeding, Lloyd iterations until assignments are stable or
// max_iters. Empty clusters keep their previous centroid.
KMeansResult kmeans(std::span<const SpacePoint> points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iters = 300);

enum class MatrixNormalization { none, row_minmax };

struct ClusterDistanceMatrix {
  std::vector<std::size_t> cluster_ids;
  std::vector<std::vector<double>> values;
  bool normalized = false;
};

using VectorLookup = std::unordered_map<std::string, Vector>;
VectorLookup make_lookup(std::span<const SpacePoint> points);

// Mean pairwise cosine distance between members of clusters i and j,
// measured with the vectors in `space`. Diagonal: mean over distinct pairs;
// singleton clusters have intra distance 0.
ClusterDistanceMatrix cluster_distance_matrix(const Clustering& clustering,
                                              const VectorLookup& space,
                                              MatrixNormalization normalize);

struct PersonaCorrelation {
  std::string persona_id;
  CorrelationResult result;
};

// Per persona: Spearman correlation between its distances to all other
// personas in the two spaces. Output follows persona_space order.
std::vector<PersonaCorrelation> cross_space_correlations(std::span<const SpacePoint> persona_space,
                                                         std::span<const SpacePoint> label_space);

// Top TF-IDF terms per cluster, treating each cluster's member descriptions
// as one document; idf = ln(num_clusters / df), no smoothing.
std::vector<std::vector<std::pair<std::string, double>>> cluster_top_terms(
    const Clustering& clustering, const std::unordered_map<std::string, std::string>& descriptions,
    std::size_t top_k);

void write_matrix_csv(const std::string& path, const ClusterDistanceMatrix& m);
ClusterDistanceMatrix read_matrix_csv(const std::string& path);

void write_points_csv(const std::string& path, std::span<const SpacePoint> points);
std::vector<SpacePoint> read_points_csv(const std::string& path);

}  // namespace pcrowd
