#pragma once

#include <string>
#include <vector>

#include "trg/tensor.hpp"

namespace trg {

/// Per-label text embeddings, one row per label (joints or actions), n x Ct.
struct LabeledEmbeddings {
  std::vector<std::string> labels;
  Tensor matrix;
  std::string source = "unknown";

  std::size_t rows() const { return matrix.dim(0); }
  std::size_t cols() const { return matrix.dim(1); }
  /// Throws Error{Format} on count mismatch, duplicate labels or non-finite values. Zero rows
  /// mark a failed export, so file I/O rejects them; in-memory toy sets may contain them.
  void validate(bool reject_zero_rows = true) const;
};

/// Square similarity matrix in [0,1] over an ordered label set.
struct RelationalGraph {
  std::vector<std::string> labels;
  Tensor matrix;

  std::size_t size() const { return labels.size(); }
  double at(std::size_t i, std::size_t j) const { return matrix.at({i, j}); }
};

enum class DistanceMetric { L2, L1, Cosine };
enum class GraphNormalization { MinMax, ZScore, Sigmoid };

DistanceMetric parse_distance_metric(const std::string& name);
GraphNormalization parse_graph_normalization(const std::string& name);

/// D[i][j] = ||row_i - row_j||_2, differentiable. Needs at least two rows.
Tensor pairwise_l2_distances(const Tensor& rows);

/// Distance matrix under any supported metric (only L2 is differentiable).
Tensor pairwise_distances(const Tensor& rows, DistanceMetric metric);

/// 1 - (D - min) / (max - min); an all-equal D maps to all ones. Differentiable.
Tensor inverse_minmax(const Tensor& distances);

/// Ablation alternatives to inverse_minmax. ZScore: sigmoid(-(D - mean) / std).
/// Sigmoid: 2 * (1 - sigmoid(D / mean(D))). Neither guarantees a unit diagonal.
Tensor normalize_distances(const Tensor& distances, GraphNormalization norm);

RelationalGraph build_relational_graph(const LabeledEmbeddings& embeddings,
                                       DistanceMetric metric = DistanceMetric::L2,
                                       GraphNormalization norm = GraphNormalization::MinMax);

/// "<dir>/<name>.trge" -> "<dir>/<name>.labels.json"
std::string sidecar_path(const std::string& trge_path);

inline constexpr std::uint16_t kEmbeddingFormatVersion = 1;

/// TRGE: "TRGE", u16 version, u32 rows, u32 cols, f32 row-major payload; labels in the sidecar.
LabeledEmbeddings load_embedding_file(const std::string& path);
void write_embedding_file(const std::string& path, const LabeledEmbeddings& embeddings);

/// {"labels": [...], "matrix": [[...], ...]}
void save_graph_json(const std::string& path, const RelationalGraph& graph);
RelationalGraph load_graph_json(const std::string& path);

}  // namespace trg
