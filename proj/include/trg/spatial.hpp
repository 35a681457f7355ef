#pragma once

#include <string>
#include <utility>
#include <vector>

#include "trg/ops.hpp"
#include "trg/params.hpp"

namespace trg {

struct SkeletonTopology {
  std::vector<std::string> joints;
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  std::size_t size() const { return joints.size(); }
  /// Throws unless every edge is in range and the bone graph is connected.
  void validate() const;
  /// BFS hop counts, V x V.
  std::vector<std::vector<std::size_t>> hop_distances() const;
  std::size_t diameter() const;

  /// {"joints": [...], "edges": [[i, j], ...]}
  static SkeletonTopology load_json(const std::string& path);
};

/// A^k[i][j] = 1 iff hop distance == k or i == j.
Tensor k_adjacency(const SkeletonTopology& topo, int k);

/// D^-1/2 A D^-1/2 with D_ii = sum_j A_ij + alpha.
Tensor normalize_adjacency(const Tensor& a, double alpha = 0.001);

/// Normalized A^1 .. A^K concatenated along columns: V x KV.
Tensor multiscale_adjacency(const SkeletonTopology& topo, std::size_t K);

/// F^g = ReLU(W_s * reshape(X (A_ms + B)) + b_s). X [C0,T,V], a_ms/b [V,KV], w_s [C, K*C0].
Tensor multiscale_gcn_forward(const Tensor& x, const Tensor& a_ms, const Tensor& b, const Tensor& w_s,
                              const Tensor& b_s);

struct AdaptiveGraphs {
  Tensor frame;    // G^M [T,V,V]
  Tensor channel;  // G^N [C1,V,V]
};

/// Cross-joint differences of the pooled P/Q heads (1x1 convs C -> C1).
AdaptiveGraphs adaptive_graphs(const Tensor& fg, const Tensor& wp, const Tensor& bp, const Tensor& wq,
                               const Tensor& bq);

struct SpatialConfig {
  std::size_t c0 = 6;
  std::size_t c = 64;
  std::size_t c1 = 16;
  std::size_t k = 13;
  bool frame_graph = true;
  bool channel_graph = true;
  bool text_graph = true;
};

struct SpatialBlock {
  SpatialConfig cfg;
  Tensor a_ms;  // constant
  Tensor tjg;   // constant
  Tensor b, w_s, b_s;
  Tensor w_p, b_p, w_q, b_q;
  Tensor w_j, b_j;
  Tensor gamma, beta;
  BatchNormState bn;
};

SpatialBlock make_spatial_block(const SpatialConfig& cfg, const SkeletonTopology& topo, const Tensor& tjg,
                                ParamSet& params, CounterRng& rng, const std::string& prefix = "spatial");

/// F^s = ReLU(BN(F^j G^T + F^j G^C)). `batch_norm = false` skips BN (used by oracle tests).
Tensor text_adaptive_forward(const Tensor& fg, SpatialBlock& block, bool training, bool batch_norm = true);

/// Multi-scale GCN followed by the text-adaptive graph convolution: [C0,T,V] -> [C,T,V].
Tensor spatial_forward(const Tensor& x, SpatialBlock& block, bool training);

}  // namespace trg
