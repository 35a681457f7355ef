#pragma once

#include <vector>

#include "trg/tensor.hpp"

namespace trg {

struct Segment {
  std::size_t start;
  std::size_t end;  // exclusive
  int label;
};

/// Run-length segments of a per-frame label sequence.
std::vector<Segment> segments_from_labels(const std::vector<int>& labels);

/// Label-change frames (first frame of each new segment) set to 1, dilated by +-radius. [1,T].
Tensor boundary_targets(const std::vector<int>& labels, std::size_t radius);

inline constexpr double kLogEps = 1e-8;

/// (1/N^2) sum U log((U + eps) / (W + eps)), elementwise over equal-shape matrices.
Tensor kl_divergence(const Tensor& u, const Tensor& w, double eps = kLogEps);

/// F^R = W_r F + b_r: [C,T] -> [Ct,T].
Tensor project_representation(const Tensor& f, const Tensor& w, const Tensor& b);

/// Column n = mean of F^R over segment n. [Ct,T] -> [Ct,N].
Tensor segment_pool(const Tensor& fr, const std::vector<Segment>& segments);

/// Columns of the action-embedding table [Q,Ct] picked by class: [Ct,N].
Tensor gather_action_embeddings(const Tensor& action_embeddings, const std::vector<int>& classes);

/// Contrastive loss between pooled features and their class text embeddings (both [Ct,N]).
Tensor absolute_loss(const Tensor& af, const Tensor& ae, const std::vector<int>& classes);

/// KL(G^F || G^E), G^F = inverse_minmax(L2 between A^F columns), G^E indexed from the action graph.
Tensor relative_loss(const Tensor& af, const std::vector<int>& classes, const Tensor& action_graph);

/// Gaussian-similarity weighted truncated MSE over adjacent frames of Y [Q,T].
Tensor gs_tmse(const Tensor& probs, double sigma, double tau);

/// Per-term contributions w_t * min(|log ratio|, tau)^2 (before averaging), [Q, T-1].
std::vector<double> gs_tmse_terms(const Tensor& probs, double sigma, double tau);

Tensor ce_loss(const Tensor& probs, const std::vector<int>& labels);
Tensor boundary_bce(const Tensor& predicted, const Tensor& target);

struct LossWeights {
  double tau = 4.0;
  double sigma = 1.0;
  double lambda_abs = 1.0;
  double lambda_rel = 1.0;
  std::size_t boundary_radius = 2;
};

struct LossBreakdown {
  Tensor total;
  double ce = 0;        // summed over class stages
  double gs_tmse = 0;   // summed over class stages
  double bce = 0;       // summed over boundary stages
  double absolute = 0;  // unweighted
  double relative = 0;  // unweighted
};

/// Sum over class stages of (ce + gs_tmse), over boundary stages of bce, plus the weighted
/// absolute/relative terms on the backbone representation. Sequences with a single segment
/// contribute no absolute/relative term.
LossBreakdown total_loss(const std::vector<Tensor>& class_stages, const std::vector<Tensor>& boundary_stages,
                         const Tensor& representation, const std::vector<int>& labels, const Tensor& action_graph,
                         const Tensor& action_embeddings, const LossWeights& weights);

}  // namespace trg
