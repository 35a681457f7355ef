#pragma once

#include <vector>

#include "trg/spatial.hpp"

namespace trg {

/// Training flag plus the dropout stream for one forward pass.
struct ForwardMode {
  bool training = false;
  CounterRng* rng = nullptr;  // required when training with dropout > 0
  double dropout = 0.5;
};

/// One linear-attention layer: per-head projections C -> C3 for Q, K, V; W_t maps heads*C3 -> C.
struct AttentionLayer {
  std::size_t heads = 4;
  Tensor w_q, b_q, w_k, b_k, w_v, b_v, w_t, b_t;
};

AttentionLayer make_attention_layer(std::size_t c, std::size_t c3, std::size_t heads, ParamSet& params,
                                    CounterRng& rng, const std::string& prefix);

/// Per head h: out_h = (sigmoid(K_h) V_h^T / T)^T sigmoid(Q_h). Q, K come from `qk`, V from `v`
/// (self attention when both are the same tensor). Returns ReLU(qk + W_t concat(out_h)), with
/// dropout on the result in training mode.
Tensor linear_attention(const Tensor& qk, const Tensor& v, const AttentionLayer& layer, const ForwardMode& mode);
inline Tensor linear_attention(const Tensor& x, const AttentionLayer& layer, const ForwardMode& mode) {
  return linear_attention(x, x, layer, mode);
}

/// Same result as linear_attention without dropout, built from the explicit T x T score matrix.
Tensor quadratic_attention_reference(const Tensor& qk, const Tensor& v, const AttentionLayer& layer);

struct MergeHead {
  Tensor w1, b1;  // C -> C2
  Tensor w2, b2;  // C2*V -> C
};

MergeHead make_merge_head(std::size_t c, std::size_t c2, std::size_t v, ParamSet& params, CounterRng& rng,
                          const std::string& prefix);

/// [C,T,V] -> [C,T]: 1x1 conv to C2, fold V into channels (channel-major), 1x1 conv to C.
Tensor merge_spatial(const Tensor& fs, const MergeHead& head);

struct FusionLayer {
  Tensor w_f;  // [C, 2C]
  Tensor w_l;  // [C, C]
};

FusionLayer make_fusion_layer(std::size_t c, ParamSet& params, CounterRng& rng, const std::string& prefix);

/// GeLU(W_l W_f [fs ; ft_prev]) + ft_prev
Tensor st_fusion(const Tensor& fs, const Tensor& ft_prev, const FusionLayer& layer);

struct BackboneConfig {
  SpatialConfig spatial;
  std::size_t c2 = 8;
  std::size_t c3 = 16;
  std::size_t heads = 4;
  std::size_t layers = 10;
  std::size_t classes = 52;
};

struct Backbone {
  BackboneConfig cfg;
  SpatialBlock spatial;
  std::vector<MergeHead> merges;
  std::vector<AttentionLayer> attention;
  std::vector<FusionLayer> fusion;  // layers 2..L
  Tensor w_cls, b_cls, w_bnd, b_bnd;
};

Backbone make_backbone(const BackboneConfig& cfg, const SkeletonTopology& topo, const Tensor& tjg,
                       ParamSet& params, CounterRng& rng);

struct BackboneOutput {
  Tensor features;  // F^t_L [C,T]
  Tensor cls;       // Y^c_0 [Q,T], columns sum to 1
  Tensor bnd;       // Y^b_0 [1,T]
};

/// 1x1 conv C -> Q then softmax over classes.
Tensor class_head(const Tensor& f, const Tensor& w, const Tensor& b);
/// 1x1 conv C -> 1 then sigmoid.
Tensor boundary_head(const Tensor& f, const Tensor& w, const Tensor& b);

BackboneOutput backbone_forward(const Tensor& x, Backbone& net, const ForwardMode& mode);

}  // namespace trg
