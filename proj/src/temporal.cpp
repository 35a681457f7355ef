#include "trg/temporal.hpp"

namespace trg {

AttentionLayer make_attention_layer(std::size_t c, std::size_t c3, std::size_t heads, ParamSet& params,
                                    CounterRng& rng, const std::string& prefix) {
  AttentionLayer a;
  a.heads = heads;
  const std::size_t hc = heads * c3;
  a.w_q = params.add_weight(prefix + ".W_q", {hc, c}, rng);
  a.b_q = params.add_bias(prefix + ".b_q", hc, c, rng);
  a.w_k = params.add_weight(prefix + ".W_k", {hc, c}, rng);
  a.b_k = params.add_bias(prefix + ".b_k", hc, c, rng);
  a.w_v = params.add_weight(prefix + ".W_v", {hc, c}, rng);
  a.b_v = params.add_bias(prefix + ".b_v", hc, c, rng);
  a.w_t = params.add_weight(prefix + ".W_t", {c, hc}, rng);
  a.b_t = params.add_bias(prefix + ".b_t", c, hc, rng);
  return a;
}

namespace {

struct Projections {
  Tensor q, k, v;  // [heads, C3, T]
};

Projections project(const Tensor& qk, const Tensor& v, const AttentionLayer& a) {
  if (qk.rank() != 2 || v.rank() != 2 || qk.dim(1) != v.dim(1))
    throw ShapeError("attention inputs must be [C,T] with equal T, got " + shape_str(qk.shape()) + " and " +
                     shape_str(v.shape()));
  const std::size_t t = qk.dim(1), hc = a.w_q.dim(0), c3 = hc / a.heads;
  return {reshape(sigmoid(conv1x1(qk, a.w_q, a.b_q)), {a.heads, c3, t}),
          reshape(sigmoid(conv1x1(qk, a.w_k, a.b_k)), {a.heads, c3, t}),
          reshape(conv1x1(v, a.w_v, a.b_v), {a.heads, c3, t})};
}

Tensor finish(const Tensor& qk, const Tensor& heads_out, const AttentionLayer& a) {
  const std::size_t t = qk.dim(1);
  auto merged = reshape(heads_out, {a.w_t.dim(1), t});
  return relu(add(qk, conv1x1(merged, a.w_t, a.b_t)));
}

}  // namespace

Tensor linear_attention(const Tensor& qk, const Tensor& v, const AttentionLayer& a, const ForwardMode& mode) {
  auto p = project(qk, v, a);
  const double inv_t = 1.0 / static_cast<double>(qk.dim(1));
  // [h, C3, C3]: sum over frames of phi(K) V^T, averaged so the scale is length independent
  auto kv = scale(bmm(p.k, permute(p.v, {0, 2, 1})), inv_t);
  auto out = bmm(permute(kv, {0, 2, 1}), p.q);  // [h, C3, T]
  auto y = finish(qk, out, a);
  if (mode.training && mode.dropout > 0) {
    if (!mode.rng) throw Error(Error::Kind::State, "training forward needs a dropout rng");
    y = dropout(y, mode.dropout, *mode.rng, true);
  }
  return y;
}

Tensor quadratic_attention_reference(const Tensor& qk, const Tensor& v, const AttentionLayer& a) {
  auto p = project(qk, v, a);
  const double inv_t = 1.0 / static_cast<double>(qk.dim(1));
  auto scores = bmm(permute(p.q, {0, 2, 1}), p.k);              // [h, T, T]: phi(q_t) . phi(k_s)
  auto out = scale(bmm(p.v, permute(scores, {0, 2, 1})), inv_t);  // [h, C3, T]
  return finish(qk, out, a);
}

MergeHead make_merge_head(std::size_t c, std::size_t c2, std::size_t v, ParamSet& params, CounterRng& rng,
                          const std::string& prefix) {
  MergeHead m;
  m.w1 = params.add_weight(prefix + ".W_c2", {c2, c}, rng);
  m.b1 = params.add_bias(prefix + ".b_c2", c2, c, rng);
  m.w2 = params.add_weight(prefix + ".W_merge", {c, c2 * v}, rng);
  m.b2 = params.add_bias(prefix + ".b_merge", c, c2 * v, rng);
  return m;
}

Tensor merge_spatial(const Tensor& fs, const MergeHead& m) {
  if (fs.rank() != 3) throw ShapeError("merge_spatial expects [C,T,V], got " + shape_str(fs.shape()));
  const std::size_t t = fs.dim(1), v = fs.dim(2), c2 = m.w1.dim(0);
  if (m.w2.dim(1) != c2 * v)
    throw Error(Error::Kind::Mismatch, "merge head built for " + std::to_string(m.w2.dim(1) / c2) +
                                           " joints, features have " + std::to_string(v));
  auto y = permute(conv1x1(fs, m.w1, m.b1), {0, 2, 1});  // [C2,V,T]
  return conv1x1(reshape(y, {c2 * v, t}), m.w2, m.b2);
}

FusionLayer make_fusion_layer(std::size_t c, ParamSet& params, CounterRng& rng, const std::string& prefix) {
  return {params.add_weight(prefix + ".W_f", {c, 2 * c}, rng), params.add_weight(prefix + ".W_l", {c, c}, rng)};
}

Tensor st_fusion(const Tensor& fs, const Tensor& ft_prev, const FusionLayer& f) {
  if (fs.shape() != ft_prev.shape())
    throw ShapeError("fusion inputs differ: " + shape_str(fs.shape()) + " vs " + shape_str(ft_prev.shape()));
  auto z = conv1x1(conv1x1(concat({fs, ft_prev}, 0), f.w_f), f.w_l);
  return add(gelu(z), ft_prev);
}

Backbone make_backbone(const BackboneConfig& cfg, const SkeletonTopology& topo, const Tensor& tjg,
                       ParamSet& params, CounterRng& rng) {
  if (cfg.layers == 0) throw Error(Error::Kind::InvalidArgument, "temporal stack needs L >= 1");
  if (cfg.classes < 2) throw Error(Error::Kind::InvalidArgument, "need at least 2 classes");
  Backbone b;
  b.cfg = cfg;
  const std::size_t c = cfg.spatial.c, v = topo.size();
  b.spatial = make_spatial_block(cfg.spatial, topo, tjg, params, rng);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string p = "temporal." + std::to_string(l);
    b.merges.push_back(make_merge_head(c, cfg.c2, v, params, rng, p + ".merge"));
    if (l > 0) b.fusion.push_back(make_fusion_layer(c, params, rng, p + ".fusion"));
    b.attention.push_back(make_attention_layer(c, cfg.c3, cfg.heads, params, rng, p + ".attn"));
  }
  b.w_cls = params.add_weight("head.W_cls", {cfg.classes, c}, rng);
  b.b_cls = params.add_bias("head.b_cls", cfg.classes, c, rng);
  b.w_bnd = params.add_weight("head.W_bnd", {1, c}, rng);
  b.b_bnd = params.add_bias("head.b_bnd", 1, c, rng);
  return b;
}

Tensor class_head(const Tensor& f, const Tensor& w, const Tensor& b) { return softmax(conv1x1(f, w, b), 0); }

Tensor boundary_head(const Tensor& f, const Tensor& w, const Tensor& b) { return sigmoid(conv1x1(f, w, b)); }

BackboneOutput backbone_forward(const Tensor& x, Backbone& net, const ForwardMode& mode) {
  auto fs = spatial_forward(x, net.spatial, mode.training);
  auto ft = linear_attention(merge_spatial(fs, net.merges[0]), net.attention[0], mode);
  for (std::size_t l = 1; l < net.cfg.layers; ++l) {
    auto fst = st_fusion(merge_spatial(fs, net.merges[l]), ft, net.fusion[l - 1]);
    ft = linear_attention(fst, net.attention[l], mode);
  }
  return {ft, class_head(ft, net.w_cls, net.b_cls), boundary_head(ft, net.w_bnd, net.b_bnd)};
}

}  // namespace trg
