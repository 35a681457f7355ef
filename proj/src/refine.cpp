#include "trg/refine.hpp"

namespace trg {

ClassStage make_class_stage(std::size_t classes, std::size_t c, std::size_t c3, std::size_t heads,
                            std::size_t layers, ParamSet& params, CounterRng& rng, const std::string& prefix) {
  ClassStage s;
  s.w_in = params.add_weight(prefix + ".W_in", {c, classes}, rng);
  s.b_in = params.add_bias(prefix + ".b_in", c, classes, rng);
  for (std::size_t l = 0; l < layers; ++l)
    s.layers.push_back(make_attention_layer(c, c3, heads, params, rng, prefix + "." + std::to_string(l)));
  s.w_cls = params.add_weight(prefix + ".W_cls", {classes, c}, rng);
  s.b_cls = params.add_bias(prefix + ".b_cls", classes, c, rng);
  return s;
}

ClassStageOutput refine_class(const Tensor& prev, const Tensor& value_source, const ClassStage& stage,
                              const ForwardMode& mode) {
  auto x = conv1x1(prev, stage.w_in, stage.b_in);
  for (const auto& layer : stage.layers) x = linear_attention(x, value_source, layer, mode);
  return {class_head(x, stage.w_cls, stage.b_cls), x};
}

BoundaryStage make_boundary_stage(std::size_t c, std::size_t layers, ParamSet& params, CounterRng& rng,
                                  const std::string& prefix) {
  BoundaryStage s;
  s.w_in = params.add_weight(prefix + ".W_in", {c, 1}, rng);
  s.b_in = params.add_bias(prefix + ".b_in", c, 1, rng);
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string p = prefix + "." + std::to_string(l);
    DilatedLayer d;
    d.w = params.add_weight(p + ".W_dil", {c, c, 3}, rng);
    d.b = params.add_bias(p + ".b_dil", c, 3 * c, rng);
    d.w1 = params.add_weight(p + ".W_1x1", {c, c}, rng);
    d.b1 = params.add_bias(p + ".b_1x1", c, c, rng);
    s.layers.push_back(d);
  }
  s.w_out = params.add_weight(prefix + ".W_out", {1, c}, rng);
  s.b_out = params.add_bias(prefix + ".b_out", 1, c, rng);
  return s;
}

Tensor refine_boundary(const Tensor& prev, const BoundaryStage& stage, const ForwardMode& mode) {
  if (prev.rank() != 2 || prev.dim(0) != 1) throw ShapeError("boundary stage expects [1,T], got " + shape_str(prev.shape()));
  auto x = conv1x1(prev, stage.w_in, stage.b_in);
  std::size_t dilation = 1;
  for (const auto& l : stage.layers) {
    auto h = relu(conv1d(x, l.w, l.b, dilation));
    if (mode.training && mode.dropout > 0) {
      if (!mode.rng) throw Error(Error::Kind::State, "training forward needs a dropout rng");
      h = dropout(h, mode.dropout, *mode.rng, true);
    }
    x = add(x, conv1x1(h, l.w1, l.b1));
    dilation *= 2;
  }
  return boundary_head(x, stage.w_out, stage.b_out);
}

std::vector<int> argmax_labels(const Tensor& probs) {
  const std::size_t q = probs.dim(0), t = probs.dim(1);
  auto p = probs.data();
  std::vector<int> out(t, 0);
  for (std::size_t f = 0; f < t; ++f)
    for (std::size_t c = 1; c < q; ++c)
      if (p[c * t + f] > p[static_cast<std::size_t>(out[f]) * t + f]) out[f] = static_cast<int>(c);
  return out;
}

Relabeling boundary_guided_relabel(const Tensor& probs, const Tensor& boundary, double threshold,
                                   std::size_t radius) {
  if (probs.rank() != 2 || boundary.rank() != 2 || boundary.dim(0) != 1 || boundary.dim(1) != probs.dim(1))
    throw ShapeError("relabel expects [Q,T] and [1,T], got " + shape_str(probs.shape()) + " and " +
                     shape_str(boundary.shape()));
  const std::size_t q = probs.dim(0), t = probs.dim(1);
  auto b = boundary.data();
  auto p = probs.data();
  Relabeling r;
  for (std::size_t f = 1; f < t; ++f) {
    if (!(b[f] > threshold)) continue;
    bool peak = true;
    const std::size_t lo = f >= radius ? f - radius : 0, hi = std::min(t - 1, f + radius);
    for (std::size_t s = lo; s <= hi && peak; ++s) {
      if (s < f && b[s] >= b[f]) peak = false;  // an earlier equal value wins the tie
      if (s > f && b[s] > b[f]) peak = false;
    }
    if (peak) r.boundaries.push_back(f);
  }
  r.labels.assign(t, 0);
  std::size_t start = 0;
  for (std::size_t k = 0; k <= r.boundaries.size(); ++k) {
    const std::size_t end = k < r.boundaries.size() ? r.boundaries[k] : t;
    int best = 0;
    double best_v = -1;
    for (std::size_t c = 0; c < q; ++c) {
      double s = 0;
      for (std::size_t f = start; f < end; ++f) s += p[c * t + f];
      if (s > best_v) {
        best_v = s;
        best = static_cast<int>(c);
      }
    }
    for (std::size_t f = start; f < end; ++f) r.labels[f] = best;
    start = end;
  }
  return r;
}

}  // namespace trg
