#include "trg/supervision.hpp"

#include <cmath>

#include "trg/ops.hpp"
#include "trg/textgraph.hpp"

namespace trg {

std::vector<Segment> segments_from_labels(const std::vector<int>& labels) {
  std::vector<Segment> out;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (out.empty() || labels[t] != out.back().label) out.push_back({t, t + 1, labels[t]});
    else out.back().end = t + 1;
  }
  return out;
}

Tensor boundary_targets(const std::vector<int>& labels, std::size_t radius) {
  const std::size_t t = labels.size();
  std::vector<double> b(t, 0.0);
  for (std::size_t f = 1; f < t; ++f) {
    if (labels[f] == labels[f - 1]) continue;
    const std::size_t lo = f >= radius ? f - radius : 0, hi = std::min(t - 1, f + radius);
    for (std::size_t s = lo; s <= hi; ++s) b[s] = 1.0;
  }
  return Tensor({1, t}, std::move(b));
}

Tensor kl_divergence(const Tensor& u, const Tensor& w, double eps) {
  if (u.shape() != w.shape() || u.rank() != 2)
    throw ShapeError("KL needs equal-shape matrices, got " + shape_str(u.shape()) + " and " + shape_str(w.shape()));
  const double n2 = static_cast<double>(u.size());
  return scale(sum(mul(u, sub(log(u, eps), log(w, eps)))), 1.0 / n2);
}

Tensor project_representation(const Tensor& f, const Tensor& w, const Tensor& b) { return conv1x1(f, w, b); }

Tensor segment_pool(const Tensor& fr, const std::vector<Segment>& segments) {
  const std::size_t t = fr.dim(1), n = segments.size();
  std::vector<double> pool(t * n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& s = segments[k];
    if (s.end <= s.start || s.end > t) throw Error(Error::Kind::InvalidArgument, "empty or out-of-range segment");
    const double w = 1.0 / static_cast<double>(s.end - s.start);
    for (std::size_t f = s.start; f < s.end; ++f) pool[f * n + k] = w;
  }
  return matmul(fr, Tensor({t, n}, std::move(pool)));
}

Tensor gather_action_embeddings(const Tensor& e, const std::vector<int>& classes) {
  const std::size_t q = e.dim(0), ct = e.dim(1), n = classes.size();
  std::vector<double> out(ct * n);
  auto d = e.data();
  for (std::size_t k = 0; k < n; ++k) {
    const auto c = static_cast<std::size_t>(classes[k]);
    if (c >= q) throw Error(Error::Kind::InvalidArgument, "class id " + std::to_string(c) + " has no embedding");
    for (std::size_t i = 0; i < ct; ++i) out[i * n + k] = d[c * ct + i];
  }
  return Tensor({ct, n}, std::move(out));
}

namespace {

Tensor unit_columns(const Tensor& a) {
  auto sq = sum_axis(square(a), 0);
  for (double v : sq.data())
    if (v == 0.0) throw Error(Error::Kind::Numeric, "zero-norm feature column in contrastive loss");
  return div(a, expand(sqrt(sq), a.shape()));
}

}  // namespace

Tensor absolute_loss(const Tensor& af, const Tensor& ae, const std::vector<int>& classes) {
  const std::size_t n = classes.size();
  if (n < 2) throw Error(Error::Kind::InvalidArgument, "absolute loss needs at least 2 segments");
  if (af.shape() != ae.shape() || af.dim(1) != n)
    throw ShapeError("absolute loss shapes " + shape_str(af.shape()) + " and " + shape_str(ae.shape()));
  auto s = matmul(transpose(unit_columns(af)), unit_columns(ae));  // [N,N] cosine similarities
  auto sf = softmax(s, 1);
  auto se = softmax(s, 0);
  // S^GT normalized along the same axis as its softmax partner; it is symmetric, so the
  // column-normalized version is the transpose of the row-normalized one.
  std::vector<double> rows(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    double cnt = 0;
    for (std::size_t j = 0; j < n; ++j) cnt += classes[i] == classes[j];
    for (std::size_t j = 0; j < n; ++j) rows[i * n + j] = (classes[i] == classes[j]) / cnt;
  }
  Tensor gt_rows({n, n}, rows);
  auto gt_cols = transpose(gt_rows);
  return scale(add(kl_divergence(sf, gt_rows), kl_divergence(se, gt_cols)), 0.5);
}

Tensor relative_loss(const Tensor& af, const std::vector<int>& classes, const Tensor& action_graph) {
  const std::size_t n = classes.size(), q = action_graph.dim(0);
  if (n < 2) throw Error(Error::Kind::InvalidArgument, "relative loss needs at least 2 segments");
  auto gf = inverse_minmax(pairwise_l2_distances(transpose(af)));
  std::vector<double> ge(n * n);
  auto g = action_graph.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const auto a = static_cast<std::size_t>(classes[i]), b = static_cast<std::size_t>(classes[j]);
      if (a >= q || b >= q) throw Error(Error::Kind::InvalidArgument, "class id outside the action graph");
      ge[i * n + j] = g[a * q + b];
    }
  return kl_divergence(gf, Tensor({n, n}, std::move(ge)));
}

Tensor gs_tmse(const Tensor& probs, double sigma, double tau) {
  if (probs.rank() != 2) throw ShapeError("gs_tmse expects [Q,T], got " + shape_str(probs.shape()));
  const std::size_t q = probs.dim(0), t = probs.dim(1);
  if (t < 2) return scale(sum(probs), 0.0);
  auto cur = slice(probs, 1, 1, t);
  auto prev = slice(probs, 1, 0, t - 1);
  auto delta = clamp(abs(sub(log(cur, kLogEps), log(prev, kLogEps))), 0.0, tau);
  auto dist2 = sum_axis(square(sub(cur, prev)), 0);  // [T-1]
  auto w = exp(scale(dist2, -1.0 / (2 * sigma * sigma)));
  auto terms = mul(expand(w, {q, t - 1}), square(delta));
  return scale(sum(terms), 1.0 / static_cast<double>(t * q));
}

std::vector<double> gs_tmse_terms(const Tensor& probs, double sigma, double tau) {
  const std::size_t q = probs.dim(0), t = probs.dim(1);
  auto p = probs.data();
  std::vector<double> out;
  for (std::size_t f = 1; f < t; ++f) {
    double d2 = 0;
    for (std::size_t c = 0; c < q; ++c) d2 += std::pow(p[c * t + f] - p[c * t + f - 1], 2);
    const double w = std::exp(-d2 / (2 * sigma * sigma));
    for (std::size_t c = 0; c < q; ++c) {
      const double d = std::min(tau, std::abs(std::log(p[c * t + f] + kLogEps) - std::log(p[c * t + f - 1] + kLogEps)));
      out.push_back(w * d * d);
    }
  }
  return out;
}

Tensor ce_loss(const Tensor& probs, const std::vector<int>& labels) {
  const std::size_t q = probs.dim(0), t = probs.dim(1);
  if (labels.size() != t) throw ShapeError("ce: " + std::to_string(labels.size()) + " labels for T=" + std::to_string(t));
  std::vector<double> onehot(q * t, 0.0);
  for (std::size_t f = 0; f < t; ++f) {
    if (labels[f] < 0 || static_cast<std::size_t>(labels[f]) >= q)
      throw Error(Error::Kind::InvalidArgument, "label " + std::to_string(labels[f]) + " outside [0," + std::to_string(q) + ")");
    onehot[static_cast<std::size_t>(labels[f]) * t + f] = 1.0;
  }
  return scale(sum(mul(log(probs, kLogEps), Tensor({q, t}, std::move(onehot)))), -1.0 / static_cast<double>(t));
}

Tensor boundary_bce(const Tensor& predicted, const Tensor& target) {
  if (predicted.shape() != target.shape()) throw ShapeError("bce shapes differ");
  auto pos = mul(target, log(predicted, kLogEps));
  auto negs = mul(add_scalar(neg(target), 1.0), log(add_scalar(neg(predicted), 1.0), kLogEps));
  return neg(mean(add(pos, negs)));
}

LossBreakdown total_loss(const std::vector<Tensor>& class_stages, const std::vector<Tensor>& boundary_stages,
                         const Tensor& representation, const std::vector<int>& labels, const Tensor& action_graph,
                         const Tensor& action_embeddings, const LossWeights& w) {
  LossBreakdown out;
  Tensor total = Tensor::scalar(0.0);
  for (const auto& y : class_stages) {
    auto ce = ce_loss(y, labels);
    auto sm = gs_tmse(y, w.sigma, w.tau);
    out.ce += ce.item();
    out.gs_tmse += sm.item();
    total = add(total, add(ce, sm));
  }
  const auto bt = boundary_targets(labels, w.boundary_radius);
  for (const auto& b : boundary_stages) {
    auto l = boundary_bce(b, bt);
    out.bce += l.item();
    total = add(total, l);
  }
  const auto segs = segments_from_labels(labels);
  if (segs.size() >= 2 && (w.lambda_abs != 0 || w.lambda_rel != 0)) {
    std::vector<int> classes;
    for (const auto& s : segs) classes.push_back(s.label);
    auto af = segment_pool(representation, segs);
    if (w.lambda_abs != 0) {
      auto a = absolute_loss(af, gather_action_embeddings(action_embeddings, classes), classes);
      out.absolute = a.item();
      total = add(total, scale(a, w.lambda_abs));
    }
    if (w.lambda_rel != 0) {
      auto r = relative_loss(af, classes, action_graph);
      out.relative = r.item();
      total = add(total, scale(r, w.lambda_rel));
    }
  }
  out.total = total;
  return out;
}

}  // namespace trg
