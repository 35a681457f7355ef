#include "trg/spatial.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace trg {

namespace {
constexpr std::size_t kUnreached = std::numeric_limits<std::size_t>::max();
}

void SkeletonTopology::validate() const {
  const std::size_t v = size();
  if (v == 0) throw Error(Error::Kind::InvalidArgument, "topology has no joints");
  for (const auto& [i, j] : edges)
    if (i >= v || j >= v)
      throw Error(Error::Kind::InvalidArgument, "edge (" + std::to_string(i) + "," + std::to_string(j) +
                                                    ") out of range for " + std::to_string(v) + " joints");
  const auto dist = hop_distances();
  for (std::size_t d : dist[0])
    if (d == kUnreached) throw Error(Error::Kind::InvalidArgument, "topology is not connected");
}

std::vector<std::vector<std::size_t>> SkeletonTopology::hop_distances() const {
  const std::size_t v = size();
  std::vector<std::vector<std::size_t>> adj(v);
  for (const auto& [i, j] : edges) {
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  std::vector<std::vector<std::size_t>> dist(v, std::vector<std::size_t>(v, kUnreached));
  for (std::size_t s = 0; s < v; ++s) {
    std::deque<std::size_t> q{s};
    dist[s][s] = 0;
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop_front();
      for (std::size_t w : adj[u])
        if (dist[s][w] == kUnreached) {
          dist[s][w] = dist[s][u] + 1;
          q.push_back(w);
        }
    }
  }
  return dist;
}

std::size_t SkeletonTopology::diameter() const {
  std::size_t d = 0;
  for (const auto& row : hop_distances())
    for (std::size_t x : row)
      if (x != kUnreached) d = std::max(d, x);
  return d;
}

SkeletonTopology SkeletonTopology::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Error::Kind::Io, "cannot open topology " + path);
  SkeletonTopology t;
  try {
    nlohmann::json j;
    in >> j;
    t.joints = j.at("joints").get<std::vector<std::string>>();
    for (const auto& e : j.at("edges")) {
      if (e.size() != 2) throw Error(Error::Kind::Format, path + ": edges must be [i, j] pairs");
      t.edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Error::Kind::Format, path + ": " + e.what());
  }
  t.validate();
  return t;
}

Tensor k_adjacency(const SkeletonTopology& topo, int k) {
  if (k < 0) throw Error(Error::Kind::InvalidArgument, "k-adjacency needs k >= 0");
  const std::size_t v = topo.size();
  auto dist = topo.hop_distances();
  std::vector<double> a(v * v, 0.0);
  for (std::size_t i = 0; i < v; ++i)
    for (std::size_t j = 0; j < v; ++j)
      if (i == j || dist[i][j] == static_cast<std::size_t>(k)) a[i * v + j] = 1.0;
  return Tensor({v, v}, std::move(a));
}

Tensor normalize_adjacency(const Tensor& a, double alpha) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) throw ShapeError("adjacency must be square, got " + shape_str(a.shape()));
  const std::size_t v = a.dim(0);
  auto d = a.data();
  std::vector<double> inv_sqrt(v);
  for (std::size_t i = 0; i < v; ++i) {
    double s = alpha;
    for (std::size_t j = 0; j < v; ++j) s += d[i * v + j];
    inv_sqrt[i] = 1.0 / std::sqrt(s);
  }
  std::vector<double> out(v * v);
  for (std::size_t i = 0; i < v; ++i)
    for (std::size_t j = 0; j < v; ++j) out[i * v + j] = inv_sqrt[i] * d[i * v + j] * inv_sqrt[j];
  return Tensor({v, v}, std::move(out));
}

Tensor multiscale_adjacency(const SkeletonTopology& topo, std::size_t K) {
  if (K == 0) throw Error(Error::Kind::InvalidArgument, "multi-scale adjacency needs K >= 1");
  std::vector<Tensor> blocks;
  for (std::size_t k = 1; k <= K; ++k) blocks.push_back(normalize_adjacency(k_adjacency(topo, static_cast<int>(k))));
  return concat(blocks, 1);
}

Tensor multiscale_gcn_forward(const Tensor& x, const Tensor& a_ms, const Tensor& b, const Tensor& w_s,
                              const Tensor& b_s) {
  if (x.rank() != 3) throw ShapeError("spatial input must be [C0,T,V], got " + shape_str(x.shape()));
  const std::size_t c0 = x.dim(0), t = x.dim(1), v = x.dim(2);
  if (a_ms.rank() != 2 || a_ms.dim(0) != v || a_ms.dim(1) % v != 0)
    throw ShapeError("multi-scale adjacency " + shape_str(a_ms.shape()) + " does not match V=" + std::to_string(v));
  const std::size_t k = a_ms.dim(1) / v;
  if (w_s.rank() != 2 || w_s.dim(1) != k * c0)
    throw ShapeError("W_s " + shape_str(w_s.shape()) + " expects K*C0=" + std::to_string(k * c0) + " inputs");
  auto y = matmul(reshape(x, {c0 * t, v}), add(a_ms, b));  // [C0*T, K*V]
  y = permute(reshape(y, {c0, t, k, v}), {2, 0, 1, 3});    // [K, C0, T, V]
  return relu(conv1x1(reshape(y, {k * c0, t, v}), w_s, b_s));
}

AdaptiveGraphs adaptive_graphs(const Tensor& fg, const Tensor& wp, const Tensor& bp, const Tensor& wq,
                               const Tensor& bq) {
  const std::size_t t = fg.dim(1), v = fg.dim(2), c1 = wp.dim(0);
  auto p = conv1x1(fg, wp, bp);  // [C1,T,V]
  auto q = conv1x1(fg, wq, bq);
  auto pm = mean_axis(p, 0), qm = mean_axis(q, 0);  // [T,V]
  auto pn = mean_axis(p, 1), qn = mean_axis(q, 1);  // [C1,V]
  AdaptiveGraphs g;
  g.frame = sub(expand(reshape(pm, {t, v, 1}), {t, v, v}), expand(reshape(qm, {t, 1, v}), {t, v, v}));
  g.channel = sub(expand(reshape(pn, {c1, v, 1}), {c1, v, v}), expand(reshape(qn, {c1, 1, v}), {c1, v, v}));
  return g;
}

SpatialBlock make_spatial_block(const SpatialConfig& cfg, const SkeletonTopology& topo, const Tensor& tjg,
                                ParamSet& params, CounterRng& rng, const std::string& prefix) {
  const std::size_t v = topo.size();
  if (cfg.c % cfg.c1 != 0)
    throw Error(Error::Kind::InvalidArgument, "C=" + std::to_string(cfg.c) + " must be divisible by C1=" +
                                                  std::to_string(cfg.c1));
  if (tjg.rank() != 2 || tjg.dim(0) != v || tjg.dim(1) != v)
    throw Error(Error::Kind::Mismatch, "joint graph " + shape_str(tjg.shape()) + " does not match " +
                                           std::to_string(v) + " topology joints");
  SpatialBlock s;
  s.cfg = cfg;
  s.a_ms = multiscale_adjacency(topo, cfg.k);
  s.tjg = tjg.detach();
  s.b = params.add_filled(prefix + ".B", {v, cfg.k * v}, 0.0);
  s.w_s = params.add_weight(prefix + ".W_s", {cfg.c, cfg.k * cfg.c0}, rng);
  s.b_s = params.add_bias(prefix + ".b_s", cfg.c, cfg.k * cfg.c0, rng);
  s.w_p = params.add_weight(prefix + ".W_p", {cfg.c1, cfg.c}, rng);
  s.b_p = params.add_bias(prefix + ".b_p", cfg.c1, cfg.c, rng);
  s.w_q = params.add_weight(prefix + ".W_q", {cfg.c1, cfg.c}, rng);
  s.b_q = params.add_bias(prefix + ".b_q", cfg.c1, cfg.c, rng);
  s.w_j = params.add_weight(prefix + ".W_j", {cfg.c, cfg.c}, rng);
  s.b_j = params.add_bias(prefix + ".b_j", cfg.c, cfg.c, rng);
  s.gamma = params.add_filled(prefix + ".bn.gamma", {cfg.c}, 1.0);
  s.beta = params.add_filled(prefix + ".bn.beta", {cfg.c}, 0.0);
  s.bn = BatchNormState(cfg.c);
  return s;
}

Tensor text_adaptive_forward(const Tensor& fg, SpatialBlock& s, bool training, bool batch_norm) {
  if (fg.rank() != 3 || fg.dim(0) != s.cfg.c)
    throw ShapeError("adaptive block expects [" + std::to_string(s.cfg.c) + ",T,V], got " + shape_str(fg.shape()));
  const std::size_t c = fg.dim(0), t = fg.dim(1), v = fg.dim(2), c1 = s.cfg.c1;
  if (s.tjg.dim(0) != v)
    throw Error(Error::Kind::Mismatch, "joint graph has " + std::to_string(s.tjg.dim(0)) + " joints, features have " +
                                           std::to_string(v));
  auto g = adaptive_graphs(fg, s.w_p, s.b_p, s.w_q, s.b_q);
  auto fj = conv1x1(fg, s.w_j, s.b_j);
  Tensor tjg = s.cfg.text_graph ? s.tjg : Tensor({v, v}, 0.0);

  Tensor out({c, t, v}, 0.0);
  if (s.cfg.frame_graph) {
    // frame t's graph acts on frame t's [C,V] slice
    auto gt = add(expand(tjg, {t, v, v}), g.frame);
    out = add(out, permute(bmm(permute(fj, {1, 0, 2}), gt), {1, 0, 2}));
  }
  if (s.cfg.channel_graph) {
    // C1 contiguous channel groups, group g uses graph g
    auto gc = add(expand(tjg, {c1, v, v}), g.channel);
    out = add(out, reshape(bmm(reshape(fj, {c1, (c / c1) * t, v}), gc), {c, t, v}));
  }
  if (batch_norm) out = trg::batch_norm(out, s.gamma, s.beta, s.bn, training);
  return relu(out);
}

Tensor spatial_forward(const Tensor& x, SpatialBlock& s, bool training) {
  if (x.dim(0) != s.cfg.c0)
    throw ShapeError("expected " + std::to_string(s.cfg.c0) + " input channels, got " + std::to_string(x.dim(0)));
  return text_adaptive_forward(multiscale_gcn_forward(x, s.a_ms, s.b, s.w_s, s.b_s), s, training);
}

}  // namespace trg
