#include "trg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "binary_io.hpp"
#include "json.hpp"
#include "trg/metrics.hpp"

namespace trg {

namespace fs = std::filesystem;
using json = nlohmann::json;

void Dataset::validate() const {
  if (sequences.empty()) throw Error(Error::Kind::Format, "dataset has no sequences");
  if (actions.size() < 2) throw Error(Error::Kind::Format, "dataset needs at least 2 action classes");
  const auto& first = sequences.front().x;
  for (const auto& s : sequences) {
    if (s.x.rank() != 3) throw Error(Error::Kind::Format, s.id + ": features must be [C0,T,V]");
    if (s.x.dim(0) != first.dim(0) || s.x.dim(2) != first.dim(2))
      throw Error(Error::Kind::Format, s.id + ": channel/joint counts differ from " + sequences.front().id);
    if (s.labels.size() != s.frames())
      throw Error(Error::Kind::Format, s.id + ": " + std::to_string(s.labels.size()) + " labels for " +
                                           std::to_string(s.frames()) + " frames");
    for (int l : s.labels)
      if (l < 0 || static_cast<std::size_t>(l) >= actions.size())
        throw Error(Error::Kind::Format, s.id + ": class id " + std::to_string(l) + " out of range");
  }
}

void write_skeleton_file(const std::string& path, const Tensor& x) {
  if (x.rank() != 3) throw ShapeError("skeleton features must be [C0,T,V], got " + shape_str(x.shape()));
  io::Writer w(path);
  w.magic("TRGS");
  w.put<std::uint16_t>(kSkeletonFormatVersion);
  for (auto d : x.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
  std::vector<float> payload(x.data().begin(), x.data().end());
  w.bytes(payload.data(), payload.size() * sizeof(float));
  w.finish();
}

Tensor read_skeleton_file(const std::string& path) {
  io::Reader r(path);
  r.expect_magic("TRGS");
  const auto version = r.get<std::uint16_t>();
  if (version != kSkeletonFormatVersion)
    throw Error(Error::Kind::Format, path + ": unsupported TRGS version " + std::to_string(version));
  const std::size_t c0 = r.get<std::uint32_t>(), t = r.get<std::uint32_t>(), v = r.get<std::uint32_t>();
  if (r.remaining() != c0 * t * v * sizeof(float))
    throw Error(Error::Kind::Format, path + ": payload size does not match header");
  std::vector<float> payload(c0 * t * v);
  r.bytes(payload.data(), payload.size() * sizeof(float));
  for (float f : payload)
    if (!std::isfinite(f)) throw Error(Error::Kind::Format, path + ": non-finite value");
  return Tensor({c0, t, v}, std::vector<double>(payload.begin(), payload.end()));
}

Dataset load_dataset(const std::string& dir) {
  if (!fs::is_directory(dir)) throw Error(Error::Kind::Io, "dataset directory not found: " + dir);
  Dataset d;
  {
    const auto path = (fs::path(dir) / "actions.json").string();
    std::ifstream in(path);
    if (!in) throw Error(Error::Kind::Io, "missing " + path);
    try {
      json j;
      in >> j;
      d.actions.resize(j.size());
      for (const auto& [key, name] : j.items()) {
        const auto id = std::stoul(key);
        if (id >= d.actions.size()) throw Error(Error::Kind::Format, path + ": class ids must be 0..Q-1");
        d.actions[id] = name.get<std::string>();
      }
    } catch (const json::exception& e) {
      throw Error(Error::Kind::Format, path + ": " + e.what());
    } catch (const std::invalid_argument&) {
      throw Error(Error::Kind::Format, path + ": keys must be class ids");
    }
  }
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".skel") ids.push_back(e.path().stem().string());
  std::sort(ids.begin(), ids.end());
  for (const auto& id : ids) {
    const auto base = fs::path(dir) / id;
    SkeletonSequence s{id, read_skeleton_file(base.string() + ".skel"), read_label_csv(base.string() + ".csv")};
    d.sequences.push_back(std::move(s));
  }
  d.validate();
  return d;
}

void save_dataset(const std::string& dir, const Dataset& data) {
  data.validate();
  fs::create_directories(dir);
  json actions = json::object();
  for (std::size_t i = 0; i < data.actions.size(); ++i) actions[std::to_string(i)] = data.actions[i];
  std::ofstream out(fs::path(dir) / "actions.json");
  if (!out) throw Error(Error::Kind::Io, "cannot write actions.json in " + dir);
  out << actions.dump(2) << '\n';
  for (const auto& s : data.sequences) {
    const auto base = (fs::path(dir) / s.id).string();
    write_skeleton_file(base + ".skel", s.x);
    write_label_csv(base + ".csv", s.labels);
  }
}

Tensor preprocess(const Tensor& raw, std::size_t axes, std::size_t root) {
  if (raw.rank() != 3 || axes == 0 || raw.dim(0) % axes != 0)
    throw ShapeError("raw positions must be [bodies*axes,T,V], got " + shape_str(raw.shape()));
  const std::size_t ch = raw.dim(0), t_len = raw.dim(1), v = raw.dim(2);
  if (root >= v) throw Error(Error::Kind::InvalidArgument, "root joint out of range");
  auto in = raw.data();
  for (double x : in)
    if (!std::isfinite(x)) throw Error(Error::Kind::Numeric, "non-finite joint position in raw input");
  const std::size_t bodies = ch / axes;
  std::vector<double> out(2 * ch * t_len * v, 0.0);
  auto at_in = [&](std::size_t c, std::size_t t, std::size_t j) { return in[(c * t_len + t) * v + j]; };
  auto at_out = [&](std::size_t c, std::size_t t, std::size_t j) -> double& { return out[(c * t_len + t) * v + j]; };
  for (std::size_t b = 0; b < bodies; ++b)
    for (std::size_t a = 0; a < axes; ++a) {
      const std::size_t src = b * axes + a;
      const std::size_t rel = 2 * b * axes + a, disp = rel + axes;
      for (std::size_t t = 0; t < t_len; ++t)
        for (std::size_t j = 0; j < v; ++j) {
          at_out(rel, t, j) = at_in(src, t, j) - at_in(src, t, root);
          if (t > 0) at_out(disp, t, j) = at_in(src, t, j) - at_in(src, t - 1, j);
        }
    }
  return Tensor({2 * ch, t_len, v}, std::move(out));
}

namespace {

struct ClassMotion {
  double omega;                 // radians per frame
  std::vector<double> offset;   // [3*V] pose offset
  std::vector<double> amp;      // [3*V]
  std::vector<double> phase;    // [3*V]
};

}  // namespace

Dataset synth_generate(const SynthConfig& cfg, const SkeletonTopology& topo) {
  topo.validate();
  const std::size_t v = topo.size(), q = cfg.classes;
  if (q < 2 || v < 4) throw Error(Error::Kind::InvalidArgument, "synthetic data needs Q >= 2 and V >= 4");
  if (cfg.min_segments < 1 || cfg.min_segments > cfg.max_segments)
    throw Error(Error::Kind::InvalidArgument, "empty segment count range");
  if (cfg.frames < 5 * cfg.max_segments)
    throw Error(Error::Kind::InvalidArgument, "synth frames too small for the segment count");
  CounterRng base(cfg.seed);

  // rest pose: each bone a random direction of length ~0.3 away from its parent
  std::vector<double> rest(3 * v, 0.0);
  {
    CounterRng rng = base.fork(1);
    const auto hops = topo.hop_distances();
    std::vector<std::size_t> order(v);
    for (std::size_t j = 0; j < v; ++j) order[j] = j;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return hops[0][a] < hops[0][b]; });
    for (std::size_t j : order) {
      if (j == 0) continue;
      std::size_t parent = 0;
      for (const auto& [a, b] : topo.edges) {
        if (a == j && hops[0][b] + 1 == hops[0][j]) parent = b;
        if (b == j && hops[0][a] + 1 == hops[0][j]) parent = a;
      }
      for (std::size_t a = 0; a < 3; ++a) rest[3 * j + a] = rest[3 * parent + a] + 0.3 * rng.uniform(-1, 1);
    }
  }

  std::vector<ClassMotion> motions(q);
  for (std::size_t c = 0; c < q; ++c) {
    CounterRng rng = base.fork(100 + c);
    auto& m = motions[c];
    // periods spread over 12..40 frames so classes also differ in tempo
    m.omega = 2 * std::numbers::pi / (12.0 + 28.0 * (static_cast<double>(c) + rng.uniform()) / static_cast<double>(q));
    for (std::size_t i = 0; i < 3 * v; ++i) {
      m.offset.push_back(0.15 * rng.normal());
      m.amp.push_back(rng.uniform(0.0, 0.25));
      m.phase.push_back(rng.uniform(0.0, 2 * std::numbers::pi));
    }
  }

  Dataset d;
  for (std::size_t c = 0; c < q; ++c) d.actions.push_back("class_" + std::to_string(c));
  for (std::size_t s = 0; s < cfg.sequences; ++s) {
    CounterRng rng = base.fork(10000 + s);
    const auto lo = static_cast<std::size_t>(0.9 * static_cast<double>(cfg.frames));
    const auto t_len = lo + static_cast<std::size_t>(rng.below(cfg.frames - lo + 1 + cfg.frames / 10));
    const std::size_t n_seg = cfg.min_segments + rng.below(cfg.max_segments - cfg.min_segments + 1);

    std::vector<double> w(n_seg);
    double wsum = 0;
    for (auto& x : w) wsum += (x = rng.uniform(0.5, 1.5));
    const std::size_t min_len = 4, spare = t_len - min_len * n_seg;
    std::vector<int> labels;
    std::size_t used = 0;
    int prev = -1;
    for (std::size_t i = 0; i < n_seg; ++i) {
      std::size_t len = i + 1 == n_seg ? t_len - used
                                        : min_len + static_cast<std::size_t>(static_cast<double>(spare) * w[i] / wsum);
      int cls;
      do cls = static_cast<int>(rng.below(q));
      while (cls == prev);
      labels.insert(labels.end(), len, cls);
      used += len;
      prev = cls;
    }

    const double t0 = rng.uniform(0, 1000);
    std::vector<double> raw(3 * t_len * v);
    for (std::size_t t = 0; t < t_len; ++t) {
      const auto& m = motions[static_cast<std::size_t>(labels[t])];
      for (std::size_t j = 0; j < v; ++j)
        for (std::size_t a = 0; a < 3; ++a) {
          const std::size_t i = 3 * j + a;
          const double pos = rest[i] + m.offset[i] + m.amp[i] * std::sin(m.omega * (t0 + static_cast<double>(t)) + m.phase[i]);
          raw[(a * t_len + t) * v + j] = pos + cfg.noise * rng.normal();
        }
    }
    char id[32];
    std::snprintf(id, sizeof id, "seq_%04zu", s);
    d.sequences.push_back({id, preprocess(Tensor({3, t_len, v}, std::move(raw))), std::move(labels)});
  }
  return d;
}

LabeledEmbeddings simplex_embeddings(const std::vector<std::string>& labels, std::size_t dim, std::uint64_t seed) {
  const std::size_t q = labels.size();
  if (q < 2 || dim < q) throw Error(Error::Kind::InvalidArgument, "simplex needs 2 <= Q <= dim");
  // random orthonormal basis u_0..u_{Q-1} via Gram-Schmidt on Gaussian vectors
  CounterRng rng = CounterRng(seed).fork(7);
  std::vector<std::vector<double>> basis;
  while (basis.size() < q) {
    std::vector<double> u(dim);
    for (auto& x : u) x = rng.normal();
    for (const auto& b : basis) {
      double dot = 0;
      for (std::size_t i = 0; i < dim; ++i) dot += u[i] * b[i];
      for (std::size_t i = 0; i < dim; ++i) u[i] -= dot * b[i];
    }
    double n = 0;
    for (double x : u) n += x * x;
    n = std::sqrt(n);
    if (n < 1e-8) continue;
    for (auto& x : u) x /= n;
    basis.push_back(std::move(u));
  }
  // vertex i = (e_i - 1/Q) / |e_i - 1/Q|
  const double qd = static_cast<double>(q), norm = std::sqrt((qd - 1) / qd);
  std::vector<double> m(q * dim, 0.0);
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t k = 0; k < q; ++k) {
      const double coef = ((i == k ? 1.0 : 0.0) - 1.0 / qd) / norm;
      for (std::size_t c = 0; c < dim; ++c) m[i * dim + c] += coef * basis[k][c];
    }
  LabeledEmbeddings e;
  e.labels = labels;
  e.matrix = Tensor({q, dim}, std::move(m));
  e.source = "simplex";
  return e;
}

}  // namespace trg
