#include "trg/textgraph.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "binary_io.hpp"
#include "json.hpp"
#include "trg/ops.hpp"

namespace trg {

using json = nlohmann::json;

void LabeledEmbeddings::validate(bool reject_zero_rows) const {
  if (matrix.rank() != 2)
    throw Error(Error::Kind::Format, "embedding matrix must be 2-D, got " + shape_str(matrix.shape()));
  if (labels.size() != rows())
    throw Error(Error::Kind::Format, "label/row count mismatch: " + std::to_string(labels.size()) +
                                         " labels for " + std::to_string(rows()) + " rows");
  std::set<std::string> seen;
  for (const auto& l : labels)
    if (!seen.insert(l).second) throw Error(Error::Kind::Format, "duplicate label \"" + l + "\"");
  auto d = matrix.data();
  for (std::size_t r = 0; r < rows(); ++r) {
    bool all_zero = true;
    for (std::size_t c = 0; c < cols(); ++c) {
      const double v = d[r * cols() + c];
      if (!std::isfinite(v))
        throw Error(Error::Kind::Format, "non-finite value in row \"" + labels[r] + "\"");
      all_zero = all_zero && v == 0.0;
    }
    if (all_zero && reject_zero_rows) throw Error(Error::Kind::Format, "all-zero embedding row \"" + labels[r] + "\"");
  }
}

DistanceMetric parse_distance_metric(const std::string& name) {
  if (name == "l2") return DistanceMetric::L2;
  if (name == "l1") return DistanceMetric::L1;
  if (name == "cosine") return DistanceMetric::Cosine;
  throw Error(Error::Kind::InvalidArgument, "unknown distance metric \"" + name + "\"");
}

GraphNormalization parse_graph_normalization(const std::string& name) {
  if (name == "minmax") return GraphNormalization::MinMax;
  if (name == "zscore") return GraphNormalization::ZScore;
  if (name == "sigmoid") return GraphNormalization::Sigmoid;
  throw Error(Error::Kind::InvalidArgument, "unknown graph normalization \"" + name + "\"");
}

Tensor pairwise_l2_distances(const Tensor& rows) {
  if (rows.rank() != 2 || rows.dim(0) < 2 || rows.dim(1) < 1)
    throw Error(Error::Kind::InvalidArgument,
                "pairwise distances need at least 2 rows of dimension >= 1, got " +
                    shape_str(rows.shape()));
  return pairwise_l2(rows);
}

Tensor pairwise_distances(const Tensor& rows, DistanceMetric metric) {
  if (metric == DistanceMetric::L2) return pairwise_l2_distances(rows);
  if (rows.rank() != 2 || rows.dim(0) < 2 || rows.dim(1) < 1)
    throw Error(Error::Kind::InvalidArgument,
                "pairwise distances need at least 2 rows, got " + shape_str(rows.shape()));
  const std::size_t n = rows.dim(0), d = rows.dim(1);
  auto x = rows.data();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double v = 0.0;
      if (metric == DistanceMetric::L1) {
        for (std::size_t k = 0; k < d; ++k) v += std::abs(x[i * d + k] - x[j * d + k]);
      } else {
        double dot = 0, ni = 0, nj = 0;
        for (std::size_t k = 0; k < d; ++k) {
          dot += x[i * d + k] * x[j * d + k];
          ni += x[i * d + k] * x[i * d + k];
          nj += x[j * d + k] * x[j * d + k];
        }
        v = 1.0 - dot / std::sqrt(ni * nj);
      }
      out[i * n + j] = v;
    }
  return Tensor({n, n}, std::move(out));
}

Tensor inverse_minmax(const Tensor& distances) {
  auto lo = min_all(distances);
  auto hi = max_all(distances);
  if (hi.item() == lo.item()) return Tensor(distances.shape(), 1.0);
  auto shifted = sub(distances, expand(lo, distances.shape()));
  auto span = expand(sub(hi, lo), distances.shape());
  return add_scalar(neg(div(shifted, span)), 1.0);
}

Tensor normalize_distances(const Tensor& distances, GraphNormalization norm) {
  switch (norm) {
    case GraphNormalization::MinMax:
      return inverse_minmax(distances);
    case GraphNormalization::ZScore: {
      auto d = distances.data();
      double mu = 0;
      for (double v : d) mu += v;
      mu /= static_cast<double>(d.size());
      double var = 0;
      for (double v : d) var += (v - mu) * (v - mu);
      const double sd = std::sqrt(var / static_cast<double>(d.size()));
      if (sd == 0.0) return Tensor(distances.shape(), 1.0);
      return sigmoid(scale(add_scalar(distances, -mu), -1.0 / sd));
    }
    case GraphNormalization::Sigmoid: {
      double mu = 0;
      for (double v : distances.data()) mu += v;
      mu /= static_cast<double>(distances.size());
      if (mu == 0.0) return Tensor(distances.shape(), 1.0);
      return scale(add_scalar(neg(sigmoid(scale(distances, 1.0 / mu))), 1.0), 2.0);
    }
  }
  throw Error(Error::Kind::InvalidArgument, "unknown normalization");
}

RelationalGraph build_relational_graph(const LabeledEmbeddings& embeddings, DistanceMetric metric,
                                       GraphNormalization norm) {
  embeddings.validate(false);
  auto g = normalize_distances(pairwise_distances(embeddings.matrix, metric), norm);
  return RelationalGraph{embeddings.labels, g.detach()};
}

std::string sidecar_path(const std::string& trge_path) {
  std::string stem = trge_path;
  const std::string ext = ".trge";
  if (stem.size() >= ext.size() && stem.compare(stem.size() - ext.size(), ext.size(), ext) == 0)
    stem.resize(stem.size() - ext.size());
  return stem + ".labels.json";
}

LabeledEmbeddings load_embedding_file(const std::string& path) {
  io::Reader r(path);
  r.expect_magic("TRGE");
  const auto version = r.get<std::uint16_t>();
  if (version != kEmbeddingFormatVersion)
    throw Error(Error::Kind::Format, path + ": unsupported TRGE version " + std::to_string(version));
  const std::size_t rows = r.get<std::uint32_t>();
  const std::size_t cols = r.get<std::uint32_t>();
  if (r.remaining() != rows * cols * sizeof(float))
    throw Error(Error::Kind::Format, path + ": truncated payload (expected " +
                                         std::to_string(rows * cols * sizeof(float)) +
                                         " bytes, found " + std::to_string(r.remaining()) + ")");
  std::vector<float> payload(rows * cols);
  r.bytes(payload.data(), payload.size() * sizeof(float));

  LabeledEmbeddings out;
  out.matrix = Tensor({rows, cols}, std::vector<double>(payload.begin(), payload.end()));
  const auto side = sidecar_path(path);
  std::ifstream in(side);
  if (!in) throw Error(Error::Kind::Io, "missing label sidecar " + side);
  json j;
  try {
    in >> j;
    out.labels = j.at("labels").get<std::vector<std::string>>();
    out.source = j.value("source", std::string("unknown"));
  } catch (const json::exception& e) {
    throw Error(Error::Kind::Format, side + ": " + e.what());
  }
  out.validate();
  return out;
}

void write_embedding_file(const std::string& path, const LabeledEmbeddings& embeddings) {
  embeddings.validate();
  {
    io::Writer w(path);
    w.magic("TRGE");
    w.put<std::uint16_t>(kEmbeddingFormatVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(embeddings.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(embeddings.cols()));
    std::vector<float> payload(embeddings.matrix.data().begin(), embeddings.matrix.data().end());
    w.bytes(payload.data(), payload.size() * sizeof(float));
    w.finish();
  }
  json j = {{"labels", embeddings.labels}, {"source", embeddings.source}, {"pooling", "mean"}};
  std::ofstream out(sidecar_path(path));
  if (!out) throw Error(Error::Kind::Io, "cannot write " + sidecar_path(path));
  out << j.dump(2) << '\n';
}

void save_graph_json(const std::string& path, const RelationalGraph& graph) {
  const std::size_t n = graph.size();
  json rows = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < n; ++j) row.push_back(graph.at(i, j));
    rows.push_back(std::move(row));
  }
  std::ofstream out(path);
  if (!out) throw Error(Error::Kind::Io, "cannot write " + path);
  out << json{{"labels", graph.labels}, {"matrix", rows}}.dump(2) << '\n';
}

RelationalGraph load_graph_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Error::Kind::Io, "cannot open " + path);
  try {
    json j;
    in >> j;
    RelationalGraph g;
    g.labels = j.at("labels").get<std::vector<std::string>>();
    const auto rows = j.at("matrix").get<std::vector<std::vector<double>>>();
    const std::size_t n = g.labels.size();
    if (rows.size() != n) throw Error(Error::Kind::Format, path + ": matrix/label size mismatch");
    std::vector<double> flat;
    for (const auto& r : rows) {
      if (r.size() != n) throw Error(Error::Kind::Format, path + ": matrix is not square");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    g.matrix = Tensor({n, n}, std::move(flat));
    return g;
  } catch (const json::exception& e) {
    throw Error(Error::Kind::Format, path + ": " + e.what());
  }
}

}  // namespace trg
