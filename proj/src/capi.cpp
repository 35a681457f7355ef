#include <spdlog/spdlog.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "trg/train.hpp"
#include "trg/trg.h"

#ifndef TRG_VERSION_STRING
#define TRG_VERSION_STRING "0.0.0"
#endif

struct trg_config {
  trg::RunConfig cfg;
};
struct trg_embeddings {
  trg::LabeledEmbeddings e;
};
struct trg_graph {
  trg::RelationalGraph g;
};

namespace {

thread_local std::string g_last_error;

trg_status to_status(trg::Error::Kind k) {
  using K = trg::Error::Kind;
  switch (k) {
    case K::InvalidArgument: return TRG_ERR_INVALID_ARGUMENT;
    case K::Shape: return TRG_ERR_SHAPE;
    case K::Io: return TRG_ERR_IO;
    case K::Format: return TRG_ERR_FORMAT;
    case K::Mismatch: return TRG_ERR_MISMATCH;
    case K::Numeric: return TRG_ERR_NUMERIC;
    case K::State: return TRG_ERR_STATE;
  }
  return TRG_ERR_INTERNAL;
}

// Runs f, translating exceptions into a status and the thread's error message.
template <class F>
trg_status guard(F&& f) {
  g_last_error.clear();
  try {
    f();
    return TRG_OK;
  } catch (const trg::Error& e) {
    g_last_error = e.what();
    return to_status(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return TRG_ERR_INTERNAL;
}

void require(bool ok, const char* what) {
  if (!ok) throw trg::Error(trg::Error::Kind::InvalidArgument, what);
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void fill(trg_metrics* out, const trg::Metrics& m) { *out = {m.acc, m.edit, m.f1_10, m.f1_25, m.f1_50}; }

}  // namespace

extern "C" {

const char* trg_version(void) { return TRG_VERSION_STRING; }

const char* trg_status_name(trg_status s) {
  switch (s) {
    case TRG_OK: return "ok";
    case TRG_ERR_INVALID_ARGUMENT: return "invalid argument";
    case TRG_ERR_SHAPE: return "shape error";
    case TRG_ERR_IO: return "i/o error";
    case TRG_ERR_FORMAT: return "format error";
    case TRG_ERR_MISMATCH: return "mismatch";
    case TRG_ERR_NUMERIC: return "numeric error";
    case TRG_ERR_STATE: return "invalid state";
    case TRG_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* trg_last_error(void) { return g_last_error.c_str(); }

trg_status trg_set_log_level(const char* level) {
  return guard([&] {
    require(level, "level is null");
    const auto lvl = spdlog::level::from_str(level);
    if (lvl == spdlog::level::off && std::strcmp(level, "off") != 0)
      throw trg::Error(trg::Error::Kind::InvalidArgument, std::string("unknown log level \"") + level + "\"");
    spdlog::set_level(lvl);
  });
}

void trg_string_free(char* s) { std::free(s); }

trg_status trg_config_create(trg_config** out) {
  return guard([&] {
    require(out, "out is null");
    *out = new trg_config{};
  });
}

trg_status trg_config_load(const char* path, trg_config** out) {
  return guard([&] {
    require(path && out, "null argument");
    *out = new trg_config{trg::load_config(path)};
  });
}

trg_status trg_config_merge_json(trg_config* cfg, const char* json) {
  return guard([&] {
    require(cfg && json, "null argument");
    cfg->cfg = trg::config_from_json(json, cfg->cfg);
  });
}

trg_status trg_config_to_json(const trg_config* cfg, char** out) {
  return guard([&] {
    require(cfg && out, "null argument");
    *out = dup_string(trg::config_to_json(cfg->cfg));
  });
}

void trg_config_free(trg_config* cfg) { delete cfg; }

trg_status trg_embeddings_load(const char* path, trg_embeddings** out) {
  return guard([&] {
    require(path && out, "null argument");
    *out = new trg_embeddings{trg::load_embedding_file(path)};
  });
}

trg_status trg_embeddings_shape(const trg_embeddings* e, size_t* rows, size_t* cols) {
  return guard([&] {
    require(e && rows && cols, "null argument");
    *rows = e->e.rows();
    *cols = e->e.cols();
  });
}

void trg_embeddings_free(trg_embeddings* e) { delete e; }

trg_status trg_graph_build(const trg_embeddings* e, const char* metric, const char* normalization, trg_graph** out) {
  return guard([&] {
    require(e && out, "null argument");
    const auto m = trg::parse_distance_metric(metric ? metric : "l2");
    const auto n = trg::parse_graph_normalization(normalization ? normalization : "minmax");
    *out = new trg_graph{trg::build_relational_graph(e->e, m, n)};
  });
}

trg_status trg_graph_size(const trg_graph* g, size_t* n) {
  return guard([&] {
    require(g && n, "null argument");
    *n = g->g.size();
  });
}

trg_status trg_graph_value(const trg_graph* g, size_t i, size_t j, double* out) {
  return guard([&] {
    require(g && out, "null argument");
    require(i < g->g.size() && j < g->g.size(), "graph index out of range");
    *out = g->g.at(i, j);
  });
}

trg_status trg_graph_label(const trg_graph* g, size_t i, const char** out) {
  return guard([&] {
    require(g && out, "null argument");
    require(i < g->g.size(), "graph index out of range");
    *out = g->g.labels[i].c_str();
  });
}

trg_status trg_graph_save(const trg_graph* g, const char* path) {
  return guard([&] {
    require(g && path, "null argument");
    trg::save_graph_json(path, g->g);
  });
}

void trg_graph_free(trg_graph* g) { delete g; }

trg_status trg_synth_generate(const trg_config* cfg, const char* out_dir) {
  return guard([&] {
    require(cfg && out_dir, "null argument");
    const auto& c = cfg->cfg;
    c.validate();
    require(!c.data.topology.empty(), "config: data.topology is not set");
    const auto topo = trg::SkeletonTopology::load_json(c.data.topology);
    const auto data = trg::synth_generate(c.synth, topo);
    trg::save_dataset(out_dir, data);
    const auto emb = trg::simplex_embeddings(data.actions, c.model.ct, c.synth.seed);
    trg::write_embedding_file((std::filesystem::path(out_dir) / "actions.trge").string(), emb);
  });
}

trg_status trg_train(const trg_config* cfg, char** checkpoint) {
  return guard([&] {
    require(cfg, "config is null");
    require(!cfg->cfg.data.out_dir.empty(), "config: data.out_dir is not set");
    const auto r = trg::train(cfg->cfg);
    if (checkpoint) *checkpoint = dup_string(r.checkpoint);
  });
}

trg_status trg_evaluate(const char* checkpoint, const char* data_dir, const char* out_dir, unsigned threads,
                        trg_metrics* out) {
  return guard([&] {
    require(checkpoint && data_dir, "null argument");
    const auto r = trg::evaluate_checkpoint(checkpoint, data_dir, out_dir ? out_dir : "", threads);
    if (out) fill(out, r.overall);
  });
}

trg_status trg_augment_dataset(const char* in_dir, const char* out_dir, double alpha, double beta, uint64_t seed) {
  return guard([&] {
    require(in_dir && out_dir, "null argument");
    auto data = trg::load_dataset(in_dir);
    trg::AugmentConfig cfg;
    cfg.alpha = alpha;
    cfg.beta = beta;
    std::vector<trg::Tensor> xs;
    for (const auto& s : data.sequences) xs.push_back(s.x);
    trg::CounterRng rng(seed);
    const auto r = trg::apply_saep(xs, cfg, rng, true);
    nlohmann::json manifest = nlohmann::json::object();
    for (std::size_t i = 0; i < xs.size(); ++i) {
      data.sequences[i].x = r.batch[i];
      manifest[data.sequences[i].id] = r.applied[i] == trg::Augmentation::Occlusion  ? "occlusion"
                                       : r.applied[i] == trg::Augmentation::Rotation ? "rotation"
                                                                                     : "none";
    }
    trg::save_dataset(out_dir, data);
    std::ofstream m(std::filesystem::path(out_dir) / "augment.json");
    if (!m) throw trg::Error(trg::Error::Kind::Io, std::string("cannot write augment.json in ") + out_dir);
    m << nlohmann::json{{"seed", seed}, {"alpha", alpha}, {"beta", beta}, {"applied", manifest}}.dump(2) << '\n';
  });
}

trg_status trg_score_dirs(const char* pred_dir, const char* gt_dir, int ignore_class, trg_metrics* out) {
  return guard([&] {
    require(pred_dir && gt_dir && out, "null argument");
    fill(out, trg::score_directories(pred_dir, gt_dir, ignore_class).overall);
  });
}

trg_status trg_metrics_compute(const int* pred, const int* gt, size_t frames, int ignore_class, trg_metrics* out) {
  return guard([&] {
    require(pred && gt && out, "null argument");
    require(frames > 0, "empty label sequence");
    const std::vector<int> p(pred, pred + frames), g(gt, gt + frames);
    fill(out, trg::compute_metrics(p, g, ignore_class >= 0 ? trg::IgnoreClass(ignore_class) : std::nullopt));
  });
}

}  // extern "C"
