// Command-line front end; talks to the library only through trg.h.
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "trg/trg.h"

namespace {

struct Failure {
  trg_status status;
};

void check(trg_status s) {
  if (s != TRG_OK) throw Failure{s};
}

// Owning wrappers so early exits do not leak handles.
struct Config {
  trg_config* p = nullptr;
  ~Config() { trg_config_free(p); }
};
struct Embeddings {
  trg_embeddings* p = nullptr;
  ~Embeddings() { trg_embeddings_free(p); }
};
struct Graph {
  trg_graph* p = nullptr;
  ~Graph() { trg_graph_free(p); }
};
struct Text {
  char* p = nullptr;
  ~Text() { trg_string_free(p); }
};

void load_config(Config& c, const std::string& path) {
  if (path.empty()) check(trg_config_create(&c.p));
  else check(trg_config_load(path.c_str(), &c.p));
}

void print_metrics(const trg_metrics& m) {
  std::printf("{\"acc\": %.4f, \"edit\": %.4f, \"f1_10\": %.4f, \"f1_25\": %.4f, \"f1_50\": %.4f}\n", m.acc, m.edit,
              m.f1_10, m.f1_25, m.f1_50);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trg: skeleton-based temporal action segmentation with text-derived relational graphs"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");
  app.set_version_flag("--version", std::string(trg_version()));

  auto* graph = app.add_subcommand("graph", "relational graphs from text embeddings");
  graph->require_subcommand(1);
  auto* graph_build = graph->add_subcommand("build", "build a graph from a TRGE embedding file");
  std::string emb_path, graph_out, metric = "l2", norm = "minmax";
  graph_build->add_option("--embeddings", emb_path, "TRGE file (labels sidecar next to it)")->required();
  graph_build->add_option("--out", graph_out, "output graph JSON")->required();
  graph_build->add_option("--metric", metric, "l2, l1 or cosine");
  graph_build->add_option("--normalization", norm, "minmax, zscore or sigmoid");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_cfg, synth_out;
  synth->add_option("--config", synth_cfg, "run config (synth section, data.topology, model.ct)")->required();
  synth->add_option("--out", synth_out, "output dataset directory")->required();

  auto* train = app.add_subcommand("train", "train a model");
  std::string train_cfg, train_override;
  train->add_option("--config", train_cfg, "run config JSON")->required();
  train->add_option("--set", train_override, "partial JSON merged over the config, e.g. '{\"train\":{\"epochs\":5}}'");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  std::string ckpt, eval_data, eval_out;
  unsigned threads = 0;
  eval->add_option("--checkpoint", ckpt, "TRGW checkpoint")->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--out", eval_out, "directory for prediction CSVs and metrics.json");
  eval->add_option("--threads", threads, "worker threads (default: TRG_THREADS or all cores)");

  auto* augment = app.add_subcommand("augment", "write an occluded/rotated copy of a dataset");
  std::string aug_in, aug_out;
  double alpha = 1.0 / 3.0, beta = 1.0 / 3.0;
  std::uint64_t seed = 0;
  augment->add_option("--in", aug_in, "input dataset directory")->required();
  augment->add_option("--out", aug_out, "output dataset directory")->required();
  augment->add_option("--alpha", alpha, "share of sequences occluded");
  augment->add_option("--beta", beta, "share of sequences rotated");
  augment->add_option("--seed", seed, "random seed");

  auto* config = app.add_subcommand("config", "configuration utilities");
  config->require_subcommand(1);
  auto* dump = config->add_subcommand("dump", "print the effective configuration");
  std::string dump_cfg;
  dump->add_option("--config", dump_cfg, "config to load (defaults when omitted)");

  auto* score = app.add_subcommand("score", "score prediction CSVs against ground truth CSVs");
  std::string pred_dir, gt_dir;
  int ignore = -1;
  score->add_option("--pred", pred_dir, "directory of <id>.csv predictions")->required();
  score->add_option("--gt", gt_dir, "directory of <id>.csv ground truth")->required();
  score->add_option("--ignore", ignore, "class id excluded from segment metrics");

  CLI11_PARSE(app, argc, argv);

  try {
    check(trg_set_log_level(log_level.c_str()));
    if (*graph_build) {
      Embeddings e;
      Graph g;
      check(trg_embeddings_load(emb_path.c_str(), &e.p));
      check(trg_graph_build(e.p, metric.c_str(), norm.c_str(), &g.p));
      check(trg_graph_save(g.p, graph_out.c_str()));
      std::size_t n = 0;
      check(trg_graph_size(g.p, &n));
      std::printf("wrote %zux%zu graph to %s\n", n, n, graph_out.c_str());
    } else if (*synth) {
      Config c;
      load_config(c, synth_cfg);
      check(trg_synth_generate(c.p, synth_out.c_str()));
      std::printf("wrote synthetic dataset to %s\n", synth_out.c_str());
    } else if (*train) {
      Config c;
      load_config(c, train_cfg);
      if (!train_override.empty()) check(trg_config_merge_json(c.p, train_override.c_str()));
      Text path;
      check(trg_train(c.p, &path.p));
      std::printf("%s\n", path.p);
    } else if (*eval) {
      trg_metrics m{};
      check(trg_evaluate(ckpt.c_str(), eval_data.c_str(), eval_out.empty() ? nullptr : eval_out.c_str(), threads, &m));
      print_metrics(m);
    } else if (*augment) {
      check(trg_augment_dataset(aug_in.c_str(), aug_out.c_str(), alpha, beta, seed));
      std::printf("wrote augmented dataset to %s\n", aug_out.c_str());
    } else if (*dump) {
      Config c;
      load_config(c, dump_cfg);
      Text json;
      check(trg_config_to_json(c.p, &json.p));
      std::printf("%s\n", json.p);
    } else if (*score) {
      trg_metrics m{};
      check(trg_score_dirs(pred_dir.c_str(), gt_dir.c_str(), ignore, &m));
      print_metrics(m);
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "trg: %s: %s\n", trg_status_name(f.status), trg_last_error());
    return static_cast<int>(f.status);
  }
  return 0;
}
