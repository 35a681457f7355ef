#pragma once

#include <string>

#include "trg/augment.hpp"
#include "trg/supervision.hpp"

namespace trg {

struct DataPaths {
  std::string train_dir;
  std::string test_dir;
  std::string topology;
  std::string joint_embeddings;
  std::string action_embeddings;
  std::string out_dir = "run";
};

struct ModelConfig {
  std::size_t c0 = 6;
  std::size_t c = 64;
  std::size_t c1 = 16;
  std::size_t c2 = 8;
  std::size_t c3 = 16;
  std::size_t ct = 768;
  std::size_t heads = 4;
  std::size_t layers = 10;
  std::size_t refine_layers = 10;
  std::size_t k = 0;  // 0: 13 for 25-joint skeletons, graph diameter otherwise
  std::size_t class_stages = 1;
  std::size_t boundary_stages = 2;
  double dropout = 0.5;
  bool frame_graph = true;
  bool channel_graph = true;
  bool text_graph = true;
  std::string distance = "l2";
  std::string normalization = "minmax";
};

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 8;
  std::size_t epochs = 300;
  std::uint64_t seed = 0;
  bool augment = true;
  bool probe = false;  // eval-mode loss over the training set after every epoch
  std::size_t threads = 0;  // 0: TRG_THREADS or hardware concurrency
};

struct EvalConfig {
  bool relabel = true;
  double boundary_threshold = 0.5;
  std::size_t boundary_radius = 2;  // non-maximum suppression window for relabeling
  int ignore_class = -1;            // excluded from segment metrics when >= 0
};

struct SynthConfig {
  std::size_t classes = 3;
  std::size_t sequences = 20;
  std::size_t frames = 200;
  std::size_t min_segments = 3;
  std::size_t max_segments = 8;
  double noise = 0.02;
  std::uint64_t seed = 0;
};

struct RunConfig {
  DataPaths data;
  ModelConfig model;
  LossWeights loss;
  AugmentConfig augment;
  TrainConfig train;
  EvalConfig eval;
  SynthConfig synth;

  /// Range checks across sections; throws Error{InvalidArgument}.
  void validate() const;
};

/// Sections and keys mirror the structs above. Missing keys keep their defaults; unknown keys are
/// rejected so typos do not silently fall back.
RunConfig config_from_json(const std::string& text, const RunConfig& base = {});
std::string config_to_json(const RunConfig& cfg);

/// Relative data paths are resolved against the config file's directory.
RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& cfg);

/// Worker thread cap: explicit value, else TRG_THREADS, else hardware concurrency.
std::size_t resolve_threads(std::size_t requested);

}  // namespace trg
