#include "trg/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "trg/tensor.hpp"
#include "trg/textgraph.hpp"

namespace trg {

using json = nlohmann::json;

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DataPaths, train_dir, test_dir, topology, joint_embeddings,
                                                action_embeddings, out_dir)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ModelConfig, c0, c, c1, c2, c3, ct, heads, layers, refine_layers, k,
                                                class_stages, boundary_stages, dropout, frame_graph, channel_graph,
                                                text_graph, distance, normalization)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LossWeights, tau, sigma, lambda_abs, lambda_rel, boundary_radius)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AugmentConfig, alpha, beta, max_occlusion, rotation_axis)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, learning_rate, batch_size, epochs, seed, augment, probe,
                                                threads)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvalConfig, relabel, boundary_threshold, boundary_radius, ignore_class)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SynthConfig, classes, sequences, frames, min_segments, max_segments,
                                                noise, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RunConfig, data, model, loss, augment, train, eval, synth)

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Error::Kind::InvalidArgument, "config: " + what);
}

// Every key in `given` must exist in `known` (the serialized defaults), one level of nesting.
void reject_unknown(const json& given, const json& known) {
  if (!given.is_object()) throw Error(Error::Kind::Format, "config: expected a JSON object");
  for (const auto& [section, body] : given.items()) {
    if (!known.contains(section)) throw Error(Error::Kind::Format, "config: unknown section \"" + section + "\"");
    if (!body.is_object()) throw Error(Error::Kind::Format, "config: section \"" + section + "\" must be an object");
    for (const auto& [key, _] : body.items())
      if (!known[section].contains(key))
        throw Error(Error::Kind::Format, "config: unknown key \"" + section + "." + key + "\"");
  }
}

}  // namespace

void RunConfig::validate() const {
  const auto& m = model;
  require(m.c0 >= 1 && m.c >= 1 && m.c2 >= 1 && m.c3 >= 1, "channel sizes must be positive");
  require(m.c1 >= 1 && m.c % m.c1 == 0, "model.c must be a multiple of model.c1");
  require(m.heads >= 1 && m.layers >= 1, "model.heads and model.layers must be >= 1");
  require(m.dropout >= 0 && m.dropout < 1, "model.dropout must be in [0,1)");
  require(loss.tau > 0 && loss.sigma > 0, "loss.tau and loss.sigma must be positive");
  require(loss.lambda_abs >= 0 && loss.lambda_rel >= 0, "loss weights must be >= 0");
  augment.validate();
  require(train.learning_rate >= 0, "train.learning_rate must be >= 0");
  require(train.batch_size >= 1, "train.batch_size must be >= 1");
  require(eval.boundary_threshold >= 0 && eval.boundary_threshold <= 1, "eval.boundary_threshold must be in [0,1]");
  require(synth.classes >= 2, "synth.classes must be >= 2");
  require(synth.min_segments >= 1 && synth.min_segments <= synth.max_segments, "synth segment range is empty");
  require(synth.frames >= 5 * synth.max_segments, "synth.frames too small for synth.max_segments");
  parse_distance_metric(m.distance);
  parse_graph_normalization(m.normalization);
}

RunConfig config_from_json(const std::string& text, const RunConfig& base) {
  json given;
  try {
    given = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Error::Kind::Format, std::string("config: ") + e.what());
  }
  json merged = base;
  reject_unknown(given, merged);
  merged.merge_patch(given);
  try {
    return merged.get<RunConfig>();
  } catch (const json::exception& e) {
    throw Error(Error::Kind::Format, std::string("config: ") + e.what());
  }
}

std::string config_to_json(const RunConfig& cfg) { return json(cfg).dump(2); }

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Error::Kind::Io, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  auto cfg = config_from_json(ss.str());
  namespace fs = std::filesystem;
  const auto dir = fs::path(path).parent_path();
  for (auto* p : {&cfg.data.train_dir, &cfg.data.test_dir, &cfg.data.topology, &cfg.data.joint_embeddings,
                  &cfg.data.action_embeddings, &cfg.data.out_dir})
    if (!p->empty() && fs::path(*p).is_relative()) *p = (dir / *p).lexically_normal().string();
  return cfg;
}

void save_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw Error(Error::Kind::Io, "cannot write " + path);
  out << config_to_json(cfg) << '\n';
}

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("TRG_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace trg
