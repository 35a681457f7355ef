#pragma once

#include <string>
#include <vector>

#include "trg/config.hpp"
#include "trg/refine.hpp"
#include "trg/textgraph.hpp"

namespace trg {

/// Backbone, refinement stages and the text projection, with their parameters.
struct Model {
  ModelConfig cfg;
  std::size_t classes = 0;
  SkeletonTopology topology;
  Tensor tjg;
  ParamSet params;
  Backbone backbone;
  std::vector<ClassStage> class_stages;
  std::vector<BoundaryStage> boundary_stages;
  Tensor w_r, b_r;  // C -> Ct

  std::size_t joints() const { return topology.size(); }
};

/// Resolved K for a topology (model.k == 0 picks a default).
std::size_t scales_for(const ModelConfig& cfg, const SkeletonTopology& topo);

/// Parameters are drawn from `seed`; `tjg` must be V x V in topology joint order.
Model make_model(const ModelConfig& cfg, std::size_t classes, const SkeletonTopology& topo, const Tensor& tjg,
                 std::uint64_t seed);

struct ModelOutput {
  std::vector<Tensor> class_stages;     // backbone first, then refinements, each [Q,T]
  std::vector<Tensor> boundary_stages;  // [1,T]
  Tensor representation;                // projected backbone features [Ct,T]
};

ModelOutput model_forward(const Tensor& x, Model& model, const ForwardMode& mode);

/// Final-stage labels, optionally boundary-relabeled.
std::vector<int> predict_labels(const ModelOutput& out, const EvalConfig& eval);

/// Parameters plus batch-norm running statistics.
NamedTensors model_state(const Model& model);
void load_model_state(Model& model, const NamedTensors& saved);

/// TRGW weights at `path`, with "<path>.json" describing config, classes, topology and TJG so the
/// checkpoint can be evaluated on its own.
void save_model(const std::string& path, const Model& model, const RunConfig& run, const std::vector<std::string>& actions);

struct LoadedModel {
  Model model;
  RunConfig run;
  std::vector<std::string> actions;
};

LoadedModel load_model(const std::string& path);

}  // namespace trg
