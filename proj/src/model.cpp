#include "trg/model.hpp"

#include <fstream>

#include "json.hpp"

namespace trg {

using json = nlohmann::json;

std::size_t scales_for(const ModelConfig& cfg, const SkeletonTopology& topo) {
  if (cfg.k > 0) return cfg.k;
  return topo.size() == 25 ? 13 : std::max<std::size_t>(1, topo.diameter());
}

Model make_model(const ModelConfig& cfg, std::size_t classes, const SkeletonTopology& topo, const Tensor& tjg,
                 std::uint64_t seed) {
  topo.validate();
  Model m;
  m.cfg = cfg;
  m.classes = classes;
  m.topology = topo;
  m.tjg = tjg;
  CounterRng rng = CounterRng(seed).fork(1);

  BackboneConfig bc;
  bc.spatial = {cfg.c0, cfg.c, cfg.c1, scales_for(cfg, topo), cfg.frame_graph, cfg.channel_graph, cfg.text_graph};
  bc.c2 = cfg.c2;
  bc.c3 = cfg.c3;
  bc.heads = cfg.heads;
  bc.layers = cfg.layers;
  bc.classes = classes;
  m.backbone = make_backbone(bc, topo, tjg, m.params, rng);
  for (std::size_t s = 0; s < cfg.class_stages; ++s)
    m.class_stages.push_back(make_class_stage(classes, cfg.c, cfg.c3, cfg.heads, cfg.refine_layers, m.params, rng,
                                              "refine.class." + std::to_string(s)));
  for (std::size_t s = 0; s < cfg.boundary_stages; ++s)
    m.boundary_stages.push_back(
        make_boundary_stage(cfg.c, cfg.refine_layers, m.params, rng, "refine.boundary." + std::to_string(s)));
  m.w_r = m.params.add_weight("proj.W_r", {cfg.ct, cfg.c}, rng);
  m.b_r = m.params.add_bias("proj.b_r", cfg.ct, cfg.c, rng);
  return m;
}

ModelOutput model_forward(const Tensor& x, Model& model, const ForwardMode& mode) {
  if (x.rank() != 3 || x.dim(0) != model.cfg.c0 || x.dim(2) != model.joints())
    throw Error(Error::Kind::Mismatch, "input " + shape_str(x.shape()) + " does not fit a model with C0=" +
                                           std::to_string(model.cfg.c0) + ", V=" + std::to_string(model.joints()));
  auto bb = backbone_forward(x, model.backbone, mode);
  ModelOutput out;
  out.class_stages.push_back(bb.cls);
  out.boundary_stages.push_back(bb.bnd);
  Tensor probs = bb.cls, values = bb.features;
  for (const auto& st : model.class_stages) {
    auto r = refine_class(probs, values, st, mode);
    probs = r.probs;
    values = r.features;
    out.class_stages.push_back(probs);
  }
  Tensor b = bb.bnd;
  for (const auto& st : model.boundary_stages) {
    b = refine_boundary(b, st, mode);
    out.boundary_stages.push_back(b);
  }
  out.representation = project_representation(bb.features, model.w_r, model.b_r);
  return out;
}

std::vector<int> predict_labels(const ModelOutput& out, const EvalConfig& eval) {
  const auto& probs = out.class_stages.back();
  if (!eval.relabel) return argmax_labels(probs);
  return boundary_guided_relabel(probs, out.boundary_stages.back(), eval.boundary_threshold, eval.boundary_radius)
      .labels;
}

NamedTensors model_state(const Model& model) {
  NamedTensors all = model.params.items();
  const auto& bn = model.backbone.spatial.bn;
  const std::size_t c = bn.running_mean.size();
  all.emplace_back("buffer.spatial.bn.running_mean", Tensor({c}, bn.running_mean));
  all.emplace_back("buffer.spatial.bn.running_var", Tensor({c}, bn.running_var));
  return all;
}

void load_model_state(Model& model, const NamedTensors& saved) {
  NamedTensors params;
  auto& bn = model.backbone.spatial.bn;
  bool have_mean = false, have_var = false;
  for (const auto& [name, t] : saved) {
    if (name.rfind("buffer.", 0) != 0) {
      params.emplace_back(name, t);
      continue;
    }
    auto* dst = name == "buffer.spatial.bn.running_mean" ? &bn.running_mean
                : name == "buffer.spatial.bn.running_var" ? &bn.running_var
                                                           : nullptr;
    if (!dst) throw Error(Error::Kind::Mismatch, "unexpected checkpoint buffer " + name);
    if (t.size() != dst->size()) throw Error(Error::Kind::Mismatch, name + ": size mismatch");
    dst->assign(t.data().begin(), t.data().end());
    (dst == &bn.running_mean ? have_mean : have_var) = true;
  }
  if (!have_mean || !have_var) throw Error(Error::Kind::Mismatch, "checkpoint lacks batch-norm statistics");
  model.params.load(params);
}

void save_model(const std::string& path, const Model& model, const RunConfig& run,
                const std::vector<std::string>& actions) {
  write_checkpoint(path, model_state(model));
  json topo = {{"joints", model.topology.joints}, {"edges", json::array()}};
  for (const auto& [a, b] : model.topology.edges) topo["edges"].push_back({a, b});
  const std::size_t v = model.joints();
  json tjg = json::array();
  for (std::size_t i = 0; i < v; ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < v; ++j) row.push_back(model.tjg.at({i, j}));
    tjg.push_back(std::move(row));
  }
  json side = {{"config", json::parse(config_to_json(run))},
               {"actions", actions},
               {"topology", topo},
               {"tjg", tjg}};
  std::ofstream out(path + ".json");
  if (!out) throw Error(Error::Kind::Io, "cannot write " + path + ".json");
  out << side.dump(2) << '\n';
}

LoadedModel load_model(const std::string& path) {
  const auto side_path = path + ".json";
  std::ifstream in(side_path);
  if (!in) throw Error(Error::Kind::Io, "missing checkpoint description " + side_path);
  json side;
  SkeletonTopology topo;
  LoadedModel lm;
  Tensor tjg;
  try {
    in >> side;
    lm.run = config_from_json(side.at("config").dump());
    lm.actions = side.at("actions").get<std::vector<std::string>>();
    topo.joints = side.at("topology").at("joints").get<std::vector<std::string>>();
    for (const auto& e : side.at("topology").at("edges"))
      topo.edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
    const auto rows = side.at("tjg").get<std::vector<std::vector<double>>>();
    std::vector<double> flat;
    for (const auto& r : rows) {
      if (r.size() != rows.size()) throw Error(Error::Kind::Format, side_path + ": tjg is not square");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    tjg = Tensor({rows.size(), rows.size()}, std::move(flat));
  } catch (const json::exception& e) {
    throw Error(Error::Kind::Format, side_path + ": " + e.what());
  }
  lm.model = make_model(lm.run.model, lm.actions.size(), topo, tjg, lm.run.train.seed);
  load_model_state(lm.model, read_checkpoint(path));
  return lm;
}

}  // namespace trg
