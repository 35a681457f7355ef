#include "trg/train.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "json.hpp"

namespace trg {

namespace fs = std::filesystem;
using json = nlohmann::json;

Adam::Adam(const NamedTensors& params, double lr, double beta1, double beta2, double eps)
    : params_(params), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
  for (const auto& [_, p] : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor p = params_[i].second;
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto d = p.mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < d.size(); ++k) {
      m[k] = b1_ * m[k] + (1 - b1_) * g[k];
      v[k] = b2_ * v[k] + (1 - b2_) * g[k] * g[k];
      d[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
  }
}

std::string epoch_log_json(const EpochLog& l) {
  json j{{"epoch", l.epoch},       {"loss", l.loss},         {"ce", l.ce},
              {"gs_tmse", l.gs_tmse},   {"bce", l.bce},           {"absolute", l.absolute},
              {"relative", l.relative}, {"train_acc", l.acc},     {"train_edit", l.edit},
              {"seconds", l.seconds}};
  if (l.probe)
    j["probe"] = {{"loss", l.probe->loss},         {"ce", l.probe->ce},   {"gs_tmse", l.probe->gs_tmse},
                  {"bce", l.probe->bce},           {"absolute", l.probe->absolute},
                  {"relative", l.probe->relative}};
  return j.dump();
}

void TrainInputs::check(const RunConfig& cfg) const {
  data.validate();
  topology.validate();
  const auto& x0 = data.sequences.front().x;
  if (x0.dim(2) != topology.size())
    throw Error(Error::Kind::Mismatch, "dataset has " + std::to_string(x0.dim(2)) + " joints, topology " +
                                           std::to_string(topology.size()));
  if (x0.dim(0) != cfg.model.c0)
    throw Error(Error::Kind::Mismatch, "dataset has " + std::to_string(x0.dim(0)) + " channels, model.c0 is " +
                                           std::to_string(cfg.model.c0));
  if (joints.labels != topology.joints)
    throw Error(Error::Kind::Mismatch, "joint embedding labels do not match the topology joints in order");
  if (actions.labels != data.actions)
    throw Error(Error::Kind::Mismatch, "action embedding labels do not match the dataset's actions.json");
  if (actions.cols() != cfg.model.ct)
    throw Error(Error::Kind::Mismatch, "action embeddings are " + std::to_string(actions.cols()) +
                                           "-d, model.ct is " + std::to_string(cfg.model.ct));
}

TrainInputs load_train_inputs(const RunConfig& cfg) {
  auto need = [](const std::string& p, const char* what) {
    if (p.empty()) throw Error(Error::Kind::InvalidArgument, std::string("config: ") + what + " is not set");
  };
  need(cfg.data.train_dir, "data.train_dir");
  need(cfg.data.topology, "data.topology");
  need(cfg.data.joint_embeddings, "data.joint_embeddings");
  need(cfg.data.action_embeddings, "data.action_embeddings");
  return {load_dataset(cfg.data.train_dir), SkeletonTopology::load_json(cfg.data.topology),
          load_embedding_file(cfg.data.joint_embeddings), load_embedding_file(cfg.data.action_embeddings)};
}

TrainResult train(const RunConfig& cfg, const TrainInputs& in, const EpochCallback& on_epoch) {
  cfg.validate();
  in.check(cfg);
  const auto metric = parse_distance_metric(cfg.model.distance);
  const auto norm = parse_graph_normalization(cfg.model.normalization);
  const auto tjg = build_relational_graph(in.joints, metric, norm).matrix;
  const auto action_graph = build_relational_graph(in.actions, metric, norm).matrix;
  const Tensor& action_emb = in.actions.matrix;

  TrainResult result{make_model(cfg.model, in.data.classes(), in.topology, tjg, cfg.train.seed), {}, {}};
  Model& model = result.model;
  Adam adam(model.params.items(), cfg.train.learning_rate);
  spdlog::info("training {} parameters on {} sequences, seed {}", model.params.count(), in.data.sequences.size(),
               cfg.train.seed);

  std::ofstream log_out;
  if (!cfg.data.out_dir.empty()) {
    fs::create_directories(cfg.data.out_dir);
    const auto log_path = fs::path(cfg.data.out_dir) / "train_log.jsonl";
    log_out.open(log_path);
    if (!log_out) throw Error(Error::Kind::Io, "cannot write " + log_path.string());
  }

  const CounterRng root(cfg.train.seed);
  const std::size_t n = in.data.sequences.size(), bs = cfg.train.batch_size;
  for (std::size_t epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    CounterRng rng = root.fork(1000 + epoch);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<Tensor> xs;
    for (auto i : order) xs.push_back(in.data.sequences[i].x);
    const auto augmented = apply_saep(xs, cfg.augment, rng, cfg.train.augment);

    EpochLog log;
    log.epoch = epoch;
    MetricsAccumulator train_metrics;
    for (std::size_t begin = 0; begin < n; begin += bs) {
      const std::size_t end = std::min(n, begin + bs);
      model.params.zero_grad();
      for (std::size_t k = begin; k < end; ++k) {
        const auto& seq = in.data.sequences[order[k]];
        CounterRng drop = rng.fork(k);
        Tape tape;
        TapeScope scope(tape);
        const auto out = model_forward(augmented.batch[k], model, {true, &drop, cfg.model.dropout});
        const auto lb = total_loss(out.class_stages, out.boundary_stages, out.representation, seq.labels,
                                   action_graph, action_emb, cfg.loss);
        const double total = lb.total.item();
        if (!std::isfinite(total)) {
          const auto msg = fmt::format(
              "non-finite loss at epoch {} on {}: ce={} gs_tmse={} bce={} absolute={} relative={}", epoch, seq.id,
              lb.ce, lb.gs_tmse, lb.bce, lb.absolute, lb.relative);
          spdlog::error(msg);
          throw Error(Error::Kind::Numeric, msg);
        }
        tape.backward(scale(lb.total, 1.0 / static_cast<double>(end - begin)));
        log.loss += total;
        log.ce += lb.ce;
        log.gs_tmse += lb.gs_tmse;
        log.bce += lb.bce;
        log.absolute += lb.absolute;
        log.relative += lb.relative;
        train_metrics.add(argmax_labels(out.class_stages.back()), seq.labels);
      }
      adam.step();
    }
    const double nd = static_cast<double>(n);
    if (cfg.train.probe) {
      EpochLog::Probe p;
      for (const auto& seq : in.data.sequences) {
        const auto out = model_forward(seq.x, model, {});
        const auto lb = total_loss(out.class_stages, out.boundary_stages, out.representation, seq.labels,
                                   action_graph, action_emb, cfg.loss);
        p.loss += lb.total.item() / nd;
        p.ce += lb.ce / nd;
        p.gs_tmse += lb.gs_tmse / nd;
        p.bce += lb.bce / nd;
        p.absolute += lb.absolute / nd;
        p.relative += lb.relative / nd;
      }
      log.probe = p;
    }
    for (double* v : {&log.loss, &log.ce, &log.gs_tmse, &log.bce, &log.absolute, &log.relative}) *v /= nd;
    const auto m = train_metrics.result();
    log.acc = m.acc;
    log.edit = m.edit;
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.log.push_back(log);
    if (log_out) log_out << epoch_log_json(log) << '\n' << std::flush;
    spdlog::info("epoch {:>4}  loss {:.4f}  acc {:.1f}  edit {:.1f}  ({:.1f}s)", epoch, log.loss, log.acc, log.edit,
                 log.seconds);
    if (on_epoch && !on_epoch(log, model)) break;
  }

  if (!cfg.data.out_dir.empty()) {
    result.checkpoint = (fs::path(cfg.data.out_dir) / "model.trgw").string();
    save_model(result.checkpoint, model, cfg, in.data.actions);
    spdlog::info("checkpoint written to {}", result.checkpoint);
  }
  return result;
}

TrainResult train(const RunConfig& cfg, const EpochCallback& on_epoch) {
  return train(cfg, load_train_inputs(cfg), on_epoch);
}

namespace {

template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& f) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

EvalResult evaluate(Model& model, const Dataset& data, const EvalConfig& cfg, std::size_t threads) {
  data.validate();
  const auto& x0 = data.sequences.front().x;
  if (x0.dim(2) != model.joints())
    throw Error(Error::Kind::Mismatch, "dataset has " + std::to_string(x0.dim(2)) + " joints, checkpoint expects " +
                                           std::to_string(model.joints()));
  if (x0.dim(0) != model.cfg.c0)
    throw Error(Error::Kind::Mismatch, "dataset has " + std::to_string(x0.dim(0)) +
                                           " channels, checkpoint expects " + std::to_string(model.cfg.c0));
  if (data.classes() != model.classes)
    throw Error(Error::Kind::Mismatch, "dataset has " + std::to_string(data.classes()) +
                                           " classes, checkpoint expects " + std::to_string(model.classes));

  EvalResult r;
  r.sequences.resize(data.sequences.size());
  const IgnoreClass ignore = cfg.ignore_class >= 0 ? IgnoreClass(cfg.ignore_class) : std::nullopt;
  parallel_for(data.sequences.size(), threads, [&](std::size_t i) {
    const auto& s = data.sequences[i];
    const auto out = model_forward(s.x, model, {});
    auto pred = predict_labels(out, cfg);
    r.sequences[i] = {s.id, pred, compute_metrics(pred, s.labels, ignore)};
  });
  MetricsAccumulator acc(ignore);
  for (std::size_t i = 0; i < data.sequences.size(); ++i) acc.add(r.sequences[i].predicted, data.sequences[i].labels);
  r.overall = acc.result();
  return r;
}

EvalResult evaluate_checkpoint(const std::string& checkpoint, const std::string& data_dir, const std::string& out_dir,
                               std::size_t threads) {
  auto lm = load_model(checkpoint);
  const auto data = load_dataset(data_dir);
  if (data.actions != lm.actions)
    throw Error(Error::Kind::Mismatch, "dataset actions.json differs from the checkpoint's class list");
  auto r = evaluate(lm.model, data, lm.run.eval, resolve_threads(threads));
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    for (const auto& s : r.sequences) write_label_csv((fs::path(out_dir) / (s.id + ".csv")).string(), s.predicted);
    write_metrics_json((fs::path(out_dir) / "metrics.json").string(), r.overall);
  }
  return r;
}

EvalResult score_directories(const std::string& pred_dir, const std::string& gt_dir, int ignore_class) {
  if (!fs::is_directory(pred_dir)) throw Error(Error::Kind::Io, "not a directory: " + pred_dir);
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(pred_dir))
    if (e.path().extension() == ".csv") ids.push_back(e.path().stem().string());
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw Error(Error::Kind::InvalidArgument, "no prediction CSVs in " + pred_dir);
  const IgnoreClass ignore = ignore_class >= 0 ? IgnoreClass(ignore_class) : std::nullopt;
  MetricsAccumulator acc(ignore);
  EvalResult r;
  for (const auto& id : ids) {
    auto pred = read_label_csv((fs::path(pred_dir) / (id + ".csv")).string());
    const auto gt = read_label_csv((fs::path(gt_dir) / (id + ".csv")).string());
    auto m = acc.add(pred, gt);
    r.sequences.push_back({id, std::move(pred), m});
  }
  r.overall = acc.result();
  return r;
}

}  // namespace trg
