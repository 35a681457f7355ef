#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "trg/dataset.hpp"
#include "trg/metrics.hpp"
#include "trg/model.hpp"

namespace trg {

/// Adam with bias correction; parameters without a gradient are left alone.
class Adam {
 public:
  explicit Adam(const NamedTensors& params, double lr = 0.001, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step();
  std::size_t steps() const { return t_; }

 private:
  NamedTensors params_;
  double lr_, b1_, b2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Per-epoch means over sequences. acc/edit come from the training-mode forward (argmax of the
/// last class stage).
struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0, ce = 0, gs_tmse = 0, bce = 0, absolute = 0, relative = 0;
  double acc = 0, edit = 0;
  double seconds = 0;
  /// Filled when train.probe is set: the same components from an eval-mode pass over the
  /// training set with the weights at the end of the epoch.
  struct Probe {
    double loss = 0, ce = 0, gs_tmse = 0, bce = 0, absolute = 0, relative = 0;
  };
  std::optional<Probe> probe;
};

std::string epoch_log_json(const EpochLog& log);

/// Everything training needs besides the config, already loaded and cross-checked.
struct TrainInputs {
  Dataset data;
  SkeletonTopology topology;
  LabeledEmbeddings joints;
  LabeledEmbeddings actions;

  /// Throws Error{Mismatch} when labels, joint counts or channel sizes disagree with `cfg`.
  void check(const RunConfig& cfg) const;
};

TrainInputs load_train_inputs(const RunConfig& cfg);

/// Return false to stop after this epoch.
using EpochCallback = std::function<bool(const EpochLog&, Model&)>;

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
  std::string checkpoint;  // empty when out_dir is empty
};

/// Sequences are processed one at a time; gradients accumulate over batch_size sequences per
/// Adam step. With a non-empty out_dir, appends one JSON line per epoch to train_log.jsonl and
/// writes model.trgw (+ .json) at the end. Non-finite losses abort with Error{Numeric}.
TrainResult train(const RunConfig& cfg, const TrainInputs& inputs, const EpochCallback& on_epoch = {});
TrainResult train(const RunConfig& cfg, const EpochCallback& on_epoch = {});

struct SequenceResult {
  std::string id;
  std::vector<int> predicted;
  Metrics metrics;
};

struct EvalResult {
  Metrics overall;
  std::vector<SequenceResult> sequences;
};

/// Eval-mode forward, optional boundary relabeling, metrics. Parallel over sequences.
EvalResult evaluate(Model& model, const Dataset& data, const EvalConfig& cfg, std::size_t threads = 1);

/// Loads a checkpoint, evaluates `data_dir`, and with a non-empty `out_dir` writes one
/// prediction CSV per sequence plus metrics.json.
EvalResult evaluate_checkpoint(const std::string& checkpoint, const std::string& data_dir, const std::string& out_dir,
                               std::size_t threads = 0);

/// Scores prediction CSVs against ground-truth CSVs with matching file names.
EvalResult score_directories(const std::string& pred_dir, const std::string& gt_dir, int ignore_class = -1);

}  // namespace trg
