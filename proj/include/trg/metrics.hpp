#pragma once

#include <optional>
#include <string>
#include <vector>

namespace trg {

struct LabeledRun {
  std::size_t start;
  std::size_t end;  // exclusive
  int label;
};

std::vector<LabeledRun> run_length_encode(const std::vector<int>& labels);
std::vector<int> run_length_decode(const std::vector<LabeledRun>& runs);

/// Frames whose label equals `ignore` are excluded from segment-level matching.
using IgnoreClass = std::optional<int>;

double frame_accuracy(const std::vector<int>& pred, const std::vector<int>& gt);

/// Levenshtein distance between two label sequences.
std::size_t levenshtein(const std::vector<int>& a, const std::vector<int>& b);

/// 100 * (1 - lev(segment labels) / max segment count).
double edit_score(const std::vector<int>& pred, const std::vector<int>& gt, IgnoreClass ignore = std::nullopt);

/// Segmental F1 at IoU threshold k (a fraction, e.g. 0.25), in [0,100].
double f1_at_k(const std::vector<int>& pred, const std::vector<int>& gt, double k, IgnoreClass ignore = std::nullopt);

struct Metrics {
  double acc = 0;
  double edit = 0;
  double f1_10 = 0;
  double f1_25 = 0;
  double f1_50 = 0;
};

Metrics compute_metrics(const std::vector<int>& pred, const std::vector<int>& gt, IgnoreClass ignore = std::nullopt);

/// Dataset aggregate: accuracy weighted by frames, edit and F1 averaged over sequences.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(IgnoreClass ignore = std::nullopt) : ignore_(ignore) {}
  Metrics add(const std::vector<int>& pred, const std::vector<int>& gt);
  Metrics result() const;
  std::size_t sequences() const { return n_; }

 private:
  IgnoreClass ignore_;
  std::size_t n_ = 0;
  std::size_t frames_ = 0;
  std::size_t correct_ = 0;
  double edit_ = 0, f10_ = 0, f25_ = 0, f50_ = 0;
};

/// CSV with header "frame_index,label"; rows must be in frame order starting at 0.
void write_label_csv(const std::string& path, const std::vector<int>& labels);
std::vector<int> read_label_csv(const std::string& path);

/// {"acc": .., "edit": .., "f1_10": .., "f1_25": .., "f1_50": ..}
std::string metrics_json(const Metrics& m);
void write_metrics_json(const std::string& path, const Metrics& m);

}  // namespace trg
