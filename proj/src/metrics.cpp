#include "trg/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "trg/tensor.hpp"

namespace trg {

std::vector<LabeledRun> run_length_encode(const std::vector<int>& labels) {
  std::vector<LabeledRun> runs;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (runs.empty() || runs.back().label != labels[t]) runs.push_back({t, t + 1, labels[t]});
    else runs.back().end = t + 1;
  }
  return runs;
}

std::vector<int> run_length_decode(const std::vector<LabeledRun>& runs) {
  std::vector<int> out;
  for (const auto& r : runs) out.insert(out.end(), r.end - r.start, r.label);
  return out;
}

namespace {

std::vector<LabeledRun> kept_runs(const std::vector<int>& labels, IgnoreClass ignore) {
  auto runs = run_length_encode(labels);
  if (ignore) std::erase_if(runs, [&](const LabeledRun& r) { return r.label == *ignore; });
  return runs;
}

void check_lengths(const std::vector<int>& pred, const std::vector<int>& gt) {
  if (pred.size() != gt.size())
    throw Error(Error::Kind::Mismatch, "prediction has " + std::to_string(pred.size()) + " frames, ground truth " +
                                           std::to_string(gt.size()));
}

}  // namespace

double frame_accuracy(const std::vector<int>& pred, const std::vector<int>& gt) {
  check_lengths(pred, gt);
  if (gt.empty()) throw Error(Error::Kind::InvalidArgument, "empty label sequence");
  std::size_t ok = 0;
  for (std::size_t t = 0; t < gt.size(); ++t) ok += pred[t] == gt[t];
  return 100.0 * static_cast<double>(ok) / static_cast<double>(gt.size());
}

std::size_t levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double edit_score(const std::vector<int>& pred, const std::vector<int>& gt, IgnoreClass ignore) {
  std::vector<int> p, g;
  for (const auto& r : kept_runs(pred, ignore)) p.push_back(r.label);
  for (const auto& r : kept_runs(gt, ignore)) g.push_back(r.label);
  const std::size_t m = std::max(p.size(), g.size());
  if (m == 0) return 100.0;
  return 100.0 * (1.0 - static_cast<double>(levenshtein(p, g)) / static_cast<double>(m));
}

double f1_at_k(const std::vector<int>& pred, const std::vector<int>& gt, double k, IgnoreClass ignore) {
  check_lengths(pred, gt);
  const auto ps = kept_runs(pred, ignore), gs = kept_runs(gt, ignore);
  std::vector<bool> used(gs.size(), false);
  std::size_t tp = 0, fp = 0;
  for (const auto& p : ps) {
    double best = -1;
    std::size_t best_idx = gs.size();
    for (std::size_t i = 0; i < gs.size(); ++i) {
      if (used[i] || gs[i].label != p.label) continue;
      const double inter = static_cast<double>(std::max<std::ptrdiff_t>(
          0, static_cast<std::ptrdiff_t>(std::min(p.end, gs[i].end)) - static_cast<std::ptrdiff_t>(std::max(p.start, gs[i].start))));
      const double uni = static_cast<double>(std::max(p.end, gs[i].end) - std::min(p.start, gs[i].start));
      const double iou = inter / uni;
      if (iou > best) {
        best = iou;
        best_idx = i;
      }
    }
    if (best_idx < gs.size() && best >= k) {
      used[best_idx] = true;
      ++tp;
    } else {
      ++fp;
    }
  }
  const std::size_t fn = gs.size() - tp;
  const double precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  const double recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  if (precision + recall == 0) return 0.0;
  return 100.0 * 2 * precision * recall / (precision + recall);
}

Metrics compute_metrics(const std::vector<int>& pred, const std::vector<int>& gt, IgnoreClass ignore) {
  return {frame_accuracy(pred, gt), edit_score(pred, gt, ignore), f1_at_k(pred, gt, 0.10, ignore),
          f1_at_k(pred, gt, 0.25, ignore), f1_at_k(pred, gt, 0.50, ignore)};
}

Metrics MetricsAccumulator::add(const std::vector<int>& pred, const std::vector<int>& gt) {
  auto m = compute_metrics(pred, gt, ignore_);
  ++n_;
  frames_ += gt.size();
  for (std::size_t t = 0; t < gt.size(); ++t) correct_ += pred[t] == gt[t];
  edit_ += m.edit;
  f10_ += m.f1_10;
  f25_ += m.f1_25;
  f50_ += m.f1_50;
  return m;
}

Metrics MetricsAccumulator::result() const {
  if (n_ == 0) return {};
  const double n = static_cast<double>(n_);
  return {100.0 * static_cast<double>(correct_) / static_cast<double>(frames_), edit_ / n, f10_ / n, f25_ / n, f50_ / n};
}

void write_label_csv(const std::string& path, const std::vector<int>& labels) {
  std::ofstream out(path);
  if (!out) throw Error(Error::Kind::Io, "cannot write " + path);
  out << "frame_index,label\n";
  for (std::size_t t = 0; t < labels.size(); ++t) out << t << ',' << labels[t] << '\n';
  if (!out) throw Error(Error::Kind::Io, "write failed for " + path);
}

std::vector<int> read_label_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Error::Kind::Io, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("frame_index,label", 0) != 0)
    throw Error(Error::Kind::Format, path + ": expected header \"frame_index,label\"");
  std::vector<int> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    long long frame = -1;
    int label = 0;
    char comma = 0;
    if (!(ss >> frame >> comma >> label) || comma != ',')
      throw Error(Error::Kind::Format, path + ":" + std::to_string(lineno) + ": malformed row \"" + line + "\"");
    if (frame != static_cast<long long>(labels.size()))
      throw Error(Error::Kind::Format, path + ":" + std::to_string(lineno) + ": frame index out of order");
    labels.push_back(label);
  }
  return labels;
}

std::string metrics_json(const Metrics& m) {
  nlohmann::json j = {{"acc", m.acc}, {"edit", m.edit}, {"f1_10", m.f1_10}, {"f1_25", m.f1_25}, {"f1_50", m.f1_50}};
  return j.dump(2);
}

void write_metrics_json(const std::string& path, const Metrics& m) {
  std::ofstream out(path);
  if (!out) throw Error(Error::Kind::Io, "cannot write " + path);
  out << metrics_json(m) << '\n';
}

}  // namespace trg
