// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "trg/augment.hpp"
#include "trg/gradcheck.hpp"
#include "trg/metrics.hpp"
#include "trg/ops.hpp"
#include "trg/refine.hpp"
#include "trg/supervision.hpp"
#include "trg/textgraph.hpp"
#include "trg/train.hpp"

using namespace trg;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Outcome {
  bool pass;
  std::string detail;
};

Tensor rand_tensor(const Shape& shape, CounterRng& rng, double lo = -1, double hi = 1) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(shape, std::move(v));
}

Tensor rand_param(const Shape& shape, CounterRng& rng, double lo = -1, double hi = 1) {
  auto t = rand_tensor(shape, rng, lo, hi);
  return Tensor::parameter(shape, std::vector<double>(t.data().begin(), t.data().end()));
}

std::vector<Tensor> leaves(const ParamSet& ps) {
  std::vector<Tensor> out;
  for (const auto& [_, t] : ps.items()) out.push_back(t);
  return out;
}

double max_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return INFINITY;
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

SkeletonTopology star4() {
  SkeletonTopology t;
  t.joints = {"a", "b", "c", "d"};
  t.edges = {{0, 1}, {0, 2}, {0, 3}};
  return t;
}

const ForwardMode kEval{};

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  CounterRng rng(101);
  std::vector<std::pair<std::string, double>> errs;
  auto check = [&](const std::string& name, const std::function<Tensor()>& f, const std::vector<Tensor>& p) {
    errs.emplace_back(name, finite_diff_check(f, p));
  };

  // losses, Q=3 T=8
  auto logits = rand_param({3, 8}, rng, -2, 2);
  auto braw = rand_param({1, 8}, rng, -2, 2);
  auto af = rand_param({8, 4}, rng);
  auto ae = rand_tensor({8, 4}, rng);
  const std::vector<int> labels = {0, 0, 1, 1, 1, 2, 0, 0};
  const std::vector<int> classes = {0, 1, 2, 0};
  Tensor tag({3, 3}, {1, 0.4, 0.1, 0.4, 1, 0.7, 0.1, 0.7, 1});
  check("ce", [&] { return ce_loss(softmax(logits, 0), labels); }, {logits});
  check("gs_tmse", [&] { return gs_tmse(softmax(logits, 0), 1.0, 4.0); }, {logits});
  check("boundary_bce", [&] { return boundary_bce(sigmoid(braw), boundary_targets(labels, 2)); }, {braw});
  check("absolute", [&] { return absolute_loss(af, ae, classes); }, {af});
  check("relative", [&] { return relative_loss(af, classes, tag); }, {af});
  auto wr = rand_param({8, 4}, rng), br = rand_param({8}, rng);
  auto feats = rand_param({4, 8}, rng);
  auto emb = rand_tensor({3, 8}, rng);
  check("total",
        [&] {
          auto fr = project_representation(feats, wr, br);
          auto y = softmax(logits, 0);
          return total_loss({y, softmax(scale(logits, 0.5), 0)}, {sigmoid(braw)}, fr, labels, tag, emb, LossWeights{})
              .total;
        },
        {logits, braw, wr, br, feats});

  // spatial, C0=3 C=8 T=5 V=4
  const auto topo = star4();
  {
    auto a = multiscale_adjacency(topo, 2);
    auto x = rand_param({3, 5, 4}, rng);
    auto b = rand_param({4, 8}, rng, -0.2, 0.2);
    auto w = rand_param({8, 6}, rng), bias = rand_param({8}, rng);
    auto probe = rand_tensor({8, 5, 4}, rng);
    check("multiscale_gcn", [&] { return sum(mul(multiscale_gcn_forward(x, a, b, w, bias), probe)); },
          {x, b, w, bias});
  }
  {
    ParamSet ps;
    SpatialConfig cfg;
    cfg.c0 = 3;
    cfg.c = 8;
    cfg.c1 = 2;
    cfg.k = 2;
    auto block = make_spatial_block(cfg, topo, rand_tensor({4, 4}, rng, 0, 1), ps, rng);
    for (auto& v : block.b.mutable_data()) v = rng.uniform(-0.3, 0.3);
    auto fg = rand_param({8, 5, 4}, rng);
    auto probe = rand_tensor({8, 5, 4}, rng);
    check("adaptive_spatial", [&] { return sum(mul(text_adaptive_forward(fg, block, true), probe)); },
          {fg, block.w_p, block.b_p, block.w_q, block.b_q, block.w_j, block.b_j, block.gamma, block.beta});
  }

  // temporal, C=8 T=8 V=4
  {
    ParamSet ps;
    auto att = make_attention_layer(8, 2, 2, ps, rng, "a");
    auto fus = make_fusion_layer(8, ps, rng, "f");
    auto merge = make_merge_head(8, 3, 4, ps, rng, "m");
    auto fs3 = rand_param({8, 8, 4}, rng);
    auto ft = rand_param({8, 8}, rng), v = rand_param({8, 8}, rng);
    auto probe = rand_tensor({8, 8}, rng);
    auto p = leaves(ps);
    p.insert(p.end(), {fs3, ft, v});
    check("linear_attention", [&] { return sum(mul(linear_attention(ft, v, att, kEval), probe)); }, p);
    check("fusion", [&] { return sum(mul(st_fusion(merge_spatial(fs3, merge), ft, fus), probe)); }, p);
  }

  // refinement, Q=3 C=8 T=8
  {
    ParamSet ps;
    auto cs = make_class_stage(3, 8, 2, 2, 2, ps, rng, "rc");
    auto bs = make_boundary_stage(8, 3, ps, rng, "rb");
    auto prev = rand_param({3, 8}, rng, 0.05, 1);
    auto src = rand_param({8, 8}, rng);
    auto prevb = rand_param({1, 8}, rng, 0.05, 0.95);
    auto pc = rand_tensor({3, 8}, rng), pb = rand_tensor({1, 8}, rng);
    auto p = leaves(ps);
    p.insert(p.end(), {prev, src, prevb});
    check("refine_class", [&] { return sum(mul(refine_class(prev, src, cs, kEval).probs, pc)); }, p);
    check("refine_boundary", [&] { return sum(mul(refine_boundary(prevb, bs, kEval), pb)); }, p);
  }

  const double secs = seconds_since(t0);
  bool ok = secs < 60;
  std::string worst;
  double worst_err = 0;
  for (const auto& [name, e] : errs) {
    ok = ok && e < 1e-4;
    if (!(e <= worst_err)) worst_err = e, worst = name;
  }
  return {ok, fmt("%zu checks, worst %s %.2e (< 1e-4), %.1fs (< 60s)", errs.size(), worst.c_str(), worst_err, secs)};
}

Outcome associativity() {
  CounterRng rng(102);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ParamSet ps;
    const std::size_t c = 2 + rng.below(7), c3 = 1 + rng.below(4), heads = 1 + rng.below(3), t = 1 + rng.below(16);
    auto layer = make_attention_layer(c, c3, heads, ps, rng, "a");
    auto x = rand_tensor({c, t}, rng, -2, 2);
    auto v = rand_tensor({c, t}, rng, -2, 2);
    worst = std::max(worst, max_diff(linear_attention(x, v, layer, kEval), quadratic_attention_reference(x, v, layer)));
  }
  return {worst < 1e-10, fmt("100 instances, max |linear - quadratic| = %.2e (< 1e-10)", worst)};
}

LabeledEmbeddings make_set(const Tensor& m) {
  LabeledEmbeddings e;
  for (std::size_t i = 0; i < m.dim(0); ++i) e.labels.push_back("l" + std::to_string(i));
  e.matrix = m;
  return e;
}

Outcome graph_suite() {
  CounterRng rng(103);
  double prop = 0, inv = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(10), d = 1 + rng.below(32);
    auto m = rand_tensor({n, d}, rng);
    auto g = build_relational_graph(make_set(m));
    for (std::size_t i = 0; i < n; ++i) {
      prop = std::max(prop, std::abs(g.at(i, i) - 1.0));
      for (std::size_t j = 0; j < n; ++j) {
        prop = std::max(prop, std::abs(g.at(i, j) - g.at(j, i)));
        if (g.at(i, j) < 0 || g.at(i, j) > 1) prop = INFINITY;
      }
    }
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    std::vector<double> pm(n * d), tm(n * d), sm(n * d), shift(d);
    for (auto& s : shift) s = rng.uniform(-5, 5);
    const double lambda = rng.uniform(0.1, 10);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) {
        pm[i * d + k] = m.at({perm[i], k});
        tm[i * d + k] = m.at({i, k}) + shift[k];
        sm[i * d + k] = m.at({i, k}) * lambda;
      }
    auto gp = build_relational_graph(make_set(Tensor({n, d}, pm)));
    auto gt = build_relational_graph(make_set(Tensor({n, d}, tm)));
    auto gs = build_relational_graph(make_set(Tensor({n, d}, sm)));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        inv = std::max(inv, std::abs(gp.at(i, j) - g.at(perm[i], perm[j])));
        inv = std::max(inv, std::abs(gt.at(i, j) - g.at(i, j)));
        inv = std::max(inv, std::abs(gs.at(i, j) - g.at(i, j)));
      }
  }
  return {prop < 1e-9 && inv < 1e-9,
          fmt("50 sets, symmetry/diagonal/range error %.1e, invariance error %.1e (< 1e-9)", prop, inv)};
}

std::size_t edit_by_enumeration(const std::vector<int>& a, const std::vector<int>& b, std::size_t i = 0,
                                std::size_t j = 0) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  std::size_t best = 1 + std::min(edit_by_enumeration(a, b, i + 1, j), edit_by_enumeration(a, b, i, j + 1));
  return std::min(best, (a[i] != b[j] ? 1 : 0) + edit_by_enumeration(a, b, i + 1, j + 1));
}

std::vector<int> expand(const std::vector<int>& segs, CounterRng& rng) {
  std::vector<int> out;
  for (int s : segs) out.insert(out.end(), 1 + rng.below(4), s);
  return out;
}

double f1_reference(const std::vector<int>& pred, const std::vector<int>& gt, double k) {
  auto p = run_length_encode(pred), g = run_length_encode(gt);
  std::vector<char> hit(g.size(), 0);
  double tp = 0, fp = 0;
  for (const auto& ps : p) {
    int arg = -1;
    double top = -1;
    for (std::size_t gi = 0; gi < g.size(); ++gi) {
      if (hit[gi] || g[gi].label != ps.label) continue;
      double inter = 0, uni = 0;
      for (auto t = std::min(ps.start, g[gi].start); t < std::max(ps.end, g[gi].end); ++t) {
        const bool in_p = t >= ps.start && t < ps.end, in_g = t >= g[gi].start && t < g[gi].end;
        inter += in_p && in_g;
        uni += in_p || in_g;
      }
      if (inter / uni > top) top = inter / uni, arg = static_cast<int>(gi);
    }
    if (arg >= 0 && top >= k) hit[arg] = 1, tp += 1;
    else fp += 1;
  }
  const double fn = g.size() - tp, prec = tp / (tp + fp), rec = tp / (tp + fn);
  return prec + rec > 0 ? 200 * prec * rec / (prec + rec) : 0;
}

Outcome metric_oracle() {
  std::vector<std::vector<int>> all;
  std::vector<int> cur;
  std::function<void()> rec = [&] {
    if (!cur.empty()) all.push_back(cur);
    if (cur.size() == 6) return;
    for (int c = 0; c < 3; ++c)
      if (cur.empty() || cur.back() != c) {
        cur.push_back(c);
        rec();
        cur.pop_back();
      }
  };
  rec();
  CounterRng rng(104);
  std::size_t edit_bad = 0, pairs = 0;
  for (const auto& a : all)
    for (const auto& b : all) {
      const double expect = 100.0 * (1.0 - double(edit_by_enumeration(a, b)) / std::max(a.size(), b.size()));
      if (std::abs(edit_score(expand(a, rng), expand(b, rng)) - expect) > 1e-9) ++edit_bad;
      ++pairs;
    }
  std::size_t f1_bad = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto random_seq = [&] {
      std::vector<int> segs(1 + rng.below(8));
      for (auto& s : segs) s = static_cast<int>(rng.below(3));
      std::vector<int> out;
      for (int s : segs) out.insert(out.end(), 1 + rng.below(6), s);
      return out;
    };
    auto gt = random_seq();
    auto pred = random_seq();
    pred.resize(gt.size(), pred.empty() ? 0 : pred.back());
    for (double k : {0.1, 0.25, 0.5})
      if (std::abs(f1_at_k(pred, gt, k) - f1_reference(pred, gt, k)) > 1e-9) ++f1_bad;
  }
  std::size_t self_bad = 0;
  for (const auto& a : all) {
    auto y = expand(a, rng);
    const auto m = compute_metrics(y, y);
    if (m.acc != 100 || m.edit != 100 || m.f1_10 != 100 || m.f1_25 != 100 || m.f1_50 != 100) ++self_bad;
  }
  return {edit_bad == 0 && f1_bad == 0 && self_bad == 0,
          fmt("edit mismatches %zu/%zu pairs, F1 mismatches %zu/600, self-score failures %zu/%zu", edit_bad, pairs,
              f1_bad, self_bad, all.size())};
}

Outcome augmentation_suite() {
  CounterRng rng(105);
  double iso = 0, ident = 0;
  std::size_t occ_bad = 0, eval_bad = 0;
  for (int trial = 0; trial < 50; ++trial) {
    auto x = rand_tensor({6, 7, 8}, rng, -3, 3);
    auto y = random_axial_rotation(x, rng, 1);
    for (std::size_t g = 0; g < 2; ++g)
      for (std::size_t t = 0; t < 7; ++t)
        for (std::size_t i = 0; i < 8; ++i)
          for (std::size_t j = i; j < 8; ++j) {
            // origin distance when i == j, inter-joint distance otherwise
            double dx = 0, dy = 0;
            for (std::size_t c = 0; c < 3; ++c) {
              const std::size_t ch = g * 3 + c;
              const double xo = i == j ? 0 : x.at({ch, t, j}), yo = i == j ? 0 : y.at({ch, t, j});
              dx += std::pow(x.at({ch, t, i}) - xo, 2);
              dy += std::pow(y.at({ch, t, i}) - yo, 2);
            }
            iso = std::max(iso, std::abs(std::sqrt(dx) - std::sqrt(dy)));
          }
    ident = std::max(ident, max_diff(axial_rotation(x, 0.0), x));

    std::vector<std::size_t> masked;
    auto o = random_occlusion(x, rng, 0.5, &masked);
    if (masked.size() > 4) ++occ_bad;
    for (std::size_t j = 0; j < 8; ++j) {
      const bool m = std::find(masked.begin(), masked.end(), j) != masked.end();
      for (std::size_t c = 0; c < 6; ++c)
        for (std::size_t t = 0; t < 7; ++t)
          if (o.at({c, t, j}) != (m ? 0.0 : x.at({c, t, j}))) ++occ_bad;
    }

    std::vector<Tensor> batch{x, rand_tensor({6, 9, 8}, rng), rand_tensor({6, 3, 8}, rng)};
    AugmentConfig cfg;
    cfg.alpha = cfg.beta = 0.5;
    auto r = apply_saep(batch, cfg, rng, false);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (r.applied[i] != Augmentation::None || r.batch[i].shape() != batch[i].shape() ||
          !std::equal(r.batch[i].data().begin(), r.batch[i].data().end(), batch[i].data().begin()))
        ++eval_bad;
    }
  }
  return {iso < 1e-6 && ident == 0 && occ_bad == 0 && eval_bad == 0,
          fmt("isometry error %.1e (< 1e-6), theta=0 deviation %.1e, occlusion violations %zu, eval changes %zu", iso,
              ident, occ_bad, eval_bad)};
}

Outcome gs_tmse_bound() {
  CounterRng rng(106);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t q = 2 + rng.below(6), t = 2 + rng.below(30);
    // logits spread up to +-60 push log ratios far past the threshold
    const double spread = trial % 2 ? 60.0 : 3.0;
    auto probs = softmax(rand_tensor({q, t}, rng, -spread, spread), 0);
    for (double v : gs_tmse_terms(probs, 1.0, 4.0)) worst = std::max(worst, v);
  }
  std::vector<double> extreme = {1e-300, 1.0, 1e-300, 1.0, 1.0, 1e-300, 1.0, 1e-300};
  for (double v : gs_tmse_terms(Tensor({2, 4}, extreme), 1.0, 4.0)) worst = std::max(worst, v);
  return {worst <= 16.0, fmt("max per-term contribution %.4f (<= 16)", worst)};
}

std::string fixture(const std::string& rel) { return std::string(TRG_FIXTURES_DIR) + "/" + rel; }

RunConfig overfit_config() {
  RunConfig cfg;
  cfg.model.c = 16;
  cfg.model.layers = 4;
  cfg.model.refine_layers = 4;
  cfg.model.class_stages = 1;
  cfg.model.boundary_stages = 1;
  cfg.model.dropout = 0.0;
  cfg.train.augment = false;
  cfg.train.learning_rate = 0.003;
  cfg.train.batch_size = 4;
  cfg.train.epochs = 200;
  cfg.train.threads = 1;
  cfg.data.out_dir = "";
  cfg.synth.classes = 3;
  cfg.synth.sequences = 20;
  cfg.synth.frames = 200;
  return cfg;
}

TrainInputs overfit_inputs(const RunConfig& cfg) {
  auto topo = SkeletonTopology::load_json(fixture("topologies/synth8.json"));
  TrainInputs in{synth_generate(cfg.synth, topo), topo, load_embedding_file(fixture("embeddings/synth8_joints.trge")),
                 {}};
  in.actions = simplex_embeddings(in.data.actions, cfg.model.ct, cfg.synth.seed);
  return in;
}

struct OverfitRun {
  std::vector<EpochLog> log;
  Metrics train_metrics;
  double seconds = 0;
};

OverfitRun run_overfit() {
  const auto t0 = Clock::now();
  auto cfg = overfit_config();
  auto in = overfit_inputs(cfg);
  auto result = train(cfg, in);
  OverfitRun run;
  run.train_metrics = evaluate(result.model, in.data, cfg.eval, 1).overall;
  run.log = std::move(result.log);
  run.seconds = seconds_since(t0);
  return run;
}

Outcome overfit(const OverfitRun& run) {
  const auto& m = run.train_metrics;
  bool decreasing = run.log.size() >= 5;
  std::string losses;
  for (std::size_t e = 0; e < std::min<std::size_t>(5, run.log.size()); ++e) {
    losses += fmt("%s%.3f", e ? " " : "", run.log[e].loss);
    if (e > 0 && !(run.log[e].loss < run.log[e - 1].loss)) decreasing = false;
  }
  const bool ok = m.acc >= 95 && m.edit >= 80 && run.log.size() <= 200 && run.seconds < 600 && decreasing;
  return {ok, fmt("acc %.1f (>= 95), edit %.1f (>= 80), %zu epochs, %.0fs (< 600s), epoch 0-4 loss %s", m.acc, m.edit,
                  run.log.size(), run.seconds, losses.c_str())};
}

Outcome supervision_direction(const OverfitRun& run) {
  if (run.log.empty()) return {false, "no epochs"};
  const auto& first = run.log.front();
  const auto& last = run.log.back();
  const double ra = last.absolute / first.absolute, rr = last.relative / first.relative;
  return {ra < 0.5 && rr < 0.5, fmt("absolute %.3f -> %.3f (ratio %.2f), relative %.3f -> %.3f (ratio %.2f), both < 0.5",
                                    first.absolute, last.absolute, ra, first.relative, last.relative, rr)};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome reproducibility() {
  auto cfg = overfit_config();
  cfg.train.epochs = 3;
  cfg.model.dropout = 0.5;
  cfg.train.augment = true;
  cfg.synth.sequences = 6;
  cfg.synth.frames = 80;
  cfg.train.seed = 7;
  auto in = overfit_inputs(cfg);
  const auto root = fs::temp_directory_path() / "trg_acceptance_repro";
  fs::remove_all(root);
  std::vector<std::string> blobs;
  for (const char* name : {"a", "b"}) {
    cfg.data.out_dir = (root / name).string();
    blobs.push_back(slurp(train(cfg, in).checkpoint));
  }
  fs::remove_all(root);
  const bool ok = !blobs[0].empty() && blobs[0] == blobs[1];
  return {ok, fmt("two seed-7 runs with dropout and augmentation: %zu vs %zu bytes, %s", blobs[0].size(),
                  blobs[1].size(), blobs[0] == blobs[1] ? "identical" : "different")};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  int failed = 0;
  auto report = [&](const char* name, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %-24s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  };
  report("gradient-suite", gradient_suite);
  report("attention-associativity", associativity);
  report("graph-suite", graph_suite);
  report("metric-oracle", metric_oracle);
  report("augmentation-suite", augmentation_suite);
  report("gs-tmse-bound", gs_tmse_bound);
  OverfitRun run;
  std::string run_error;
  try {
    run = run_overfit();
  } catch (const std::exception& e) {
    run_error = e.what();
  }
  auto guarded = [&](auto f) {
    return [&, f]() -> Outcome { return run_error.empty() ? f(run) : Outcome{false, "error: " + run_error}; };
  };
  report("overfit-run", guarded(overfit));
  report("supervision-direction", guarded(supervision_direction));
  report("reproducibility", reproducibility);
  std::printf("%d of 9 criteria failed\n", failed);
  return failed ? 1 : 0;
}
