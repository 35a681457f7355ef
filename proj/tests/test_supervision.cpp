#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "trg/gradcheck.hpp"
#include "trg/ops.hpp"
#include "trg/supervision.hpp"
#include "trg/textgraph.hpp"

using namespace trg;
using trg::testing::random_param;
using trg::testing::random_tensor;

namespace {

Tensor random_probs(std::size_t q, std::size_t t, CounterRng& rng) {
  return softmax(random_tensor({q, t}, rng, -2, 2), 0);
}

// Givens rotation by `theta` in the (a, b) plane applied to every column.
Tensor rotate_columns(const Tensor& m, std::size_t a, std::size_t b, double theta) {
  std::vector<double> d(m.data().begin(), m.data().end());
  const std::size_t n = m.dim(1);
  for (std::size_t j = 0; j < n; ++j) {
    const double x = d[a * n + j], y = d[b * n + j];
    d[a * n + j] = std::cos(theta) * x - std::sin(theta) * y;
    d[b * n + j] = std::sin(theta) * x + std::cos(theta) * y;
  }
  return Tensor(m.shape(), d);
}

}  // namespace

TEST_CASE("segments and boundary targets") {
  std::vector<int> labels = {0, 0, 0, 1, 1, 2, 2, 2, 2, 2};
  auto s = segments_from_labels(labels);
  REQUIRE(s.size() == 3);
  CHECK(s[1].start == 3);
  CHECK(s[1].end == 5);
  CHECK(s[2].label == 2);
  auto b = boundary_targets(labels, 1);
  const double expect[10] = {0, 0, 1, 1, 1, 1, 1, 0, 0, 0};
  for (std::size_t i = 0; i < 10; ++i) CHECK(b.data()[i] == expect[i]);
  auto b0 = boundary_targets(labels, 0);
  CHECK(b0.data()[3] == 1);
  CHECK(b0.data()[2] == 0);
}

TEST_CASE("projection and pooling") {
  CounterRng rng(1);
  std::vector<double> eye(16, 0.0);
  for (std::size_t i = 0; i < 4; ++i) eye[i * 4 + i] = 1;
  auto f = random_tensor({4, 7}, rng);
  auto same = project_representation(f, Tensor({4, 4}, eye), Tensor({4}, 0.0));
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(same.data()[i] == f.data()[i]);
  CHECK(project_representation(random_tensor({64, 200}, rng), random_tensor({768, 64}, rng), random_tensor({768}, rng))
            .shape() == Shape{768, 200});

  auto segs = segments_from_labels({0, 0, 1, 2, 2, 2});
  auto c = segment_pool(Tensor({3, 6}, 0.25), segs);
  for (double v : c.data()) CHECK(v == doctest::Approx(0.25));
  auto fr = random_tensor({3, 6}, rng);
  auto p = segment_pool(fr, segs);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(p.at({i, 1}) == doctest::Approx(fr.at({i, 2})).epsilon(1e-15));
    for (std::size_t k = 0; k < 3; ++k) {
      double s = 0;
      for (std::size_t t = segs[k].start; t < segs[k].end; ++t) s += fr.at({i, t});
      CHECK(std::abs(p.at({i, k}) - s / static_cast<double>(segs[k].end - segs[k].start)) < 1e-14);
    }
  }
  CHECK_THROWS_AS(segment_pool(fr, {{2, 2, 0}}), Error);
}

TEST_CASE("KL divergence basics") {
  CounterRng rng(2);
  auto u = random_probs(4, 4, rng);
  CHECK(std::abs(kl_divergence(u, u).item()) < 1e-15);
  auto w = random_probs(4, 4, rng);
  double s = 0;
  for (std::size_t i = 0; i < 16; ++i) s += u.data()[i] * std::log((u.data()[i] + 1e-8) / (w.data()[i] + 1e-8));
  CHECK(kl_divergence(u, w).item() == doctest::Approx(s / 16).epsilon(1e-12));
}

TEST_CASE("absolute loss") {
  CounterRng rng(3);
  const std::size_t ct = 16, n = 4;
  auto ae = random_tensor({ct, n}, rng);
  std::vector<int> classes = {0, 1, 2, 3};
  auto base = absolute_loss(ae, ae, classes).item();
  CHECK(base >= 0);
  // rigid rotations of A^F away from A^E never help
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t a = rng.below(ct);
    std::size_t b = rng.below(ct - 1);
    if (b >= a) ++b;
    const double theta = rng.uniform(-0.2, 0.2);
    CHECK(absolute_loss(rotate_columns(ae, a, b, theta), ae, classes).item() >= base - 1e-12);
  }
  // scale invariance of cosine similarity
  auto af = random_tensor({ct, n}, rng);
  CHECK(absolute_loss(scale(af, 3.7), ae, classes).item() ==
        doctest::Approx(absolute_loss(af, ae, classes).item()).epsilon(1e-12));
  auto two = random_tensor({ct, 2}, rng);
  const double l = absolute_loss(two, two, {5, 5}).item();
  CHECK(l >= 0);
  CHECK_THROWS_AS(absolute_loss(Tensor({ct, 2}, 0.0), two, {0, 1}), Error);
  CHECK_THROWS_AS(absolute_loss(two.clone(), two, {0}), Error);
}

TEST_CASE("absolute loss with a pair of one class matches the hand formula") {
  // cos sims all 1 -> softmax is uniform 1/2, target uniform 1/2 -> KL = 0
  Tensor a({2, 2}, {1, 1, 0, 0});
  CHECK(std::abs(absolute_loss(a, a, {1, 1}).item()) < 1e-12);
}

TEST_CASE("relative loss") {
  CounterRng rng(4);
  auto af = random_tensor({8, 4}, rng);
  std::vector<int> classes = {0, 1, 2, 3};
  auto tag = inverse_minmax(pairwise_l2_distances(transpose(af))).detach();
  CHECK(std::abs(relative_loss(af, classes, tag).item()) < 1e-15);
  // raising any off-diagonal G^F entry above its target increases the loss
  auto gf = inverse_minmax(pairwise_l2_distances(transpose(af)));
  std::vector<double> bumped(gf.data().begin(), gf.data().end());
  for (std::size_t i = 0; i < 16; ++i) {
    if (i % 5 == 0) continue;
    auto b = bumped;
    b[i] = std::min(1.0, b[i] + 0.1);
    CHECK(kl_divergence(Tensor({4, 4}, b), tag).item() > 0);
  }
  // translation and scale invariance
  auto shifted = add(af, expand(random_tensor({8, 1}, rng), {8, 4}));
  auto rel = random_tensor({4, 4}, rng, 0.05, 1);
  rel = scale(add(rel, transpose(rel)), 0.5);
  const double base = relative_loss(af, classes, rel).item();
  CHECK(relative_loss(shifted, classes, rel).item() == doctest::Approx(base).epsilon(1e-10));
  CHECK(relative_loss(scale(af, 0.3), classes, rel).item() == doctest::Approx(base).epsilon(1e-10));
}

TEST_CASE("relative loss: diagonal contributes nothing") {
  // two segments of one class collapse to G^F = all ones; the diagonal terms are 1*log(1/1)
  Tensor af({2, 2}, {1, 1, 2, 2});
  Tensor tag({1, 1}, {1.0});
  CHECK(std::abs(relative_loss(af, {0, 0}, tag).item()) < 1e-15);
}

TEST_CASE("gs_tmse") {
  CHECK(gs_tmse(Tensor({3, 5}, 1.0 / 3), 1.0, 4.0).item() == 0.0);
  // hand case: 2 frames, 2 classes
  Tensor y({2, 2}, {0.9, 0.2, 0.1, 0.8});
  const double w = std::exp(-(0.49 + 0.49) / 2);
  const double d0 = std::log(0.2 / 0.9), d1 = std::log(0.8 / 0.1);
  const double expect = w * (d0 * d0 + d1 * d1) / 4;
  CHECK(gs_tmse(y, 1.0, 4.0).item() == doctest::Approx(expect).epsilon(1e-7));
  // clamp bound
  Tensor extreme({2, 4}, {1e-30, 1.0, 1e-30, 1.0, 1.0, 1e-30, 1.0, 1e-30});
  for (double v : gs_tmse_terms(extreme, 1.0, 4.0)) CHECK(v <= 16.0);
  CHECK(gs_tmse(extreme, 1.0, 4.0).item() <= 16.0);
  // class permutation equivariance
  CounterRng rng(5);
  auto p = random_probs(3, 9, rng);
  auto perm = concat({slice(p, 0, 2, 3), slice(p, 0, 0, 2)}, 0);
  CHECK(gs_tmse(perm, 1.0, 4.0).item() == doctest::Approx(gs_tmse(p, 1.0, 4.0).item()).epsilon(1e-13));
}

TEST_CASE("ce and bce") {
  Tensor onehot({2, 3}, {1, 0, 1, 0, 1, 0});
  CHECK(ce_loss(onehot, {0, 1, 0}).item() < 1e-7);
  CHECK(boundary_bce(Tensor({1, 4}, 0.5), Tensor({1, 4}, {0, 1, 1, 0})).item() == doctest::Approx(std::log(2.0)).epsilon(1e-7));
  CounterRng rng(6);
  auto p = random_probs(3, 6, rng);
  std::vector<int> labels = {0, 2, 1, 1, 0, 2};
  double s = 0;
  for (std::size_t t = 0; t < 6; ++t) s -= std::log(p.at({static_cast<std::size_t>(labels[t]), t}) + 1e-8);
  CHECK(ce_loss(p, labels).item() == doctest::Approx(s / 6).epsilon(1e-12));
  auto bh = random_tensor({1, 6}, rng, 0.01, 0.99);
  auto bt = Tensor({1, 6}, {0, 1, 1, 0, 0, 1});
  double r = 0;
  for (std::size_t t = 0; t < 6; ++t) {
    const double b = bt.data()[t], q = bh.data()[t];
    r -= b * std::log(q + 1e-8) + (1 - b) * std::log(1 - q + 1e-8);
  }
  CHECK(boundary_bce(bh, bt).item() == doctest::Approx(r / 6).epsilon(1e-12));
  CHECK_THROWS_AS(ce_loss(p, {0, 1}), Error);
}

TEST_CASE("loss gradients") {
  CounterRng rng(7);
  auto logits = random_param({3, 8}, rng, -2, 2);
  auto braw = random_param({1, 8}, rng, -2, 2);
  auto af = random_param({6, 4}, rng);
  auto ae = random_tensor({6, 4}, rng);
  std::vector<int> labels = {0, 0, 1, 1, 1, 2, 0, 0};
  std::vector<int> classes = {0, 1, 2, 0};
  auto tag = Tensor({3, 3}, {1, 0.4, 0.1, 0.4, 1, 0.7, 0.1, 0.7, 1});
  CHECK(finite_diff_check([&] { return ce_loss(softmax(logits, 0), labels); }, {logits}) < 1e-4);
  CHECK(finite_diff_check([&] { return gs_tmse(softmax(logits, 0), 1.0, 4.0); }, {logits}) < 1e-4);
  CHECK(finite_diff_check([&] { return boundary_bce(sigmoid(braw), boundary_targets(labels, 1)); }, {braw}) < 1e-4);
  CHECK(finite_diff_check([&] { return absolute_loss(af, ae, classes); }, {af}) < 1e-4);
  CHECK(finite_diff_check([&] { return relative_loss(af, classes, tag); }, {af}) < 1e-4);
  auto wr = random_param({6, 3}, rng);
  auto br = random_param({6}, rng);
  auto feats = random_tensor({3, 8}, rng);
  auto emb = random_tensor({3, 6}, rng);
  LossWeights w;
  auto total = [&] {
    auto fr = project_representation(feats, wr, br);
    auto y = softmax(logits, 0);
    return total_loss({y, softmax(scale(logits, 0.5), 0)}, {sigmoid(braw)}, fr, labels, tag, emb, w).total;
  };
  CHECK(finite_diff_check(total, {logits, braw, wr, br}) < 1e-4);
}

TEST_CASE("total loss composition") {
  CounterRng rng(8);
  auto y = random_probs(3, 10, rng);
  auto b = random_tensor({1, 10}, rng, 0.1, 0.9);
  auto fr = random_tensor({6, 10}, rng);
  auto emb = random_tensor({3, 6}, rng);
  auto tag = Tensor({3, 3}, {1, 0.4, 0.1, 0.4, 1, 0.7, 0.1, 0.7, 1});
  std::vector<int> labels = {0, 0, 0, 1, 1, 1, 2, 2, 2, 2};
  LossWeights off;
  off.lambda_abs = off.lambda_rel = 0;
  auto plain = total_loss({y}, {b, b}, fr, labels, tag, emb, off);
  const double asrf = ce_loss(y, labels).item() + gs_tmse(y, 1, 4).item() +
                      2 * boundary_bce(b, boundary_targets(labels, 2)).item();
  CHECK(plain.total.item() == doctest::Approx(asrf).epsilon(1e-13));
  CHECK(plain.total.item() >= 0);
  LossWeights on;
  auto full = total_loss({y}, {b, b}, fr, labels, tag, emb, on);
  CHECK(full.absolute > 0);
  CHECK(full.total.item() == doctest::Approx(asrf + full.absolute + full.relative).epsilon(1e-12));
}
