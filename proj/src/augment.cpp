#include "trg/augment.hpp"

#include <cmath>
#include <numbers>

#include <spdlog/spdlog.h>

namespace trg {

void AugmentConfig::validate() const {
  if (alpha < 0 || beta < 0 || alpha > 1 || beta > 1 || alpha + beta > 1 + 1e-12)
    throw Error(Error::Kind::InvalidArgument, "augmentation fractions need alpha, beta >= 0 and alpha + beta <= 1");
  if (max_occlusion < 0 || max_occlusion > 1)
    throw Error(Error::Kind::InvalidArgument, "max occlusion ratio must lie in [0,1]");
  if (rotation_axis > 2) throw Error(Error::Kind::InvalidArgument, "rotation axis must be 0, 1 or 2");
}

Tensor random_occlusion(const Tensor& x, CounterRng& rng, double max_ratio, std::vector<std::size_t>* masked) {
  if (x.rank() != 3) throw ShapeError("occlusion expects [C0,T,V], got " + shape_str(x.shape()));
  const std::size_t c0 = x.dim(0), t = x.dim(1), v = x.dim(2);
  const auto most = static_cast<std::size_t>(std::floor(max_ratio * static_cast<double>(v)));
  const std::size_t count = static_cast<std::size_t>(rng.below(most + 1));
  std::vector<std::size_t> joints(v);
  for (std::size_t j = 0; j < v; ++j) joints[j] = j;
  rng.shuffle(joints);
  joints.resize(count);
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t c = 0; c < c0; ++c)
    for (std::size_t f = 0; f < t; ++f)
      for (std::size_t j : joints) out[(c * t + f) * v + j] = 0.0;
  if (masked) *masked = joints;
  return Tensor(x.shape(), std::move(out));
}

Tensor axial_rotation(const Tensor& x, double theta, std::size_t axis) {
  if (x.rank() != 3) throw ShapeError("rotation expects [C0,T,V], got " + shape_str(x.shape()));
  if (x.dim(0) % 3 != 0)
    throw Error(Error::Kind::InvalidArgument, "rotation needs C0 divisible by 3, got " + std::to_string(x.dim(0)));
  if (axis > 2) throw Error(Error::Kind::InvalidArgument, "rotation axis must be 0, 1 or 2");
  const std::size_t plane = x.dim(1) * x.dim(2);
  // (i, j) follow `axis` cyclically: axis 1 gives x' = c x + s z, z' = -s x + c z
  const std::size_t i = (axis + 2) % 3, j = (axis + 1) % 3;
  const double c = std::cos(theta), s = std::sin(theta);
  auto in = x.data();
  std::vector<double> out(in.begin(), in.end());
  for (std::size_t g = 0; g < x.dim(0); g += 3)
    for (std::size_t p = 0; p < plane; ++p) {
      const double a = in[(g + i) * plane + p], b = in[(g + j) * plane + p];
      out[(g + i) * plane + p] = c * a + s * b;
      out[(g + j) * plane + p] = -s * a + c * b;
    }
  return Tensor(x.shape(), std::move(out));
}

Tensor random_axial_rotation(const Tensor& x, CounterRng& rng, std::size_t axis, double* theta) {
  double th = 0;
  while (th == 0.0) th = rng.uniform(0.0, 2 * std::numbers::pi);
  if (theta) *theta = th;
  return axial_rotation(x, th, axis);
}

SaepResult apply_saep(const std::vector<Tensor>& batch, const AugmentConfig& cfg, CounterRng& rng, bool training) {
  SaepResult r{batch, std::vector<Augmentation>(batch.size(), Augmentation::None)};
  if (!training) return r;
  cfg.validate();
  const std::size_t n = batch.size();
  const auto n_occ = static_cast<std::size_t>(std::llround(cfg.alpha * static_cast<double>(n)));
  const auto n_rot = std::min(n - std::min(n, n_occ), static_cast<std::size_t>(std::llround(cfg.beta * static_cast<double>(n))));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  const CounterRng root(rng.next_u64());
  bool warned = false;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t idx = order[k];
    CounterRng seq = root.fork(idx);
    if (k < n_occ) {
      r.batch[idx] = random_occlusion(batch[idx], seq, cfg.max_occlusion);
      r.applied[idx] = Augmentation::Occlusion;
    } else if (k < n_occ + n_rot) {
      if (batch[idx].dim(0) % 3 != 0) {
        if (!warned) spdlog::warn("skipping rotation: {} input channels do not form xyz groups", batch[idx].dim(0));
        warned = true;
        continue;
      }
      r.batch[idx] = random_axial_rotation(batch[idx], seq, cfg.rotation_axis);
      r.applied[idx] = Augmentation::Rotation;
    }
  }
  return r;
}

}  // namespace trg
