#pragma once

#include <vector>

#include "trg/rng.hpp"
#include "trg/tensor.hpp"

namespace trg {

struct AugmentConfig {
  double alpha = 1.0 / 3.0;   // fraction of sequences occluded
  double beta = 1.0 / 3.0;    // fraction rotated
  double max_occlusion = 0.5;
  std::size_t rotation_axis = 1;  // index of the vertical coordinate inside each xyz group

  void validate() const;
};

/// Zeroes a uniformly drawn count of joints in {0, .., floor(max_ratio * V)} across every
/// frame and channel. The chosen joints are written to `masked` when given.
Tensor random_occlusion(const Tensor& x, CounterRng& rng, double max_ratio = 0.5,
                        std::vector<std::size_t>* masked = nullptr);

/// Rotates every consecutive 3-channel group of x [C0,T,V] by theta about `axis`.
Tensor axial_rotation(const Tensor& x, double theta, std::size_t axis = 1);

/// axial_rotation with theta drawn uniformly from (0, 2pi). Writes the angle to `theta` when given.
Tensor random_axial_rotation(const Tensor& x, CounterRng& rng, std::size_t axis = 1, double* theta = nullptr);

enum class Augmentation { None, Occlusion, Rotation };

struct SaepResult {
  std::vector<Tensor> batch;
  std::vector<Augmentation> applied;
};

/// Training: a random alpha share of the sequences is occluded, a disjoint beta share rotated,
/// the rest left alone. Eval: returns the inputs untouched. Rotation is skipped with a warning
/// when C0 is not a multiple of 3.
SaepResult apply_saep(const std::vector<Tensor>& batch, const AugmentConfig& cfg, CounterRng& rng, bool training);

}  // namespace trg
