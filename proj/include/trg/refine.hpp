#pragma once

#include <vector>

#include "trg/temporal.hpp"

namespace trg {

struct ClassStage {
  Tensor w_in, b_in;  // Q -> C
  std::vector<AttentionLayer> layers;
  Tensor w_cls, b_cls;  // C -> Q
};

ClassStage make_class_stage(std::size_t classes, std::size_t c, std::size_t c3, std::size_t heads,
                            std::size_t layers, ParamSet& params, CounterRng& rng, const std::string& prefix);

struct ClassStageOutput {
  Tensor probs;     // [Q,T]
  Tensor features;  // [C,T], value source for the next stage
};

/// Lifts `prev` [Q,T] to C channels, then cross-attention layers whose queries/keys come from the
/// running features and values from `value_source` (previous stage's final features).
ClassStageOutput refine_class(const Tensor& prev, const Tensor& value_source, const ClassStage& stage,
                              const ForwardMode& mode);

struct DilatedLayer {
  Tensor w, b;    // [C,C,3] dilated temporal conv
  Tensor w1, b1;  // 1x1
};

struct BoundaryStage {
  Tensor w_in, b_in;  // 1 -> C
  std::vector<DilatedLayer> layers;
  Tensor w_out, b_out;  // C -> 1
};

BoundaryStage make_boundary_stage(std::size_t c, std::size_t layers, ParamSet& params, CounterRng& rng,
                                  const std::string& prefix);

/// Layer i: x + W1 dropout(ReLU(conv_dilation 2^i(x))). Receptive field +-(2^layers - 1).
Tensor refine_boundary(const Tensor& prev, const BoundaryStage& stage, const ForwardMode& mode);

struct Relabeling {
  std::vector<std::size_t> boundaries;  // first frame of every segment after the first
  std::vector<int> labels;              // per frame
};

/// Boundaries are frames t >= 1 whose score exceeds `threshold` and is the maximum of the window
/// [t-radius, t+radius] (ties go to the earlier frame). Each segment takes the argmax of its
/// mean class probability.
Relabeling boundary_guided_relabel(const Tensor& probs, const Tensor& boundary, double threshold = 0.5,
                                   std::size_t radius = 2);

/// Per-frame argmax over classes (lowest id on ties).
std::vector<int> argmax_labels(const Tensor& probs);

}  // namespace trg
