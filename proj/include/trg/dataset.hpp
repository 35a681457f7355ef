#pragma once

#include <string>
#include <vector>

#include "trg/config.hpp"
#include "trg/spatial.hpp"
#include "trg/textgraph.hpp"

namespace trg {

struct SkeletonSequence {
  std::string id;
  Tensor x;  // [C0,T,V]
  std::vector<int> labels;

  std::size_t frames() const { return x.dim(1); }
};

struct Dataset {
  std::vector<std::string> actions;  // class id -> name
  std::vector<SkeletonSequence> sequences;

  std::size_t classes() const { return actions.size(); }
  /// Checks label lengths, class ranges and a shared C0/V; throws Error{Format}.
  void validate() const;
};

inline constexpr std::uint16_t kSkeletonFormatVersion = 1;

/// TRGS: "TRGS", u16 version, u32 C0, u32 T, u32 V, f32 payload in [C0,T,V] order.
void write_skeleton_file(const std::string& path, const Tensor& x);
Tensor read_skeleton_file(const std::string& path);

/// Directory of <id>.skel + <id>.csv pairs plus actions.json ({"0": "name", ...}).
Dataset load_dataset(const std::string& dir);
void save_dataset(const std::string& dir, const Dataset& data);

/// Raw joint positions [B*A,T,V] (B bodies of A axes each, axes contiguous per body) to
/// [2*B*A,T,V]: per body, A channels of position minus that frame's root joint, then A channels
/// of frame-to-frame displacement (zero at frame 0). 3-axis single-body input gives 6 channels.
Tensor preprocess(const Tensor& raw, std::size_t axes = 3, std::size_t root = 0);

/// Deterministic toy dataset on `topo`: every class drives the joints with its own sinusoid
/// amplitudes, frequencies and phases; sequences hold 3-8 segments of distinct consecutive classes.
Dataset synth_generate(const SynthConfig& cfg, const SkeletonTopology& topo);

/// Q unit vectors in `dim` dimensions with pairwise cosine -1/(Q-1), randomly rotated.
LabeledEmbeddings simplex_embeddings(const std::vector<std::string>& labels, std::size_t dim, std::uint64_t seed);

}  // namespace trg
