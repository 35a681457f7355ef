#pragma once

#include <string>

#include "trg/checkpoint.hpp"
#include "trg/rng.hpp"
#include "trg/tensor.hpp"

namespace trg {

/// Ordered registry of trainable leaves. Layers keep their own Tensor handles; the set shares
/// storage with them, so optimizers and checkpoint I/O work through it.
class ParamSet {
 public:
  /// Uniform(-bound, bound) initialization.
  Tensor add(const std::string& name, Shape shape, CounterRng& rng, double bound);
  Tensor add_filled(const std::string& name, Shape shape, double value);
  /// Fan-in scaled uniform init for a weight whose trailing dims (after the first) feed one output.
  Tensor add_weight(const std::string& name, Shape shape, CounterRng& rng);
  /// Bias for a layer with the given fan-in.
  Tensor add_bias(const std::string& name, std::size_t channels, std::size_t fan_in, CounterRng& rng);

  const NamedTensors& items() const { return items_; }
  std::size_t count() const;
  void zero_grad();
  /// Copies values from `saved` into the registered tensors; names and shapes must match exactly.
  void load(const NamedTensors& saved);

 private:
  Tensor insert(const std::string& name, Tensor t);
  NamedTensors items_;
};

}  // namespace trg
