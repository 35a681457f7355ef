#include "trg/params.hpp"

#include <cmath>
#include <unordered_map>

namespace trg {

Tensor ParamSet::insert(const std::string& name, Tensor t) {
  for (const auto& [n, _] : items_)
    if (n == name) throw Error(Error::Kind::InvalidArgument, "duplicate parameter name " + name);
  items_.emplace_back(name, t);
  return t;
}

Tensor ParamSet::add(const std::string& name, Shape shape, CounterRng& rng, double bound) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return insert(name, Tensor::parameter(std::move(shape), std::move(v)));
}

Tensor ParamSet::add_filled(const std::string& name, Shape shape, double value) {
  const std::size_t n = numel(shape);
  return insert(name, Tensor::parameter(std::move(shape), std::vector<double>(n, value)));
}

Tensor ParamSet::add_weight(const std::string& name, Shape shape, CounterRng& rng) {
  const std::size_t fan_in = shape.empty() ? 1 : numel(shape) / shape[0];
  return add(name, std::move(shape), rng, 1.0 / std::sqrt(static_cast<double>(fan_in)));
}

Tensor ParamSet::add_bias(const std::string& name, std::size_t channels, std::size_t fan_in, CounterRng& rng) {
  return add(name, {channels}, rng, 1.0 / std::sqrt(static_cast<double>(fan_in)));
}

std::size_t ParamSet::count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : items_) n += t.size();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& [_, t] : items_) {
    Tensor h = t;
    h.zero_grad();
  }
}

void ParamSet::load(const NamedTensors& saved) {
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& [n, t] : saved) by_name[n] = &t;
  if (saved.size() != items_.size())
    throw Error(Error::Kind::Mismatch, "checkpoint holds " + std::to_string(saved.size()) +
                                           " tensors, model expects " + std::to_string(items_.size()));
  for (auto& [name, t] : items_) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw Error(Error::Kind::Mismatch, "checkpoint is missing " + name);
    const Tensor& src = *it->second;
    if (src.shape() != t.shape())
      throw Error(Error::Kind::Mismatch, name + ": checkpoint shape " + shape_str(src.shape()) +
                                             " vs model " + shape_str(t.shape()));
    Tensor dst = t;
    auto d = dst.mutable_data();
    std::copy(src.data().begin(), src.data().end(), d.begin());
  }
}

}  // namespace trg
