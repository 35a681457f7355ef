#include "trg/tensor.hpp"

#include <sstream>

namespace trg {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor() : impl_(std::make_shared<detail::TensorImpl>()) {
  impl_->data.assign(1, 0.0);
}

Tensor::Tensor(Shape shape, double fill) : impl_(std::make_shared<detail::TensorImpl>()) {
  impl_->data.assign(numel(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  if (numel(shape) != data.size())
    throw ShapeError("tensor shape " + shape_str(shape) + " does not match " +
                     std::to_string(data.size()) + " values");
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> data) {
  Tensor t(std::move(shape), std::move(data));
  t.impl_->requires_grad = true;
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(shape()));
  return impl_->shape[axis];
}

std::span<double> Tensor::mutable_data() {
  if (impl_->recorded_on)
    throw Error(Error::Kind::State, "cannot write into a recorded tensor");
  return impl_->data;
}

void Tensor::zero_grad() { impl_->grad.clear(); }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != rank()) throw ShapeError("index rank mismatch for " + shape_str(shape()));
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= impl_->shape[axis]) throw ShapeError("index out of range for " + shape_str(shape()));
    flat = flat * impl_->shape[axis] + i;
    ++axis;
  }
  return impl_->data[flat];
}

Tensor Tensor::detach() const { return Tensor(impl_->shape, impl_->data); }

Tensor Tensor::clone() const {
  auto impl = std::make_shared<detail::TensorImpl>(*impl_);
  impl->recorded_on = nullptr;
  impl->grad.clear();
  return Tensor(std::move(impl));
}

Tape::~Tape() { reset(); }

void Tape::reset() {
  for (auto& r : records_) r.output->recorded_on = nullptr;
  records_.clear();
  consumed_ = false;
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw Error(Error::Kind::State, "backward called twice on the same tape");
  if (loss.size() != 1 || loss.rank() > 1)
    throw ShapeError("backward needs a scalar loss, got " + shape_str(loss.shape()));
  auto& root = *loss.impl();
  if (root.recorded_on != this) {
    if (!root.requires_grad) throw Error(Error::Kind::State, "loss is detached from the tape");
    if (root.recorded_on != nullptr)
      throw Error(Error::Kind::State, "loss was recorded on a different tape");
  }
  root.ensure_grad();
  root.grad[0] += 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    it->backward(*it->output);
  }
  consumed_ = true;
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

Tensor make_result(Shape shape, std::vector<double> data, const std::vector<Tensor>& inputs,
                   std::function<void(detail::TensorImpl&)> backward) {
  Tensor out(std::move(shape), std::move(data));
  Tape* tape = g_active_tape;
  if (!tape || !backward) return out;
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (!needs) return out;
  if (tape->consumed_) throw Error(Error::Kind::State, "recording on a consumed tape; reset it");
  out.impl_->requires_grad = true;
  out.impl_->recorded_on = tape;
  Tape::Record rec;
  for (const auto& in : inputs) rec.inputs.push_back(in.impl());
  rec.output = out.impl_;
  rec.backward = std::move(backward);
  tape->records_.push_back(std::move(rec));
  return out;
}

}  // namespace trg
