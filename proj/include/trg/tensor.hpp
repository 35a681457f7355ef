#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace trg {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Base of every error raised by the core. The C API maps the kind onto a status code.
class Error : public std::runtime_error {
 public:
  enum class Kind { InvalidArgument, Shape, Io, Format, Mismatch, Numeric, State };
  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(Kind::Shape, what) {}
};

class Tape;

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient flows in
  bool requires_grad = false;
  Tape* recorded_on = nullptr;  // null for leaves and constants

  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
};
}  // namespace detail

/// Dense row-major array of doubles. Copies share storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v);
  /// A trainable leaf: gradients accumulate into it across backward passes until zero_grad().
  static Tensor parameter(Shape shape, std::vector<double> data);

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  /// Raw write access. Only valid on tensors that are not tape outputs.
  std::span<double> mutable_data();
  std::span<const double> grad() const { return impl_->grad; }
  bool has_grad() const { return !impl_->grad.empty(); }
  bool requires_grad() const { return impl_->requires_grad; }
  bool is_recorded() const { return impl_->recorded_on != nullptr; }
  void zero_grad();

  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  Tensor detach() const;
  Tensor clone() const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorImpl> impl_;

  friend class Tape;
  friend Tensor make_result(Shape, std::vector<double>, const std::vector<Tensor>&,
                            std::function<void(detail::TensorImpl&)>);
};

/// Reverse-mode tape. Records are appended in execution order, so the record list is
/// already topologically sorted; backward walks it in reverse.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  /// Accumulates dLoss/dW into every leaf reachable from `loss`.
  /// A tape can be walked once; call reset() before recording again.
  void backward(const Tensor& loss);
  void reset();

  std::size_t size() const { return records_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Record {
    std::vector<std::shared_ptr<detail::TensorImpl>> inputs;
    std::shared_ptr<detail::TensorImpl> output;
    std::function<void(detail::TensorImpl&)> backward;
  };
  std::vector<Record> records_;
  bool consumed_ = false;

  friend Tensor make_result(Shape, std::vector<double>, const std::vector<Tensor>&,
                            std::function<void(detail::TensorImpl&)>);
};

/// Makes `tape` the recording target for ops issued on this thread while alive.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

/// Builds an op result. When a tape is active and any input needs a gradient, the result is
/// recorded with `backward`, which receives the output impl (grad filled) and must push
/// gradients into the captured inputs.
Tensor make_result(Shape shape, std::vector<double> data, const std::vector<Tensor>& inputs,
                   std::function<void(detail::TensorImpl&)> backward);

}  // namespace trg
