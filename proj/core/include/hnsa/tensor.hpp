// SPDX-License-Identifier: Apache-2.0
//
// Dense 64-bit tensors and a tape-based reverse-mode autodiff.
//
// A Tensor is a shared handle: copies alias the same storage, which is how
// parameters are referenced from a tape and updated in place by the
// optimizer. Every op takes the Tape it records onto. A non-recording tape
// (Tape{false}) evaluates the same ops without storing closures, which is
// what inference uses.
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hnsa::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  /// Throws ShapeError if a dimension is zero or values.size() does not
  /// match the shape.
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values, bool requires_grad = false);

  bool defined() const noexcept { return data_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  std::size_t size() const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  double operator[](std::size_t i) const { return values()[i]; }
  double at(std::size_t row, std::size_t col) const;
  /// Value of a one-element tensor.
  double item() const;

  bool requires_grad() const;
  /// Zero-filled for tensors that require grad; empty otherwise.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Deep copy of shape and values; the copy does not require grad.
  Tensor detach() const;
  /// Deep copy that keeps requires_grad (fresh zero grad).
  Tensor clone() const;

  bool same_storage(const Tensor& other) const noexcept { return data_ == other.data_; }

 private:
  struct Storage {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> data_;
};

/// Ordered record of executed ops. Entries are appended as ops run, so each
/// entry's inputs were produced before it; backward() replays them in exact
/// reverse order.
class Tape {
 public:
  using BackwardFn =
      std::function<void(std::span<Tensor> inputs, const Tensor& output)>;

  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return entries_.size(); }
  /// Op names in recording order.
  std::vector<std::string_view> ops() const;

  /// Output of an op that is tracked when recording and any input requires
  /// grad. The caller fills values and, if tracked, passes `fn` to record().
  bool tracks(std::initializer_list<const Tensor*> inputs) const;
  void record(const char* op, std::vector<Tensor> inputs, Tensor output,
              BackwardFn fn);

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded adjoint in reverse.
  /// Gradients accumulate into existing grad buffers. The tape is cleared.
  /// Throws UsageError if loss is not a one-element tracked tensor.
  void backward(const Tensor& loss);
  void clear() noexcept { entries_.clear(); }

 private:
  struct Entry {
    const char* op;
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn fn;
  };
  bool recording_;
  std::vector<Entry> entries_;
};

enum class ElementwiseOp { kAdd, kSub, kMul, kTanh, kSigmoid };

// Matrix product. Accepts [m,k]x[k,n] -> [m,n], [m,k]x[k] -> [m] and
// [k]x[k,n] -> [n].
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

// Binary ops need equal shapes; add/sub also accept a rank-1 right operand
// whose length equals the last dim of a rank-2 left operand (row bias).
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor tanh(Tape& tape, const Tensor& x);
Tensor sigmoid(Tape& tape, const Tensor& x);

/// Dispatch form. Unary ops ignore `b`.
Tensor elementwise(Tape& tape, ElementwiseOp op, const Tensor& a,
                   const Tensor& b = {});

/// Softmax over a rank-1 tensor, max-subtracted.
Tensor softmax(Tape& tape, const Tensor& x);

inline constexpr double kProbabilityFloor = 1e-12;

/// Fused softmax + negative log likelihood on rank-1 logits:
/// -log(max(softmax(logits)[label], 1e-12)). The adjoint is
/// softmax(logits) - onehot(label). Throws IndexError for a bad label.
Tensor nll_loss(Tape& tape, const Tensor& logits, std::size_t label);

/// Concatenation along `axis`; all other dims must agree.
Tensor concat(Tape& tape, const Tensor& a, const Tensor& b, std::size_t axis = 0);

/// Stacks equal-length rank-1 tensors as the rows of a matrix.
Tensor stack(Tape& tape, std::span<const Tensor> rows);

/// Contiguous sub-range of a rank-1 tensor.
Tensor slice(Tape& tape, const Tensor& x, std::size_t offset, std::size_t length);

/// Row `index` of a rank-2 tensor, as a rank-1 tensor.
Tensor row(Tape& tape, const Tensor& x, std::size_t index);

Tensor sum(Tape& tape, const Tensor& x);
Tensor transpose(Tape& tape, const Tensor& x);
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);

/// Rows of `table` ([V,d]) selected by `ids`, as [ids.size(), d]. Backward
/// scatter-adds into the selected rows, so repeated ids sum their
/// contributions.
Tensor gather_rows(Tape& tape, const Tensor& table, std::span<const std::size_t> ids);

}  // namespace hnsa::ad
