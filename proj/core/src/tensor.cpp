// SPDX-License-Identifier: Apache-2.0
#include "hnsa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

#include "hnsa/error.hpp"

namespace hnsa::ad {

std::size_t shape_size(const Shape& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
  for (auto d : shape) {
    if (d == 0) throw ShapeError("zero dimension in shape " + shape_string(shape));
  }
  if (values.size() != shape_size(shape)) {
    throw ShapeError("shape " + shape_string(shape) + " needs " +
                     std::to_string(shape_size(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  data_ = std::make_shared<Storage>();
  data_->shape = std::move(shape);
  data_->values = std::move(values);
  data_->requires_grad = requires_grad;
  if (requires_grad) data_->grad.assign(data_->values.size(), 0.0);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return filled(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  const auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const auto n = values.size();
  return Tensor({n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return Tensor({rows, cols}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const {
  if (!data_) throw UsageError("use of an undefined tensor");
  return data_->shape;
}

std::size_t Tensor::size() const {
  if (!data_) throw UsageError("use of an undefined tensor");
  return data_->values.size();
}

std::span<const double> Tensor::values() const {
  if (!data_) throw UsageError("use of an undefined tensor");
  return data_->values;
}

std::span<double> Tensor::mutable_values() {
  if (!data_) throw UsageError("use of an undefined tensor");
  return data_->values;
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw ShapeError("at(row, col) on shape " + shape_string(shape()));
  return data_->values[row * data_->shape[1] + col];
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on shape " + shape_string(shape()));
  return data_->values[0];
}

bool Tensor::requires_grad() const { return data_ && data_->requires_grad; }

std::span<const double> Tensor::grad() const {
  if (!data_) throw UsageError("use of an undefined tensor");
  return data_->grad;
}

std::span<double> Tensor::mutable_grad() {
  if (!data_) throw UsageError("use of an undefined tensor");
  return data_->grad;
}

void Tensor::zero_grad() {
  if (data_) std::fill(data_->grad.begin(), data_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(shape(), data_->values, false); }

Tensor Tensor::clone() const { return Tensor(shape(), data_->values, requires_grad()); }

// ---------------------------------------------------------------------------
// Tape

std::vector<std::string_view> Tape::ops() const {
  std::vector<std::string_view> names;
  names.reserve(entries_.size());
  for (const auto& e : entries_) names.emplace_back(e.op);
  return names;
}

bool Tape::tracks(std::initializer_list<const Tensor*> inputs) const {
  if (!recording_) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

void Tape::record(const char* op, std::vector<Tensor> inputs, Tensor output,
                  BackwardFn fn) {
  entries_.push_back(Entry{op, std::move(inputs), std::move(output), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw UsageError("backward() needs a one-element loss, got shape " +
                     (loss.defined() ? shape_string(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) {
    throw UsageError("backward() on a loss that does not depend on any tracked tensor");
  }
  Tensor seed = loss;
  seed.mutable_grad()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    it->fn(it->inputs, it->output);
  }
  entries_.clear();
}

// ---------------------------------------------------------------------------
// Ops

namespace {

template <typename Fn>
Tensor emit(Tape& tape, const char* op, std::initializer_list<const Tensor*> inputs,
            Shape shape, std::vector<double> values, Fn&& fn) {
  const bool tracked = tape.tracks(inputs);
  Tensor out(std::move(shape), std::move(values), tracked);
  if (tracked) {
    std::vector<Tensor> ins;
    ins.reserve(inputs.size());
    for (const Tensor* t : inputs) ins.push_back(*t);
    tape.record(op, std::move(ins), out, std::forward<Fn>(fn));
  }
  return out;
}

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) +
                   " and " + shape_string(b.shape()));
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw UsageError(std::string(op) + ": undefined operand");
}

double sigmoid_scalar(double x) {
  // Split by sign so exp never overflows.
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

enum class Broadcast { kNone, kRow };

Broadcast binary_broadcast(const char* op, const Tensor& a, const Tensor& b,
                           bool allow_row) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.shape() == b.shape()) return Broadcast::kNone;
  if (allow_row && a.rank() == 2 && b.rank() == 1 && b.dim(0) == a.dim(1)) {
    return Broadcast::kRow;
  }
  shape_mismatch(op, a, b);
}

Tensor add_sub(Tape& tape, const Tensor& a, const Tensor& b, double sign,
               const char* op) {
  const auto mode = binary_broadcast(op, a, b, true);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(av.size());
  const std::size_t width = bv.size();
  for (std::size_t i = 0; i < av.size(); ++i) {
    out[i] = av[i] + sign * bv[mode == Broadcast::kRow ? i % width : i];
  }
  return emit(tape, op, {&a, &b}, a.shape(), std::move(out),
              [sign, mode, width](std::span<Tensor> in, const Tensor& o) {
                const auto g = o.grad();
                if (in[0].requires_grad()) {
                  auto ga = in[0].mutable_grad();
                  for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                }
                if (in[1].requires_grad()) {
                  auto gb = in[1].mutable_grad();
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    gb[mode == Broadcast::kRow ? i % width : i] += sign * g[i];
                  }
                }
              });
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.rank() > 2 || b.rank() > 2 || (a.rank() == 1 && b.rank() == 1)) {
    shape_mismatch("matmul", a, b);
  }
  // Rank-1 operands act as a row vector (left) or column vector (right).
  const std::size_t m = a.rank() == 2 ? a.dim(0) : 1;
  const std::size_t k = a.rank() == 2 ? a.dim(1) : a.dim(0);
  const std::size_t kb = b.dim(0);
  const std::size_t n = b.rank() == 2 ? b.dim(1) : 1;
  if (k != kb) shape_mismatch("matmul", a, b);

  Shape out_shape;
  if (a.rank() == 2 && b.rank() == 2) {
    out_shape = {m, n};
  } else if (a.rank() == 2) {
    out_shape = {m};
  } else {
    out_shape = {n};
  }

  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      const double* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }

  return emit(tape, "matmul", {&a, &b}, std::move(out_shape), std::move(out),
              [m, k, n](std::span<Tensor> in, const Tensor& o) {
                const auto g = o.grad();
                if (in[0].requires_grad()) {
                  // dA = dC * B^T
                  const auto bv = in[1].values();
                  auto ga = in[0].mutable_grad();
                  for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t p = 0; p < k; ++p) {
                      double acc = 0.0;
                      for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
                      ga[i * k + p] += acc;
                    }
                  }
                }
                if (in[1].requires_grad()) {
                  // dB = A^T * dC
                  const auto av = in[0].values();
                  auto gb = in[1].mutable_grad();
                  for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t p = 0; p < k; ++p) {
                      const double aip = av[i * k + p];
                      for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
                    }
                  }
                }
              });
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  return add_sub(tape, a, b, 1.0, "add");
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  return add_sub(tape, a, b, -1.0, "sub");
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  binary_broadcast("mul", a, b, false);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  return emit(tape, "mul", {&a, &b}, a.shape(), std::move(out),
              [](std::span<Tensor> in, const Tensor& o) {
                const auto g = o.grad();
                const auto av = in[0].values();
                const auto bv = in[1].values();
                if (in[0].requires_grad()) {
                  auto ga = in[0].mutable_grad();
                  for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                }
                if (in[1].requires_grad()) {
                  auto gb = in[1].mutable_grad();
                  for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                }
              });
}

Tensor tanh(Tape& tape, const Tensor& x) {
  require_defined(x, "tanh");
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::tanh(xv[i]);
  return emit(tape, "tanh", {&x}, x.shape(), std::move(out),
              [](std::span<Tensor> in, const Tensor& o) {
                const auto g = o.grad();
                const auto y = o.values();
                auto gx = in[0].mutable_grad();
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
              });
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  require_defined(x, "sigmoid");
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = sigmoid_scalar(xv[i]);
  return emit(tape, "sigmoid", {&x}, x.shape(), std::move(out),
              [](std::span<Tensor> in, const Tensor& o) {
                const auto g = o.grad();
                const auto y = o.values();
                auto gx = in[0].mutable_grad();
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
              });
}

Tensor elementwise(Tape& tape, ElementwiseOp op, const Tensor& a, const Tensor& b) {
  switch (op) {
    case ElementwiseOp::kAdd: return add(tape, a, b);
    case ElementwiseOp::kSub: return sub(tape, a, b);
    case ElementwiseOp::kMul: return mul(tape, a, b);
    case ElementwiseOp::kTanh: return tanh(tape, a);
    case ElementwiseOp::kSigmoid: return sigmoid(tape, a);
  }
  throw UsageError("unknown elementwise op");
}

Tensor softmax(Tape& tape, const Tensor& x) {
  require_defined(x, "softmax");
  if (x.rank() != 1) throw ShapeError("softmax expects a rank-1 tensor, got " + shape_string(x.shape()));
  const auto xv = x.values();
  const double mx = *std::max_element(xv.begin(), xv.end());
  std::vector<double> out(xv.size());
  double total = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    out[i] = std::exp(xv[i] - mx);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return emit(tape, "softmax", {&x}, x.shape(), std::move(out),
              [](std::span<Tensor> in, const Tensor& o) {
                const auto g = o.grad();
                const auto y = o.values();
                double dot = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * y[i];
                auto gx = in[0].mutable_grad();
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += y[i] * (g[i] - dot);
              });
}

Tensor nll_loss(Tape& tape, const Tensor& logits, std::size_t label) {
  require_defined(logits, "nll_loss");
  if (logits.rank() != 1) {
    throw ShapeError("nll_loss expects rank-1 logits, got " + shape_string(logits.shape()));
  }
  if (label >= logits.size()) {
    throw IndexError("label " + std::to_string(label) + " out of range for " +
                     std::to_string(logits.size()) + " classes");
  }
  const auto lv = logits.values();
  const double mx = *std::max_element(lv.begin(), lv.end());
  double total = 0.0;
  for (double v : lv) total += std::exp(v - mx);
  const double log_total = std::log(total) + mx;
  std::vector<double> probs(lv.size());
  for (std::size_t i = 0; i < lv.size(); ++i) probs[i] = std::exp(lv[i] - log_total);
  const double log_p = std::max(lv[label] - log_total, std::log(kProbabilityFloor));

  return emit(tape, "nll_loss", {&logits}, {1}, {-log_p},
              [label, probs = std::move(probs)](std::span<Tensor> in, const Tensor& o) {
                const double g = o.grad()[0];
                auto gl = in[0].mutable_grad();
                for (std::size_t i = 0; i < probs.size(); ++i) {
                  gl[i] += g * (probs[i] - (i == label ? 1.0 : 0.0));
                }
              });
}

Tensor concat(Tape& tape, const Tensor& a, const Tensor& b, std::size_t axis) {
  require_defined(a, "concat");
  require_defined(b, "concat");
  if (a.rank() != b.rank() || axis >= a.rank()) shape_mismatch("concat", a, b);
  for (std::size_t d = 0; d < a.rank(); ++d) {
    if (d != axis && a.dim(d) != b.dim(d)) shape_mismatch("concat", a, b);
  }
  std::size_t outer = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= a.dim(d);
  const std::size_t a_chunk = a.size() / outer;
  const std::size_t b_chunk = b.size() / outer;

  Shape shape = a.shape();
  shape[axis] += b.dim(axis);
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t o = 0; o < outer; ++o) {
    out.insert(out.end(), av.begin() + o * a_chunk, av.begin() + (o + 1) * a_chunk);
    out.insert(out.end(), bv.begin() + o * b_chunk, bv.begin() + (o + 1) * b_chunk);
  }
  return emit(tape, "concat", {&a, &b}, std::move(shape), std::move(out),
              [outer, a_chunk, b_chunk](std::span<Tensor> in, const Tensor& o) {
                const auto g = o.grad();
                const std::size_t stride = a_chunk + b_chunk;
                if (in[0].requires_grad()) {
                  auto ga = in[0].mutable_grad();
                  for (std::size_t r = 0; r < outer; ++r)
                    for (std::size_t i = 0; i < a_chunk; ++i) ga[r * a_chunk + i] += g[r * stride + i];
                }
                if (in[1].requires_grad()) {
                  auto gb = in[1].mutable_grad();
                  for (std::size_t r = 0; r < outer; ++r)
                    for (std::size_t i = 0; i < b_chunk; ++i)
                      gb[r * b_chunk + i] += g[r * stride + a_chunk + i];
                }
              });
}

Tensor stack(Tape& tape, std::span<const Tensor> rows) {
  if (rows.empty()) throw ShapeError("stack of zero rows");
  for (const auto& r : rows) require_defined(r, "stack");
  const std::size_t width = rows[0].size();
  std::vector<double> out;
  out.reserve(rows.size() * width);
  bool tracked = false;
  for (const auto& r : rows) {
    if (r.rank() != 1 || r.size() != width) shape_mismatch("stack", rows[0], r);
    const auto v = r.values();
    out.insert(out.end(), v.begin(), v.end());
    tracked = tracked || r.requires_grad();
  }
  tracked = tracked && tape.recording();
  Tensor result({rows.size(), width}, std::move(out), tracked);
  if (tracked) {
    tape.record("stack", std::vector<Tensor>(rows.begin(), rows.end()), result,
                [width](std::span<Tensor> in, const Tensor& o) {
                  const auto g = o.grad();
                  for (std::size_t r = 0; r < in.size(); ++r) {
                    if (!in[r].requires_grad()) continue;
                    auto gr = in[r].mutable_grad();
                    for (std::size_t i = 0; i < width; ++i) gr[i] += g[r * width + i];
                  }
                });
  }
  return result;
}

Tensor slice(Tape& tape, const Tensor& x, std::size_t offset, std::size_t length) {
  require_defined(x, "slice");
  if (x.rank() != 1 || length == 0 || offset + length > x.size()) {
    throw ShapeError("slice [" + std::to_string(offset) + ", +" + std::to_string(length) +
                     ") out of range for shape " + shape_string(x.shape()));
  }
  const auto xv = x.values();
  std::vector<double> out(xv.begin() + offset, xv.begin() + offset + length);
  return emit(tape, "slice", {&x}, {length}, std::move(out),
              [offset](std::span<Tensor> in, const Tensor& o) {
                const auto g = o.grad();
                auto gx = in[0].mutable_grad();
                for (std::size_t i = 0; i < g.size(); ++i) gx[offset + i] += g[i];
              });
}

Tensor row(Tape& tape, const Tensor& x, std::size_t index) {
  require_defined(x, "row");
  if (x.rank() != 2 || index >= x.dim(0)) {
    throw ShapeError("row " + std::to_string(index) + " out of range for shape " +
                     shape_string(x.shape()));
  }
  const std::size_t width = x.dim(1);
  const auto xv = x.values();
  const auto first = xv.begin() + static_cast<std::ptrdiff_t>(index * width);
  return emit(tape, "row", {&x}, {width}, std::vector<double>(first, first + width),
              [index, width](std::span<Tensor> in, const Tensor& o) {
                const auto g = o.grad();
                auto gx = in[0].mutable_grad();
                for (std::size_t i = 0; i < width; ++i) gx[index * width + i] += g[i];
              });
}

Tensor sum(Tape& tape, const Tensor& x) {
  require_defined(x, "sum");
  const auto xv = x.values();
  double total = 0.0;
  for (double v : xv) total += v;
  return emit(tape, "sum", {&x}, {1}, {total}, [](std::span<Tensor> in, const Tensor& o) {
    const double g = o.grad()[0];
    for (auto& v : in[0].mutable_grad()) v += g;
  });
}

Tensor transpose(Tape& tape, const Tensor& x) {
  require_defined(x, "transpose");
  if (x.rank() != 2) throw ShapeError("transpose expects rank 2, got " + shape_string(x.shape()));
  const std::size_t r = x.dim(0);
  const std::size_t c = x.dim(1);
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xv[i * c + j];
  return emit(tape, "transpose", {&x}, {c, r}, std::move(out),
              [r, c](std::span<Tensor> in, const Tensor& o) {
                const auto g = o.grad();
                auto gx = in[0].mutable_grad();
                for (std::size_t i = 0; i < r; ++i)
                  for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
              });
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  require_defined(x, "reshape");
  if (shape_size(shape) != x.size()) {
    throw ShapeError("cannot reshape " + shape_string(x.shape()) + " to " + shape_string(shape));
  }
  const auto xv = x.values();
  return emit(tape, "reshape", {&x}, std::move(shape), std::vector<double>(xv.begin(), xv.end()),
              [](std::span<Tensor> in, const Tensor& o) {
                const auto g = o.grad();
                auto gx = in[0].mutable_grad();
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
              });
}

Tensor gather_rows(Tape& tape, const Tensor& table, std::span<const std::size_t> ids) {
  require_defined(table, "gather_rows");
  if (table.rank() != 2) {
    throw ShapeError("gather_rows expects a rank-2 table, got " + shape_string(table.shape()));
  }
  if (ids.empty()) throw ShapeError("gather_rows with no ids");
  const std::size_t rows = table.dim(0);
  const std::size_t width = table.dim(1);
  const auto tv = table.values();
  std::vector<double> out;
  out.reserve(ids.size() * width);
  for (auto id : ids) {
    if (id >= rows) {
      throw IndexError("row id " + std::to_string(id) + " out of range for table of " +
                       std::to_string(rows) + " rows");
    }
    out.insert(out.end(), tv.begin() + id * width, tv.begin() + (id + 1) * width);
  }
  return emit(tape, "gather_rows", {&table}, {ids.size(), width}, std::move(out),
              [width, ids = std::vector<std::size_t>(ids.begin(), ids.end())](
                  std::span<Tensor> in, const Tensor& o) {
                const auto g = o.grad();
                auto gt = in[0].mutable_grad();
                for (std::size_t r = 0; r < ids.size(); ++r)
                  for (std::size_t i = 0; i < width; ++i) gt[ids[r] * width + i] += g[r * width + i];
              });
}

}  // namespace hnsa::ad
