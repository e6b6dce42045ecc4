#include "tde/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tde/errors.hpp"

namespace tde {

namespace {

std::size_t shape_numel(const std::vector<int>& shape) {
  if (shape.empty()) throw DimensionError("tensor rank must be 1 or 2");
  if (shape.size() > 2) throw DimensionError("tensor rank must be 1 or 2");
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw DimensionError("negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

void check_finite(std::span<const double> data, const char* op) {
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + " produced a non-finite value");
    }
  }
}

// Common tape of the inputs, or nullptr when none is tracked. Mixing two
// distinct live tapes in one op is a programming error.
Tape* result_tape(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = nullptr;
  for (const Tensor* t : inputs) {
    if (!t->tracked()) continue;
    if (tape != nullptr && tape != t->tape()) {
      throw StateError("operands recorded on different tapes");
    }
    tape = t->tape();
  }
  return tape;
}

void bind(Tensor& out, Tape& tape) { out.watch(tape); }

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  std::size_t n = shape_numel(shape);
  t.shape_ = std::move(shape);
  t.data_.assign(n, 0.0);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t = zeros(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data) {
  std::size_t n = shape_numel(shape);
  if (n != data.size()) {
    throw DimensionError("data length does not match shape");
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  int n = static_cast<int>(values.size());
  return from({n}, std::move(values));
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> values) {
  return from({rows, cols}, std::move(values));
}

Tensor Tensor::identity(int n) {
  Tensor t = zeros({n, n});
  for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

int Tensor::dim(int axis) const {
  if (axis < 0 || axis >= rank()) throw DimensionError("axis out of range");
  return shape_[static_cast<std::size_t>(axis)];
}

double Tensor::at(int r, int c) const {
  return data_[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) +
               static_cast<std::size_t>(c)];
}

double& Tensor::at(int r, int c) {
  return data_[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) +
               static_cast<std::size_t>(c)];
}

double Tensor::value() const {
  if (numel() != 1) throw DimensionError("value() requires a single element");
  return data_[0];
}

void Tensor::watch(Tape& tape) {
  if (tape_ != nullptr && tape_ != &tape) {
    throw StateError("tensor already bound to another tape");
  }
  tape_ = &tape;
  node_ = tape.alloc(numel());
}

void Tensor::unwatch() {
  tape_ = nullptr;
  node_ = -1;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "{";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ",";
    os << shape_[i];
  }
  os << "}";
  return os.str();
}

// ---------------------------------------------------------------------------
// Tape

int Tape::alloc(std::size_t numel) {
  grads_.emplace_back(numel, 0.0);
  return static_cast<int>(grads_.size()) - 1;
}

void Tape::record(int out_node, std::vector<int> input_nodes, BackwardFn fn) {
  for (int in : input_nodes) {
    if (in >= out_node) {
      throw StateError("tape op input does not precede its output");
    }
  }
  ops_.push_back(Op{out_node, std::move(fn)});
}

void Tape::backward(int loss_node) {
  if (loss_node < 0 || loss_node >= static_cast<int>(grads_.size())) {
    throw StateError("backward on a node this tape does not own");
  }
  if (grads_[static_cast<std::size_t>(loss_node)].size() != 1) {
    throw DimensionError("backward seed must be scalar");
  }
  for (auto& g : grads_) std::fill(g.begin(), g.end(), 0.0);
  grads_[static_cast<std::size_t>(loss_node)][0] = 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) it->fn(*this);
}

std::span<double> Tape::grad(int node) {
  return grads_[static_cast<std::size_t>(node)];
}

std::span<const double> Tape::grad(int node) const {
  return grads_[static_cast<std::size_t>(node)];
}

// ---------------------------------------------------------------------------
// Elementwise binary ops

namespace {

enum class Broadcast { kNone, kRightRow, kLeftRow };

// Right/Left row means that operand is a row vector ({n} or {1,n}) repeated
// over the rows of the other {m,n} operand.
Broadcast classify(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kNone;
  auto row_len = [](const Tensor& t) -> int {
    if (t.rank() == 1) return t.dim(0);
    if (t.rank() == 2 && t.dim(0) == 1) return t.dim(1);
    return -1;
  };
  if (a.rank() == 2 && row_len(b) == a.cols()) return Broadcast::kRightRow;
  if (b.rank() == 2 && row_len(a) == b.cols()) return Broadcast::kLeftRow;
  throw DimensionError(std::string(op) + ": incompatible shapes " +
                       a.shape_str() + " vs " + b.shape_str());
}

template <typename Fwd>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd,
                 Tape::BackwardFn (*make_backward)(const Tensor&,
                                                   const Tensor&, const Tensor&,
                                                   Broadcast)) {
  Broadcast bc = classify(a, b, name);
  const Tensor& big = (bc == Broadcast::kLeftRow) ? b : a;
  Tensor out = Tensor::zeros(big.shape());
  const std::size_t n = out.numel();
  const std::size_t rowlen =
      (bc == Broadcast::kNone) ? n : static_cast<std::size_t>(big.cols());
  for (std::size_t i = 0; i < n; ++i) {
    double av = (bc == Broadcast::kLeftRow) ? a[i % rowlen] : a[i];
    double bv = (bc == Broadcast::kRightRow) ? b[i % rowlen] : b[i];
    out[i] = fwd(av, bv);
  }
  check_finite(out.data(), name);
  if (Tape* tp = result_tape({&a, &b})) {
    bind(out, *tp);
    tp->record(out.node(), {a.node(), b.node()}, make_backward(a, b, out, bc));
  }
  return out;
}

// Accumulates `dout`-shaped values into a possibly row-broadcast operand.
void scatter_operand(Tape& t, int node, std::size_t operand_numel,
                     std::span<const double> contribution, bool is_row,
                     std::size_t rowlen) {
  if (node < 0) return;
  auto g = t.grad(node);
  if (!is_row) {
    for (std::size_t i = 0; i < contribution.size(); ++i)
      g[i] += contribution[i];
  } else {
    (void)operand_numel;
    for (std::size_t i = 0; i < contribution.size(); ++i)
      g[i % rowlen] += contribution[i];
  }
}

Tape::BackwardFn add_backward(const Tensor& a, const Tensor& b,
                              const Tensor& out, Broadcast bc) {
  int an = a.node(), bn = b.node(), on = out.node();
  std::size_t an_numel = a.numel(), bn_numel = b.numel();
  std::size_t rowlen = (bc == Broadcast::kNone)
                           ? out.numel()
                           : static_cast<std::size_t>(out.cols());
  return [=](Tape& t) {
    auto dout = t.grad(on);
    scatter_operand(t, an, an_numel, dout, bc == Broadcast::kLeftRow, rowlen);
    scatter_operand(t, bn, bn_numel, dout, bc == Broadcast::kRightRow, rowlen);
  };
}

Tape::BackwardFn sub_backward(const Tensor& a, const Tensor& b,
                              const Tensor& out, Broadcast bc) {
  int an = a.node(), bn = b.node(), on = out.node();
  std::size_t an_numel = a.numel(), bn_numel = b.numel();
  std::size_t rowlen = (bc == Broadcast::kNone)
                           ? out.numel()
                           : static_cast<std::size_t>(out.cols());
  return [=](Tape& t) {
    auto dout = t.grad(on);
    scatter_operand(t, an, an_numel, dout, bc == Broadcast::kLeftRow, rowlen);
    if (bn >= 0) {
      std::vector<double> neg(dout.begin(), dout.end());
      for (double& v : neg) v = -v;
      scatter_operand(t, bn, bn_numel, neg, bc == Broadcast::kRightRow, rowlen);
    }
  };
}

Tape::BackwardFn mul_backward(const Tensor& a, const Tensor& b,
                              const Tensor& out, Broadcast bc) {
  int an = a.node(), bn = b.node(), on = out.node();
  std::vector<double> av(a.data().begin(), a.data().end());
  std::vector<double> bv(b.data().begin(), b.data().end());
  std::size_t an_numel = a.numel(), bn_numel = b.numel();
  std::size_t rowlen = (bc == Broadcast::kNone)
                           ? out.numel()
                           : static_cast<std::size_t>(out.cols());
  return [=](Tape& t) {
    auto dout = t.grad(on);
    if (an >= 0) {
      std::vector<double> contrib(dout.size());
      for (std::size_t i = 0; i < dout.size(); ++i) {
        double bval = (bc == Broadcast::kRightRow) ? bv[i % rowlen] : bv[i];
        contrib[i] = dout[i] * bval;
      }
      scatter_operand(t, an, an_numel, contrib, bc == Broadcast::kLeftRow,
                      rowlen);
    }
    if (bn >= 0) {
      std::vector<double> contrib(dout.size());
      for (std::size_t i = 0; i < dout.size(); ++i) {
        double aval = (bc == Broadcast::kLeftRow) ? av[i % rowlen] : av[i];
        contrib[i] = dout[i] * aval;
      }
      scatter_operand(t, bn, bn_numel, contrib, bc == Broadcast::kRightRow,
                      rowlen);
    }
  };
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "add", [](double x, double y) { return x + y; },
                   &add_backward);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "sub", [](double x, double y) { return x - y; },
                   &sub_backward);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "mul", [](double x, double y) { return x * y; },
                   &mul_backward);
}

// ---------------------------------------------------------------------------
// Elementwise unary ops

namespace {

template <typename Fwd, typename Deriv>
Tensor unary_op(const Tensor& a, const char* name, Fwd fwd, Deriv deriv) {
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = fwd(a[i]);
  check_finite(out.data(), name);
  if (Tape* tp = result_tape({&a})) {
    bind(out, *tp);
    int an = a.node(), on = out.node();
    std::vector<double> av(a.data().begin(), a.data().end());
    std::vector<double> ov(out.data().begin(), out.data().end());
    tp->record(out.node(), {an}, [=](Tape& t) {
      if (an < 0) return;
      auto dout = t.grad(on);
      auto g = t.grad(an);
      for (std::size_t i = 0; i < dout.size(); ++i)
        g[i] += dout[i] * deriv(av[i], ov[i]);
    });
  }
  return out;
}

}  // namespace

Tensor relu(const Tensor& a) {
  // Subgradient at 0 is 0.
  return unary_op(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return unary_op(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor sin(const Tensor& a) {
  return unary_op(
      a, "sin", [](double x) { return std::sin(x); },
      [](double x, double) { return std::cos(x); });
}

Tensor log(const Tensor& a) {
  return unary_op(
      a, "log", [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor scale(const Tensor& a, double c) {
  if (!std::isfinite(c)) throw NumericError("scale factor must be finite");
  return unary_op(
      a, "scale", [c](double x) { return c * x; },
      [c](double, double) { return c; });
}

// ---------------------------------------------------------------------------
// matmul / dot

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2) {
    throw DimensionError("matmul: left operand must be rank 2, got " +
                         a.shape_str());
  }
  const int m = a.rows(), k = a.cols();
  const bool vec = (b.rank() == 1);
  const int bk = vec ? b.dim(0) : b.rows();
  const int n = vec ? 1 : b.cols();
  if (bk != k) {
    throw DimensionError("matmul: inner dimensions differ, " + a.shape_str() +
                         " x " + b.shape_str());
  }
  Tensor out = vec ? Tensor::zeros({m}) : Tensor::zeros({m, n});
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) {
        acc += a[static_cast<std::size_t>(i) * k + p] *
               b[static_cast<std::size_t>(p) * n + j];
      }
      out[static_cast<std::size_t>(i) * n + j] = acc;
    }
  }
  check_finite(out.data(), "matmul");
  if (Tape* tp = result_tape({&a, &b})) {
    bind(out, *tp);
    int an = a.node(), bn = b.node(), on = out.node();
    std::vector<double> av(a.data().begin(), a.data().end());
    std::vector<double> bv(b.data().begin(), b.data().end());
    tp->record(out.node(), {an, bn}, [=](Tape& t) {
      auto dout = t.grad(on);
      if (an >= 0) {
        auto ga = t.grad(an);  // dA += dOut * B^T
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j)
              acc += dout[static_cast<std::size_t>(i) * n + j] *
                     bv[static_cast<std::size_t>(p) * n + j];
            ga[static_cast<std::size_t>(i) * k + p] += acc;
          }
      }
      if (bn >= 0) {
        auto gb = t.grad(bn);  // dB += A^T * dOut
        for (int p = 0; p < k; ++p)
          for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int i = 0; i < m; ++i)
              acc += av[static_cast<std::size_t>(i) * k + p] *
                     dout[static_cast<std::size_t>(i) * n + j];
            gb[static_cast<std::size_t>(p) * n + j] += acc;
          }
      }
    });
  }
  return out;
}

Tensor dot(const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || b.rank() != 1 || a.dim(0) != b.dim(0)) {
    throw DimensionError("dot: vectors of equal length required, " +
                         a.shape_str() + " vs " + b.shape_str());
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += a[i] * b[i];
  Tensor out = Tensor::scalar(acc);
  check_finite(out.data(), "dot");
  if (Tape* tp = result_tape({&a, &b})) {
    bind(out, *tp);
    int an = a.node(), bn = b.node(), on = out.node();
    std::vector<double> av(a.data().begin(), a.data().end());
    std::vector<double> bv(b.data().begin(), b.data().end());
    tp->record(out.node(), {an, bn}, [=](Tape& t) {
      double g = t.grad(on)[0];
      if (an >= 0) {
        auto ga = t.grad(an);
        for (std::size_t i = 0; i < bv.size(); ++i) ga[i] += g * bv[i];
      }
      if (bn >= 0) {
        auto gb = t.grad(bn);
        for (std::size_t i = 0; i < av.size(); ++i) gb[i] += g * av[i];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions

namespace {

Tensor reduce_impl(const Tensor& a, int axis, bool take_mean,
                   const char* name) {
  if (axis < 0 || axis >= a.rank()) {
    throw DimensionError(std::string(name) + ": axis out of range for rank " +
                         std::to_string(a.rank()));
  }
  if (a.rank() == 1) {
    const double len = static_cast<double>(a.numel());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) acc += a[i];
    if (take_mean) acc /= len;
    Tensor out = Tensor::scalar(acc);
    check_finite(out.data(), name);
    if (Tape* tp = result_tape({&a})) {
      bind(out, *tp);
      int an = a.node(), on = out.node();
      std::size_t n = a.numel();
      double w = take_mean ? 1.0 / len : 1.0;
      tp->record(out.node(), {an}, [=](Tape& t) {
        if (an < 0) return;
        double g = t.grad(on)[0] * w;
        auto ga = t.grad(an);
        for (std::size_t i = 0; i < n; ++i) ga[i] += g;
      });
    }
    return out;
  }
  const int m = a.rows(), n = a.cols();
  const int out_len = (axis == 0) ? n : m;
  const int red_len = (axis == 0) ? m : n;
  Tensor out = Tensor::zeros({out_len});
  for (int o = 0; o < out_len; ++o) {
    double acc = 0.0;
    for (int r = 0; r < red_len; ++r) {
      acc += (axis == 0) ? a.at(r, o) : a.at(o, r);
    }
    out[static_cast<std::size_t>(o)] =
        take_mean ? acc / static_cast<double>(red_len) : acc;
  }
  check_finite(out.data(), name);
  if (Tape* tp = result_tape({&a})) {
    bind(out, *tp);
    int an = a.node(), on = out.node();
    double w = take_mean ? 1.0 / static_cast<double>(red_len) : 1.0;
    tp->record(out.node(), {an}, [=](Tape& t) {
      if (an < 0) return;
      auto dout = t.grad(on);
      auto ga = t.grad(an);
      for (int o = 0; o < out_len; ++o) {
        double g = dout[static_cast<std::size_t>(o)] * w;
        for (int r = 0; r < red_len; ++r) {
          std::size_t idx = (axis == 0)
                                ? static_cast<std::size_t>(r) * n + o
                                : static_cast<std::size_t>(o) * n + r;
          ga[idx] += g;
        }
      }
    });
  }
  return out;
}

}  // namespace

Tensor sum(const Tensor& a, int axis) { return reduce_impl(a, axis, false, "sum"); }
Tensor mean(const Tensor& a, int axis) { return reduce_impl(a, axis, true, "mean"); }

Tensor sum_all(const Tensor& a) {
  if (a.rank() == 1) return sum(a, 0);
  return sum(sum(a, 0), 0);
}

Tensor mean_all(const Tensor& a) {
  if (a.rank() == 1) return mean(a, 0);
  return mean(mean(a, 0), 0);
}

// ---------------------------------------------------------------------------
// softmax

namespace {

// Flat index of element i of slice s for a softmax over `len`-long slices.
// stride==1 addresses contiguous rows; stride==n_slices addresses columns.
std::size_t slice_index(int s, int i, int stride, int slice_step) {
  return static_cast<std::size_t>(s) * slice_step +
         static_cast<std::size_t>(i) * stride;
}

}  // namespace

Tensor softmax(const Tensor& a, int axis) {
  if (axis < 0 || axis >= a.rank()) {
    throw DimensionError("softmax: axis out of range");
  }
  check_finite(a.data(), "softmax input");
  const bool rows = (a.rank() == 1) || axis == 1;
  const int slices = (a.rank() == 1) ? 1 : (rows ? a.rows() : a.cols());
  const int len = (a.rank() == 1) ? a.dim(0) : (rows ? a.cols() : a.rows());
  const int stride = rows ? 1 : slices;
  const int slice_step = rows ? len : 1;

  Tensor out = Tensor::zeros(a.shape());
  for (int s = 0; s < slices; ++s) {
    double mx = a[slice_index(s, 0, stride, slice_step)];
    for (int i = 1; i < len; ++i)
      mx = std::max(mx, a[slice_index(s, i, stride, slice_step)]);
    double z = 0.0;
    for (int i = 0; i < len; ++i) {
      double e = std::exp(a[slice_index(s, i, stride, slice_step)] - mx);
      out[slice_index(s, i, stride, slice_step)] = e;
      z += e;
    }
    for (int i = 0; i < len; ++i)
      out[slice_index(s, i, stride, slice_step)] /= z;
  }
  check_finite(out.data(), "softmax");
  if (Tape* tp = result_tape({&a})) {
    bind(out, *tp);
    int an = a.node(), on = out.node();
    std::vector<double> ov(out.data().begin(), out.data().end());
    tp->record(out.node(), {an}, [=](Tape& t) {
      if (an < 0) return;
      auto dout = t.grad(on);
      auto ga = t.grad(an);
      for (int s = 0; s < slices; ++s) {
        double inner = 0.0;
        for (int i = 0; i < len; ++i) {
          std::size_t idx = slice_index(s, i, stride, slice_step);
          inner += dout[idx] * ov[idx];
        }
        for (int i = 0; i < len; ++i) {
          std::size_t idx = slice_index(s, i, stride, slice_step);
          ga[idx] += ov[idx] * (dout[idx] - inner);
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Structural ops

Tensor col(const Tensor& m, int j) {
  if (m.rank() != 2) throw DimensionError("col: rank-2 tensor required");
  if (j < 0 || j >= m.cols()) {
    throw DimensionError("col: column index " + std::to_string(j) +
                         " out of range for " + m.shape_str());
  }
  const int rows = m.rows(), cols = m.cols();
  Tensor out = Tensor::zeros({rows});
  for (int i = 0; i < rows; ++i) out[static_cast<std::size_t>(i)] = m.at(i, j);
  if (Tape* tp = result_tape({&m})) {
    bind(out, *tp);
    int mn = m.node(), on = out.node();
    tp->record(out.node(), {mn}, [=](Tape& t) {
      if (mn < 0) return;
      auto dout = t.grad(on);
      auto gm = t.grad(mn);
      for (int i = 0; i < rows; ++i)
        gm[static_cast<std::size_t>(i) * cols + j] +=
            dout[static_cast<std::size_t>(i)];
    });
  }
  return out;
}

Tensor slice(const Tensor& v, int begin, int len) {
  if (v.rank() != 1) throw DimensionError("slice: rank-1 tensor required");
  if (begin < 0 || len < 1 || begin + len > v.dim(0)) {
    throw DimensionError("slice: range out of bounds");
  }
  Tensor out = Tensor::zeros({len});
  for (int i = 0; i < len; ++i)
    out[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(begin + i)];
  if (Tape* tp = result_tape({&v})) {
    bind(out, *tp);
    int vn = v.node(), on = out.node();
    tp->record(out.node(), {vn}, [=](Tape& t) {
      if (vn < 0) return;
      auto dout = t.grad(on);
      auto gv = t.grad(vn);
      for (int i = 0; i < len; ++i)
        gv[static_cast<std::size_t>(begin + i)] +=
            dout[static_cast<std::size_t>(i)];
    });
  }
  return out;
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat: no operands");
  int total = 0;
  Tape* tp = nullptr;
  for (const Tensor& p : parts) {
    if (p.rank() != 1) throw DimensionError("concat: rank-1 tensors required");
    total += p.dim(0);
    if (p.tracked()) {
      if (tp && tp != p.tape())
        throw StateError("operands recorded on different tapes");
      tp = p.tape();
    }
  }
  Tensor out = Tensor::zeros({total});
  int off = 0;
  std::vector<int> nodes, offsets, lens;
  for (const Tensor& p : parts) {
    for (std::size_t i = 0; i < p.numel(); ++i)
      out[static_cast<std::size_t>(off) + i] = p[i];
    nodes.push_back(p.node());
    offsets.push_back(off);
    lens.push_back(p.dim(0));
    off += p.dim(0);
  }
  if (tp) {
    bind(out, *tp);
    int on = out.node();
    tp->record(on, nodes, [=](Tape& t) {
      auto dout = t.grad(on);
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        if (nodes[k] < 0) continue;
        auto g = t.grad(nodes[k]);
        for (int i = 0; i < lens[k]; ++i)
          g[static_cast<std::size_t>(i)] +=
              dout[static_cast<std::size_t>(offsets[k] + i)];
      }
    });
  }
  return out;
}

Tensor stack_cols(std::span<const Tensor> columns) {
  if (columns.empty()) throw DimensionError("stack_cols: no operands");
  const int n = columns[0].dim(0);
  const int count = static_cast<int>(columns.size());
  Tape* tp = nullptr;
  for (const Tensor& c : columns) {
    if (c.rank() != 1 || c.dim(0) != n) {
      throw DimensionError("stack_cols: equal-length vectors required");
    }
    if (c.tracked()) {
      if (tp && tp != c.tape())
        throw StateError("operands recorded on different tapes");
      tp = c.tape();
    }
  }
  Tensor out = Tensor::zeros({n, count});
  std::vector<int> nodes;
  for (int j = 0; j < count; ++j) {
    for (int i = 0; i < n; ++i)
      out.at(i, j) = columns[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
    nodes.push_back(columns[static_cast<std::size_t>(j)].node());
  }
  if (tp) {
    bind(out, *tp);
    int on = out.node();
    tp->record(on, nodes, [=](Tape& t) {
      auto dout = t.grad(on);
      for (int j = 0; j < count; ++j) {
        if (nodes[static_cast<std::size_t>(j)] < 0) continue;
        auto g = t.grad(nodes[static_cast<std::size_t>(j)]);
        for (int i = 0; i < n; ++i)
          g[static_cast<std::size_t>(i)] +=
              dout[static_cast<std::size_t>(i) * count + j];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradient checker

double grad_check(const std::function<Tensor()>& f,
                  std::span<Tensor* const> params, double h) {
  if (h <= 0.0) throw ConfigError("grad_check: step must be positive");

  Tape tape;
  for (Tensor* p : params) p->watch(tape);
  Tensor loss = f();
  if (loss.numel() != 1) {
    throw DimensionError("grad_check: f must return a scalar");
  }
  if (!std::isfinite(loss.value())) {
    throw NumericError("grad_check: f returned a non-finite value");
  }
  std::vector<std::vector<double>> analytic;
  if (loss.tracked()) {
    loss.tape()->backward(loss.node());
    for (Tensor* p : params) {
      auto g = tape.grad(p->node());
      analytic.emplace_back(g.begin(), g.end());
    }
  } else {
    for (Tensor* p : params) analytic.emplace_back(p->numel(), 0.0);
  }
  for (Tensor* p : params) p->unwatch();

  double max_rel = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = *params[pi];
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double orig = p[i];
      p[i] = orig + h;
      double fp = f().value();
      p[i] = orig - h;
      double fm = f().value();
      p[i] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw NumericError("grad_check: non-finite value under perturbation");
      }
      const double numeric = (fp - fm) / (2.0 * h);
      const double rel = std::abs(analytic[pi][i] - numeric) /
                         std::max(1.0, std::abs(analytic[pi][i]));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace tde
