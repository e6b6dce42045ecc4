#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tde {

class Tape;

// Dense row-major tensor of 64-bit floats, rank 1 or 2. A tensor is a plain
// value until watch() binds it to a tape; from then on every op consuming it
// records a reverse-mode gradient rule. Tapes are rebuilt per forward pass
// (define-by-run), which is what makes the per-timestep variable-count
// changes of the model cheap to express.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor from(std::vector<int> shape, std::vector<double> data);
  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(int rows, int cols, std::vector<double> values);
  static Tensor identity(int n);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::size_t numel() const { return data_.size(); }
  int dim(int axis) const;
  int rows() const { return dim(0); }
  int cols() const { return dim(1); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double at(int r, int c) const;
  double& at(int r, int c);

  // Value of a single-element tensor.
  double value() const;

  // Views into the storage. Rvalue overloads are deleted: a span must not
  // outlive a temporary tensor (e.g. in a range-for over f(x).data()).
  std::span<const double> data() const& { return data_; }
  std::span<double> data() & { return data_; }
  std::span<const double> data() const&& = delete;
  std::span<double> data() && = delete;

  // Tape tracking. watch() allocates a leaf node; unwatch() detaches without
  // touching values. A tensor is confined to one tape at a time.
  void watch(Tape& tape);
  void unwatch();
  bool tracked() const { return tape_ != nullptr; }
  int node() const { return node_; }
  Tape* tape() const { return tape_; }

  std::string shape_str() const;

 private:
  friend Tape;
  std::vector<int> shape_;
  std::vector<double> data_;
  int node_ = -1;
  Tape* tape_ = nullptr;
};

// Reverse-mode tape: an ordered list of recorded ops, each holding its output
// node id and a closure that scatters the output adjoint into the input
// slots. Construction order is topological by definition, so the backward
// pass is a single reverse sweep that touches each op exactly once.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  int alloc(std::size_t numel);
  void record(int out_node, std::vector<int> input_nodes, BackwardFn fn);

  // Seeds d(loss)/d(loss) = 1 and replays the ops in reverse.
  void backward(int loss_node);

  std::span<double> grad(int node);
  std::span<const double> grad(int node) const;

  std::size_t num_nodes() const { return grads_.size(); }
  std::size_t num_ops() const { return ops_.size(); }

 private:
  struct Op {
    int out;
    BackwardFn fn;
  };
  std::vector<Op> ops_;
  std::vector<std::vector<double>> grads_;
};

// ---------------------------------------------------------------------------
// Primitive ops. Binary elementwise ops accept equal shapes or a row vector
// ({n} or {1,n}) broadcast over the rows of a {m,n} matrix. Every op checks
// its output for NaN/Inf and throws NumericError on violation.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor sin(const Tensor& a);
Tensor log(const Tensor& a);

Tensor scale(const Tensor& a, double c);

// matmul: {m,k}x{k,n} -> {m,n}, or {m,k}x{k} -> {m} (matrix-vector).
Tensor matmul(const Tensor& a, const Tensor& b);

// Inner product of two equal-length vectors -> {1}.
Tensor dot(const Tensor& a, const Tensor& b);

// Reductions. For rank-2 tensors axis 0 reduces rows (result {cols}) and
// axis 1 reduces columns (result {rows}); for rank-1, axis 0 -> {1}.
Tensor sum(const Tensor& a, int axis);
Tensor mean(const Tensor& a, int axis);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);

// Row-stable softmax (max subtraction). axis must address length-n slices:
// rank-1 tensors use axis 0, rank-2 tensors axis 1 (per row) or 0 (per col).
Tensor softmax(const Tensor& a, int axis);

// Column j of a {m,n} matrix as a {m} vector; gradient scatters back into
// the column. This is the embedding-table lookup.
Tensor col(const Tensor& m, int j);

// Contiguous slice [begin, begin+len) of a vector.
Tensor slice(const Tensor& v, int begin, int len);

// Concatenation of vectors into one vector.
Tensor concat(std::span<const Tensor> parts);

// Vectors of equal length n stacked as the columns of a {n, count} matrix.
Tensor stack_cols(std::span<const Tensor> columns);

// ---------------------------------------------------------------------------
// Finite-difference gradient checker. `f` recomputes the scalar loss from the
// current contents of `params`; it is invoked once under the tape for the
// analytic gradient and 2*P more times for central differences. Returns the
// max over coordinates of |analytic - numeric| / max(1, |analytic|).
double grad_check(const std::function<Tensor()>& f,
                  std::span<Tensor* const> params, double h);

}  // namespace tde
