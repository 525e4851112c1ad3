#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace spinsight::ag {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& s);
std::string shape_string(const Shape& s);

// Dense row-major tensor of doubles with up to four axes.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double x) { return Tensor({}, std::vector<double>{x}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  // Size of the last axis (1 for scalars).
  std::size_t cols() const { return shape_.empty() ? 1 : shape_.back(); }
  std::size_t rows() const { return cols() ? size() / cols() : 0; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double item() const;

  void fill(double x);
  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Ordered collection of named learnable tensors.
class Parameters {
 public:
  std::size_t add(std::string name, Tensor value);
  std::size_t size() const { return tensors_.size(); }
  std::size_t index(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor& operator[](std::size_t i) const { return tensors_[i]; }
  Tensor& get(const std::string& name) { return tensors_[index(name)]; }
  const Tensor& get(const std::string& name) const { return tensors_[index(name)]; }
  std::size_t scalar_count() const;

  // Zero tensors shaped like every parameter.
  std::vector<Tensor> zeros_like() const;

  friend bool operator==(const Parameters&, const Parameters&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

using Gradients = std::vector<Tensor>;

class Tape;

// Handle to a node recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Records operations for a single reverse pass.
class Tape {
 public:
  Tape() = default;
  // With grad_enabled false nothing on the tape records a backward pass.
  explicit Tape(bool grad_enabled) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf bound to a stored parameter; the tensor must outlive the tape.
  Var param(const Parameters& params, std::size_t index);
  Var param(const Parameters& params, const std::string& name) {
    return param(params, params.index(name));
  }
  // Leaf that receives a gradient but is not a stored parameter.
  Var input(Tensor value);

  // Reverse pass from a scalar. Throws GraphConsumed on second call.
  void backward(Var loss);
  bool consumed() const { return consumed_; }

  // Gradient of a recorded node after backward (zeros if unreached).
  Tensor grad(Var v) const;
  // Adds gradients of parameter leaves into grads (shaped like params).
  void accumulate(Gradients& grads) const;

  std::size_t node_count() const { return nodes_.size(); }

  // --- used by op implementations -----------------------------------
  using BackwardFn = std::function<void(Tape&, int)>;
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(Tensor value, const std::vector<Var>& parents, BackwardFn fn);
  const Tensor& value(int id) const;
  const std::vector<double>& grad_of(int id) const { return nodes_[id].grad; }
  // Mutable gradient buffer; empty when the node needs no gradient.
  double* grad_buffer(int id);
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    std::vector<double> grad;
    BackwardFn backward;
    long param_index = -1;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
  std::unordered_map<std::size_t, int> param_nodes_;
  bool consumed_ = false;
  bool grad_enabled_ = true;
};

// --- forward ops -------------------------------------------------------

// [n,k] x [k,m] -> [n,m]
Var matmul(Var a, Var b);
// [n,k] x [m,k]^T -> [n,m]
Var matmul_nt(Var a, Var b);
Var transpose(Var a);
// b broadcast over the leading axes of a (b's shape is a suffix of a's).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var softmax(Var a);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
Var gelu(Var a);
Var concat(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice(Var a, std::size_t begin, std::size_t end);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var mean(Var a);
Var sum(Var a);
// sum_r weight_r * ||a_r - b_r||^2 over rows; weights empty means all 1.
Var squared_error(Var a, Var b, std::span<const double> row_weights = {});
// Rotates consecutive coordinate pairs (2i, 2i+1) of row r by
// positions[r] * base^(-2i/cols).
Var rope(Var a, std::span<const double> positions, double base = 10000.0);

// --- optimizers --------------------------------------------------------

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(const Parameters& params, AdamOptions options = {});

  void step(Parameters& params, const Gradients& grads);

  std::int64_t steps() const { return step_; }
  void set_steps(std::int64_t s) { step_ = s; }
  const AdamOptions& options() const { return options_; }
  void set_lr(double lr) { options_.lr = lr; }
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  AdamOptions options_;
  std::int64_t step_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

class Ema {
 public:
  Ema() = default;
  // Shadow starts as a copy of params.
  explicit Ema(const Parameters& params, double decay = 0.999);
  // Shadow starts at the given tensors.
  static Ema with_shadow(Parameters shadow, double decay);

  void update(const Parameters& params);
  const Parameters& shadow() const { return shadow_; }
  Parameters& shadow() { return shadow_; }
  double decay() const { return decay_; }

 private:
  Parameters shadow_;
  double decay_ = 0.999;
};

}  // namespace spinsight::ag
