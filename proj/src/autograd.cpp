#include "spinsight/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

#include "spinsight/errors.hpp"

namespace spinsight::ag {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

CMapMat cmap(const Tensor& t, std::size_t rows, std::size_t cols) {
  return CMapMat(t.data(), static_cast<Eigen::Index>(rows),
                 static_cast<Eigen::Index>(cols));
}
CMapMat cmap(const double* p, std::size_t rows, std::size_t cols) {
  return CMapMat(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
MapMat map(double* p, std::size_t rows, std::size_t cols) {
  return MapMat(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeMismatch(what);
}

void require_matrix(const Tensor& t, const char* op) {
  require(t.rank() == 2, std::string(op) + ": expected rank-2 tensor, got " +
                             shape_string(t.shape()));
}

}  // namespace

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_string(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
  require(shape_.size() <= 4, "tensor rank above 4");
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  require(shape_.size() <= 4, "tensor rank above 4");
  require(shape_size(shape_) == data_.size(),
          "shape " + shape_string(shape_) + " does not match " +
              std::to_string(data_.size()) + " values");
}

double Tensor::item() const {
  require(data_.size() == 1, "item() on non-scalar " + shape_string(shape_));
  return data_[0];
}

void Tensor::fill(double x) { std::fill(data_.begin(), data_.end(), x); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double x) { return std::isfinite(x); });
}

std::size_t Parameters::add(std::string name, Tensor value) {
  if (index_.count(name)) throw ShapeMismatch("duplicate parameter " + name);
  index_.emplace(name, tensors_.size());
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(value));
  return tensors_.size() - 1;
}

std::size_t Parameters::index(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ShapeMismatch("unknown parameter " + name);
  return it->second;
}

std::size_t Parameters::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

std::vector<Tensor> Parameters::zeros_like() const {
  std::vector<Tensor> out;
  out.reserve(tensors_.size());
  for (const auto& t : tensors_) out.emplace_back(t.shape(), 0.0);
  return out;
}

// --- tape ----------------------------------------------------------------

const Tensor& Var::value() const { return tape->value(id); }

const Tensor& Tape::value(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.external ? *n.external : n.owned;
}

double* Tape::grad_buffer(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.needs_grad) return nullptr;
  if (n.grad.empty()) n.grad.assign(value(id).size(), 0.0);
  return n.grad.data();
}

Var Tape::constant(Tensor value) {
  if (nodes_.empty()) nodes_.reserve(1024);
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::input(Tensor value) {
  Var v = constant(std::move(value));
  nodes_.back().needs_grad = grad_enabled_;
  return v;
}

Var Tape::param(const Parameters& params, std::size_t index) {
  const auto it = param_nodes_.find(index);
  if (it != param_nodes_.end()) return {this, it->second};
  if (nodes_.empty()) nodes_.reserve(1024);
  Node n;
  n.external = &params[index];
  n.param_index = static_cast<long>(index);
  n.needs_grad = grad_enabled_;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size() - 1);
  param_nodes_.emplace(index, id);
  return {this, id};
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents,
                 BackwardFn fn) {
  bool needs = false;
  for (const Var& p : parents) needs = needs || nodes_[static_cast<std::size_t>(p.id)].needs_grad;
  Node n;
  n.owned = std::move(value);
  n.needs_grad = needs;
  if (needs) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::record(Tensor value, const std::vector<Var>& parents, BackwardFn fn) {
  bool needs = false;
  for (const Var& p : parents) needs = needs || nodes_[static_cast<std::size_t>(p.id)].needs_grad;
  Node n;
  n.owned = std::move(value);
  n.needs_grad = needs;
  if (needs) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

void Tape::backward(Var loss) {
  if (consumed_) throw GraphConsumed("backward already ran on this tape");
  if (loss.tape != this) throw ShapeMismatch("loss recorded on another tape");
  require(value(loss.id).size() == 1, "backward needs a scalar loss");
  consumed_ = true;
  if (!nodes_[static_cast<std::size_t>(loss.id)].needs_grad) return;
  grad_buffer(loss.id)[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, id);
  }
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  const Tensor& val = value(v.id);
  if (n.grad.empty()) return Tensor(val.shape(), 0.0);
  return Tensor(val.shape(), n.grad);
}

void Tape::accumulate(Gradients& grads) const {
  for (const auto& [index, id] : param_nodes_) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) continue;
    Tensor& g = grads.at(index);
    for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
  }
}

// --- ops -----------------------------------------------------------------

Var matmul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_matrix(A, "matmul");
  require_matrix(B, "matmul");
  const std::size_t n = A.dim(0), k = A.dim(1), m = B.dim(1);
  require(B.dim(0) == k, "matmul: " + shape_string(A.shape()) + " x " +
                             shape_string(B.shape()));
  Tensor out({n, m});
  map(out.data(), n, m).noalias() = cmap(A, n, k) * cmap(B, k, m);
  return a.tape->record(std::move(out), {a, b}, [a, b, n, k, m](Tape& t, int self) {
    const auto g = cmap(t.grad_of(self).data(), n, m);
    if (double* ga = t.grad_buffer(a.id)) {
      map(ga, n, k).noalias() += g * cmap(t.value(b.id), k, m).transpose();
    }
    if (double* gb = t.grad_buffer(b.id)) {
      map(gb, k, m).noalias() += cmap(t.value(a.id), n, k).transpose() * g;
    }
  });
}

Var matmul_nt(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_matrix(A, "matmul_nt");
  require_matrix(B, "matmul_nt");
  const std::size_t n = A.dim(0), k = A.dim(1), m = B.dim(0);
  require(B.dim(1) == k, "matmul_nt: " + shape_string(A.shape()) + " x " +
                             shape_string(B.shape()) + "^T");
  Tensor out({n, m});
  map(out.data(), n, m).noalias() = cmap(A, n, k) * cmap(B, m, k).transpose();
  return a.tape->record(std::move(out), {a, b}, [a, b, n, k, m](Tape& t, int self) {
    const auto g = cmap(t.grad_of(self).data(), n, m);
    if (double* ga = t.grad_buffer(a.id)) {
      map(ga, n, k).noalias() += g * cmap(t.value(b.id), m, k);
    }
    if (double* gb = t.grad_buffer(b.id)) {
      map(gb, m, k).noalias() += g.transpose() * cmap(t.value(a.id), n, k);
    }
  });
}

Var transpose(Var a) {
  const Tensor& A = a.value();
  require_matrix(A, "transpose");
  const std::size_t n = A.dim(0), m = A.dim(1);
  Tensor out({m, n});
  map(out.data(), m, n) = cmap(A, n, m).transpose();
  return a.tape->record(std::move(out), {a}, [a, n, m](Tape& t, int self) {
    if (double* ga = t.grad_buffer(a.id)) {
      map(ga, n, m) += cmap(t.grad_of(self).data(), m, n).transpose();
    }
  });
}

namespace {

// Checks b's shape is a suffix of a's and returns its element count.
std::size_t broadcast_size(const Tensor& A, const Tensor& B, const char* op) {
  const Shape& sa = A.shape();
  const Shape& sb = B.shape();
  bool ok = sb.size() <= sa.size();
  for (std::size_t i = 0; ok && i < sb.size(); ++i) {
    ok = sb[sb.size() - 1 - i] == sa[sa.size() - 1 - i];
  }
  require(ok, std::string(op) + ": cannot broadcast " + shape_string(sb) +
                  " onto " + shape_string(sa));
  return B.size();
}

Var add_impl(Var a, Var b, double sign) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const std::size_t nb = broadcast_size(A, B, sign > 0 ? "add" : "sub");
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += sign * B[i % nb];
  return a.tape->record(std::move(out), {a, b}, [a, b, nb, sign](Tape& t, int self) {
    const auto& g = t.grad_of(self);
    if (double* ga = t.grad_buffer(a.id)) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (double* gb = t.grad_buffer(b.id)) {
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % nb] += sign * g[i];
    }
  });
}

}  // namespace

Var add(Var a, Var b) { return add_impl(a, b, 1.0); }
Var sub(Var a, Var b) { return add_impl(a, b, -1.0); }

Var mul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require(A.shape() == B.shape(), "mul: " + shape_string(A.shape()) + " vs " +
                                      shape_string(B.shape()));
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const auto& g = t.grad_of(self);
    if (double* ga = t.grad_buffer(a.id)) {
      const Tensor& vb = t.value(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
    }
    if (double* gb = t.grad_buffer(b.id)) {
      const Tensor& va = t.value(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
    }
  });
}

Var scale(Var a, double c) {
  Tensor out = a.value();
  for (auto& x : out.values()) x *= c;
  return a.tape->record(std::move(out), {a}, [a, c](Tape& t, int self) {
    if (double* ga = t.grad_buffer(a.id)) {
      const auto& g = t.grad_of(self);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
    }
  });
}

Var softmax(Var a) {
  Tensor out = a.value();
  const std::size_t cols = out.cols();
  const std::size_t rows = out.rows();
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * cols;
    const double mx = *std::max_element(row, row + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = std::exp(row[c] - mx);
      z += row[c];
    }
    for (std::size_t c = 0; c < cols; ++c) row[c] /= z;
  }
  return a.tape->record(std::move(out), {a}, [a, rows, cols](Tape& t, int self) {
    double* ga = t.grad_buffer(a.id);
    if (!ga) return;
    const auto& g = t.grad_of(self);
    const Tensor& y = t.value(self);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t off = r * cols;
      double dotp = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dotp += g[off + c] * y[off + c];
      for (std::size_t c = 0; c < cols; ++c) {
        ga[off + c] += y[off + c] * (g[off + c] - dotp);
      }
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor& X = x.value();
  const std::size_t cols = X.cols();
  const std::size_t rows = X.rows();
  require(gain.value().size() == cols && bias.value().size() == cols,
          "layer_norm: gain/bias size must equal last axis " + std::to_string(cols));
  const Tensor& G = gain.value();
  const Tensor& B = bias.value();
  Tensor out(X.shape());
  // Saved normalized activations and inverse std per row.
  auto xhat = std::make_shared<std::vector<double>>(X.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = X.data() + r * cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += row[c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<double>(cols);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (row[c] - mu) * is;
      (*xhat)[r * cols + c] = h;
      out[r * cols + c] = h * G[c] + B[c];
    }
  }
  return x.tape->record(
      std::move(out), {x, gain, bias},
      [x, gain, bias, rows, cols, xhat, inv_std](Tape& t, int self) {
        const auto& g = t.grad_of(self);
        const Tensor& G = t.value(gain.id);
        double* gx = t.grad_buffer(x.id);
        double* gg = t.grad_buffer(gain.id);
        double* gb = t.grad_buffer(bias.id);
        const double n = static_cast<double>(cols);
        for (std::size_t r = 0; r < rows; ++r) {
          const std::size_t off = r * cols;
          double sum_d = 0.0;
          double sum_dh = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            const double d = g[off + c] * G[c];
            sum_d += d;
            sum_dh += d * (*xhat)[off + c];
            if (gg) gg[c] += g[off + c] * (*xhat)[off + c];
            if (gb) gb[c] += g[off + c];
          }
          if (gx) {
            const double is = (*inv_std)[r];
            for (std::size_t c = 0; c < cols; ++c) {
              const double d = g[off + c] * G[c];
              gx[off + c] += is / n * (n * d - sum_d - (*xhat)[off + c] * sum_dh);
            }
          }
        }
      });
}

Var gelu(Var a) {
  Tensor out = a.value();
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  for (auto& x : out.values()) x = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
  return a.tape->record(std::move(out), {a}, [a](Tape& t, int self) {
    double* ga = t.grad_buffer(a.id);
    if (!ga) return;
    const auto& g = t.grad_of(self);
    const Tensor& x = t.value(a.id);
    constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double xi = x[i];
      const double cdf = 0.5 * (1.0 + std::erf(xi * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * xi * xi);
      ga[i] += g[i] * (cdf + xi * pdf);
    }
  });
}

Var concat(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat: no inputs");
  const Tensor& first = parts.front().value();
  Shape lead = first.shape();
  require(!lead.empty(), "concat: scalar input");
  lead.pop_back();
  const std::size_t rows = first.rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    Shape s = p.shape();
    require(!s.empty(), "concat: scalar input");
    const std::size_t w = s.back();
    s.pop_back();
    require(s == lead, "concat: leading axes differ");
    widths.push_back(w);
    total += w;
  }
  Shape out_shape = lead;
  out_shape.push_back(total);
  Tensor out(out_shape);
  std::size_t off = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor& v = parts[i].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.data() + r * widths[i], widths[i], out.data() + r * total + off);
    }
    off += widths[i];
  }
  return parts.front().tape->record(
      std::move(out), parts, [parts, widths, rows, total](Tape& t, int self) {
        const auto& g = t.grad_of(self);
        std::size_t off = 0;
        for (std::size_t i = 0; i < parts.size(); ++i) {
          if (double* gp = t.grad_buffer(parts[i].id)) {
            for (std::size_t r = 0; r < rows; ++r) {
              for (std::size_t c = 0; c < widths[i]; ++c) {
                gp[r * widths[i] + c] += g[r * total + off + c];
              }
            }
          }
          off += widths[i];
        }
      });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const std::size_t cols = parts.front().value().cols();
  std::vector<std::size_t> counts;
  std::size_t rows = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    require(v.rank() == 2 && v.cols() == cols,
            "concat_rows: expected [*," + std::to_string(cols) + "], got " +
                shape_string(v.shape()));
    counts.push_back(v.size());
    rows += v.rows();
  }
  Tensor out({rows, cols});
  std::size_t off = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor& v = parts[i].value();
    std::copy_n(v.data(), v.size(), out.data() + off);
    off += v.size();
  }
  return parts.front().tape->record(std::move(out), parts, [parts, counts](Tape& t, int self) {
    const auto& g = t.grad_of(self);
    std::size_t off = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (double* gp = t.grad_buffer(parts[i].id)) {
        for (std::size_t j = 0; j < counts[i]; ++j) gp[j] += g[off + j];
      }
      off += counts[i];
    }
  });
}

Var slice(Var a, std::size_t begin, std::size_t end) {
  const Tensor& A = a.value();
  require(A.rank() >= 1 && begin < end && end <= A.cols(),
          "slice [" + std::to_string(begin) + "," + std::to_string(end) +
              ") of " + shape_string(A.shape()));
  const std::size_t cols = A.cols();
  const std::size_t rows = A.rows();
  const std::size_t w = end - begin;
  Shape s = A.shape();
  s.back() = w;
  Tensor out(s);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(A.data() + r * cols + begin, w, out.data() + r * w);
  }
  return a.tape->record(std::move(out), {a}, [a, rows, cols, begin, w](Tape& t, int self) {
    double* ga = t.grad_buffer(a.id);
    if (!ga) return;
    const auto& g = t.grad_of(self);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < w; ++c) ga[r * cols + begin + c] += g[r * w + c];
    }
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Tensor& A = a.value();
  require(A.rank() == 2 && begin < end && end <= A.dim(0),
          "slice_rows [" + std::to_string(begin) + "," + std::to_string(end) +
              ") of " + shape_string(A.shape()));
  const std::size_t cols = A.cols();
  Tensor out({end - begin, cols});
  std::copy_n(A.data() + begin * cols, out.size(), out.data());
  return a.tape->record(std::move(out), {a}, [a, begin, cols](Tape& t, int self) {
    double* ga = t.grad_buffer(a.id);
    if (!ga) return;
    const auto& g = t.grad_of(self);
    for (std::size_t i = 0; i < g.size(); ++i) ga[begin * cols + i] += g[i];
  });
}

Var sum(Var a) {
  const Tensor& A = a.value();
  double s = 0.0;
  for (double x : A.values()) s += x;
  return a.tape->record(Tensor::scalar(s), {a}, [a](Tape& t, int self) {
    if (double* ga = t.grad_buffer(a.id)) {
      const double g = t.grad_of(self)[0];
      const std::size_t n = t.value(a.id).size();
      for (std::size_t i = 0; i < n; ++i) ga[i] += g;
    }
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  require(n > 0, "mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var squared_error(Var a, Var b, std::span<const double> row_weights) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require(A.shape() == B.shape(), "squared_error: " + shape_string(A.shape()) +
                                      " vs " + shape_string(B.shape()));
  const std::size_t cols = A.cols();
  const std::size_t rows = A.rows();
  require(row_weights.empty() || row_weights.size() == rows,
          "squared_error: weight count " + std::to_string(row_weights.size()) +
              " != rows " + std::to_string(rows));
  std::vector<double> w(row_weights.begin(), row_weights.end());
  if (w.empty()) w.assign(rows, 1.0);
  double s = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double row = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = A[r * cols + c] - B[r * cols + c];
      row += d * d;
    }
    s += w[r] * row;
  }
  return a.tape->record(Tensor::scalar(s), {a, b}, [a, b, w, cols](Tape& t, int self) {
    const double g = t.grad_of(self)[0];
    const Tensor& A = t.value(a.id);
    const Tensor& B = t.value(b.id);
    double* ga = t.grad_buffer(a.id);
    double* gb = t.grad_buffer(b.id);
    for (std::size_t i = 0; i < A.size(); ++i) {
      const double d = 2.0 * g * w[i / cols] * (A[i] - B[i]);
      if (ga) ga[i] += d;
      if (gb) gb[i] -= d;
    }
  });
}

Var rope(Var a, std::span<const double> positions, double base) {
  const Tensor& A = a.value();
  require(A.rank() == 2, "rope: expected [T, d], got " + shape_string(A.shape()));
  const std::size_t rows = A.dim(0);
  const std::size_t cols = A.dim(1);
  require(cols % 2 == 0, "rope: odd feature width");
  require(positions.size() == rows, "rope: one position per row required");
  const std::size_t pairs = cols / 2;
  auto cs = std::make_shared<std::vector<double>>(rows * pairs * 2);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < pairs; ++i) {
      const double freq = std::pow(base, -2.0 * static_cast<double>(i) /
                                             static_cast<double>(cols));
      const double angle = positions[r] * freq;
      (*cs)[2 * (r * pairs + i)] = std::cos(angle);
      (*cs)[2 * (r * pairs + i) + 1] = std::sin(angle);
    }
  }
  Tensor out(A.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < pairs; ++i) {
      const double c = (*cs)[2 * (r * pairs + i)];
      const double s = (*cs)[2 * (r * pairs + i) + 1];
      const double x0 = A[r * cols + 2 * i];
      const double x1 = A[r * cols + 2 * i + 1];
      out[r * cols + 2 * i] = x0 * c - x1 * s;
      out[r * cols + 2 * i + 1] = x0 * s + x1 * c;
    }
  }
  return a.tape->record(std::move(out), {a}, [a, rows, cols, pairs, cs](Tape& t, int self) {
    double* ga = t.grad_buffer(a.id);
    if (!ga) return;
    const auto& g = t.grad_of(self);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < pairs; ++i) {
        const double c = (*cs)[2 * (r * pairs + i)];
        const double s = (*cs)[2 * (r * pairs + i) + 1];
        const double g0 = g[r * cols + 2 * i];
        const double g1 = g[r * cols + 2 * i + 1];
        ga[r * cols + 2 * i] += g0 * c + g1 * s;
        ga[r * cols + 2 * i + 1] += -g0 * s + g1 * c;
      }
    }
  });
}

// --- optimizers ------------------------------------------------------------

Adam::Adam(const Parameters& params, AdamOptions options)
    : options_(options), m_(params.zeros_like()), v_(params.zeros_like()) {}

void Adam::step(Parameters& params, const Gradients& grads) {
  require(grads.size() == params.size() && m_.size() == params.size(),
          "adam: state does not match parameters");
  ++step_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = params[p];
    const Tensor& g = grads[p];
    require(g.size() == w.size(), "adam: gradient shape mismatch for " + params.name(p));
    Tensor& m = m_[p];
    Tensor& v = v_[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= options_.lr * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
}

Ema::Ema(const Parameters& params, double decay) : shadow_(params), decay_(decay) {}

Ema Ema::with_shadow(Parameters shadow, double decay) {
  Ema e;
  e.shadow_ = std::move(shadow);
  e.decay_ = decay;
  return e;
}

void Ema::update(const Parameters& params) {
  require(params.size() == shadow_.size(), "ema: parameter count mismatch");
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& s = shadow_[p];
    const Tensor& x = params[p];
    require(s.size() == x.size(), "ema: shape mismatch for " + params.name(p));
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = decay_ * s[i] + (1.0 - decay_) * x[i];
    }
  }
}

}  // namespace spinsight::ag
