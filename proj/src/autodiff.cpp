#include "moemo/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "moemo/errors.hpp"

namespace moemo::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

// Eigen's vectorized kernels pick their peeling point from the data address, so
// products and reductions run on aligned copies and results do not depend on
// where the allocator placed a buffer.
RowMat aligned(const double* p, std::size_t rows, std::size_t cols) {
  return ConstMap(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void accumulate(const RowMat& m, double* dst) {
  const double* src = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) dst[i] += src[i];
}

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw Error("variable is not attached to a tape");
  return *a.tape;
}

Tape& common_tape(Var a, Var b) {
  if (a.tape != b.tape) throw Error("operands live on different tapes");
  return tape_of(a);
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void require_rank(const char* op, const Tensor& a, std::size_t rank) {
  if (a.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(a.shape()));
  }
}

// Views a shape as [outer x len x inner] around `axis`.
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " invalid for " +
                     shape_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <typename F>
Tensor map_unary(const Tensor& a, F f) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return Tensor(a.shape(), std::move(out));
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

// ---------------------------------------------------------------------------
// Var / GradSink / Tape

const Tensor& Var::value() const { return tape_of(*this).value(id); }
bool Var::requires_grad() const { return tape_of(*this).requires_grad(id); }

bool GradSink::wants(std::size_t slot) const { return tape_.requires_grad(parents_[slot]); }

std::span<double> GradSink::buffer(std::size_t slot) { return tape_.grad_buffer(parents_[slot]); }

void GradSink::add(std::size_t slot, std::span<const double> grad) {
  if (!wants(slot)) return;
  auto buf = buffer(slot);
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += grad[i];
}

Var Tape::leaf(const Tensor& value) {
  nodes_.push_back(Node{value, {}, {}, value.requires_grad()});
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(const Tensor& value) { return leaf(value.with_requires_grad(false)); }

Var Tape::record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward) {
  bool needs = false;
  for (auto p : parents) {
    if (p >= nodes_.size()) throw Error("tape parent index out of range");
    needs = needs || nodes_[p].requires_grad;
  }
  Node node{std::move(value), std::move(parents), {}, needs};
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

std::span<double> Tape::grad_buffer(std::size_t id) {
  auto& g = grads_.at(id);
  if (g.empty()) g.assign(nodes_[id].value.size(), 0.0);
  return {g.data(), g.size()};
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw Error("loss variable belongs to another tape");
  const Tensor& lv = value(loss.id);
  if (lv.size() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " + shape_string(lv.shape()));
  }
  grads_.assign(nodes_.size(), {});
  if (!nodes_[loss.id].requires_grad) return;
  grads_[loss.id].assign(1, 1.0);
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.requires_grad || !node.backward || grads_[id].empty()) continue;
    GradSink sink(*this, node.parents);
    std::span<const double> g(grads_[id].data(), grads_[id].size());
    node.backward(g, sink);
  }
}

bool Tape::has_grad(Var v) const { return v.id < grads_.size() && !grads_[v.id].empty(); }

Tensor Tape::grad(Var v) const {
  const Tensor& val = value(v.id);
  if (!has_grad(v)) return Tensor::zeros(val.shape());
  return Tensor(val.shape(), grads_[v.id]);
}

// ---------------------------------------------------------------------------
// Linear algebra

Var matmul(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  const Tensor A = a.value();
  const Tensor B = b.value();
  require_rank("matmul", A, 2);
  require_rank("matmul", B, 2);
  const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
  if (B.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions disagree, " + shape_string(A.shape()) + " x " +
                     shape_string(B.shape()));
  }
  const RowMat P = aligned(A.raw(), m, k) * aligned(B.raw(), k, n);
  std::vector<double> out(P.data(), P.data() + m * n);
  return tape.record(Tensor({m, n}, std::move(out)), {a.id, b.id},
                     [A, B, m, k, n](std::span<const double> g, GradSink& sink) {
                       const RowMat G = aligned(g.data(), m, n);
                       if (sink.wants(0)) {
                         accumulate(G * aligned(B.raw(), k, n).transpose(), sink.buffer(0).data());
                       }
                       if (sink.wants(1)) {
                         accumulate(aligned(A.raw(), m, k).transpose() * G, sink.buffer(1).data());
                       }
                     });
}

Var transpose(Var a) {
  const Tensor A = a.value();
  require_rank("transpose", A, 2);
  const std::size_t r = A.dim(0), c = A.dim(1);
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = A[i * c + j];
  return tape_of(a).record(Tensor({c, r}, std::move(out)), {a.id},
                           [r, c](std::span<const double> g, GradSink& sink) {
                             auto buf = sink.buffer(0);
                             for (std::size_t i = 0; i < r; ++i)
                               for (std::size_t j = 0; j < c; ++j) buf[i * c + j] += g[j * r + i];
                           });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return tape_of(a).record(std::move(out), {a.id}, [](std::span<const double> g, GradSink& sink) {
    sink.add(0, g);
  });
}

// ---------------------------------------------------------------------------
// Elementwise

Var add(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_same_shape("add", A, B);
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i];
  return tape.record(Tensor(A.shape(), std::move(out)), {a.id, b.id},
                     [](std::span<const double> g, GradSink& sink) {
                       sink.add(0, g);
                       sink.add(1, g);
                     });
}

Var sub(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_same_shape("sub", A, B);
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] - B[i];
  return tape.record(Tensor(A.shape(), std::move(out)), {a.id, b.id},
                     [](std::span<const double> g, GradSink& sink) {
                       sink.add(0, g);
                       if (sink.wants(1)) {
                         auto buf = sink.buffer(1);
                         for (std::size_t i = 0; i < buf.size(); ++i) buf[i] -= g[i];
                       }
                     });
}

Var mul(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  const Tensor A = a.value();
  const Tensor B = b.value();
  require_same_shape("mul", A, B);
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
  return tape.record(Tensor(A.shape(), std::move(out)), {a.id, b.id},
                     [A, B](std::span<const double> g, GradSink& sink) {
                       if (sink.wants(0)) {
                         auto buf = sink.buffer(0);
                         for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i] * B[i];
                       }
                       if (sink.wants(1)) {
                         auto buf = sink.buffer(1);
                         for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i] * A[i];
                       }
                     });
}

Var scale(Var a, double factor) {
  Tensor out = map_unary(a.value(), [factor](double v) { return v * factor; });
  return tape_of(a).record(std::move(out), {a.id},
                           [factor](std::span<const double> g, GradSink& sink) {
                             auto buf = sink.buffer(0);
                             for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i] * factor;
                           });
}

Var add_bias(Var a, Var bias) {
  Tape& tape = common_tape(a, bias);
  const Tensor& A = a.value();
  const Tensor& B = bias.value();
  const std::size_t width = A.shape().back();
  if (B.rank() != 1 || B.dim(0) != width) {
    throw ShapeError("add_bias: bias " + shape_string(B.shape()) + " does not match trailing axis of " +
                     shape_string(A.shape()));
  }
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i % width];
  return tape.record(Tensor(A.shape(), std::move(out)), {a.id, bias.id},
                     [width](std::span<const double> g, GradSink& sink) {
                       sink.add(0, g);
                       if (sink.wants(1)) {
                         auto buf = sink.buffer(1);
                         for (std::size_t i = 0; i < g.size(); ++i) buf[i % width] += g[i];
                       }
                     });
}

Var relu(Var a) {
  const Tensor A = a.value();
  Tensor out = map_unary(A, [](double v) { return v > 0.0 ? v : 0.0; });
  return tape_of(a).record(std::move(out), {a.id}, [A](std::span<const double> g, GradSink& sink) {
    auto buf = sink.buffer(0);
    for (std::size_t i = 0; i < buf.size(); ++i)
      if (A[i] > 0.0) buf[i] += g[i];
  });
}

Var gelu(Var a) {
  const Tensor A = a.value();
  Tensor out = map_unary(A, [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); });
  return tape_of(a).record(std::move(out), {a.id}, [A](std::span<const double> g, GradSink& sink) {
    auto buf = sink.buffer(0);
    for (std::size_t i = 0; i < buf.size(); ++i) {
      const double x = A[i];
      const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      buf[i] += g[i] * (cdf + x * pdf);
    }
  });
}

// ---------------------------------------------------------------------------
// Normalization and softmax

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Tape& tape = common_tape(x, gain);
  common_tape(x, bias);
  const Tensor& X = x.value();
  const Tensor G = gain.value();
  const std::size_t width = X.shape().back();
  if (G.rank() != 1 || G.dim(0) != width || bias.value().shape() != G.shape()) {
    throw ShapeError("layer_norm: gain/bias must have shape (" + std::to_string(width) + ")");
  }
  const Tensor& B = bias.value();
  const std::size_t rows = X.size() / width;
  std::vector<double> xhat(X.size()), inv_std(rows), out(X.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = X.raw() + r * width;
    double mu = 0.0;
    for (std::size_t j = 0; j < width; ++j) mu += row[j];
    mu /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t j = 0; j < width; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(width);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < width; ++j) {
      const std::size_t i = r * width + j;
      xhat[i] = (row[j] - mu) * inv_std[r];
      out[i] = xhat[i] * G[j] + B[j];
    }
  }
  return tape.record(
      Tensor(X.shape(), std::move(out)), {x.id, gain.id, bias.id},
      [G, xhat = std::move(xhat), inv_std = std::move(inv_std), rows, width](
          std::span<const double> g, GradSink& sink) {
        if (sink.wants(0)) {
          auto buf = sink.buffer(0);
          const double n = static_cast<double>(width);
          for (std::size_t r = 0; r < rows; ++r) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t j = 0; j < width; ++j) {
              const std::size_t i = r * width + j;
              const double d = g[i] * G[j];
              mean_d += d;
              mean_dx += d * xhat[i];
            }
            mean_d /= n;
            mean_dx /= n;
            for (std::size_t j = 0; j < width; ++j) {
              const std::size_t i = r * width + j;
              buf[i] += inv_std[r] * (g[i] * G[j] - mean_d - xhat[i] * mean_dx);
            }
          }
        }
        if (sink.wants(1)) {
          auto buf = sink.buffer(1);
          for (std::size_t i = 0; i < g.size(); ++i) buf[i % width] += g[i] * xhat[i];
        }
        if (sink.wants(2)) {
          auto buf = sink.buffer(2);
          for (std::size_t i = 0; i < g.size(); ++i) buf[i % width] += g[i];
        }
      });
}

Var softmax(Var x, std::size_t axis) {
  const Tensor& X = x.value();
  const AxisSplit s = split_at(X.shape(), axis, "softmax");
  std::vector<double> out(X.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      double mx = X[base];
      for (std::size_t l = 1; l < s.len; ++l) mx = std::max(mx, X[base + l * s.inner]);
      double total = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) {
        const double e = std::exp(X[base + l * s.inner] - mx);
        out[base + l * s.inner] = e;
        total += e;
      }
      for (std::size_t l = 0; l < s.len; ++l) out[base + l * s.inner] /= total;
    }
  }
  Tensor Y(X.shape(), std::move(out));
  return tape_of(x).record(Y, {x.id}, [Y, s](std::span<const double> g, GradSink& sink) {
    auto buf = sink.buffer(0);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.len * s.inner + in;
        double dot = 0.0;
        for (std::size_t l = 0; l < s.len; ++l) dot += g[base + l * s.inner] * Y[base + l * s.inner];
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t i = base + l * s.inner;
          buf[i] += Y[i] * (g[i] - dot);
        }
      }
    }
  });
}

Var log_softmax(Var x, std::size_t axis) {
  const Tensor& X = x.value();
  const AxisSplit s = split_at(X.shape(), axis, "log_softmax");
  std::vector<double> out(X.size()), probs(X.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      double mx = X[base];
      for (std::size_t l = 1; l < s.len; ++l) mx = std::max(mx, X[base + l * s.inner]);
      double total = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) total += std::exp(X[base + l * s.inner] - mx);
      const double lse = mx + std::log(total);
      for (std::size_t l = 0; l < s.len; ++l) {
        const std::size_t i = base + l * s.inner;
        out[i] = X[i] - lse;
        probs[i] = std::exp(out[i]);
      }
    }
  }
  return tape_of(x).record(
      Tensor(X.shape(), std::move(out)), {x.id},
      [P = std::move(probs), s](std::span<const double> g, GradSink& sink) {
        auto buf = sink.buffer(0);
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t base = o * s.len * s.inner + in;
            double total = 0.0;
            for (std::size_t l = 0; l < s.len; ++l) total += g[base + l * s.inner];
            for (std::size_t l = 0; l < s.len; ++l) {
              const std::size_t i = base + l * s.inner;
              buf[i] += g[i] - P[i] * total;
            }
          }
        }
      });
}

Tensor softmax_rows(const Tensor& x) {
  Tape tape;
  return softmax(tape.constant(x), x.rank() - 1).value();
}

// ---------------------------------------------------------------------------
// Convolution

Var conv1d(Var x, Var weight, Var bias) {
  Tape& tape = common_tape(x, weight);
  common_tape(x, bias);
  const Tensor X = x.value();
  const Tensor W = weight.value();
  require_rank("conv1d", X, 2);
  require_rank("conv1d", W, 3);
  const std::size_t len = X.dim(0), cin = X.dim(1);
  const std::size_t kernel = W.dim(0), cout = W.dim(2);
  if (W.dim(1) != cin) {
    throw ShapeError("conv1d: weight " + shape_string(W.shape()) + " does not accept input " +
                     shape_string(X.shape()));
  }
  if (bias.value().rank() != 1 || bias.value().dim(0) != cout) {
    throw ShapeError("conv1d: bias must have shape (" + std::to_string(cout) + ")");
  }
  if (kernel > len) throw ShapeError("conv1d: kernel longer than input");
  const std::size_t lout = len - kernel + 1;
  std::vector<double> out(lout * cout);
  MutMap Y(out.data(), lout, cout);
  Y.rowwise() = Eigen::Map<const Eigen::RowVectorXd>(bias.value().raw(), cout);
  for (std::size_t k = 0; k < kernel; ++k) {
    accumulate(aligned(X.raw() + k * cin, lout, cin) * aligned(W.raw() + k * cin * cout, cin, cout), out.data());
  }
  return tape.record(
      Tensor({lout, cout}, std::move(out)), {x.id, weight.id, bias.id},
      [X, W, lout, cin, cout, kernel](std::span<const double> g, GradSink& sink) {
        const RowMat G = aligned(g.data(), lout, cout);
        if (sink.wants(0)) {
          auto buf = sink.buffer(0);
          for (std::size_t k = 0; k < kernel; ++k) {
            accumulate(G * aligned(W.raw() + k * cin * cout, cin, cout).transpose(), buf.data() + k * cin);
          }
        }
        if (sink.wants(1)) {
          auto buf = sink.buffer(1);
          for (std::size_t k = 0; k < kernel; ++k) {
            accumulate(aligned(X.raw() + k * cin, lout, cin).transpose() * G, buf.data() + k * cin * cout);
          }
        }
        if (sink.wants(2)) {
          auto buf = sink.buffer(2);
          accumulate(G.colwise().sum(), buf.data());
        }
      });
}

// ---------------------------------------------------------------------------
// Structural

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Tape& tape = tape_of(parts[0]);
  const Shape& first = parts[0].value().shape();
  const AxisSplit s0 = split_at(first, axis, "concat");
  std::vector<std::size_t> lens;
  std::vector<std::size_t> ids;
  std::size_t total_len = 0;
  for (const Var& p : parts) {
    common_tape(parts[0], p);
    const Shape& sh = p.value().shape();
    if (sh.size() != first.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < sh.size(); ++i) {
      if (i != axis && sh[i] != first[i]) {
        throw ShapeError("concat: shapes " + shape_string(first) + " and " + shape_string(sh) +
                         " differ off the concatenation axis");
      }
    }
    lens.push_back(sh[axis]);
    ids.push_back(p.id);
    total_len += sh[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = total_len;
  const std::size_t outer = s0.outer, inner = s0.inner;
  std::vector<double> out(shape_size(out_shape));
  std::size_t offset = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const Tensor& P = parts[pi].value();
    const std::size_t chunk = lens[pi] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(P.raw() + o * chunk, chunk, out.data() + o * total_len * inner + offset * inner);
    }
    offset += lens[pi];
  }
  return tape.record(Tensor(out_shape, std::move(out)), ids,
                     [lens, outer, inner, total_len](std::span<const double> g, GradSink& sink) {
                       std::size_t offset = 0;
                       for (std::size_t pi = 0; pi < lens.size(); ++pi) {
                         const std::size_t chunk = lens[pi] * inner;
                         if (sink.wants(pi)) {
                           auto buf = sink.buffer(pi);
                           for (std::size_t o = 0; o < outer; ++o) {
                             const double* src = g.data() + o * total_len * inner + offset * inner;
                             for (std::size_t i = 0; i < chunk; ++i) buf[o * chunk + i] += src[i];
                           }
                         }
                         offset += lens[pi];
                       }
                     });
}

Var mean(Var x, std::size_t axis) {
  const Tensor& X = x.value();
  const AxisSplit s = split_at(X.shape(), axis, "mean");
  Shape out_shape;
  for (std::size_t i = 0; i < X.rank(); ++i)
    if (i != axis) out_shape.push_back(X.dim(i));
  if (out_shape.empty()) out_shape = {1};
  std::vector<double> out(s.outer * s.inner, 0.0);
  const double n = static_cast<double>(s.len);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t l = 0; l < s.len; ++l)
      for (std::size_t in = 0; in < s.inner; ++in)
        out[o * s.inner + in] += X[(o * s.len + l) * s.inner + in];
  for (auto& v : out) v /= n;
  return tape_of(x).record(Tensor(out_shape, std::move(out)), {x.id},
                           [s, n](std::span<const double> g, GradSink& sink) {
                             auto buf = sink.buffer(0);
                             for (std::size_t o = 0; o < s.outer; ++o)
                               for (std::size_t l = 0; l < s.len; ++l)
                                 for (std::size_t in = 0; in < s.inner; ++in)
                                   buf[(o * s.len + l) * s.inner + in] += g[o * s.inner + in] / n;
                           });
}

Var sum(Var x) {
  const Tensor& X = x.value();
  double total = 0.0;
  for (double v : X.data()) total += v;
  return tape_of(x).record(Tensor::scalar(total), {x.id},
                           [](std::span<const double> g, GradSink& sink) {
                             auto buf = sink.buffer(0);
                             for (auto& b : buf) b += g[0];
                           });
}

Var narrow(Var x, std::size_t axis, std::size_t start, std::size_t length) {
  const Tensor& X = x.value();
  const AxisSplit s = split_at(X.shape(), axis, "narrow");
  if (length == 0 || start + length > s.len) {
    throw ShapeError("narrow: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") outside axis of size " + std::to_string(s.len));
  }
  Shape out_shape = X.shape();
  out_shape[axis] = length;
  std::vector<double> out(s.outer * length * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(X.raw() + (o * s.len + start) * s.inner, length * s.inner,
                out.data() + o * length * s.inner);
  }
  return tape_of(x).record(Tensor(out_shape, std::move(out)), {x.id},
                           [s, start, length](std::span<const double> g, GradSink& sink) {
                             auto buf = sink.buffer(0);
                             const std::size_t chunk = length * s.inner;
                             for (std::size_t o = 0; o < s.outer; ++o) {
                               double* dst = buf.data() + (o * s.len + start) * s.inner;
                               for (std::size_t i = 0; i < chunk; ++i) dst[i] += g[o * chunk + i];
                             }
                           });
}

// ---------------------------------------------------------------------------
// Loss

Var cross_entropy_with_logits(Var logits, std::span<const int> labels) {
  const Tensor& L = logits.value();
  require_rank("cross_entropy_with_logits", L, 2);
  const std::size_t n = L.dim(0), c = L.dim(1);
  if (labels.size() != n) {
    throw ShapeError("cross_entropy_with_logits: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " rows");
  }
  std::vector<double> probs(L.size());
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= c) throw ValidationError("label out of range");
    const double* row = L.raw() + r * c;
    double mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += std::exp(row[j] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t j = 0; j < c; ++j) probs[r * c + j] = std::exp(row[j] - lse);
    loss += lse - row[y];
  }
  loss /= static_cast<double>(n);
  std::vector<int> ys(labels.begin(), labels.end());
  return tape_of(logits).record(
      Tensor::scalar(loss), {logits.id},
      [P = std::move(probs), ys = std::move(ys), n, c](std::span<const double> g, GradSink& sink) {
        auto buf = sink.buffer(0);
        const double f = g[0] / static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t j = 0; j < c; ++j) {
            const double onehot = (static_cast<int>(j) == ys[r]) ? 1.0 : 0.0;
            buf[r * c + j] += f * (P[r * c + j] - onehot);
          }
        }
      });
}

}  // namespace moemo::ad
