// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ifasnet/ops.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace ifasnet {

namespace {

using NodePtr = std::shared_ptr<TensorNode>;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

bool g_gradient_fault = false;

bool Tracks(const Tensor &t) {
  return t.requires_grad() && GradRecordingEnabled();
}

bool AnyTracks(std::initializer_list<const Tensor *> ts) {
  if (!GradRecordingEnabled()) return false;
  for (const Tensor *t : ts) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void CheckFinite(const std::vector<double> &v, const char *op) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string("non-finite value produced by ") + op);
    }
  }
}

int NormalizeAxis(int axis, int rank, const char *op) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw ShapeError(std::string(op) + ": axis out of range for rank " +
                     std::to_string(rank));
  }
  return axis;
}

// outer x dim x inner decomposition around `axis`.
struct AxisSplit {
  int64_t outer = 1, dim = 1, inner = 1;
};

AxisSplit SplitAt(const Shape &shape, int axis) {
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= shape[i];
  s.dim = shape[axis];
  for (size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Tensor Finish(Shape shape, std::vector<double> values, const char *op) {
  CheckFinite(values, op);
  return Tensor(std::move(shape), std::move(values));
}

void Record(const char *op, std::initializer_list<const Tensor *> inputs,
            const Tensor &out, Tape::BackwardFn fn) {
  std::vector<NodePtr> nodes;
  nodes.reserve(inputs.size());
  for (const Tensor *t : inputs) nodes.push_back(t->node());
  CurrentTape().Record(op, std::move(nodes), out.node(), std::move(fn));
}

// ---- broadcasting ---------------------------------------------------------

struct Broadcast {
  Shape out;
  std::vector<int64_t> stride_a, stride_b;
};

Broadcast PlanBroadcast(const Shape &a, const Shape &b, const char *op) {
  const size_t rank = std::max(a.size(), b.size());
  Broadcast p;
  p.out.assign(rank, 1);
  p.stride_a.assign(rank, 0);
  p.stride_b.assign(rank, 0);
  int64_t sa = 1, sb = 1;
  for (size_t k = 0; k < rank; ++k) {
    const size_t i = rank - 1 - k;
    const int64_t da = k < a.size() ? a[a.size() - 1 - k] : 1;
    const int64_t db = k < b.size() ? b[b.size() - 1 - k] : 1;
    if (da != db && da != 1 && db != 1) {
      throw ShapeError(std::string(op) + ": cannot broadcast " +
                       ShapeString(a) + " with " + ShapeString(b));
    }
    p.out[i] = std::max(da, db);
    if (da == 0 || db == 0) p.out[i] = 0;
    p.stride_a[i] = da == 1 ? 0 : sa;
    p.stride_b[i] = db == 1 ? 0 : sb;
    sa *= da;
    sb *= db;
  }
  return p;
}

// Calls f(out_index, a_index, b_index) for every output element.
template <class F>
void ForEachBroadcast(const Broadcast &p, F &&f) {
  const int rank = static_cast<int>(p.out.size());
  const int64_t total = NumElements(p.out);
  if (total == 0) return;
  if (rank == 0) {
    f(0, 0, 0);
    return;
  }
  const int64_t last = p.out[rank - 1];
  const int64_t la = p.stride_a[rank - 1], lb = p.stride_b[rank - 1];
  std::vector<int64_t> counter(rank, 0);
  int64_t ia = 0, ib = 0;
  for (int64_t o = 0; o < total; o += last) {
    for (int64_t k = 0; k < last; ++k) f(o + k, ia + k * la, ib + k * lb);
    for (int d = rank - 2; d >= 0; --d) {
      ia += p.stride_a[d];
      ib += p.stride_b[d];
      if (++counter[d] < p.out[d]) break;
      ia -= p.stride_a[d] * p.out[d];
      ib -= p.stride_b[d] * p.out[d];
      counter[d] = 0;
    }
  }
}

enum class BinaryKind { kAdd, kSub, kMul, kDiv };

Tensor Binary(const Tensor &a, const Tensor &b, BinaryKind kind,
              const char *op) {
  const auto &av = a.values();
  const auto &bv = b.values();
  std::vector<double> out;
  Shape out_shape;
  const bool same = a.shape() == b.shape();
  Broadcast plan;
  if (same) {
    out_shape = a.shape();
    out.resize(av.size());
    for (size_t i = 0; i < av.size(); ++i) {
      switch (kind) {
        case BinaryKind::kAdd: out[i] = av[i] + bv[i]; break;
        case BinaryKind::kSub: out[i] = av[i] - bv[i]; break;
        case BinaryKind::kMul: out[i] = av[i] * bv[i]; break;
        case BinaryKind::kDiv: out[i] = av[i] / bv[i]; break;
      }
    }
  } else {
    plan = PlanBroadcast(a.shape(), b.shape(), op);
    out_shape = plan.out;
    out.resize(NumElements(out_shape));
    ForEachBroadcast(plan, [&](int64_t o, int64_t i, int64_t j) {
      switch (kind) {
        case BinaryKind::kAdd: out[o] = av[i] + bv[j]; break;
        case BinaryKind::kSub: out[o] = av[i] - bv[j]; break;
        case BinaryKind::kMul: out[o] = av[i] * bv[j]; break;
        case BinaryKind::kDiv: out[o] = av[i] / bv[j]; break;
      }
    });
  }
  Tensor result = Finish(std::move(out_shape), std::move(out), op);
  if (!AnyTracks({&a, &b})) return result;

  NodePtr na = a.node(), nb = b.node();
  const bool ga = Tracks(a), gb = Tracks(b);
  Record(op, {&a, &b}, result,
         [na, nb, ga, gb, kind, same, plan](std::span<const double> g) {
           const auto &av = na->value;
           const auto &bv = nb->value;
           std::span<double> da, db;
           if (ga) da = GradBuffer(*na);
           if (gb) db = GradBuffer(*nb);
           auto apply = [&](int64_t o, int64_t i, int64_t j) {
             const double go = g[o];
             switch (kind) {
               case BinaryKind::kAdd:
                 if (ga) da[i] += go;
                 if (gb) db[j] += go;
                 break;
               case BinaryKind::kSub:
                 if (ga) da[i] += go;
                 if (gb) db[j] -= go;
                 break;
               case BinaryKind::kMul:
                 if (ga) da[i] += go * bv[j];
                 if (gb) db[j] += go * av[i];
                 break;
               case BinaryKind::kDiv:
                 if (ga) da[i] += go / bv[j];
                 if (gb) db[j] -= go * av[i] / (bv[j] * bv[j]);
                 break;
             }
           };
           if (same) {
             for (size_t i = 0; i < g.size(); ++i) apply(i, i, i);
           } else {
             ForEachBroadcast(plan, apply);
           }
         });
  return result;
}

template <class Fwd, class Bwd>
Tensor Unary(const Tensor &x, const char *op, Fwd fwd, Bwd bwd) {
  const auto &xv = x.values();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  Tensor result = Finish(x.shape(), std::move(out), op);
  if (!Tracks(x)) return result;
  NodePtr nx = x.node(), ny = result.node();
  Record(op, {&x}, result, [nx, ny, bwd](std::span<const double> g) {
    auto dx = GradBuffer(*nx);
    const auto &xv = nx->value;
    const auto &yv = ny->value;
    for (size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * bwd(xv[i], yv[i]);
  });
  return result;
}

}  // namespace

namespace testing {
void SetGradientFault(bool enabled) { g_gradient_fault = enabled; }
}  // namespace testing

Tensor Add(const Tensor &a, const Tensor &b) {
  return Binary(a, b, BinaryKind::kAdd, "add");
}
Tensor Sub(const Tensor &a, const Tensor &b) {
  return Binary(a, b, BinaryKind::kSub, "sub");
}
Tensor Mul(const Tensor &a, const Tensor &b) {
  return Binary(a, b, BinaryKind::kMul, "mul");
}
Tensor Div(const Tensor &a, const Tensor &b) {
  return Binary(a, b, BinaryKind::kDiv, "div");
}

Tensor Scale(const Tensor &x, double factor) {
  return Unary(
      x, "scale", [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor AddScalar(const Tensor &x, double offset) {
  return Unary(
      x, "add_scalar", [offset](double v) { return v + offset; },
      [](double, double) { return 1.0; });
}

Tensor Tanh(const Tensor &x) {
  return Unary(
      x, "tanh", [](double v) { return std::tanh(v); },
      [](double, double y) {
        return g_gradient_fault ? 1.0 - y : 1.0 - y * y;
      });
}

Tensor Sigmoid(const Tensor &x) {
  return Unary(
      x, "sigmoid", [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor Square(const Tensor &x) {
  return Unary(
      x, "square", [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

Tensor Sqrt(const Tensor &x) {
  return Unary(
      x, "sqrt",
      [](double v) {
        if (v < 0.0) throw NumericError("sqrt of negative value");
        return std::sqrt(v);
      },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor Log(const Tensor &x) {
  return Unary(
      x, "log", [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor ClampMin(const Tensor &x, double floor) {
  return Unary(
      x, "clamp_min", [floor](double v) { return std::max(v, floor); },
      [floor](double v, double) { return v > floor ? 1.0 : 0.0; });
}

Tensor MatMul(const Tensor &a, const Tensor &b) {
  if (a.rank() < 1 || b.rank() != 2) {
    throw ShapeError("matmul: expected [..., K] x [K x N], got " +
                     ShapeString(a.shape()) + " x " + ShapeString(b.shape()));
  }
  const int64_t k = a.shape().back();
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions differ, " +
                     ShapeString(a.shape()) + " x " + ShapeString(b.shape()));
  }
  const int64_t n = b.dim(1);
  const int64_t rows = a.numel() / std::max<int64_t>(k, 1);
  Shape out_shape = a.shape();
  out_shape.back() = n;
  std::vector<double> out(rows * n, 0.0);
  if (k > 0) {
    MatMap(out.data(), rows, n).noalias() =
        ConstMatMap(a.values().data(), rows, k) *
        ConstMatMap(b.values().data(), k, n);
  }
  Tensor result = Finish(std::move(out_shape), std::move(out), "matmul");
  if (!AnyTracks({&a, &b})) return result;
  NodePtr na = a.node(), nb = b.node();
  const bool ga = Tracks(a), gb = Tracks(b);
  Record("matmul", {&a, &b}, result,
         [na, nb, ga, gb, rows, k, n](std::span<const double> g) {
           ConstMatMap gm(g.data(), rows, n);
           if (ga) {
             MatMap(GradBuffer(*na).data(), rows, k).noalias() +=
                 gm * ConstMatMap(nb->value.data(), k, n).transpose();
           }
           if (gb) {
             MatMap(GradBuffer(*nb).data(), k, n).noalias() +=
                 ConstMatMap(na->value.data(), rows, k).transpose() * gm;
           }
         });
  return result;
}

Tensor BatchMatMulNT(const Tensor &a, const Tensor &b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) ||
      a.dim(2) != b.dim(2)) {
    throw ShapeError("batch_matmul_nt: expected [B x P x K] and [B x Q x K], got " +
                     ShapeString(a.shape()) + " and " + ShapeString(b.shape()));
  }
  const int64_t batch = a.dim(0), p = a.dim(1), q = b.dim(1), k = a.dim(2);
  std::vector<double> out(batch * p * q, 0.0);
  for (int64_t i = 0; i < batch; ++i) {
    MatMap(out.data() + i * p * q, p, q).noalias() =
        ConstMatMap(a.values().data() + i * p * k, p, k) *
        ConstMatMap(b.values().data() + i * q * k, q, k).transpose();
  }
  Tensor result = Finish({batch, p, q}, std::move(out), "batch_matmul_nt");
  if (!AnyTracks({&a, &b})) return result;
  NodePtr na = a.node(), nb = b.node();
  const bool ga = Tracks(a), gb = Tracks(b);
  Record("batch_matmul_nt", {&a, &b}, result,
         [na, nb, ga, gb, batch, p, q, k](std::span<const double> g) {
           for (int64_t i = 0; i < batch; ++i) {
             ConstMatMap gm(g.data() + i * p * q, p, q);
             if (ga) {
               MatMap(GradBuffer(*na).data() + i * p * k, p, k).noalias() +=
                   gm * ConstMatMap(nb->value.data() + i * q * k, q, k);
             }
             if (gb) {
               MatMap(GradBuffer(*nb).data() + i * q * k, q, k).noalias() +=
                   gm.transpose() *
                   ConstMatMap(na->value.data() + i * p * k, p, k);
             }
           }
         });
  return result;
}

Tensor CorrelateValid(const Tensor &x, const Tensor &kernel) {
  if (x.rank() < 1 || x.rank() != kernel.rank() ||
      !std::equal(x.shape().begin(), x.shape().end() - 1,
                  kernel.shape().begin())) {
    throw ShapeError("correlate_valid: leading dimensions differ, " +
                     ShapeString(x.shape()) + " vs " +
                     ShapeString(kernel.shape()));
  }
  const int64_t lx = x.shape().back(), lk = kernel.shape().back();
  if (lk < 1 || lk > lx) {
    throw ShapeError("correlate_valid: kernel length " + std::to_string(lk) +
                     " invalid for input length " + std::to_string(lx));
  }
  const int64_t lo = lx - lk + 1;
  const int64_t rows = x.numel() / lx;
  Shape out_shape = x.shape();
  out_shape.back() = lo;
  std::vector<double> out(rows * lo);
  const double *xv = x.values().data();
  const double *kv = kernel.values().data();
  for (int64_t r = 0; r < rows; ++r) {
    const double *xr = xv + r * lx;
    const double *kr = kv + r * lk;
    double *orow = out.data() + r * lo;
    for (int64_t j = 0; j < lo; ++j) {
      double acc = 0.0;
      for (int64_t m = 0; m < lk; ++m) acc += xr[j + m] * kr[m];
      orow[j] = acc;
    }
  }
  Tensor result = Finish(std::move(out_shape), std::move(out), "correlate_valid");
  if (!AnyTracks({&x, &kernel})) return result;
  NodePtr nx = x.node(), nk = kernel.node();
  const bool gx = Tracks(x), gk = Tracks(kernel);
  Record("correlate_valid", {&x, &kernel}, result,
         [nx, nk, gx, gk, rows, lx, lk, lo](std::span<const double> g) {
           const double *xv = nx->value.data();
           const double *kv = nk->value.data();
           double *dx = gx ? GradBuffer(*nx).data() : nullptr;
           double *dk = gk ? GradBuffer(*nk).data() : nullptr;
           for (int64_t r = 0; r < rows; ++r) {
             const double *gr = g.data() + r * lo;
             if (gx) {
               const double *kr = kv + r * lk;
               double *dxr = dx + r * lx;
               for (int64_t j = 0; j < lo; ++j) {
                 const double gj = gr[j];
                 for (int64_t m = 0; m < lk; ++m) dxr[j + m] += gj * kr[m];
               }
             }
             if (gk) {
               const double *xr = xv + r * lx;
               double *dkr = dk + r * lk;
               for (int64_t m = 0; m < lk; ++m) {
                 double acc = 0.0;
                 for (int64_t j = 0; j < lo; ++j) acc += gr[j] * xr[j + m];
                 dkr[m] += acc;
               }
             }
           }
         });
  return result;
}

Tensor Sum(const Tensor &x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  Tensor result = Finish({}, {total}, "sum");
  if (!Tracks(x)) return result;
  NodePtr nx = x.node();
  Record("sum", {&x}, result, [nx](std::span<const double> g) {
    for (double &d : GradBuffer(*nx)) d += g[0];
  });
  return result;
}

Tensor SumAxis(const Tensor &x, int axis) {
  axis = NormalizeAxis(axis, x.rank(), "sum_axis");
  const AxisSplit s = SplitAt(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + axis);
  std::vector<double> out(s.outer * s.inner);
  std::vector<double> buf(s.dim);
  const auto &xv = x.values();
  for (int64_t o = 0; o < s.outer; ++o) {
    for (int64_t i = 0; i < s.inner; ++i) {
      for (int64_t d = 0; d < s.dim; ++d) {
        buf[d] = xv[(o * s.dim + d) * s.inner + i];
      }
      // Summing in sorted order makes the result independent of the order
      // of the reduced elements.
      std::sort(buf.begin(), buf.end());
      double acc = 0.0;
      for (double v : buf) acc += v;
      out[o * s.inner + i] = acc;
    }
  }
  Tensor result = Finish(std::move(out_shape), std::move(out), "sum_axis");
  if (!Tracks(x)) return result;
  NodePtr nx = x.node();
  Record("sum_axis", {&x}, result, [nx, s](std::span<const double> g) {
    auto dx = GradBuffer(*nx);
    for (int64_t o = 0; o < s.outer; ++o) {
      for (int64_t d = 0; d < s.dim; ++d) {
        for (int64_t i = 0; i < s.inner; ++i) {
          dx[(o * s.dim + d) * s.inner + i] += g[o * s.inner + i];
        }
      }
    }
  });
  return result;
}

Tensor MeanAxis(const Tensor &x, int axis) {
  const int64_t n = x.dim(axis);
  if (n == 0) throw ShapeError("mean_axis over an empty axis");
  return Scale(SumAxis(x, axis), 1.0 / static_cast<double>(n));
}

Tensor L2NormAxis(const Tensor &x, int axis) {
  axis = NormalizeAxis(axis, x.rank(), "l2_norm_axis");
  const AxisSplit s = SplitAt(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + axis);
  std::vector<double> out(s.outer * s.inner, 0.0);
  const auto &xv = x.values();
  for (int64_t o = 0; o < s.outer; ++o) {
    for (int64_t d = 0; d < s.dim; ++d) {
      for (int64_t i = 0; i < s.inner; ++i) {
        const double v = xv[(o * s.dim + d) * s.inner + i];
        out[o * s.inner + i] += v * v;
      }
    }
  }
  for (double &v : out) v = std::sqrt(v);
  Tensor result = Finish(std::move(out_shape), std::move(out), "l2_norm_axis");
  if (!Tracks(x)) return result;
  NodePtr nx = x.node(), ny = result.node();
  Record("l2_norm_axis", {&x}, result, [nx, ny, s](std::span<const double> g) {
    auto dx = GradBuffer(*nx);
    const auto &xv = nx->value;
    const auto &yv = ny->value;
    for (int64_t o = 0; o < s.outer; ++o) {
      for (int64_t d = 0; d < s.dim; ++d) {
        for (int64_t i = 0; i < s.inner; ++i) {
          const int64_t oi = o * s.inner + i;
          if (yv[oi] > 0.0) {
            const int64_t xi = (o * s.dim + d) * s.inner + i;
            dx[xi] += g[oi] * xv[xi] / yv[oi];
          }
        }
      }
    }
  });
  return result;
}

Tensor Reshape(const Tensor &x, const Shape &shape) {
  Shape target = shape;
  int64_t known = 1;
  int infer = -1;
  for (size_t i = 0; i < target.size(); ++i) {
    if (target[i] == -1) {
      if (infer >= 0) throw ShapeError("reshape: more than one -1 dimension");
      infer = static_cast<int>(i);
    } else {
      known *= target[i];
    }
  }
  if (infer >= 0) {
    if (known == 0 || x.numel() % known != 0) {
      throw ShapeError("reshape: cannot infer dimension for " +
                       ShapeString(x.shape()) + " -> " + ShapeString(shape));
    }
    target[infer] = x.numel() / known;
  }
  if (NumElements(target) != x.numel()) {
    throw ShapeError("reshape: " + ShapeString(x.shape()) + " -> " +
                     ShapeString(shape));
  }
  Tensor result(target, x.values());
  if (!Tracks(x)) return result;
  NodePtr nx = x.node();
  Record("reshape", {&x}, result, [nx](std::span<const double> g) {
    auto dx = GradBuffer(*nx);
    for (size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
  });
  return result;
}

Tensor Permute(const Tensor &x, const std::vector<int> &perm) {
  const int rank = x.rank();
  if (static_cast<int>(perm.size()) != rank) {
    throw ShapeError("permute: permutation rank mismatch");
  }
  std::vector<bool> seen(rank, false);
  for (int p : perm) {
    if (p < 0 || p >= rank || seen[p]) throw ShapeError("permute: invalid permutation");
    seen[p] = true;
  }
  const Shape &in = x.shape();
  std::vector<int64_t> in_stride(rank, 1);
  for (int i = rank - 2; i >= 0; --i) in_stride[i] = in_stride[i + 1] * in[i + 1];
  Shape out_shape(rank);
  std::vector<int64_t> src_stride(rank);
  for (int i = 0; i < rank; ++i) {
    out_shape[i] = in[perm[i]];
    src_stride[i] = in_stride[perm[i]];
  }
  const int64_t total = x.numel();
  // Source offset of every output element.
  std::vector<int64_t> gather(total);
  {
    std::vector<int64_t> counter(rank, 0);
    int64_t src = 0;
    for (int64_t o = 0; o < total; ++o) {
      gather[o] = src;
      for (int d = rank - 1; d >= 0; --d) {
        src += src_stride[d];
        if (++counter[d] < out_shape[d]) break;
        src -= src_stride[d] * out_shape[d];
        counter[d] = 0;
      }
    }
  }
  std::vector<double> out(total);
  const auto &xv = x.values();
  for (int64_t o = 0; o < total; ++o) out[o] = xv[gather[o]];
  Tensor result(out_shape, std::move(out));
  if (!Tracks(x)) return result;
  NodePtr nx = x.node();
  Record("permute", {&x}, result,
         [nx, gather = std::move(gather)](std::span<const double> g) {
           auto dx = GradBuffer(*nx);
           for (size_t o = 0; o < g.size(); ++o) dx[gather[o]] += g[o];
         });
  return result;
}

Tensor Slice(const Tensor &x, int axis, int64_t start, int64_t length) {
  axis = NormalizeAxis(axis, x.rank(), "slice");
  const AxisSplit s = SplitAt(x.shape(), axis);
  if (start < 0 || length < 0 || start + length > s.dim) {
    throw ShapeError("slice [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") out of range for axis " +
                     std::to_string(axis) + " of " + ShapeString(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  std::vector<double> out(s.outer * length * s.inner);
  const auto &xv = x.values();
  const int64_t block = length * s.inner;
  for (int64_t o = 0; o < s.outer; ++o) {
    std::copy_n(xv.begin() + (o * s.dim + start) * s.inner, block,
                out.begin() + o * block);
  }
  Tensor result(std::move(out_shape), std::move(out));
  if (!Tracks(x)) return result;
  NodePtr nx = x.node();
  Record("slice", {&x}, result,
         [nx, s, start, block](std::span<const double> g) {
           auto dx = GradBuffer(*nx);
           for (int64_t o = 0; o < s.outer; ++o) {
             double *dst = dx.data() + (o * s.dim + start) * s.inner;
             const double *src = g.data() + o * block;
             for (int64_t i = 0; i < block; ++i) dst[i] += src[i];
           }
         });
  return result;
}

Tensor Select(const Tensor &x, int axis, int64_t index) {
  axis = NormalizeAxis(axis, x.rank(), "select");
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + axis);
  return Reshape(Slice(x, axis, index, 1), out_shape);
}

namespace {

// Concatenates `parts` (viewed with shapes `views`) along `axis`.
Tensor ConcatViews(const std::vector<Tensor> &parts,
                   const std::vector<Shape> &views, int axis, const char *op) {
  if (parts.empty()) throw ShapeError(std::string(op) + ": no inputs");
  const Shape &ref = views[0];
  axis = NormalizeAxis(axis, static_cast<int>(ref.size()), op);
  std::vector<int64_t> widths;
  int64_t total_dim = 0;
  for (const Shape &v : views) {
    if (v.size() != ref.size()) throw ShapeError(std::string(op) + ": rank mismatch");
    for (size_t i = 0; i < ref.size(); ++i) {
      if (static_cast<int>(i) != axis && v[i] != ref[i]) {
        throw ShapeError(std::string(op) + ": " + ShapeString(v) +
                         " incompatible with " + ShapeString(ref));
      }
    }
    widths.push_back(v[axis]);
    total_dim += v[axis];
  }
  Shape out_shape = ref;
  out_shape[axis] = total_dim;
  const AxisSplit s = SplitAt(out_shape, axis);
  std::vector<double> out(NumElements(out_shape));
  int64_t offset = 0;
  for (size_t p = 0; p < parts.size(); ++p) {
    const int64_t block = widths[p] * s.inner;
    const auto &pv = parts[p].values();
    for (int64_t o = 0; o < s.outer; ++o) {
      std::copy_n(pv.begin() + o * block, block,
                  out.begin() + (o * s.dim + offset) * s.inner);
    }
    offset += widths[p];
  }
  Tensor result(std::move(out_shape), std::move(out));
  bool tracked = false;
  for (const Tensor &p : parts) tracked = tracked || Tracks(p);
  if (!tracked) return result;
  std::vector<NodePtr> nodes;
  std::vector<bool> needs;
  for (const Tensor &p : parts) {
    nodes.push_back(p.node());
    needs.push_back(Tracks(p));
  }
  CurrentTape().Record(
      op, nodes, result.node(),
      [nodes, needs, widths, s](std::span<const double> g) {
        int64_t offset = 0;
        for (size_t p = 0; p < nodes.size(); ++p) {
          const int64_t block = widths[p] * s.inner;
          if (needs[p]) {
            auto dp = GradBuffer(*nodes[p]);
            for (int64_t o = 0; o < s.outer; ++o) {
              const double *src = g.data() + (o * s.dim + offset) * s.inner;
              double *dst = dp.data() + o * block;
              for (int64_t i = 0; i < block; ++i) dst[i] += src[i];
            }
          }
          offset += widths[p];
        }
      });
  return result;
}

}  // namespace

Tensor Concat(const std::vector<Tensor> &parts, int axis) {
  std::vector<Shape> views;
  for (const Tensor &p : parts) views.push_back(p.shape());
  return ConcatViews(parts, views, axis, "concat");
}

Tensor Stack(const std::vector<Tensor> &parts, int axis) {
  if (parts.empty()) throw ShapeError("stack: no inputs");
  const int rank = parts[0].rank() + 1;
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw ShapeError("stack: axis out of range");
  std::vector<Shape> views;
  for (const Tensor &p : parts) {
    if (p.shape() != parts[0].shape()) {
      throw ShapeError("stack: " + ShapeString(p.shape()) + " vs " +
                       ShapeString(parts[0].shape()));
    }
    Shape v = p.shape();
    v.insert(v.begin() + axis, 1);
    views.push_back(v);
  }
  return ConcatViews(parts, views, axis, "stack");
}

Tensor Pad(const Tensor &x, int axis, int64_t front, int64_t back) {
  axis = NormalizeAxis(axis, x.rank(), "pad");
  if (front < 0 || back < 0) throw ShapeError("pad: negative padding");
  const AxisSplit s = SplitAt(x.shape(), axis);
  const int64_t dim_out = s.dim + front + back;
  Shape out_shape = x.shape();
  out_shape[axis] = dim_out;
  std::vector<double> out(s.outer * dim_out * s.inner, 0.0);
  const auto &xv = x.values();
  const int64_t block = s.dim * s.inner;
  for (int64_t o = 0; o < s.outer; ++o) {
    std::copy_n(xv.begin() + o * block, block,
                out.begin() + (o * dim_out + front) * s.inner);
  }
  Tensor result(std::move(out_shape), std::move(out));
  if (!Tracks(x)) return result;
  NodePtr nx = x.node();
  Record("pad", {&x}, result,
         [nx, s, front, dim_out, block](std::span<const double> g) {
           auto dx = GradBuffer(*nx);
           for (int64_t o = 0; o < s.outer; ++o) {
             const double *src = g.data() + (o * dim_out + front) * s.inner;
             double *dst = dx.data() + o * block;
             for (int64_t i = 0; i < block; ++i) dst[i] += src[i];
           }
         });
  return result;
}

Tensor Repeat(const Tensor &x, int axis, int64_t count) {
  const int rank = x.rank() + 1;
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw ShapeError("repeat: axis out of range");
  if (count < 1) throw ShapeError("repeat: count must be positive");
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.shape()[i];
  for (int i = axis; i < x.rank(); ++i) inner *= x.shape()[i];
  Shape out_shape = x.shape();
  out_shape.insert(out_shape.begin() + axis, count);
  std::vector<double> out(outer * count * inner);
  const auto &xv = x.values();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t r = 0; r < count; ++r) {
      std::copy_n(xv.begin() + o * inner, inner,
                  out.begin() + (o * count + r) * inner);
    }
  }
  Tensor result(std::move(out_shape), std::move(out));
  if (!Tracks(x)) return result;
  NodePtr nx = x.node();
  Record("repeat", {&x}, result,
         [nx, outer, count, inner](std::span<const double> g) {
           auto dx = GradBuffer(*nx);
           for (int64_t o = 0; o < outer; ++o) {
             for (int64_t r = 0; r < count; ++r) {
               const double *src = g.data() + (o * count + r) * inner;
               double *dst = dx.data() + o * inner;
               for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
             }
           }
         });
  return result;
}

Tensor OverlapAddSum(const Tensor &frames, int64_t hop) {
  if (frames.rank() < 2) {
    throw ShapeError("overlap_add: expected [..., T x L], got " +
                     ShapeString(frames.shape()));
  }
  if (hop < 1) throw ShapeError("overlap_add: hop must be positive");
  const int64_t t = frames.dim(-2), l = frames.dim(-1);
  const int64_t len = t == 0 ? 0 : (t - 1) * hop + l;
  const int64_t batch = frames.numel() / std::max<int64_t>(t * l, 1);
  Shape out_shape(frames.shape().begin(), frames.shape().end() - 2);
  out_shape.push_back(len);
  std::vector<double> out(batch * len, 0.0);
  const auto &fv = frames.values();
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t i = 0; i < t; ++i) {
      const double *src = fv.data() + (b * t + i) * l;
      double *dst = out.data() + b * len + i * hop;
      for (int64_t k = 0; k < l; ++k) dst[k] += src[k];
    }
  }
  Tensor result = Finish(std::move(out_shape), std::move(out), "overlap_add");
  if (!Tracks(frames)) return result;
  NodePtr nf = frames.node();
  Record("overlap_add", {&frames}, result,
         [nf, batch, t, l, hop, len](std::span<const double> g) {
           auto df = GradBuffer(*nf);
           for (int64_t b = 0; b < batch; ++b) {
             for (int64_t i = 0; i < t; ++i) {
               const double *src = g.data() + b * len + i * hop;
               double *dst = df.data() + (b * t + i) * l;
               for (int64_t k = 0; k < l; ++k) dst[k] += src[k];
             }
           }
         });
  return result;
}

Tensor ExtractFrames(const Tensor &x, int64_t frame_len, int64_t hop,
                     int64_t offset, int64_t count) {
  if (x.rank() < 1 || frame_len < 1 || hop < 1 || count < 0) {
    throw ShapeError("extract_frames: bad arguments for input " +
                     ShapeString(x.shape()));
  }
  const int64_t len = x.dim(-1);
  const int64_t batch = len == 0 ? 0 : x.numel() / len;
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  out_shape.push_back(count);
  out_shape.push_back(frame_len);
  std::vector<double> out(batch * count * frame_len, 0.0);
  const auto &xv = x.values();
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t i = 0; i < count; ++i) {
      double *dst = out.data() + (b * count + i) * frame_len;
      for (int64_t k = 0; k < frame_len; ++k) {
        const int64_t n = offset + i * hop + k;
        if (n >= 0 && n < len) dst[k] = xv[b * len + n];
      }
    }
  }
  Tensor result = Finish(std::move(out_shape), std::move(out), "extract_frames");
  if (!Tracks(x)) return result;
  NodePtr nx = x.node();
  Record("extract_frames", {&x}, result,
         [nx, batch, count, frame_len, hop, offset, len](
             std::span<const double> g) {
           auto dx = GradBuffer(*nx);
           for (int64_t b = 0; b < batch; ++b) {
             for (int64_t i = 0; i < count; ++i) {
               const double *src = g.data() + (b * count + i) * frame_len;
               for (int64_t k = 0; k < frame_len; ++k) {
                 const int64_t n = offset + i * hop + k;
                 if (n >= 0 && n < len) dx[b * len + n] += src[k];
               }
             }
           }
         });
  return result;
}

}  // namespace ifasnet
