#include "reentry/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "reentry/errors.hpp"

namespace reentry::ad {

namespace {

std::string shape_str(const Tensor& t) {
  std::string s = "[";
  for (std::size_t i = 0; i < t.rank(); ++i) {
    if (i) s += "x";
    s += std::to_string(t.shape()[i]);
  }
  return s + "]";
}

void require_matrix(const Tensor& t, const char* op) {
  if (!t.defined()) throw ShapeError(std::string(op) + ": undefined tensor");
  if (t.rank() > 2) throw ShapeError(std::string(op) + ": rank > 2 not supported");
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor embedding_lookup(Tape& tape, const Tensor& table, std::span<const int> ids,
                        std::optional<int> pad_id) {
  require_matrix(table, "embedding_lookup");
  const std::size_t vocab = table.rows();
  const std::size_t d = table.cols();
  if (ids.empty()) throw ShapeError("embedding_lookup: empty id list");
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw IndexError("embedding id " + std::to_string(id) + " outside [0, " +
                       std::to_string(vocab) + ")");
    }
  }
  Tensor out = Tensor::zeros({ids.size(), d});
  auto ov = out.mutable_values();
  const auto tv = table.values();
  std::vector<int> kept(ids.begin(), ids.end());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (pad_id && kept[i] == *pad_id) continue;
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(kept[i] * d), d,
                ov.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  TensorImpl* t = table.impl();
  TensorImpl* o = out.impl();
  tape.record({table}, out, [t, o, d, kept = std::move(kept), pad_id] {
    auto g = grad_of(*t);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (pad_id && kept[i] == *pad_id) continue;
      const double* src = o->grad.data() + i * d;
      double* dst = g.data() + static_cast<std::size_t>(kept[i]) * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  });
  return out;
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: inner dimensions differ " + shape_str(a) + " * " + shape_str(b));
  }
  Tensor out = Tensor::zeros({m, n});
  const double* av = a.values().data();
  const double* bv = b.values().data();
  double* ov = out.mutable_values().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv + p * n;
      double* orow = ov + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  TensorImpl* ai = a.impl();
  TensorImpl* bi = b.impl();
  TensorImpl* o = out.impl();
  tape.record({a, b}, out, [ai, bi, o, m, k, n] {
    const double* g = o->grad.data();
    if (ai->requires_grad) {
      double* ga = grad_of(*ai).data();
      const double* bv = bi->value.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (bi->requires_grad) {
      double* gb = grad_of(*bi).data();
      const double* av = ai->value.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          if (aip == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
        }
      }
    }
  });
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_matrix(a, "add");
  require_matrix(b, "add");
  const bool same = a.size() == b.size() && a.rows() == b.rows() && a.cols() == b.cols();
  const bool row_broadcast = !same && b.rows() == 1 && b.cols() == a.cols();
  if (!same && !row_broadcast) {
    throw ShapeError("add: incompatible shapes " + shape_str(a) + " + " + shape_str(b));
  }
  Tensor out = Tensor::from(a.shape(), std::vector<double>(a.values().begin(), a.values().end()));
  auto ov = out.mutable_values();
  const auto bv = b.values();
  const std::size_t cols = a.cols();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += same ? bv[i] : bv[i % cols];
  TensorImpl* ai = a.impl();
  TensorImpl* bi = b.impl();
  TensorImpl* o = out.impl();
  tape.record({a, b}, out, [ai, bi, o, same, cols] {
    const auto& g = o->grad;
    if (ai->requires_grad) {
      auto ga = grad_of(*ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (bi->requires_grad) {
      auto gb = grad_of(*bi);
      for (std::size_t i = 0; i < g.size(); ++i) gb[same ? i : i % cols] += g[i];
    }
  });
  return out;
}

Tensor scale(Tape& tape, const Tensor& x, double factor) {
  Tensor out = Tensor::from(x.shape(), std::vector<double>(x.values().begin(), x.values().end()));
  for (double& v : out.mutable_values()) v *= factor;
  TensorImpl* xi = x.impl();
  TensorImpl* o = out.impl();
  tape.record({x}, out, [xi, o, factor] {
    auto gx = grad_of(*xi);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += factor * o->grad[i];
  });
  return out;
}

Tensor concat(Tape& tape, const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no parts");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis " + std::to_string(axis) + " out of range");
  for (const auto& p : parts) require_matrix(p, "concat");
  std::size_t rows = 0, cols = 0;
  if (axis == 0) {
    cols = parts.front().cols();
    for (const auto& p : parts) {
      if (p.cols() != cols) throw ShapeError("concat axis 0: column counts differ");
      rows += p.rows();
    }
  } else {
    rows = parts.front().rows();
    for (const auto& p : parts) {
      if (p.rows() != rows) throw ShapeError("concat axis 1: row counts differ");
      cols += p.cols();
    }
  }
  Tensor out = Tensor::zeros({rows, cols});
  double* ov = out.mutable_values().data();
  std::vector<TensorImpl*> impls;
  impls.reserve(parts.size());
  std::size_t offset = 0;
  for (const auto& p : parts) {
    impls.push_back(p.impl());
    const double* pv = p.values().data();
    const std::size_t pr = p.rows(), pc = p.cols();
    if (axis == 0) {
      std::copy_n(pv, pr * pc, ov + offset * cols);
      offset += pr;
    } else {
      for (std::size_t r = 0; r < pr; ++r) std::copy_n(pv + r * pc, pc, ov + r * cols + offset);
      offset += pc;
    }
  }
  TensorImpl* o = out.impl();
  tape.record(parts, out, [impls = std::move(impls), o, axis, cols] {
    const double* g = o->grad.data();
    std::size_t offset = 0;
    for (TensorImpl* p : impls) {
      const std::size_t pr = p->shape.size() <= 1 ? 1 : p->shape[0];
      const std::size_t pc = p->shape.empty() ? 1 : p->shape.back();
      if (p->requires_grad) {
        double* gp = grad_of(*p).data();
        if (axis == 0) {
          for (std::size_t i = 0; i < pr * pc; ++i) gp[i] += g[offset * cols + i];
        } else {
          for (std::size_t r = 0; r < pr; ++r)
            for (std::size_t c = 0; c < pc; ++c) gp[r * pc + c] += g[r * cols + offset + c];
        }
      }
      offset += axis == 0 ? pr : pc;
    }
  });
  return out;
}

Tensor hadamard(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("hadamard: shapes differ " + shape_str(a) + " vs " + shape_str(b));
  }
  Tensor out = Tensor::zeros(a.shape());
  auto ov = out.mutable_values();
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
  TensorImpl* ai = a.impl();
  TensorImpl* bi = b.impl();
  TensorImpl* o = out.impl();
  tape.record({a, b}, out, [ai, bi, o] {
    const auto& g = o->grad;
    if (ai->requires_grad) {
      auto ga = grad_of(*ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bi->value[i];
    }
    if (bi->requires_grad) {
      auto gb = grad_of(*bi);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ai->value[i];
    }
  });
  return out;
}

Tensor transpose(Tape& tape, const Tensor& x) {
  require_matrix(x, "transpose");
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out = Tensor::zeros({c, r});
  auto ov = out.mutable_values();
  const auto xv = x.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) ov[j * r + i] = xv[i * c + j];
  TensorImpl* xi = x.impl();
  TensorImpl* o = out.impl();
  tape.record({x}, out, [xi, o, r, c] {
    auto gx = grad_of(*xi);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += o->grad[j * r + i];
  });
  return out;
}

Tensor tile_rows(Tape& tape, const Tensor& v, std::size_t n) {
  require_matrix(v, "tile_rows");
  if (v.rows() != 1) throw ShapeError("tile_rows: expected a single row, got " + shape_str(v));
  if (n == 0) throw ShapeError("tile_rows: zero copies");
  const std::size_t c = v.cols();
  Tensor out = Tensor::zeros({n, c});
  auto ov = out.mutable_values();
  for (std::size_t r = 0; r < n; ++r) std::copy(v.values().begin(), v.values().end(), ov.begin() + static_cast<std::ptrdiff_t>(r * c));
  TensorImpl* vi = v.impl();
  TensorImpl* o = out.impl();
  tape.record({v}, out, [vi, o, n, c] {
    auto gv = grad_of(*vi);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < c; ++j) gv[j] += o->grad[r * c + j];
  });
  return out;
}

Tensor slice_cols(Tape& tape, const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_cols");
  const std::size_t r = x.rows(), c = x.cols();
  if (begin >= end || end > c) throw ShapeError("slice_cols: bad range for " + shape_str(x));
  const std::size_t w = end - begin;
  Tensor out = Tensor::zeros({r, w});
  auto ov = out.mutable_values();
  const auto xv = x.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) ov[i * w + j] = xv[i * c + begin + j];
  TensorImpl* xi = x.impl();
  TensorImpl* o = out.impl();
  tape.record({x}, out, [xi, o, r, c, w, begin] {
    auto gx = grad_of(*xi);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) gx[i * c + begin + j] += o->grad[i * w + j];
  });
  return out;
}

Tensor select_rows(Tape& tape, const Tensor& x, std::span<const std::size_t> rows) {
  require_matrix(x, "select_rows");
  if (rows.empty()) throw ShapeError("select_rows: no rows selected");
  const std::size_t c = x.cols();
  for (std::size_t r : rows) {
    if (r >= x.rows()) throw IndexError("select_rows: row " + std::to_string(r) + " out of range");
  }
  Tensor out = Tensor::zeros({rows.size(), c});
  auto ov = out.mutable_values();
  const auto xv = x.values();
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(rows[i] * c), c,
                ov.begin() + static_cast<std::ptrdiff_t>(i * c));
  TensorImpl* xi = x.impl();
  TensorImpl* o = out.impl();
  tape.record({x}, out, [xi, o, c, idx = std::vector<std::size_t>(rows.begin(), rows.end())] {
    auto gx = grad_of(*xi);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) gx[idx[i] * c + j] += o->grad[i * c + j];
  });
  return out;
}

Tensor mean_pool(Tape& tape, const Tensor& rows, const Mask& mask) {
  require_matrix(rows, "mean_pool");
  const std::size_t n = rows.rows(), d = rows.cols();
  if (mask.size() != n) throw ShapeError("mean_pool: mask length differs from row count");
  const auto count = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  if (count == 0) throw EmptyPoolError("mean_pool: every row is masked");
  Tensor out = Tensor::zeros({d});
  auto ov = out.mutable_values();
  const auto xv = rows.values();
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    for (std::size_t j = 0; j < d; ++j) ov[j] += xv[i * d + j];
  }
  const double inv = 1.0 / static_cast<double>(count);
  for (double& v : ov) v *= inv;
  TensorImpl* xi = rows.impl();
  TensorImpl* o = out.impl();
  tape.record({rows}, out, [xi, o, mask, n, d, inv] {
    auto gx = grad_of(*xi);
    for (std::size_t i = 0; i < n; ++i) {
      if (!mask[i]) continue;
      for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += inv * o->grad[j];
    }
  });
  return out;
}

Tensor max_pool_time(Tape& tape, const Tensor& rows) {
  require_matrix(rows, "max_pool_time");
  const std::size_t n = rows.rows(), d = rows.cols();
  if (n == 0) throw EmptyPoolError("max_pool_time: no rows");
  Tensor out = Tensor::zeros({d});
  auto ov = out.mutable_values();
  const auto xv = rows.values();
  std::vector<std::size_t> arg(d, 0);
  for (std::size_t j = 0; j < d; ++j) {
    double best = xv[j];
    for (std::size_t i = 1; i < n; ++i) {
      if (xv[i * d + j] > best) {
        best = xv[i * d + j];
        arg[j] = i;
      }
    }
    ov[j] = best;
  }
  TensorImpl* xi = rows.impl();
  TensorImpl* o = out.impl();
  tape.record({rows}, out, [xi, o, arg = std::move(arg), d] {
    auto gx = grad_of(*xi);
    for (std::size_t j = 0; j < d; ++j) gx[arg[j] * d + j] += o->grad[j];
  });
  return out;
}

Tensor activation(Tape& tape, Activation kind, const Tensor& x) {
  if (kind == Activation::softmax_lastaxis) {
    return masked_softmax(tape, x, Mask(x.cols(), true));
  }
  Tensor out = Tensor::zeros(x.shape());
  auto ov = out.mutable_values();
  const auto xv = x.values();
  for (std::size_t i = 0; i < ov.size(); ++i) {
    switch (kind) {
      case Activation::sigmoid: ov[i] = sigmoid_scalar(xv[i]); break;
      case Activation::tanh: ov[i] = std::tanh(xv[i]); break;
      case Activation::relu: ov[i] = xv[i] > 0.0 ? xv[i] : 0.0; break;
      default: break;
    }
  }
  TensorImpl* xi = x.impl();
  TensorImpl* o = out.impl();
  tape.record({x}, out, [xi, o, kind] {
    auto gx = grad_of(*xi);
    const auto& y = o->value;
    const auto& g = o->grad;
    for (std::size_t i = 0; i < gx.size(); ++i) {
      switch (kind) {
        case Activation::sigmoid: gx[i] += g[i] * y[i] * (1.0 - y[i]); break;
        case Activation::tanh: gx[i] += g[i] * (1.0 - y[i] * y[i]); break;
        case Activation::relu: gx[i] += xi->value[i] > 0.0 ? g[i] : 0.0; break;
        default: break;
      }
    }
  });
  return out;
}

Tensor masked_softmax(Tape& tape, const Tensor& x, const Mask& column_mask) {
  require_matrix(x, "softmax");
  const std::size_t r = x.rows(), c = x.cols();
  if (column_mask.size() != c) throw ShapeError("softmax: mask length differs from column count");
  Tensor out = Tensor::zeros(x.shape());
  auto ov = out.mutable_values();
  const auto xv = x.values();
  for (std::size_t i = 0; i < r; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j)
      if (column_mask[j]) mx = std::max(mx, xv[i * c + j]);
    if (!std::isfinite(mx)) continue;
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      if (!column_mask[j]) continue;
      ov[i * c + j] = std::exp(xv[i * c + j] - mx);
      total += ov[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) ov[i * c + j] /= total;
  }
  TensorImpl* xi = x.impl();
  TensorImpl* o = out.impl();
  tape.record({x}, out, [xi, o, r, c] {
    auto gx = grad_of(*xi);
    const auto& y = o->value;
    const auto& g = o->grad;
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += y[i * c + j] * g[i * c + j];
      // masked entries have y == 0 and so receive nothing
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
    }
  });
  return out;
}

Tensor masked_row_max(Tape& tape, const Tensor& x, const Mask& column_mask) {
  require_matrix(x, "masked_row_max");
  const std::size_t r = x.rows(), c = x.cols();
  if (column_mask.size() != c) throw ShapeError("masked_row_max: mask length differs from column count");
  Tensor out = Tensor::zeros({r, 1});
  auto ov = out.mutable_values();
  const auto xv = x.values();
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> arg(r, kNone);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      if (!column_mask[j]) continue;
      if (arg[i] == kNone || xv[i * c + j] > ov[i]) {
        ov[i] = xv[i * c + j];
        arg[i] = j;
      }
    }
  }
  TensorImpl* xi = x.impl();
  TensorImpl* o = out.impl();
  tape.record({x}, out, [xi, o, arg = std::move(arg), c] {
    auto gx = grad_of(*xi);
    for (std::size_t i = 0; i < arg.size(); ++i)
      if (arg[i] != kNone) gx[i * c + arg[i]] += o->grad[i];
  });
  return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  Tensor out = Tensor::scalar(total);
  TensorImpl* xi = x.impl();
  TensorImpl* o = out.impl();
  tape.record({x}, out, [xi, o] {
    auto gx = grad_of(*xi);
    const double g = o->grad[0];
    for (double& v : gx) v += g;
  });
  return out;
}

Tensor unfold_rows(Tape& tape, const Tensor& x, std::size_t width) {
  require_matrix(x, "unfold_rows");
  const std::size_t n = x.rows(), d = x.cols();
  if (width == 0 || width > n) {
    throw ShapeError("unfold_rows: window " + std::to_string(width) + " does not fit " +
                     std::to_string(n) + " rows");
  }
  const std::size_t positions = n - width + 1;
  const std::size_t w = width * d;
  Tensor out = Tensor::zeros({positions, w});
  auto ov = out.mutable_values();
  const auto xv = x.values();
  // Window p covers rows p..p+width-1, which are contiguous in row-major storage.
  for (std::size_t p = 0; p < positions; ++p)
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(p * d), w,
                ov.begin() + static_cast<std::ptrdiff_t>(p * w));
  TensorImpl* xi = x.impl();
  TensorImpl* o = out.impl();
  tape.record({x}, out, [xi, o, positions, w, d] {
    auto gx = grad_of(*xi);
    for (std::size_t p = 0; p < positions; ++p)
      for (std::size_t j = 0; j < w; ++j) gx[p * d + j] += o->grad[p * w + j];
  });
  return out;
}

Tensor lstm_step(Tape& tape, const Tensor& gates_in, const Tensor& state, const Tensor& w_h) {
  const std::size_t h = w_h.rows();
  if (w_h.cols() != 4 * h || gates_in.size() != 4 * h || state.size() != 2 * h) {
    throw ShapeError("lstm_step: inconsistent sizes gates " + shape_str(gates_in) + ", state " +
                     shape_str(state) + ", w_h " + shape_str(w_h));
  }
  const auto xin = gates_in.values();
  const auto sv = state.values();
  const auto wv = w_h.values();
  // act holds activated gates i f g o; tanh_c is kept for backward.
  std::vector<double> act(4 * h);
  for (std::size_t j = 0; j < 4 * h; ++j) act[j] = xin[j];
  for (std::size_t p = 0; p < h; ++p) {
    const double hp = sv[p];
    if (hp == 0.0) continue;
    for (std::size_t j = 0; j < 4 * h; ++j) act[j] += hp * wv[p * 4 * h + j];
  }
  for (std::size_t j = 0; j < h; ++j) {
    act[j] = sigmoid_scalar(act[j]);
    act[h + j] = sigmoid_scalar(act[h + j]);
    act[2 * h + j] = std::tanh(act[2 * h + j]);
    act[3 * h + j] = sigmoid_scalar(act[3 * h + j]);
  }
  Tensor out = Tensor::zeros({1, 2 * h});
  auto ov = out.mutable_values();
  std::vector<double> tanh_c(h);
  for (std::size_t j = 0; j < h; ++j) {
    const double c = act[h + j] * sv[h + j] + act[j] * act[2 * h + j];
    tanh_c[j] = std::tanh(c);
    ov[j] = act[3 * h + j] * tanh_c[j];
    ov[h + j] = c;
  }
  TensorImpl* gi = gates_in.impl();
  TensorImpl* si = state.impl();
  TensorImpl* wi = w_h.impl();
  TensorImpl* o = out.impl();
  tape.record({gates_in, state, w_h}, out,
              [gi, si, wi, o, h, act = std::move(act), tanh_c = std::move(tanh_c)] {
                const auto& g = o->grad;
                const auto& s = si->value;
                std::vector<double> dz(4 * h);
                for (std::size_t j = 0; j < h; ++j) {
                  const double i_g = act[j], f_g = act[h + j], c_g = act[2 * h + j],
                               o_g = act[3 * h + j];
                  const double dh = g[j];
                  const double dc = g[h + j] + dh * o_g * (1.0 - tanh_c[j] * tanh_c[j]);
                  dz[j] = dc * c_g * i_g * (1.0 - i_g);
                  dz[h + j] = dc * s[h + j] * f_g * (1.0 - f_g);
                  dz[2 * h + j] = dc * i_g * (1.0 - c_g * c_g);
                  dz[3 * h + j] = dh * tanh_c[j] * o_g * (1.0 - o_g);
                  if (si->requires_grad) grad_of(*si)[h + j] += dc * f_g;
                }
                if (gi->requires_grad) {
                  auto gg = grad_of(*gi);
                  for (std::size_t j = 0; j < 4 * h; ++j) gg[j] += dz[j];
                }
                const auto& w = wi->value;
                if (si->requires_grad) {
                  auto gs = grad_of(*si);
                  for (std::size_t p = 0; p < h; ++p) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < 4 * h; ++j) acc += dz[j] * w[p * 4 * h + j];
                    gs[p] += acc;
                  }
                }
                if (wi->requires_grad) {
                  auto gw = grad_of(*wi);
                  for (std::size_t p = 0; p < h; ++p) {
                    const double hp = s[p];
                    if (hp == 0.0) continue;
                    for (std::size_t j = 0; j < 4 * h; ++j) gw[p * 4 * h + j] += hp * dz[j];
                  }
                }
              });
  return out;
}

}  // namespace reentry::ad
