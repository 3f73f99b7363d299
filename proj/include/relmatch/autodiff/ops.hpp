// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "relmatch/autodiff/graph.hpp"

namespace relmatch::ad {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

template <class T>
Eigen::Map<const RowMatrix<T>> mat(const Tensor<T>& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

template <class T>
Eigen::Map<RowMatrix<T>> mat(Tensor<T>& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

template <class T>
Eigen::Map<RowMatrix<T>> gmat(Tensor<T>& t) {
  return {t.grad().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

template <class T>
bool any_grad(std::initializer_list<Var<T>> vars) {
  for (const Var<T>& v : vars) {
    if (v.graph->requires_grad(v)) return true;
  }
  return false;
}

template <class T>
void same_graph(Var<T> a, Var<T> b) {
  if (a.graph != b.graph) throw Error("operands recorded on different graphs");
}

inline std::string shapes(const Shape& a, const Shape& b) { return to_string(a) + " and " + to_string(b); }

template <class T>
bool wants(Var<T> v) {
  return v.graph->requires_grad(v);
}

template <class T>
std::span<T> grad_of(Var<T> v) {
  return v.graph->tensor(v).grad();
}

}  // namespace detail

enum class Transpose { kNo, kYes };

/// a[p x q] . b[q x r], or a . b^T when `tb` is kYes.
template <class T>
Var<T> matmul(Var<T> a, Var<T> b, Transpose tb = Transpose::kNo) {
  using namespace detail;
  same_graph(a, b);
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  const bool bt = tb == Transpose::kYes;
  if (av.cols() != (bt ? bv.cols() : bv.rows())) {
    throw ShapeError("matmul inner dimensions disagree: " + shapes(av.shape(), bv.shape()) +
                     (bt ? " (second operand transposed)" : ""));
  }
  Tensor<T> out({av.rows(), bt ? bv.rows() : bv.cols()});
  if (bt) {
    mat(out).noalias() = mat(av) * mat(bv).transpose();
  } else {
    mat(out).noalias() = mat(av) * mat(bv);
  }
  return a.graph->emit(std::move(out), any_grad({a, b}), [a, b, bt](Tensor<T>& o) {
    auto dO = gmat(o);
    if (wants(a)) {
      auto da = gmat(a.graph->tensor(a));
      if (bt) {
        da.noalias() += dO * mat(b.value());
      } else {
        da.noalias() += dO * mat(b.value()).transpose();
      }
    }
    if (wants(b)) {
      auto db = gmat(b.graph->tensor(b));
      if (bt) {
        db.noalias() += dO.transpose() * mat(a.value());
      } else {
        db.noalias() += mat(a.value()).transpose() * dO;
      }
    }
  });
}

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  using namespace detail;
  same_graph(a, b);
  if (a.value().shape() != b.value().shape()) {
    throw ShapeError("add needs equal shapes, got " + shapes(a.shape(), b.shape()));
  }
  Tensor<T> out(a.value().shape());
  mat(out) = mat(a.value()) + mat(b.value());
  return a.graph->emit(std::move(out), any_grad({a, b}), [a, b](Tensor<T>& o) {
    if (wants(a)) gmat(a.graph->tensor(a)) += gmat(o);
    if (wants(b)) gmat(b.graph->tensor(b)) += gmat(o);
  });
}

/// Elementwise product of equally shaped tensors.
template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  using namespace detail;
  same_graph(a, b);
  if (a.value().shape() != b.value().shape()) {
    throw ShapeError("mul needs equal shapes, got " + shapes(a.shape(), b.shape()));
  }
  Tensor<T> out(a.value().shape());
  mat(out) = mat(a.value()).cwiseProduct(mat(b.value()));
  return a.graph->emit(std::move(out), any_grad({a, b}), [a, b](Tensor<T>& o) {
    if (wants(a)) gmat(a.graph->tensor(a)) += gmat(o).cwiseProduct(mat(b.value()));
    if (wants(b)) gmat(b.graph->tensor(b)) += gmat(o).cwiseProduct(mat(a.value()));
  });
}

/// x[r x c] + bias broadcast over rows; bias holds c values.
template <class T>
Var<T> add_bias(Var<T> x, Var<T> bias) {
  using namespace detail;
  same_graph(x, bias);
  const Tensor<T>& xv = x.value();
  if (bias.value().size() != xv.cols()) {
    throw ShapeError("bias of shape " + to_string(bias.shape()) + " does not match columns of " +
                     to_string(xv.shape()));
  }
  Tensor<T> out(xv.shape());
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bv(bias.value().data(), static_cast<Eigen::Index>(xv.cols()));
  mat(out) = mat(xv).rowwise() + bv;
  return x.graph->emit(std::move(out), any_grad({x, bias}), [x, bias](Tensor<T>& o) {
    if (wants(x)) gmat(x.graph->tensor(x)) += gmat(o);
    if (wants(bias)) {
      std::span<T> gb = grad_of(bias);
      Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> gbm(gb.data(), static_cast<Eigen::Index>(gb.size()));
      gbm += gmat(o).colwise().sum();
    }
  });
}

template <class T>
Var<T> scale(Var<T> x, T s) {
  using namespace detail;
  Tensor<T> out(x.value().shape());
  mat(out) = mat(x.value()) * s;
  return x.graph->emit(std::move(out), wants(x), [x, s](Tensor<T>& o) { gmat(x.graph->tensor(x)) += gmat(o) * s; });
}

/// Sum of all elements, shape [1].
template <class T>
Var<T> sum(Var<T> x) {
  using namespace detail;
  const T total = mat(x.value()).sum();
  return x.graph->emit(Tensor<T>::scalar(total), wants(x), [x](Tensor<T>& o) {
    gmat(x.graph->tensor(x)).array() += o.grad()[0];
  });
}

/// Per-row sum, shape [r x 1].
template <class T>
Var<T> row_sum(Var<T> x) {
  using namespace detail;
  Tensor<T> out({x.rows(), 1});
  mat(out) = mat(x.value()).rowwise().sum();
  return x.graph->emit(std::move(out), wants(x), [x](Tensor<T>& o) {
    auto gx = gmat(x.graph->tensor(x));
    gx.colwise() += gmat(o).col(0);
  });
}

/// Column means over rows, shape [1 x c].
template <class T>
Var<T> mean_rows(Var<T> x) {
  using namespace detail;
  const auto n = static_cast<T>(x.rows());
  Tensor<T> out({1, x.cols()});
  mat(out) = mat(x.value()).colwise().sum() / n;
  return x.graph->emit(std::move(out), wants(x), [x, n](Tensor<T>& o) {
    auto gx = gmat(x.graph->tensor(x));
    gx.rowwise() += gmat(o).row(0) / n;
  });
}

template <class T>
Var<T> transpose(Var<T> x) {
  using namespace detail;
  Tensor<T> out({x.cols(), x.rows()});
  mat(out) = mat(x.value()).transpose();
  return x.graph->emit(std::move(out), wants(x), [x](Tensor<T>& o) {
    gmat(x.graph->tensor(x)) += gmat(o).transpose();
  });
}

/// Same values under a new shape with equal element count.
template <class T>
Var<T> reshape(Var<T> x, Shape shape) {
  using namespace detail;
  if (numel(shape) != x.value().size()) {
    throw ShapeError("cannot reshape " + to_string(x.shape()) + " to " + to_string(shape));
  }
  std::vector<T> vals(x.value().values().begin(), x.value().values().end());
  return x.graph->emit(Tensor<T>(std::move(shape), std::move(vals)), wants(x), [x](Tensor<T>& o) {
    std::span<T> gx = grad_of(x);
    std::span<const T> go = std::as_const(o).grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i];
  });
}

/// Block x[row0 : row0+nrows, col0 : col0+ncols].
template <class T>
Var<T> slice(Var<T> x, std::size_t row0, std::size_t nrows, std::size_t col0, std::size_t ncols) {
  using namespace detail;
  const Tensor<T>& xv = x.value();
  if (nrows == 0 || ncols == 0 || row0 + nrows > xv.rows() || col0 + ncols > xv.cols()) {
    throw ShapeError("slice [" + std::to_string(row0) + "+" + std::to_string(nrows) + ", " + std::to_string(col0) +
                     "+" + std::to_string(ncols) + "] out of bounds for " + to_string(xv.shape()));
  }
  const auto r0 = static_cast<Eigen::Index>(row0), c0 = static_cast<Eigen::Index>(col0);
  const auto nr = static_cast<Eigen::Index>(nrows), nc = static_cast<Eigen::Index>(ncols);
  Tensor<T> out({nrows, ncols});
  mat(out) = mat(xv).block(r0, c0, nr, nc);
  return x.graph->emit(std::move(out), wants(x), [x, r0, c0, nr, nc](Tensor<T>& o) {
    gmat(x.graph->tensor(x)).block(r0, c0, nr, nc) += gmat(o);
  });
}

/// Rows of x at `index`, in order; repeats allowed.
template <class T>
Var<T> gather_rows(Var<T> x, std::vector<std::size_t> index) {
  using namespace detail;
  const Tensor<T>& xv = x.value();
  if (index.empty()) throw ShapeError("gather_rows needs at least one index");
  Tensor<T> out({index.size(), xv.cols()});
  auto xm = mat(xv);
  auto om = mat(out);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= xv.rows()) {
      throw ShapeError("gather_rows index " + std::to_string(index[i]) + " out of range for " + to_string(xv.shape()));
    }
    om.row(static_cast<Eigen::Index>(i)) = xm.row(static_cast<Eigen::Index>(index[i]));
  }
  return x.graph->emit(std::move(out), wants(x), [x, index = std::move(index)](Tensor<T>& o) {
    auto gx = gmat(x.graph->tensor(x));
    auto go = gmat(o);
    for (std::size_t i = 0; i < index.size(); ++i) {
      gx.row(static_cast<Eigen::Index>(index[i])) += go.row(static_cast<Eigen::Index>(i));
    }
  });
}

/// Concatenation along axis 0 (rows) or 1 (columns) of 2-D views.
template <class T>
Var<T> concat(const std::vector<Var<T>>& parts, int axis) {
  using namespace detail;
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  if (axis != 0 && axis != 1) throw ShapeError("concat axis must be 0 or 1, got " + std::to_string(axis));
  Graph<T>& g = *parts.front().graph;
  std::size_t rows = 0, cols = 0;
  bool needs = false;
  for (const Var<T>& p : parts) {
    if (p.graph != &g) throw Error("operands recorded on different graphs");
    needs = needs || wants(p);
    if (axis == 0) {
      if (rows && p.cols() != cols) throw ShapeError("concat rows: column mismatch " + shapes(parts.front().shape(), p.shape()));
      cols = p.cols();
      rows += p.rows();
    } else {
      if (cols && p.rows() != rows) throw ShapeError("concat cols: row mismatch " + shapes(parts.front().shape(), p.shape()));
      rows = p.rows();
      cols += p.cols();
    }
  }
  Tensor<T> out({rows, cols});
  auto om = mat(out);
  Eigen::Index offset = 0;
  for (const Var<T>& p : parts) {
    auto pm = mat(p.value());
    if (axis == 0) {
      om.middleRows(offset, pm.rows()) = pm;
      offset += pm.rows();
    } else {
      om.middleCols(offset, pm.cols()) = pm;
      offset += pm.cols();
    }
  }
  return g.emit(std::move(out), needs, [parts, axis](Tensor<T>& o) {
    auto go = gmat(o);
    Eigen::Index off = 0;
    for (const Var<T>& p : parts) {
      const auto pr = static_cast<Eigen::Index>(p.rows()), pc = static_cast<Eigen::Index>(p.cols());
      if (wants(p)) {
        if (axis == 0) {
          gmat(p.graph->tensor(p)) += go.middleRows(off, pr);
        } else {
          gmat(p.graph->tensor(p)) += go.middleCols(off, pc);
        }
      }
      off += axis == 0 ? pr : pc;
    }
  });
}

/// Rows of `table` selected by token id.
template <class T>
Var<T> embedding(Var<T> table, std::span<const std::int32_t> ids) {
  using namespace detail;
  const std::size_t vocab = table.rows();
  std::vector<std::size_t> index(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw ShapeError("token id " + std::to_string(ids[i]) + " out of range for vocabulary of " +
                       std::to_string(vocab));
    }
    index[i] = static_cast<std::size_t>(ids[i]);
  }
  return gather_rows(table, std::move(index));
}

/// Softmax along `axis` (0: down each column, 1: across each row).
///
/// `mask`, when non-empty, has one entry per position along the axis and is
/// shared by every line; positions with mask 0 receive exactly zero weight.
template <class T>
Var<T> softmax(Var<T> x, int axis = 1, std::span<const std::uint8_t> mask = {}) {
  using namespace detail;
  if (axis != 0 && axis != 1) throw ShapeError("softmax axis must be 0 or 1, got " + std::to_string(axis));
  const Tensor<T>& xv = x.value();
  const std::size_t lines = axis == 1 ? xv.rows() : xv.cols();
  const std::size_t len = axis == 1 ? xv.cols() : xv.rows();
  if (!mask.empty() && mask.size() != len) {
    throw ShapeError("softmax mask has " + std::to_string(mask.size()) + " entries for axis length " +
                     std::to_string(len));
  }
  std::vector<std::uint8_t> keep(len, 1);
  if (!mask.empty()) std::copy(mask.begin(), mask.end(), keep.begin());
  if (std::none_of(keep.begin(), keep.end(), [](std::uint8_t m) { return m != 0; })) {
    throw NumericError("softmax over a fully masked line");
  }
  Tensor<T> out(xv.shape());
  const std::size_t stride_line = axis == 1 ? xv.cols() : 1;
  const std::size_t stride_pos = axis == 1 ? 1 : xv.cols();
  for (std::size_t l = 0; l < lines; ++l) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t p = 0; p < len; ++p) {
      if (keep[p]) mx = std::max(mx, xv[l * stride_line + p * stride_pos]);
    }
    T z = 0;
    for (std::size_t p = 0; p < len; ++p) {
      const std::size_t i = l * stride_line + p * stride_pos;
      out[i] = keep[p] ? std::exp(xv[i] - mx) : T{0};
      z += out[i];
    }
    for (std::size_t p = 0; p < len; ++p) out[l * stride_line + p * stride_pos] /= z;
  }
  return x.graph->emit(std::move(out), wants(x), [x, lines, len, stride_line, stride_pos](Tensor<T>& o) {
    std::span<T> gx = grad_of(x);
    std::span<const T> go = std::as_const(o).grad();
    for (std::size_t l = 0; l < lines; ++l) {
      T dot = 0;
      for (std::size_t p = 0; p < len; ++p) {
        const std::size_t i = l * stride_line + p * stride_pos;
        dot += go[i] * o[i];
      }
      for (std::size_t p = 0; p < len; ++p) {
        const std::size_t i = l * stride_line + p * stride_pos;
        gx[i] += o[i] * (go[i] - dot);
      }
    }
  });
}

/// Normalizes each row to zero mean and unit variance, then applies
/// gain and bias (each holding one value per column).
template <class T>
Var<T> layernorm(Var<T> x, Var<T> gain, Var<T> bias, T epsilon = T(1e-12)) {
  using namespace detail;
  same_graph(x, gain);
  same_graph(x, bias);
  if (!(epsilon > 0)) throw ShapeError("layernorm epsilon must be positive");
  const Tensor<T>& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (gain.value().size() != cols || bias.value().size() != cols) {
    throw ShapeError("layernorm gain/bias must have " + std::to_string(cols) + " values");
  }
  auto xhat = std::make_shared<std::vector<T>>(xv.size());
  auto inv_std = std::make_shared<std::vector<T>>(rows);
  Tensor<T> out(xv.shape());
  const T* gv = gain.value().data();
  const T* bv = bias.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv.data() + r * cols;
    T mean = 0;
    for (std::size_t c = 0; c < cols; ++c) mean += row[c];
    mean /= static_cast<T>(cols);
    T var = 0;
    for (std::size_t c = 0; c < cols; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= static_cast<T>(cols);
    const T is = T{1} / std::sqrt(var + epsilon);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < cols; ++c) {
      const T h = (row[c] - mean) * is;
      (*xhat)[r * cols + c] = h;
      out[r * cols + c] = h * gv[c] + bv[c];
    }
  }
  return x.graph->emit(std::move(out), any_grad({x, gain, bias}), [x, gain, bias, xhat, inv_std, rows, cols](Tensor<T>& o) {
    std::span<const T> go = std::as_const(o).grad();
    const T* gv = gain.value().data();
    if (wants(gain)) {
      std::span<T> gg = grad_of(gain);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) gg[c] += go[r * cols + c] * (*xhat)[r * cols + c];
    }
    if (wants(bias)) {
      std::span<T> gb = grad_of(bias);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) gb[c] += go[r * cols + c];
    }
    if (wants(x)) {
      std::span<T> gx = grad_of(x);
      const T n = static_cast<T>(cols);
      for (std::size_t r = 0; r < rows; ++r) {
        T sum_dh = 0, sum_dh_h = 0;
        for (std::size_t c = 0; c < cols; ++c) {
          const T dh = go[r * cols + c] * gv[c];
          sum_dh += dh;
          sum_dh_h += dh * (*xhat)[r * cols + c];
        }
        for (std::size_t c = 0; c < cols; ++c) {
          const T dh = go[r * cols + c] * gv[c];
          gx[r * cols + c] += (*inv_std)[r] / n * (n * dh - sum_dh - (*xhat)[r * cols + c] * sum_dh_h);
        }
      }
    }
  });
}

enum class Activation { kGelu, kRelu, kTanh };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::kGelu: return "gelu";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
  }
  return "?";
}

/// Exact (erf) GELU, ReLU or tanh.
template <class T>
Var<T> activate(Var<T> x, Activation kind) {
  using namespace detail;
  const Tensor<T>& xv = x.value();
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const T v = xv[i];
    switch (kind) {
      case Activation::kGelu: out[i] = T(0.5) * v * (T{1} + std::erf(v / std::numbers::sqrt2_v<T>)); break;
      case Activation::kRelu: out[i] = v > 0 ? v : T{0}; break;
      case Activation::kTanh: out[i] = std::tanh(v); break;
    }
  }
  return x.graph->emit(std::move(out), wants(x), [x, kind](Tensor<T>& o) {
    const Tensor<T>& xv = x.value();
    std::span<T> gx = grad_of(x);
    std::span<const T> go = std::as_const(o).grad();
    const T inv_sqrt_2pi = std::numbers::inv_sqrtpi_v<T> / std::numbers::sqrt2_v<T>;
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const T v = xv[i];
      T d = 0;
      switch (kind) {
        case Activation::kGelu:
          d = T(0.5) * (T{1} + std::erf(v / std::numbers::sqrt2_v<T>)) + v * inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
          break;
        case Activation::kRelu: d = v > 0 ? T{1} : T{0}; break;
        case Activation::kTanh: d = T{1} - o[i] * o[i]; break;
      }
      gx[i] += go[i] * d;
    }
  });
}

template <class T>
Var<T> gelu(Var<T> x) {
  return activate(x, Activation::kGelu);
}

template <class T>
Var<T> relu(Var<T> x) {
  return activate(x, Activation::kRelu);
}

/// Scales each row to unit Euclidean norm. A zero row has no direction and
/// is an error.
template <class T>
Var<T> l2_normalize_rows(Var<T> x) {
  using namespace detail;
  const Tensor<T>& xv = x.value();
  auto norms = std::make_shared<std::vector<T>>(xv.rows());
  Tensor<T> out(xv.shape());
  auto xm = mat(xv);
  auto om = mat(out);
  for (Eigen::Index r = 0; r < xm.rows(); ++r) {
    const T n = xm.row(r).norm();
    if (!(n > 0)) throw NumericError("cosine similarity of a zero vector (row " + std::to_string(r) + ")");
    (*norms)[static_cast<std::size_t>(r)] = n;
    om.row(r) = xm.row(r) / n;
  }
  return x.graph->emit(std::move(out), wants(x), [x, norms](Tensor<T>& o) {
    auto gx = gmat(x.graph->tensor(x));
    auto go = gmat(o);
    auto y = mat(std::as_const(o));
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const T d = y.row(r).dot(go.row(r));
      gx.row(r) += (go.row(r) - d * y.row(r)) / (*norms)[static_cast<std::size_t>(r)];
    }
  });
}

/// Row-wise cosine similarity of equally shaped a and b, shape [r x 1].
template <class T>
Var<T> cosine_similarity(Var<T> a, Var<T> b) {
  return row_sum(mul(l2_normalize_rows(a), l2_normalize_rows(b)));
}

/// All-pairs cosine similarity: [n x m] for x[n x D], y[m x D].
template <class T>
Var<T> cosine_matrix(Var<T> x, Var<T> y) {
  return matmul(l2_normalize_rows(x), l2_normalize_rows(y), Transpose::kYes);
}

/// Mean over rows of -log softmax(logits)[row, label[row]], shape [1].
template <class T>
Var<T> log_softmax_cross_entropy(Var<T> logits, std::span<const std::size_t> labels) {
  using namespace detail;
  const Tensor<T>& lv = logits.value();
  const std::size_t n = lv.rows(), c = lv.cols();
  if (labels.size() != n) {
    throw ShapeError("cross entropy got " + std::to_string(labels.size()) + " labels for " + std::to_string(n) + " rows");
  }
  auto probs = std::make_shared<std::vector<T>>(lv.size());
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  T loss = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (lab[r] >= c) throw ShapeError("label " + std::to_string(lab[r]) + " out of range for " + std::to_string(c) + " classes");
    const T* row = lv.data() + r * c;
    const T mx = *std::max_element(row, row + c);
    T z = 0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    const T log_z = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) (*probs)[r * c + j] = std::exp(row[j] - log_z);
    loss += log_z - row[lab[r]];
  }
  loss /= static_cast<T>(n);
  return logits.graph->emit(Tensor<T>::scalar(loss), wants(logits), [logits, probs, lab = std::move(lab), n, c](Tensor<T>& o) {
    std::span<T> gl = grad_of(logits);
    const T go = o.grad()[0] / static_cast<T>(n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < c; ++j) {
        gl[r * c + j] += go * ((*probs)[r * c + j] - (j == lab[r] ? T{1} : T{0}));
      }
    }
  });
}

/// Inverted dropout with a mask drawn from the graph's generator. Identity
/// when not training or when `rate` is zero.
template <class T>
Var<T> dropout(Var<T> x, T rate, bool training) {
  using namespace detail;
  if (!training || rate <= 0) return x;
  if (rate >= 1) throw ShapeError("dropout rate must be < 1");
  const Tensor<T>& xv = x.value();
  auto keep = std::make_shared<std::vector<T>>(xv.size());
  std::bernoulli_distribution coin(1.0 - static_cast<double>(rate));
  const T scale_kept = T{1} / (T{1} - rate);
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    (*keep)[i] = coin(x.graph->rng()) ? scale_kept : T{0};
    out[i] = xv[i] * (*keep)[i];
  }
  return x.graph->emit(std::move(out), wants(x), [x, keep](Tensor<T>& o) {
    std::span<T> gx = grad_of(x);
    std::span<const T> go = std::as_const(o).grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * (*keep)[i];
  });
}

}  // namespace relmatch::ad
