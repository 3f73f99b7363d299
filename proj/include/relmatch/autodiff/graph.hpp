// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <string>
#include <utility>

#include "relmatch/autodiff/tensor.hpp"

namespace relmatch::ad {

template <class T>
class Graph;

/// Handle to a value recorded on a Graph.
template <class T>
struct Var {
  Graph<T>* graph = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return graph->value(*this); }
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

enum class GradMode { kRecord, kInference };

/// Computation tape. Nodes are appended in execution order, which is a
/// topological order of the data flow, so backward replays them in reverse.
///
/// Leaves bound with `param()` alias an external tensor (a model parameter);
/// backward accumulates into that tensor's gradient slot. A graph is owned
/// by one thread.
template <class T>
class Graph {
 public:
  explicit Graph(GradMode mode = GradMode::kRecord, std::uint64_t seed = 0) : mode_(mode), rng_(seed) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return mode_ == GradMode::kRecord; }
  std::mt19937_64& rng() { return rng_; }
  std::size_t size() const { return nodes_.size(); }

  Var<T> constant(Tensor<T> value) { return emit(std::move(value), false, {}); }

  /// Binds a parameter tensor. The tensor must outlive the graph.
  Var<T> param(Tensor<T>& tensor) {
    Node& n = nodes_.emplace_back();
    n.tensor = &tensor;
    n.requires_grad = recording();
    return {this, nodes_.size() - 1};
  }

  const Tensor<T>& value(Var<T> v) const { return *node(v).tensor; }
  Tensor<T>& tensor(Var<T> v) { return *node(v).tensor; }
  bool requires_grad(Var<T> v) const { return node(v).requires_grad; }
  std::span<T> grad(Var<T> v) { return node(v).tensor->grad(); }

  /// Records an op output. `backward` receives the output tensor, reads its
  /// gradient and accumulates into the inputs; it is dropped when nothing upstream needs
  /// a gradient or the graph is in inference mode.
  Var<T> emit(Tensor<T> value, bool requires_grad, std::function<void(Tensor<T>&)> backward) {
    if (!value.all_finite()) throw NumericError("non-finite value produced by forward op");
    Node& n = nodes_.emplace_back();
    n.owned = std::move(value);
    n.tensor = &n.owned;
    n.requires_grad = requires_grad && recording();
    if (n.requires_grad) n.backward = std::move(backward);
    return {this, nodes_.size() - 1};
  }

  /// Seeds d(root)/d(root) = 1 and replays the tape in reverse. Returns the
  /// number of op closures executed.
  std::size_t backward(Var<T> root) {
    if (!recording()) throw Error("backward() on an inference-mode graph");
    if (consumed_) throw Error("backward() called twice on the same graph");
    if (value(root).size() != 1) throw ShapeError("backward() needs a scalar root, got " + to_string(root.shape()));
    consumed_ = true;
    Node& r = node(root);
    if (!r.requires_grad) return 0;
    r.tensor->grad()[0] += T{1};
    std::size_t visited = 0;
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && n.tensor->has_grad()) {
        n.backward(*n.tensor);
        ++visited;
      }
    }
    return visited;
  }

 private:
  struct Node {
    Tensor<T> owned;
    Tensor<T>* tensor = nullptr;
    bool requires_grad = false;
    std::function<void(Tensor<T>&)> backward;
  };

  Node& node(Var<T> v) { return nodes_.at(v.id); }
  const Node& node(Var<T> v) const { return nodes_.at(v.id); }

  GradMode mode_;
  std::mt19937_64 rng_;
  std::deque<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace relmatch::ad
