// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "relmatch/autodiff/tensor.hpp"

namespace relmatch::ad {

/// A trainable tensor together with its AdamW moment estimates.
template <class T>
struct Parameter {
  Tensor<T> tensor;
  std::vector<T> first_moment;
  std::vector<T> second_moment;
};

/// Name-addressed collection of every trainable tensor in a model. Iteration
/// order is lexicographic by name, which fixes checksum and file layout.
template <class T>
class ParamStore {
 public:
  Tensor<T>& add(const std::string& name, Tensor<T> value) {
    auto [it, inserted] = params_.try_emplace(name);
    if (!inserted) throw Error("duplicate parameter '" + name + "'");
    it->second.tensor = std::move(value);
    return it->second.tensor;
  }

  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  Tensor<T>& at(const std::string& name) { return entry(name).tensor; }
  const Tensor<T>& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
    return it->second.tensor;
  }

  Parameter<T>& entry(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
    return it->second;
  }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += p.tensor.size();
    return n;
  }

  std::vector<std::string> names(const std::string& prefix = "") const {
    std::vector<std::string> out;
    for (const auto& [name, _] : params_) {
      if (name.starts_with(prefix)) out.push_back(name);
    }
    return out;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void clear_grads() {
    for (auto& [_, p] : params_) p.tensor.clear_grad();
  }

  /// FNV-1a over names, shapes and value bits.
  std::uint64_t checksum() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* data, std::size_t n) {
      const auto* b = static_cast<const unsigned char*>(data);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 1099511628211ULL;
      }
    };
    for (const auto& [name, p] : params_) {
      mix(name.data(), name.size());
      for (std::size_t d : p.tensor.shape()) {
        const auto d64 = static_cast<std::uint64_t>(d);
        mix(&d64, sizeof d64);
      }
      for (T v : p.tensor.values()) {
        const double dv = static_cast<double>(v);
        mix(&dv, sizeof dv);
      }
    }
    return h;
  }

  /// Deep copy of values only; moments and gradients are dropped.
  ParamStore snapshot() const {
    ParamStore out;
    for (const auto& [name, p] : params_) out.add(name, Tensor<T>(p.tensor.shape(), {p.tensor.values().begin(), p.tensor.values().end()}));
    return out;
  }

  /// Overwrites values from a store with identical names and shapes.
  void assign(const ParamStore& other) {
    if (other.size() != size()) throw Error("parameter stores differ in size");
    for (auto& [name, p] : params_) {
      const Tensor<T>& src = other.at(name);
      if (src.shape() != p.tensor.shape()) throw ShapeError("shape mismatch assigning '" + name + "'");
      std::copy(src.values().begin(), src.values().end(), p.tensor.values().begin());
    }
  }

  template <class U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& [name, p] : params_) {
      std::vector<U> vals(p.tensor.size());
      for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<U>(p.tensor[i]);
      out.add(name, Tensor<U>(p.tensor.shape(), std::move(vals)));
    }
    return out;
  }

 private:
  std::map<std::string, Parameter<T>> params_;
};

/// Normal(0, stddev) tensor drawn from `rng`.
template <class T>
Tensor<T> random_normal(Shape shape, double stddev, std::mt19937_64& rng) {
  Tensor<T> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (T& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

template <class T>
Tensor<T> filled(Shape shape, T value) {
  Tensor<T> t(std::move(shape));
  std::fill(t.values().begin(), t.values().end(), value);
  return t;
}

/// Checkpoint file: magic "RMCK", u32 version, u64 count, then per tensor
/// u32 name length, name bytes, u32 rank, u64 dims, little-endian f64 values.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ParamStore<double>& params, const std::filesystem::path& path);
ParamStore<double> load_checkpoint(const std::filesystem::path& path);

}  // namespace relmatch::ad
