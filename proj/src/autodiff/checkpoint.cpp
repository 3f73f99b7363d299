// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cstring>
#include <fstream>

#include "relmatch/autodiff/params.hpp"
#include "relmatch/io/binary.hpp"

namespace relmatch::ad {

namespace {
constexpr char kMagic[4] = {'R', 'M', 'C', 'K'};
}  // namespace

void save_checkpoint(const ParamStore<double>& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  io::BinaryWriter w(out);
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u64(params.size());
  for (const auto& [name, p] : params) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(p.tensor.shape().size()));
    for (std::size_t d : p.tensor.shape()) w.u64(d);
    for (double v : p.tensor.values()) w.f64(v);
  }
  if (!out) throw DataError("write failed for checkpoint " + path.string());
}

ParamStore<double> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  io::BinaryReader r(in, path.string());
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw DataError(path.string() + ": not a checkpoint file");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  ParamStore<double> params;
  const std::uint64_t count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) throw DataError(path.string() + ": bad rank for '" + name + "'");
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    std::vector<double> values(numel(shape));
    for (double& v : values) v = r.f64();
    params.add(name, Tensor<double>(std::move(shape), std::move(values)));
  }
  r.expect_eof();
  return params;
}

}  // namespace relmatch::ad
