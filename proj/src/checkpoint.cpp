// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include "m3i/nn/checkpoint.hpp"

#include <cstdio>
#include <fstream>

#include "m3i/binio.hpp"
#include "m3i/error.hpp"

namespace m3i::nn {

namespace {

constexpr char kMagic[8] = {'M', '3', 'I', 'C', 'K', 'P', 'T', '\n'};

void write_matrices(std::ostream& os,
                    const std::vector<std::pair<std::string, Eigen::MatrixXd>>& ms) {
  write_u32(os, static_cast<uint32_t>(ms.size()));
  for (const auto& [name, m] : ms) {
    write_string(os, name);
    write_u32(os, static_cast<uint32_t>(m.rows()));
    write_u32(os, static_cast<uint32_t>(m.cols()));
    for (long i = 0; i < m.rows(); ++i)
      for (long j = 0; j < m.cols(); ++j) write_f64(os, m(i, j));
  }
}

std::vector<std::pair<std::string, Eigen::MatrixXd>> read_matrices(std::istream& is) {
  const uint32_t n = read_u32(is);
  std::vector<std::pair<std::string, Eigen::MatrixXd>> out;
  out.reserve(n);
  for (uint32_t k = 0; k < n; ++k) {
    std::string name = read_string(is);
    const uint32_t r = read_u32(is), c = read_u32(is);
    Eigen::MatrixXd m(r, c);
    for (uint32_t i = 0; i < r; ++i)
      for (uint32_t j = 0; j < c; ++j) m(i, j) = read_f64(is);
    out.emplace_back(std::move(name), std::move(m));
  }
  return out;
}

}  // namespace

std::vector<std::pair<std::string, Eigen::MatrixXd>> Checkpoint::snapshot(
    const ParamStore& store) {
  std::vector<std::pair<std::string, Eigen::MatrixXd>> out;
  out.reserve(store.size());
  for (const auto& [name, var] : store.items()) out.emplace_back(name, var.value());
  return out;
}

void Checkpoint::restore(ParamStore& store,
                         const std::vector<std::pair<std::string, Eigen::MatrixXd>>& values) {
  if (values.size() != store.size())
    throw IncompatibleCheckpoint("parameter count differs from model");
  for (size_t i = 0; i < values.size(); ++i) {
    auto& [sname, svar] = store.items()[i];
    const auto& [vname, vmat] = values[i];
    if (sname != vname) throw IncompatibleCheckpoint("parameter name mismatch: " + vname);
    if (svar.rows() != vmat.rows() || svar.cols() != vmat.cols())
      throw IncompatibleCheckpoint("parameter shape mismatch: " + vname);
    svar.value_mut() = vmat;
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DiskWriteError("cannot open " + tmp);
    os.write(kMagic, sizeof(kMagic));
    write_u32(os, Checkpoint::kVersion);
    write_string(os, ckpt.method_config_text);
    write_u64(os, ckpt.step);
    write_matrices(os, ckpt.params);
    write_matrices(os, ckpt.ema_params);
    write_matrices(os, ckpt.opt_m);
    write_matrices(os, ckpt.opt_v);
    write_u32(os, static_cast<uint32_t>(ckpt.scalars.size()));
    for (const auto& [k, v] : ckpt.scalars) {
      write_string(os, k);
      write_f64(os, v);
    }
    write_u32(os, static_cast<uint32_t>(ckpt.rng_state.size()));
    for (uint64_t v : ckpt.rng_state) write_u64(os, v);
    if (!os) throw DiskWriteError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw DiskWriteError("rename failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IncompatibleCheckpoint("cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (is.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0)
    throw IncompatibleCheckpoint("bad magic in " + path);
  Checkpoint ckpt;
  const uint32_t version = read_u32(is);
  if (version != Checkpoint::kVersion)
    throw IncompatibleCheckpoint("unsupported checkpoint version " + std::to_string(version));
  ckpt.method_config_text = read_string(is);
  ckpt.step = read_u64(is);
  ckpt.params = read_matrices(is);
  ckpt.ema_params = read_matrices(is);
  ckpt.opt_m = read_matrices(is);
  ckpt.opt_v = read_matrices(is);
  const uint32_t ns = read_u32(is);
  for (uint32_t i = 0; i < ns; ++i) {
    std::string k = read_string(is);
    ckpt.scalars[k] = read_f64(is);
  }
  const uint32_t nr = read_u32(is);
  ckpt.rng_state.resize(nr);
  for (uint32_t i = 0; i < nr; ++i) ckpt.rng_state[i] = read_u64(is);
  return ckpt;
}

}  // namespace m3i::nn
