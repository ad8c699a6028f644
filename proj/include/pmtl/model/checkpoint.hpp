// pmtl/model/checkpoint.hpp

// Copyright 2026  The pmtl Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "pmtl/data/feat_io.hpp"
#include "pmtl/model/network.hpp"

#include <string>
#include <utility>
#include <vector>

namespace pmtl {

inline constexpr char kCheckpointMagic[] = "PMTL1";

/// On-disk model: "PMTL1", u32 length + `key = value` text block, u32 tensor
/// count, then per tensor u32 name length, name bytes, u32 rows, u32 cols and
/// rows*cols little-endian float32 values, row-major. All integers are
/// little-endian.
struct Checkpoint {
  KeyValueConfig meta;
  std::vector<std::pair<std::string, Matrix<float>>> tensors;

  const Matrix<float>* find(const std::string& name) const {
    for (const auto& [n, m] : tensors)
      if (n == name) return &m;
    return nullptr;
  }
};

inline std::string encode_checkpoint(const Checkpoint& ck) {
  std::string buf(kCheckpointMagic, 5);
  const std::string text = ck.meta.to_text();
  detail::put_u32(buf, static_cast<std::uint32_t>(text.size()));
  buf += text;
  detail::put_u32(buf, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& [name, m] : ck.tensors) {
    detail::put_u32(buf, static_cast<std::uint32_t>(name.size()));
    buf += name;
    detail::put_u32(buf, static_cast<std::uint32_t>(m.rows()));
    detail::put_u32(buf, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) detail::put_f32(buf, m.data()[i]);
  }
  return buf;
}

inline Checkpoint decode_checkpoint(const std::string& bytes, const std::string& origin = "<checkpoint>") {
  if (bytes.size() < 5 || bytes.compare(0, 5, kCheckpointMagic) != 0)
    throw FormatError(FormatError::Kind::bad_magic, origin + ": bad magic (expected PMTL1)");
  detail::ByteReader r(bytes, origin);
  r.bytes(5);
  const std::uint32_t text_len = r.u32();
  Checkpoint ck;
  ck.meta = KeyValueConfig::parse(r.bytes(text_len), origin);
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    std::string name = r.bytes(name_len);
    const std::uint64_t rows = r.u32(), cols = r.u32();
    if (rows * cols > kMaxArchiveElements)
      throw FormatError(FormatError::Kind::dimension_overflow, origin + ": tensor '" + name + "' too large");
    r.need(static_cast<std::size_t>(rows * cols * 4));
    Matrix<float> m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = r.f32();
    ck.tensors.emplace_back(std::move(name), std::move(m));
  }
  if (r.remaining() != 0) throw FormatError(FormatError::Kind::io, origin + ": trailing bytes after last tensor");
  return ck;
}

inline void write_checkpoint(const std::string& path, const Checkpoint& ck) {
  detail::write_file(path, encode_checkpoint(ck));
}

inline Checkpoint read_checkpoint(const std::string& path) {
  return decode_checkpoint(detail::read_file(path), path);
}

/// Network config first, then `extra` keys, then every parameter value in
/// store order.
template <class T>
Checkpoint to_checkpoint(const ModelParams<T>& model, const KeyValueConfig& extra = {}) {
  Checkpoint ck;
  ck.meta = model.config.to_kv();
  for (const auto& [k, v] : extra.entries()) ck.meta.set(k, v);
  for (const auto& p : model.store) ck.tensors.emplace_back(p.name, p.value.template cast<float>());
  return ck;
}

/// Rebuilds the parameter layout from the stored config and fills it from
/// the stored tensors. Keys the network config does not own stay unconsumed
/// in `ck.meta`.
template <class T>
ModelParams<T> from_checkpoint(const Checkpoint& ck) {
  NetworkConfig cfg;
  cfg.read_kv(ck.meta);
  ModelParams<T> model = build<T>(cfg, 0);
  for (auto& p : model.store) {
    const Matrix<float>* m = ck.find(p.name);
    if (!m) throw FormatError(FormatError::Kind::io, "checkpoint is missing parameter '" + p.name + "'");
    if (m->rows() != p.value.rows() || m->cols() != p.value.cols())
      throw DimensionError("checkpoint parameter '" + p.name + "' is " + shape_str(m->rows(), m->cols()) +
                           ", model expects " + shape_str(p.value.rows(), p.value.cols()));
    p.value = m->template cast<T>();
  }
  return model;
}

template <class T>
void save_model(const std::string& path, const ModelParams<T>& model, const KeyValueConfig& extra = {}) {
  write_checkpoint(path, to_checkpoint(model, extra));
}

template <class T>
ModelParams<T> load_model(const std::string& path) {
  return from_checkpoint<T>(read_checkpoint(path));
}

}  // namespace pmtl
