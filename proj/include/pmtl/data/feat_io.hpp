// pmtl/data/feat_io.hpp

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

#include "pmtl/common.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace pmtl {

/// Archive decoding failure. `kind` separates the failure classes; for
/// truncation `offset` is the byte offset at which data ran out.
class FormatError : public Error {
 public:
  enum class Kind { bad_magic, truncated, dimension_overflow, io };

  FormatError(Kind kind, const std::string& msg, std::uint64_t offset = 0)
      : Error(msg), kind_(kind), offset_(offset) {}

  Kind kind() const { return kind_; }
  std::uint64_t offset() const { return offset_; }

 private:
  Kind kind_;
  std::uint64_t offset_;
};

inline constexpr char kFeatMagic[] = "FEAT1";
inline constexpr std::size_t kFeatMagicLen = 5;
/// Largest element count an archive may declare (2^32 reals, 16 GiB).
inline constexpr std::uint64_t kMaxArchiveElements = std::uint64_t{1} << 32;

namespace detail {

inline std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big)
    v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  return v;
}

inline void put_u32(std::string& buf, std::uint32_t v) {
  v = to_le(v);
  char bytes[4];
  std::memcpy(bytes, &v, 4);
  buf.append(bytes, 4);
}

inline void put_f32(std::string& buf, float f) { put_u32(buf, std::bit_cast<std::uint32_t>(f)); }

/// Cursor over an in-memory byte buffer with truncation reporting.
class ByteReader {
 public:
  ByteReader(const std::string& data, std::string origin) : data_(data), origin_(std::move(origin)) {}

  void need(std::size_t n) const {
    if (data_.size() - pos_ < n)
      throw FormatError(FormatError::Kind::truncated,
                        origin_ + ": truncated at byte offset " + std::to_string(data_.size()) + " (needed " +
                            std::to_string(n) + " more bytes at offset " + std::to_string(pos_) + ")",
                        data_.size());
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, data_.data() + pos_, 4);
    pos_ += 4;
    return to_le(v);
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  const std::string& origin() const { return origin_; }

 private:
  const std::string& data_;
  std::string origin_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::io, "cannot open '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::io, "cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatError::Kind::io, "write failed for '" + path + "'");
}

}  // namespace detail

template <class T>
std::string encode_archive(const Matrix<T>& x) {
  std::string buf(kFeatMagic, kFeatMagicLen);
  detail::put_u32(buf, static_cast<std::uint32_t>(x.rows()));
  detail::put_u32(buf, static_cast<std::uint32_t>(x.cols()));
  buf.reserve(buf.size() + 4 * static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) detail::put_f32(buf, static_cast<float>(x.data()[i]));
  return buf;
}

inline Matrix<float> decode_archive(const std::string& bytes, const std::string& origin = "<buffer>") {
  detail::ByteReader r(bytes, origin);
  if (bytes.size() < kFeatMagicLen || bytes.compare(0, kFeatMagicLen, kFeatMagic) != 0) {
    if (bytes.size() < kFeatMagicLen && std::string(kFeatMagic).compare(0, bytes.size(), bytes) == 0)
      r.need(kFeatMagicLen);
    throw FormatError(FormatError::Kind::bad_magic, origin + ": bad magic (expected FEAT1)");
  }
  r.bytes(kFeatMagicLen);
  const std::uint64_t rows = r.u32();
  const std::uint64_t cols = r.u32();
  if (rows * cols > kMaxArchiveElements)
    throw FormatError(FormatError::Kind::dimension_overflow,
                      origin + ": declared size " + std::to_string(rows) + "x" + std::to_string(cols) +
                          " exceeds the archive limit");
  r.need(static_cast<std::size_t>(rows * cols * 4));
  Matrix<float> x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = r.f32();
  if (r.remaining() != 0) throw FormatError(FormatError::Kind::io, origin + ": trailing bytes after matrix data");
  return x;
}

template <class T>
void write_archive(const std::string& path, const Matrix<T>& x) {
  detail::write_file(path, encode_archive(x));
}

inline Matrix<float> read_archive(const std::string& path) { return decode_archive(detail::read_file(path), path); }

/// Embedding archive: FEAT1 matrix at `path` plus one id per line in `path.ids`.
template <class T>
void write_embeddings(const std::string& path, const std::vector<std::string>& ids, const Matrix<T>& e) {
  if (static_cast<Eigen::Index>(ids.size()) != e.rows())
    throw DimensionError("write_embeddings: " + std::to_string(ids.size()) + " ids for " +
                         std::to_string(e.rows()) + " rows");
  write_archive(path, e);
  std::string text;
  for (const auto& id : ids) text += id + "\n";
  detail::write_file(path + ".ids", text);
}

struct EmbeddingArchive {
  std::vector<std::string> ids;
  Matrix<float> vectors;
};

inline EmbeddingArchive read_embeddings(const std::string& path) {
  EmbeddingArchive a;
  a.vectors = read_archive(path);
  std::istringstream in(detail::read_file(path + ".ids"));
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) a.ids.push_back(line);
  if (static_cast<Eigen::Index>(a.ids.size()) != a.vectors.rows())
    throw DimensionError(path + ": id list has " + std::to_string(a.ids.size()) + " entries for " +
                         std::to_string(a.vectors.rows()) + " embeddings");
  return a;
}

}  // namespace pmtl
