// Copyright 2026 The GPDP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GPDP_BINARY_IO_H_
#define GPDP_BINARY_IO_H_

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>

#include <Eigen/Core>

#include "gpdp/errors.h"

// Little-endian primitives shared by checkpoint and snapshot formats.
namespace gpdp::binary {

inline void WriteU32(std::ostream& out, std::uint32_t value) {
  char bytes[4];
  for (int k = 0; k < 4; ++k) bytes[k] = static_cast<char>((value >> (8 * k)) & 0xFF);
  out.write(bytes, 4);
}

inline void WriteF64(std::ostream& out, double value) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  char bytes[8];
  for (int k = 0; k < 8; ++k) bytes[k] = static_cast<char>((bits >> (8 * k)) & 0xFF);
  out.write(bytes, 8);
}

inline std::uint32_t ReadU32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
    throw IoError("unexpected end of stream reading u32");
  }
  std::uint32_t value = 0;
  for (int k = 0; k < 4; ++k) value |= static_cast<std::uint32_t>(bytes[k]) << (8 * k);
  return value;
}

inline double ReadF64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
    throw IoError("unexpected end of stream reading f64");
  }
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(bytes[k]) << (8 * k);
  return std::bit_cast<double>(bits);
}

// Row-major matrix payload.
template <typename Matrix>
void WriteMatrix(std::ostream& out, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) WriteF64(out, m(r, c));
  }
}

template <typename Matrix>
void ReadMatrix(std::istream& in, Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = ReadF64(in);
  }
}

}  // namespace gpdp::binary

#endif  // GPDP_BINARY_IO_H_
