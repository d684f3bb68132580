// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <ostream>
#include <istream>
#include <string>
#include <vector>

#include "m3i/error.hpp"

namespace m3i {

// Little-endian primitive io. All on-disk formats go through these helpers
// so byte layout is fixed regardless of host.

inline void write_u8(std::ostream& os, uint8_t v) { os.put(static_cast<char>(v)); }

inline void write_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline void write_u64(std::ostream& os, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline void write_f64(std::ostream& os, double v) {
  uint64_t u;
  std::memcpy(&u, &v, 8);
  write_u64(os, u);
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline uint8_t read_u8(std::istream& is) {
  int c = is.get();
  if (c < 0) throw Error("binio: unexpected end of stream");
  return static_cast<uint8_t>(c);
}

inline uint32_t read_u32(std::istream& is) {
  char b[4];
  is.read(b, 4);
  if (is.gcount() != 4) throw Error("binio: unexpected end of stream");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

inline uint64_t read_u64(std::istream& is) {
  char b[8];
  is.read(b, 8);
  if (is.gcount() != 8) throw Error("binio: unexpected end of stream");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

inline double read_f64(std::istream& is) {
  uint64_t u = read_u64(is);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

inline std::string read_string(std::istream& is) {
  uint32_t n = read_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (static_cast<uint32_t>(is.gcount()) != n) throw Error("binio: unexpected end of stream");
  return s;
}

}  // namespace m3i
