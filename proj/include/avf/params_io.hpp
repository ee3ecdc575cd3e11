#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>

#include "avf/synthdata.hpp"
#include "avf/tape.hpp"

namespace avf {

// AVPM layout, little-endian:
//   "AVPM" | u32 version | u32 count | count × { u32 name_len | name | u32 rows | u32 cols | rows·cols × f64 }
// Values are stored row-major as raw IEEE-754 bits, so a save/load round trip is exact.

inline constexpr std::array<char, 4> kAvpmMagic{'A', 'V', 'P', 'M'};
inline constexpr std::uint32_t kAvpmVersion = 1;

inline std::string encode_params(const ModelParams<double>& params) {
  std::string out(kAvpmMagic.begin(), kAvpmMagic.end());
  detail::put_u32(out, kAvpmVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    detail::put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    detail::put_u32(out, static_cast<std::uint32_t>(p.value.rows()));
    detail::put_u32(out, static_cast<std::uint32_t>(p.value.cols()));
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const auto bits = std::bit_cast<std::uint64_t>(p.value[i]);
      for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
    }
  }
  return out;
}

/// Overwrite the values of `params` (already laid out for the configured model)
/// from an AVPM payload. Names and shapes must match one to one.
inline void decode_params(const std::string& in, ModelParams<double>& params) {
  std::size_t off = 0;
  auto need = [&](std::size_t n) {
    if (in.size() - off < n) throw FormatError("AVPM: truncated", off);
  };
  need(12);
  if (in.compare(0, 4, std::string(kAvpmMagic.begin(), kAvpmMagic.end())) != 0) throw FormatError("AVPM: bad magic", 0);
  if (detail::get_u32(in, 4) != kAvpmVersion) throw FormatError("AVPM: unsupported version", 4);
  const std::uint32_t count = detail::get_u32(in, 8);
  off = 12;
  if (count != params.size()) {
    throw ConfigError("parameter file holds " + std::to_string(count) + " tensors but the configured model has " +
                      std::to_string(params.size()));
  }
  for (auto& p : params) {
    need(4);
    const std::uint32_t len = detail::get_u32(in, off);
    off += 4;
    need(len);
    const std::string name = in.substr(off, len);
    off += len;
    if (name != p.name) throw ConfigError("parameter file has '" + name + "' where the model expects '" + p.name + "'");
    need(8);
    const std::uint32_t rows = detail::get_u32(in, off), cols = detail::get_u32(in, off + 4);
    off += 8;
    if (rows != p.value.rows() || cols != p.value.cols()) {
      throw ConfigError("parameter '" + name + "' is " + std::to_string(rows) + "x" + std::to_string(cols) +
                        " in the file but " + std::to_string(p.value.rows()) + "x" + std::to_string(p.value.cols()) +
                        " in the model");
    }
    need(std::size_t{8} * rows * cols);
    for (std::size_t i = 0; i < p.value.size(); ++i, off += 8) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[off + b])) << (8 * b);
      p.value[i] = std::bit_cast<double>(bits);
    }
  }
  if (off != in.size()) throw FormatError("AVPM: trailing bytes", off);
}

inline void save_params(const std::filesystem::path& path, const ModelParams<double>& params) {
  detail::write_file(path, encode_params(params));
}

inline void load_params(const std::filesystem::path& path, ModelParams<double>& params) {
  if (!std::filesystem::exists(path)) throw IoError("no saved parameters at '" + path.string() + "'");
  decode_params(detail::read_file(path), params);
}

} // namespace avf
