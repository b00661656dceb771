#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wtvf/core.hpp"

namespace wtvf {

/// FST1 layout (all little-endian):
///   "FST1" | u32 height | u32 width | u32 frames |
///   f64 payload[frames][height][width] |
///   optional: u32 length | length bytes of UTF-8 JSON metadata
struct FrameStack {
  FrameSeries series;
  std::optional<std::string> metadata;
};

std::vector<std::uint8_t> encode_fst(const FrameSeries& series, const std::optional<std::string>& metadata = {});
/// Throws MalformedFile on a bad magic, short payload or trailing garbage.
FrameStack decode_fst(std::span<const std::uint8_t> bytes);

void write_fst(const std::filesystem::path& path, const FrameSeries& series,
               const std::optional<std::string>& metadata = {});
FrameStack read_fst(const std::filesystem::path& path);

/// Binary PGM (P5), 8-bit: "P5\n<w> <h>\n255\n" followed by w*h bytes.
std::vector<std::uint8_t> encode_pgm(std::size_t width, std::size_t height, std::span<const std::uint8_t> pixels);
void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> pixels);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace wtvf
