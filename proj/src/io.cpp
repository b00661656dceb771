#include "wtvf/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace wtvf {

namespace {

constexpr char kMagic[4] = {'F', 'S', 'T', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
  return v;
}

double get_f64(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(in[at + i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

std::vector<std::uint8_t> encode_fst(const FrameSeries& series, const std::optional<std::string>& metadata) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + 8 * series.values().size() + (metadata ? metadata->size() + 4 : 0));
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(series.height()));
  put_u32(out, static_cast<std::uint32_t>(series.width()));
  put_u32(out, static_cast<std::uint32_t>(series.frames()));
  for (double v : series.values()) put_f64(out, v);
  if (metadata) {
    put_u32(out, static_cast<std::uint32_t>(metadata->size()));
    out.insert(out.end(), metadata->begin(), metadata->end());
  }
  return out;
}

FrameStack decode_fst(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) throw Error(ErrorCode::MalformedFile, "file shorter than the FST1 header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error(ErrorCode::MalformedFile, "bad magic, expected FST1");
  const std::uint64_t h = get_u32(bytes, 4);
  const std::uint64_t w = get_u32(bytes, 8);
  const std::uint64_t t = get_u32(bytes, 12);
  const std::uint64_t count = h * w * t;
  const std::uint64_t payload_end = 16 + 8 * count;
  if (bytes.size() < payload_end) {
    throw Error(ErrorCode::MalformedFile, "payload truncated: header implies " + std::to_string(count) + " values");
  }
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = get_f64(bytes, 16 + 8 * i);

  FrameStack stack;
  const std::size_t rest = bytes.size() - payload_end;
  if (rest > 0) {
    if (rest < 4) throw Error(ErrorCode::MalformedFile, "trailing bytes too short for a metadata length");
    const std::uint32_t len = get_u32(bytes, payload_end);
    if (rest != 4 + static_cast<std::size_t>(len)) {
      throw Error(ErrorCode::MalformedFile, "metadata length does not match trailing bytes");
    }
    const auto* first = reinterpret_cast<const char*>(bytes.data() + payload_end + 4);
    stack.metadata = std::string(first, first + len);
  }
  try {
    stack.series = FrameSeries(h, w, t, std::move(values));
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedFile, e.what());
  }
  return stack;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed for " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_fst(const std::filesystem::path& path, const FrameSeries& series, const std::optional<std::string>& metadata) {
  write_file(path, encode_fst(series, metadata));
}

FrameStack read_fst(const std::filesystem::path& path) { return decode_fst(read_file(path)); }

std::vector<std::uint8_t> encode_pgm(std::size_t width, std::size_t height, std::span<const std::uint8_t> pixels) {
  if (pixels.size() != width * height) throw Error(ErrorCode::LengthMismatch, "PGM pixel count");
  const std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> pixels) {
  write_file(path, encode_pgm(width, height, pixels));
}

}  // namespace wtvf
