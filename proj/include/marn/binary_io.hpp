#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "marn/error.hpp"

namespace marn::io {

// Little-endian append-only byte buffer.
class ByteWriter {
 public:
  void bytes(std::string_view raw) { buf_.insert(buf_.end(), raw.begin(), raw.end()); }
  void u32(std::uint32_t v) { put(v); }
  void i32(std::int32_t v) { put(static_cast<std::uint32_t>(v)); }
  void u64(std::uint64_t v) { put(v); }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put(bits);
  }
  void string(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  // Narrows each value to IEEE-754 binary32.
  void f32_run(std::span<const double> values) {
    for (double v : values) f32(static_cast<float>(v));
  }

  const std::vector<char>& buffer() const noexcept { return buf_; }
  std::size_t size() const noexcept { return buf_.size(); }

 private:
  template <typename U>
  void put(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::vector<char> buf_;
};

// Bounds-checked little-endian reader; running past the end raises CorruptionError
// with the offset at which the read started.
class ByteReader {
 public:
  ByteReader(std::span<const char> data, std::string source) : data_(data), source_(std::move(source)) {}

  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string out(data_.data() + pos_, n);
    pos_ += n;
    return out;
  }
  std::uint32_t u32(const char* what) { return get<std::uint32_t>(what); }
  std::int32_t i32(const char* what) { return static_cast<std::int32_t>(get<std::uint32_t>(what)); }
  std::uint64_t u64(const char* what) { return get<std::uint64_t>(what); }
  float f32(const char* what) {
    const std::uint32_t bits = get<std::uint32_t>(what);
    float v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::string string(const char* what) {
    const std::uint32_t n = u32(what);
    return bytes(n, what);
  }
  // Reads n binary32 values, widened exactly to double.
  std::vector<double> f32_run(std::size_t n, const char* what) {
    need(n * 4, what);
    std::vector<double> out(n);
    for (auto& v : out) v = static_cast<double>(f32(what));
    return out;
  }

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  const std::string& source() const noexcept { return source_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (n > data_.size() - pos_)
      throw CorruptionError(source_ + ": truncated while reading " + what, pos_);
  }
  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }

  std::span<const char> data_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::vector<char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const char> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const char> bytes);
std::string hex64(std::uint64_t value);

}  // namespace marn::io
