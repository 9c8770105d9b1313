#pragma once

// Little-endian byte encoding helpers shared by the PLM1 and PLMC codecs.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "protohead/errors.hpp"

namespace protohead::detail {

class ByteWriter {
 public:
  void put_bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

  template <typename U>
  void put_uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  void put_u32(std::uint32_t v) { put_uint(v); }
  void put_u64(std::uint64_t v) { put_uint(v); }
  void put_f32(float v) { put_uint(std::bit_cast<std::uint32_t>(v)); }
  void put_f64(double v) { put_uint(std::bit_cast<std::uint64_t>(v)); }

  void put_f64s(std::span<const double> vs) {
    for (double v : vs) put_f64(v);
  }

  std::vector<std::uint8_t>& buffer() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      fail(ErrorKind::kFormat, std::string("truncated payload at offset ") + std::to_string(pos_) + " reading " +
                                   what + " (need " + std::to_string(n) + " bytes, have " +
                                   std::to_string(remaining()) + ")");
    }
  }

  std::string get_bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  template <typename U>
  U get_uint(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }

  std::uint32_t get_u32(const char* what) { return get_uint<std::uint32_t>(what); }
  std::uint64_t get_u64(const char* what) { return get_uint<std::uint64_t>(what); }
  float get_f32(const char* what) { return std::bit_cast<float>(get_u32(what)); }
  double get_f64(const char* what) { return std::bit_cast<double>(get_u64(what)); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace protohead::detail
