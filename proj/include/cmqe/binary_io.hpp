#pragma once

// Little-endian primitive encoding shared by the cache and model formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "cmqe/error.hpp"

namespace cmqe::io {

template <typename T>
concept Scalar = std::is_integral_v<T> || std::is_floating_point_v<T>;

template <Scalar T>
inline void append_le(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
            std::conditional_t<sizeof(T) == 4, std::uint32_t,
            std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
  U bits;
  std::memcpy(&bits, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
  }
}

inline void append_bytes(std::string& out, std::string_view bytes) {
  out.append(bytes.data(), bytes.size());
}

// Bounds-checked cursor over an in-memory byte buffer. Every failure reports
// the offset at which the read was attempted.
class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::uint64_t offset() const noexcept { return pos_; }
  std::uint64_t remaining() const noexcept { return data_.size() - pos_; }
  bool at_end() const noexcept { return pos_ == data_.size(); }

  template <Scalar T>
  T read(const char* what) {
    require(sizeof(T), what);
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t,
              std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bits |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, &bits, sizeof(T));
    return value;
  }

  std::string_view read_bytes(std::size_t n, const char* what) {
    require(n, what);
    auto view = data_.substr(pos_, n);
    pos_ += n;
    return view;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(what, pos_);
  }

 private:
  void require(std::size_t n, const char* what) const {
    if (n > data_.size() - pos_) {
      throw FormatError(std::string("truncated input while reading ") + what, pos_);
    }
  }

  std::string_view data_;
  std::uint64_t pos_ = 0;
};

}  // namespace cmqe::io


namespace cmqe::io {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write to '" + path.string() + "' failed");
}

}  // namespace cmqe::io
