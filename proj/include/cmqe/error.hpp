#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cmqe {

// Bad input data: malformed records, failed validation, missing embeddings.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or arguments supplied by the operator.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary file that does not match its documented layout.
class FormatError : public DataError {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : DataError(what + " (at byte offset " + std::to_string(offset) + ")"),
        message_(what),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }
  // Message without the offset suffix.
  const std::string& message() const noexcept { return message_; }

 private:
  std::string message_;
  std::uint64_t offset_;
};

}  // namespace cmqe
