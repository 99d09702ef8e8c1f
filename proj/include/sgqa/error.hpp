#pragma once

#include <stdexcept>
#include <string>

namespace sgqa {

/// Malformed or inconsistent input data (scene files, taxonomies, family
/// documents, records). The CLI maps these to exit status 1.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Program text that does not parse. `offset()` is the byte offset into the
/// source where the problem was detected.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : DataError(what + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Well-formed program whose argument types do not match a signature.
class TypeError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace sgqa
