#pragma once

#include <stdexcept>
#include <string>

namespace flowsync {

/// Error classes surfaced to callers. Each maps to a distinct CLI exit code.
enum class ErrorKind {
  kShape,     ///< tensor/grid dimension mismatch
  kGeometry,  ///< face geometry does not fit the frame
  kConfig,    ///< invalid configuration value or unknown key
  kContract,  ///< caller violated a precondition (lengths, missing inputs)
  kNumeric,   ///< non-finite value produced
  kIo,        ///< file system failure or malformed file
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& what) : Error(ErrorKind::kShape, what) {}
};
struct GeometryError : Error {
  explicit GeometryError(const std::string& what) : Error(ErrorKind::kGeometry, what) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};
struct ContractError : Error {
  explicit ContractError(const std::string& what) : Error(ErrorKind::kContract, what) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorKind::kNumeric, what) {}
};
struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

}  // namespace flowsync
