#pragma once

#include <stdexcept>
#include <string>

namespace treeseq {

// Values double as CLI exit codes.
enum class ErrorKind {
  kValidation = 1,
  kIo = 2,
  kVerification = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(const std::string& message) {
  throw Error(ErrorKind::kValidation, message);
}

[[noreturn]] inline void fail_io(const std::string& message) {
  throw Error(ErrorKind::kIo, message);
}

}  // namespace treeseq
