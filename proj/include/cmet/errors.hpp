#pragma once

#include <stdexcept>
#include <string>

namespace cmet {

// Domain error with a stable machine-parsable code. The CLI prints
// "<code>: <message>" and maps usage_error to exit 2, everything else to 1.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

inline Error shape_error(const std::string& msg) { return Error("shape_error", msg); }
inline Error config_error(const std::string& msg) { return Error("config_error", msg); }
inline Error usage_error(const std::string& msg) { return Error("usage_error", msg); }
inline Error parse_error(const std::string& msg) { return Error("parse_error", msg); }
inline Error io_error(const std::string& msg) { return Error("io_error", msg); }
inline Error insufficient_data_error(const std::string& msg) {
  return Error("insufficient_data", msg);
}
inline Error sampling_error(const std::string& msg) { return Error("sampling_error", msg); }
inline Error restore_error(const std::string& msg) { return Error("restore_error", msg); }
inline Error generation_error(const std::string& msg) { return Error("generation_error", msg); }
inline Error training_error(const std::string& msg) { return Error("training_error", msg); }

}  // namespace cmet
