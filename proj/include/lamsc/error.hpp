// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace lamsc {

// Values mirror lamsc_status in lamsc.h.
enum class ErrorCode : int {
  invalid_argument = 1,
  shape_mismatch = 2,
  precondition = 3,
  io = 4,
  config = 5,
  backend = 6,
  numeric = 7,
  missing_artifact = 8,
  internal = 9,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

// Re-throws `e` with `stage` prefixed to the message, preserving the code.
[[noreturn]] void rethrow_with_stage(const Error& e, const std::string& stage);

}  // namespace lamsc
