// SPDX-License-Identifier: Apache-2.0
#include "lamsc/error.hpp"

namespace lamsc {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::shape_mismatch: return "shape mismatch";
    case ErrorCode::precondition: return "precondition violated";
    case ErrorCode::io: return "i/o error";
    case ErrorCode::config: return "configuration error";
    case ErrorCode::backend: return "segmentation backend failure";
    case ErrorCode::numeric: return "numerical failure";
    case ErrorCode::missing_artifact: return "missing artifact";
    case ErrorCode::internal: return "internal error";
  }
  return "unknown error";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

void rethrow_with_stage(const Error& e, const std::string& stage) {
  throw Error(e.code(), stage + ": " + e.what());
}

}  // namespace lamsc
