// SPDX-License-Identifier: Apache-2.0
#include "megnet/error.hpp"

namespace megnet {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Parameter: return "parameter error";
    case ErrorCode::Dimension: return "dimension error";
    case ErrorCode::Format: return "format error";
    case ErrorCode::Io: return "i/o error";
    case ErrorCode::Singular: return "singularity error";
    case ErrorCode::NonFinite: return "non-finite value";
    case ErrorCode::Stability: return "stability error";
    case ErrorCode::Contract: return "contract error";
    case ErrorCode::InsufficientSamples: return "insufficient samples";
  }
  return "unknown error";
}

void fail(ErrorCode code, const std::string& what) {
  throw Error(code, std::string(to_string(code)) + ": " + what);
}

}  // namespace megnet
