// Copyright 2026 The extraudit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EXTRAUDIT_ERROR_H_
#define EXTRAUDIT_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace extraudit {

// Stable error categories. The numeric values are mirrored one-to-one by
// ea_status in the public C header; do not renumber.
enum class ErrorCode : int {
  kOk = 0,
  kInvalidArgument = 1,
  kMalformedInput = 2,
  kInvariantViolation = 3,
  kEmptyInput = 4,
  kIo = 5,
  kInsufficientCoverage = 6,
  kAmbiguousZero = 7,
  kTokenOutOfRange = 8,
  kReplayMiss = 9,
  kDuplicateContext = 10,
  kBridgeUnreachable = 11,
  kBridgeProtocol = 12,
  kProtocolVersionMismatch = 13,
  kNotExtractable = 14,
  kInstanceTooLarge = 15,
  kUndefinedPerplexity = 16,
  kIdMismatch = 17,
  kGridMismatch = 18,
  kPNotOnGrid = 19,
  kInternal = 20,
};

std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace extraudit

#endif  // EXTRAUDIT_ERROR_H_
