// Copyright 2026 The smab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace smab {

enum class ErrorKind {
  // input / configuration
  kParse,
  kDuplicateId,
  kEmptyText,
  kEmptyIndex,
  kUnknownScheme,
  kDomain,
  kMissingGold,
  kVersionMismatch,
  kBinMismatch,
  kDegenerateInput,
  kNoEligibleWords,
  kNoCorrectOriginals,
  kNoIndexedWords,
  kUnknownTemplate,
  kAllDiscarded,
  kConfig,
  kIo,
  // oracle failures
  kRemoteUnavailable,
  kProtocolViolation,
  kBadMaskCount,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "ParseError";
    case ErrorKind::kDuplicateId: return "DuplicateId";
    case ErrorKind::kEmptyText: return "EmptyText";
    case ErrorKind::kEmptyIndex: return "EmptyIndex";
    case ErrorKind::kUnknownScheme: return "UnknownScheme";
    case ErrorKind::kDomain: return "DomainError";
    case ErrorKind::kMissingGold: return "MissingGold";
    case ErrorKind::kVersionMismatch: return "VersionMismatch";
    case ErrorKind::kBinMismatch: return "BinMismatch";
    case ErrorKind::kDegenerateInput: return "DegenerateInput";
    case ErrorKind::kNoEligibleWords: return "NoEligibleWords";
    case ErrorKind::kNoCorrectOriginals: return "NoCorrectOriginals";
    case ErrorKind::kNoIndexedWords: return "NoIndexedWords";
    case ErrorKind::kUnknownTemplate: return "UnknownTemplate";
    case ErrorKind::kAllDiscarded: return "AllDiscarded";
    case ErrorKind::kConfig: return "ConfigError";
    case ErrorKind::kIo: return "IoError";
    case ErrorKind::kRemoteUnavailable: return "RemoteUnavailable";
    case ErrorKind::kProtocolViolation: return "ProtocolViolation";
    case ErrorKind::kBadMaskCount: return "BadMaskCount";
  }
  return "Error";
}

/// True for failures that originate in a classifier or perturber endpoint.
constexpr bool is_oracle_error(ErrorKind kind) {
  return kind == ErrorKind::kRemoteUnavailable || kind == ErrorKind::kProtocolViolation ||
         kind == ErrorKind::kBadMaskCount;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace smab
