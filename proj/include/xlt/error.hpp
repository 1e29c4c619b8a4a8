/*
 * Copyright 2026 The xlt-subnet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace xlt {

enum class ErrorKind {
  kIo,
  kBadMagic,
  kVersionMismatch,
  kTruncated,
  kInvalid,         // invariant violation in otherwise well-formed input
  kLayoutMismatch,  // inputs built over different parameter layouts
  kOutOfRange,
  kNotFound,        // missing file, language, or gold entry
  kUndefined,       // metric or fit undefined for the given data
  kNoConvergence,
};

inline const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kBadMagic: return "bad magic";
    case ErrorKind::kVersionMismatch: return "version mismatch";
    case ErrorKind::kTruncated: return "truncated payload";
    case ErrorKind::kInvalid: return "invalid";
    case ErrorKind::kLayoutMismatch: return "layout mismatch";
    case ErrorKind::kOutOfRange: return "out of range";
    case ErrorKind::kNotFound: return "not found";
    case ErrorKind::kUndefined: return "undefined";
    case ErrorKind::kNoConvergence: return "no convergence";
  }
  return "error";
}

// Every failure in the library is reported as an Error. Binary readers and
// writers attach the byte offset at which the problem was detected.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<std::uint64_t> offset = std::nullopt)
      : std::runtime_error(Format(kind, message, offset)),
        kind_(kind),
        message_(message),
        offset_(offset) {}

  ErrorKind kind() const { return kind_; }
  std::optional<std::uint64_t> offset() const { return offset_; }
  const std::string& message() const { return message_; }

  // Same error with a context prefix (usually a file path) on the message.
  Error WithContext(const std::string& context) const {
    return Error(kind_, context + ": " + message_, offset_);
  }

 private:
  static std::string Format(ErrorKind kind, const std::string& message,
                            std::optional<std::uint64_t> offset) {
    std::string out = ErrorKindName(kind);
    out += ": ";
    out += message;
    if (offset) out += " (at byte offset " + std::to_string(*offset) + ")";
    return out;
  }

  ErrorKind kind_;
  std::string message_;
  std::optional<std::uint64_t> offset_;
};

}  // namespace xlt
