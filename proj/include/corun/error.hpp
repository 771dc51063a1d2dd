/*
 * Copyright (c) The corun-affinity Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace corun {

/// Typed failure conditions across all modules. Tests match on the code, the
/// CLI maps codes onto exit statuses.
enum class Errc {
  // core model / input validation
  EmptyId,
  DuplicateId,
  EmptyCommand,
  ZeroSamples,
  // harness
  LaunchFailure,
  NonZeroExit,
  InsufficientSamples,
  SkewExceeded,
  // metrics
  NonPositiveDuration,
  EmptyInput,
  UnsupportedLevel,
  InvalidThresholds,
  // affinity store
  MissingBaseline,
  FormatVersionMismatch,
  CorruptEntry,
  // scheduler
  UnknownWorkload,
  InvalidCapacity,
  InsufficientCapacity,
  InstanceTooLarge,
  InvalidObjective,
  // files / persistence
  ParseError,
  IoError,
  ManifestMismatch,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::EmptyId: return "empty_id";
    case Errc::DuplicateId: return "duplicate_id";
    case Errc::EmptyCommand: return "empty_command";
    case Errc::ZeroSamples: return "zero_samples";
    case Errc::LaunchFailure: return "launch_failure";
    case Errc::NonZeroExit: return "nonzero_exit";
    case Errc::InsufficientSamples: return "insufficient_samples";
    case Errc::SkewExceeded: return "skew_exceeded";
    case Errc::NonPositiveDuration: return "non_positive_duration";
    case Errc::EmptyInput: return "empty_input";
    case Errc::UnsupportedLevel: return "unsupported_level";
    case Errc::InvalidThresholds: return "invalid_thresholds";
    case Errc::MissingBaseline: return "missing_baseline";
    case Errc::FormatVersionMismatch: return "format_version_mismatch";
    case Errc::CorruptEntry: return "corrupt_entry";
    case Errc::UnknownWorkload: return "unknown_workload";
    case Errc::InvalidCapacity: return "invalid_capacity";
    case Errc::InsufficientCapacity: return "insufficient_capacity";
    case Errc::InstanceTooLarge: return "instance_too_large";
    case Errc::InvalidObjective: return "invalid_objective";
    case Errc::ParseError: return "parse_error";
    case Errc::IoError: return "io_error";
    case Errc::ManifestMismatch: return "manifest_mismatch";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string subject, std::string detail = "")
      : std::runtime_error(compose(code, subject, detail)),
        code_(code),
        subject_(std::move(subject)),
        detail_(std::move(detail)) {}

  Errc code() const { return code_; }
  const std::string& subject() const { return subject_; }
  const std::string& detail() const { return detail_; }

 private:
  static std::string compose(Errc code, const std::string& subject, const std::string& detail) {
    std::string msg = errc_name(code);
    if (!subject.empty()) msg += ": " + subject;
    if (!detail.empty()) msg += " (" + detail + ")";
    return msg;
  }

  Errc code_;
  std::string subject_;
  std::string detail_;
};

[[noreturn]] inline void raise(Errc code, std::string subject, std::string detail = "") {
  throw Error(code, std::move(subject), std::move(detail));
}

}  // namespace corun
