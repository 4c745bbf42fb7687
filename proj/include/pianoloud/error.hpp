// Copyright 2026 The pianoloud Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pianoloud {

// Every failure raised by the library derives from Error and carries a stable
// machine-readable code (used verbatim by the CLI and the HTTP service).
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define PIANOLOUD_DEFINE_ERROR(Name, code_string)                   \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& message)                       \
        : Error(code_string, message) {}                            \
  }

PIANOLOUD_DEFINE_ERROR(DomainError, "domain_error");
PIANOLOUD_DEFINE_ERROR(ConfigError, "config_error");
PIANOLOUD_DEFINE_ERROR(InputError, "input_error");
PIANOLOUD_DEFINE_ERROR(NoOnsetError, "no_onset");
PIANOLOUD_DEFINE_ERROR(MaskedToneError, "masked_tone");
PIANOLOUD_DEFINE_ERROR(StateError, "state_error");
PIANOLOUD_DEFINE_ERROR(ProtocolError, "protocol_error");
PIANOLOUD_DEFINE_ERROR(InsufficientDataError, "insufficient_data");
PIANOLOUD_DEFINE_ERROR(AggregationError, "aggregation_error");
PIANOLOUD_DEFINE_ERROR(DatasetError, "dataset_error");
PIANOLOUD_DEFINE_ERROR(DegenerateDataError, "degenerate_data");
PIANOLOUD_DEFINE_ERROR(CalibrationError, "calibration_error");
PIANOLOUD_DEFINE_ERROR(IoError, "io_error");
PIANOLOUD_DEFINE_ERROR(SchemaError, "schema_error");
PIANOLOUD_DEFINE_ERROR(MidiWriteError, "midi_write_error");

#undef PIANOLOUD_DEFINE_ERROR

class MidiParseError : public Error {
 public:
  MidiParseError(const std::string& message, std::size_t offset)
      : Error("midi_parse_error",
              message + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace pianoloud
