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

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pianoloud/json_io.hpp"
#include "pianoloud/loudness.hpp"
#include "pianoloud/midi.hpp"

namespace pianoloud {

enum class TransferStatus { transferred, out_of_range, no_candidates };

std::string to_string(TransferStatus s);

struct NoteTransfer {
  std::size_t note_index = 0;
  int pitch = 0;
  int v_src = 0;
  int v_tgt = 0;
  int v_src_used = 0;  // nearest valid source velocity when v_src is masked
  double sones_src = 0.0;
  double sones_tgt = 0.0;
  double residual = 0.0;
  TransferStatus status = TransferStatus::transferred;
};

struct TransferReport {
  std::vector<NoteTransfer> notes;
  std::size_t transferred = 0;
  std::size_t flagged = 0;
  std::size_t changed = 0;
  double mean_residual = 0.0;
  double max_residual = 0.0;
};

struct TransferResult {
  MidiPerformance performance;
  TransferReport report;
};

/// Valid target velocity with the smallest |L_tgt(p, v) - target_sones|;
/// ties go to the lower velocity. Undefined cells are not candidates.
std::optional<int> best_velocity(const LoudnessTable& table, int pitch, double target_sones);

/// Defined velocity nearest to `velocity` at `pitch` (ties to the lower).
std::optional<int> nearest_defined_velocity(const LoudnessTable& table, int pitch, int velocity);

/// Remaps every note velocity so the target loudness matches the source
/// loudness; everything but note-on velocities is left untouched. Pitches
/// outside the piano range, or with no defined loudness, pass through and
/// are flagged.
TransferResult transfer_performance(const MidiPerformance& perf, const LoudnessTable& source,
                                    const LoudnessTable& target);

void to_json(Json& j, const TransferReport& r);
void write_transfer_csv(std::ostream& out, const TransferReport& r, const std::string& comment = "");

}  // namespace pianoloud
