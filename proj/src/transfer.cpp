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

#include "pianoloud/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ostream>

namespace pianoloud {

std::string to_string(TransferStatus s) {
  switch (s) {
    case TransferStatus::transferred: return "transferred";
    case TransferStatus::out_of_range: return "out_of_range";
    case TransferStatus::no_candidates: return "no_candidates";
  }
  return "unknown";
}

std::optional<int> best_velocity(const LoudnessTable& table, int pitch, double target_sones) {
  std::optional<int> best;
  double best_residual = 0.0;
  for (int v = kMinVelocity; v <= kMaxVelocity; ++v) {
    const Tone t{pitch, v};
    if (!table.defined(t)) continue;
    const double r = std::abs(table.at(t) - target_sones);
    if (!best || r < best_residual) {
      best = v;
      best_residual = r;
    }
  }
  return best;
}

std::optional<int> nearest_defined_velocity(const LoudnessTable& table, int pitch, int velocity) {
  std::optional<int> best;
  for (int v = kMinVelocity; v <= kMaxVelocity; ++v) {
    if (!table.defined(Tone{pitch, v})) continue;
    if (!best || std::abs(v - velocity) < std::abs(*best - velocity)) best = v;
  }
  return best;
}

TransferResult transfer_performance(const MidiPerformance& perf, const LoudnessTable& source,
                                    const LoudnessTable& target) {
  TransferResult out{perf, {}};
  TransferReport& report = out.report;
  double residual_sum = 0.0;
  for (std::size_t i = 0; i < perf.notes.size(); ++i) {
    const NoteEvent& n = perf.notes[i];
    NoteTransfer nt;
    nt.note_index = i;
    nt.pitch = n.pitch;
    nt.v_src = n.velocity;
    nt.v_tgt = n.velocity;
    nt.v_src_used = n.velocity;
    if (!is_valid_pitch(n.pitch)) {
      nt.status = TransferStatus::out_of_range;
    } else {
      const auto used = nearest_defined_velocity(source, n.pitch, std::clamp(n.velocity, 1, 127));
      const auto tgt = used ? best_velocity(target, n.pitch, source.at(Tone{n.pitch, *used})) : std::nullopt;
      if (!used || !tgt) {
        nt.status = TransferStatus::no_candidates;
      } else {
        nt.v_src_used = *used;
        nt.v_tgt = *tgt;
        nt.sones_src = source.at(Tone{n.pitch, *used});
        nt.sones_tgt = target.at(Tone{n.pitch, *tgt});
        nt.residual = std::abs(nt.sones_tgt - nt.sones_src);
        out.performance.notes[i].velocity = *tgt;
      }
    }
    if (nt.status == TransferStatus::transferred) {
      ++report.transferred;
      residual_sum += nt.residual;
      report.max_residual = std::max(report.max_residual, nt.residual);
      if (nt.v_tgt != nt.v_src) ++report.changed;
    } else {
      ++report.flagged;
    }
    report.notes.push_back(nt);
  }
  if (report.transferred) report.mean_residual = residual_sum / static_cast<double>(report.transferred);
  return out;
}

void to_json(Json& j, const TransferReport& r) {
  Json notes = Json::array();
  for (const NoteTransfer& n : r.notes) {
    notes.push_back({{"note_index", n.note_index},
                     {"pitch", n.pitch},
                     {"v_src", n.v_src},
                     {"v_src_used", n.v_src_used},
                     {"v_tgt", n.v_tgt},
                     {"sones_src", n.sones_src},
                     {"sones_tgt", n.sones_tgt},
                     {"residual", n.residual},
                     {"status", to_string(n.status)}});
  }
  j = Json{{"notes", notes},
           {"summary",
            {{"notes", r.notes.size()},
             {"transferred", r.transferred},
             {"flagged", r.flagged},
             {"changed", r.changed},
             {"mean_residual", r.mean_residual},
             {"max_residual", r.max_residual}}}};
}

void write_transfer_csv(std::ostream& out, const TransferReport& r, const std::string& comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "note_index,pitch,v_src,v_src_used,v_tgt,sones_src,sones_tgt,residual,status\n";
  out.precision(10);
  for (const NoteTransfer& n : r.notes) {
    out << n.note_index << ',' << n.pitch << ',' << n.v_src << ',' << n.v_src_used << ',' << n.v_tgt << ','
        << n.sones_src << ',' << n.sones_tgt << ',' << n.residual << ',' << to_string(n.status) << '\n';
  }
}

}  // namespace pianoloud
