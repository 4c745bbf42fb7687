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

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pianoloud/error.hpp"

namespace pianoloud {

/// Any non-note event, kept opaquely. Channel messages hold their expanded
/// status; sysex (0xF0/0xF7) and meta (0xFF) events hold their payload
/// without the length prefix.
struct MidiEvent {
  std::uint64_t tick = 0;  // absolute
  std::uint8_t status = 0;
  std::uint8_t meta_type = 0;  // meta events only
  std::vector<std::uint8_t> data;

  bool is_meta() const { return status == 0xFF; }
  friend bool operator==(const MidiEvent&, const MidiEvent&) = default;
};

struct NoteEvent {
  int pitch = 60;      // 0..127
  int velocity = 64;   // 1..127
  std::uint64_t onset_ticks = 0;
  std::uint64_t duration_ticks = 1;
  int channel = 0;     // 0..15
  int release_velocity = 64;
  int track = 0;

  friend bool operator==(const NoteEvent&, const NoteEvent&) = default;
};

struct MidiTrack {
  std::vector<MidiEvent> events;  // everything except notes and end-of-track
  std::uint64_t end_tick = 0;     // tick of the end-of-track event
};

struct MidiPerformance {
  int format = 0;                    // 0 or 1
  std::uint16_t division = 480;      // ticks per quarter note (raw header field)
  std::vector<MidiTrack> tracks;
  std::vector<NoteEvent> notes;      // sorted by onset; stable in file order

  int ticks_per_quarter() const { return division; }
  std::vector<MidiEvent> tempo_events() const;
};

/// Parses a type-0 or type-1 standard MIDI file. Note-offs (including
/// note-on with velocity 0) close the earliest open note of the same channel
/// and pitch. Throws MidiParseError with the byte offset on malformed input
/// or a note left open at the end of its track.
MidiPerformance parse_midi(std::span<const std::uint8_t> bytes);

/// Canonical encoding: no running status, explicit 0x80 note-offs, minimal
/// length prefixes. At equal ticks: note-offs, then other events, then
/// note-ons. Velocities are clamped into [1, 127]. Throws MidiWriteError
/// when two notes of the same channel and pitch overlap.
std::vector<std::uint8_t> write_midi(const MidiPerformance& perf);

MidiPerformance read_midi_file(const std::filesystem::path& path);
void write_midi_file(const MidiPerformance& perf, const std::filesystem::path& path);

/// Single-track type-0 performance with a tempo event at tick 0.
MidiPerformance performance_from_notes(std::vector<NoteEvent> notes, std::uint16_t ticks_per_quarter = 480,
                                       std::uint32_t microseconds_per_quarter = 500000);

}  // namespace pianoloud
