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

#include "pianoloud/midi.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

namespace pianoloud {

std::vector<MidiEvent> MidiPerformance::tempo_events() const {
  std::vector<MidiEvent> out;
  for (const MidiTrack& t : tracks)
    for (const MidiEvent& e : t.events)
      if (e.is_meta() && e.meta_type == 0x51) out.push_back(e);
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.tick < b.tick; });
  return out;
}

namespace {

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::size_t begin, std::size_t end)
      : bytes_(bytes), pos_(begin), end_(end) {}

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ >= end_; }

  std::uint8_t u8() {
    if (pos_ >= end_) throw MidiParseError("unexpected end of data", pos_);
    return bytes_[pos_++];
  }
  std::uint8_t peek() const {
    if (pos_ >= end_) throw MidiParseError("unexpected end of data", pos_);
    return bytes_[pos_];
  }
  std::uint32_t vlq() {
    const std::size_t start = pos_;
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      const std::uint8_t b = u8();
      v = (v << 7) | (b & 0x7F);
      if (!(b & 0x80)) return v;
    }
    throw MidiParseError("variable-length quantity longer than 4 bytes", start);
  }
  std::vector<std::uint8_t> take(std::size_t n) {
    if (n > end_ - pos_) throw MidiParseError("event length runs past the chunk", pos_);
    std::vector<std::uint8_t> out(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return out;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_;
  std::size_t end_;
};

std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t(b[at]) << 24) | (std::uint32_t(b[at + 1]) << 16) |
         (std::uint32_t(b[at + 2]) << 8) | std::uint32_t(b[at + 3]);
}

std::uint16_t be16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

struct OpenNote {
  std::size_t note_index;
  std::size_t offset;
};

void parse_track(std::span<const std::uint8_t> bytes, std::size_t begin, std::size_t end, int track_index,
                 MidiTrack& track, std::vector<NoteEvent>& notes) {
  Reader r(bytes, begin, end);
  std::uint64_t tick = 0;
  std::uint8_t running = 0;
  std::map<std::pair<int, int>, std::deque<OpenNote>> open;
  bool ended = false;
  while (!r.done()) {
    tick += r.vlq();
    const std::size_t event_offset = r.pos();
    std::uint8_t status = r.peek();
    if (status & 0x80) {
      r.u8();
    } else {
      if (!running) throw MidiParseError("running status without a previous status byte", event_offset);
      status = running;
    }
    if (status == 0xFF) {
      running = 0;
      MidiEvent e{tick, status, r.u8(), {}};
      e.data = r.take(r.vlq());
      if (e.meta_type == 0x2F) {
        track.end_tick = tick;
        ended = true;
        break;
      }
      track.events.push_back(std::move(e));
      continue;
    }
    if (status == 0xF0 || status == 0xF7) {
      running = 0;
      MidiEvent e{tick, status, 0, {}};
      e.data = r.take(r.vlq());
      track.events.push_back(std::move(e));
      continue;
    }
    if (status >= 0xF0) throw MidiParseError("system message not allowed in a MIDI file", event_offset);
    running = status;
    const int kind = status & 0xF0;
    const int channel = status & 0x0F;
    const std::size_t n_data = (kind == 0xC0 || kind == 0xD0) ? 1 : 2;
    std::vector<std::uint8_t> data = r.take(n_data);
    for (std::uint8_t d : data) {
      if (d & 0x80) throw MidiParseError("data byte with the high bit set", event_offset);
    }
    const bool note_on = kind == 0x90 && data[1] > 0;
    const bool note_off = kind == 0x80 || (kind == 0x90 && data[1] == 0);
    if (note_on) {
      open[{channel, data[0]}].push_back({notes.size(), event_offset});
      NoteEvent n;
      n.pitch = data[0];
      n.velocity = data[1];
      n.onset_ticks = tick;
      n.duration_ticks = 0;
      n.channel = channel;
      n.track = track_index;
      notes.push_back(n);
      continue;
    }
    if (note_off) {
      auto it = open.find({channel, data[0]});
      if (it != open.end() && !it->second.empty()) {
        NoteEvent& n = notes[it->second.front().note_index];
        it->second.pop_front();
        n.duration_ticks = tick - n.onset_ticks;
        n.release_velocity = kind == 0x80 ? data[1] : 0x40;
        continue;
      }
      // Unpaired note-off: kept as an opaque event.
    }
    track.events.push_back(MidiEvent{tick, status, 0, std::move(data)});
  }
  if (!ended) throw MidiParseError("track has no end-of-track event", end);
  if (!r.done()) throw MidiParseError("data after end-of-track event", r.pos());
  for (const auto& [key, queue] : open) {
    if (!queue.empty()) {
      throw MidiParseError("note-on without a matching note-off (channel " + std::to_string(key.first) +
                               ", pitch " + std::to_string(key.second) + ")",
                           queue.front().offset);
    }
  }
}

void put_vlq(std::vector<std::uint8_t>& out, std::uint64_t v) {
  if (v > 0x0FFFFFFF) throw MidiWriteError("value too large for a variable-length quantity");
  std::uint8_t buf[4];
  int n = 0;
  buf[n++] = v & 0x7F;
  while (v >>= 7) buf[n++] = static_cast<std::uint8_t>((v & 0x7F) | 0x80);
  while (n) out.push_back(buf[--n]);
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_be16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

struct Scheduled {
  std::uint64_t tick;
  int phase;  // 0 note-off, 1 other, 2 note-on
  std::size_t order;
  std::vector<std::uint8_t> bytes;
};

void check_overlaps(const MidiPerformance& perf) {
  std::map<std::tuple<int, int, int>, std::vector<std::size_t>> by_key;
  for (std::size_t i = 0; i < perf.notes.size(); ++i) {
    const NoteEvent& n = perf.notes[i];
    by_key[{n.track, n.channel, n.pitch}].push_back(i);
  }
  for (auto& [key, idx] : by_key) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return perf.notes[a].onset_ticks < perf.notes[b].onset_ticks;
    });
    for (std::size_t k = 1; k < idx.size(); ++k) {
      const NoteEvent& a = perf.notes[idx[k - 1]];
      const NoteEvent& b = perf.notes[idx[k]];
      if (b.onset_ticks < a.onset_ticks + a.duration_ticks || b.onset_ticks == a.onset_ticks) {
        throw MidiWriteError("notes " + std::to_string(idx[k - 1]) + " and " + std::to_string(idx[k]) +
                             " overlap on channel " + std::to_string(a.channel) + " pitch " +
                             std::to_string(a.pitch));
      }
    }
  }
}

}  // namespace

MidiPerformance parse_midi(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 14 || !std::equal(bytes.begin(), bytes.begin() + 4, "MThd")) {
    throw MidiParseError("missing MThd header", 0);
  }
  const std::uint32_t header_len = be32(bytes, 4);
  if (header_len < 6 || 8 + std::size_t(header_len) > bytes.size()) {
    throw MidiParseError("bad header chunk length", 4);
  }
  MidiPerformance perf;
  perf.format = be16(bytes, 8);
  const int n_tracks = be16(bytes, 10);
  perf.division = be16(bytes, 12);
  if (perf.format != 0 && perf.format != 1) throw MidiParseError("only format 0 and 1 are supported", 8);
  if (perf.format == 0 && n_tracks != 1) throw MidiParseError("format 0 file must have one track", 10);
  std::size_t at = 8 + header_len;
  std::vector<NoteEvent> notes;
  while (static_cast<int>(perf.tracks.size()) < n_tracks) {
    if (at + 8 > bytes.size()) throw MidiParseError("missing track chunk", at);
    const std::uint32_t len = be32(bytes, at + 4);
    if (at + 8 + std::size_t(len) > bytes.size()) throw MidiParseError("chunk length runs past the file", at + 4);
    if (std::equal(bytes.begin() + static_cast<std::ptrdiff_t>(at),
                   bytes.begin() + static_cast<std::ptrdiff_t>(at + 4), "MTrk")) {
      MidiTrack track;
      parse_track(bytes, at + 8, at + 8 + len, static_cast<int>(perf.tracks.size()), track, notes);
      perf.tracks.push_back(std::move(track));
    }
    at += 8 + len;
  }
  std::stable_sort(notes.begin(), notes.end(),
                   [](const NoteEvent& a, const NoteEvent& b) { return a.onset_ticks < b.onset_ticks; });
  perf.notes = std::move(notes);
  return perf;
}

std::vector<std::uint8_t> write_midi(const MidiPerformance& perf) {
  if (perf.format != 0 && perf.format != 1) throw MidiWriteError("only format 0 and 1 are supported");
  if (perf.tracks.empty()) throw MidiWriteError("performance has no tracks");
  if (perf.format == 0 && perf.tracks.size() != 1) throw MidiWriteError("format 0 needs exactly one track");
  for (std::size_t i = 0; i < perf.notes.size(); ++i) {
    const NoteEvent& n = perf.notes[i];
    if (n.pitch < 0 || n.pitch > 127 || n.channel < 0 || n.channel > 15 || n.track < 0 ||
        n.track >= static_cast<int>(perf.tracks.size())) {
      throw MidiWriteError("note " + std::to_string(i) + " has an invalid pitch, channel or track");
    }
  }
  check_overlaps(perf);

  std::vector<std::uint8_t> out = {'M', 'T', 'h', 'd'};
  put_be32(out, 6);
  put_be16(out, static_cast<std::uint16_t>(perf.format));
  put_be16(out, static_cast<std::uint16_t>(perf.tracks.size()));
  put_be16(out, perf.division);

  for (std::size_t t = 0; t < perf.tracks.size(); ++t) {
    std::vector<Scheduled> events;
    std::size_t order = 0;
    for (const MidiEvent& e : perf.tracks[t].events) {
      std::vector<std::uint8_t> b = {e.status};
      if (e.is_meta()) {
        b.push_back(e.meta_type);
        put_vlq(b, e.data.size());
      } else if (e.status == 0xF0 || e.status == 0xF7) {
        put_vlq(b, e.data.size());
      }
      b.insert(b.end(), e.data.begin(), e.data.end());
      events.push_back({e.tick, 1, order++, std::move(b)});
    }
    for (const NoteEvent& n : perf.notes) {
      if (n.track != static_cast<int>(t)) continue;
      const auto ch = static_cast<std::uint8_t>(n.channel);
      const auto vel = static_cast<std::uint8_t>(std::clamp(n.velocity, 1, 127));
      const auto rel = static_cast<std::uint8_t>(std::clamp(n.release_velocity, 0, 127));
      const auto p = static_cast<std::uint8_t>(n.pitch);
      events.push_back({n.onset_ticks, 2, order++, {static_cast<std::uint8_t>(0x90 | ch), p, vel}});
      // A zero-length note releases right after its own onset.
      events.push_back({n.onset_ticks + n.duration_ticks, n.duration_ticks ? 0 : 3, order++,
                        {static_cast<std::uint8_t>(0x80 | ch), p, rel}});
    }
    std::stable_sort(events.begin(), events.end(), [](const Scheduled& a, const Scheduled& b) {
      if (a.tick != b.tick) return a.tick < b.tick;
      return a.phase < b.phase;
    });
    std::vector<std::uint8_t> body;
    std::uint64_t tick = 0;
    for (const Scheduled& e : events) {
      put_vlq(body, e.tick - tick);
      tick = e.tick;
      body.insert(body.end(), e.bytes.begin(), e.bytes.end());
    }
    put_vlq(body, std::max(perf.tracks[t].end_tick, tick) - tick);
    body.insert(body.end(), {0xFF, 0x2F, 0x00});
    out.insert(out.end(), {'M', 'T', 'r', 'k'});
    put_be32(out, static_cast<std::uint32_t>(body.size()));
    out.insert(out.end(), body.begin(), body.end());
  }
  return out;
}

MidiPerformance read_midi_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_midi(bytes);
}

void write_midi_file(const MidiPerformance& perf, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = write_midi(perf);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

MidiPerformance performance_from_notes(std::vector<NoteEvent> notes, std::uint16_t ticks_per_quarter,
                                       std::uint32_t microseconds_per_quarter) {
  MidiPerformance perf;
  perf.format = 0;
  perf.division = ticks_per_quarter;
  MidiTrack track;
  track.events.push_back(MidiEvent{0, 0xFF, 0x51,
                                   {static_cast<std::uint8_t>(microseconds_per_quarter >> 16),
                                    static_cast<std::uint8_t>(microseconds_per_quarter >> 8),
                                    static_cast<std::uint8_t>(microseconds_per_quarter)}});
  for (NoteEvent& n : notes) {
    n.track = 0;
    track.end_tick = std::max(track.end_tick, n.onset_ticks + n.duration_ticks);
  }
  std::stable_sort(notes.begin(), notes.end(),
                   [](const NoteEvent& a, const NoteEvent& b) { return a.onset_ticks < b.onset_ticks; });
  perf.tracks.push_back(std::move(track));
  perf.notes = std::move(notes);
  return perf;
}

}  // namespace pianoloud
