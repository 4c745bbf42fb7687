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

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "pianoloud/transfer.hpp"

using namespace pianoloud;

namespace {

LoudnessTable table_of(const std::function<double(int, int)>& f) {
  return LoudnessTable::from_function([&](const Tone& t) -> std::optional<double> { return f(t.pitch, t.velocity); });
}

MidiPerformance random_piece(std::uint64_t seed, int n, int pitch_lo = 21, int pitch_hi = 108) {
  std::mt19937_64 rng(seed);
  std::vector<NoteEvent> notes;
  for (int i = 0; i < n; ++i) {
    NoteEvent e;
    e.pitch = pitch_lo + static_cast<int>(rng() % static_cast<unsigned>(pitch_hi - pitch_lo + 1));
    e.velocity = static_cast<int>(1 + rng() % 127);
    e.onset_ticks = static_cast<std::uint64_t>(i) * 50;
    e.duration_ticks = 40;
    e.channel = 0;
    notes.push_back(e);
  }
  MidiPerformance p = performance_from_notes(notes);
  p.tracks[0].events.push_back(MidiEvent{60, 0xB0, 0, {64, 100}});
  p.tracks[0].events.push_back(MidiEvent{60, 0xFF, 0x01, {'x'}});
  return p;
}

// Brute force over all 127 candidates with the lower-velocity tie rule.
int brute_argmin(const LoudnessTable& t, int pitch, double target) {
  int best = -1;
  double best_r = std::numeric_limits<double>::infinity();
  for (int v = 127; v >= 1; --v) {
    if (!t.defined(Tone{pitch, v})) continue;
    const double r = std::abs(t.at(Tone{pitch, v}) - target);
    if (r <= best_r) {
      best_r = r;
      best = v;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("identical monotone models leave every velocity alone") {
  const LoudnessTable a = table_of([](int p, int v) { return std::pow(v / 127.0, 1.7) * (1 + p / 200.0); });
  const MidiPerformance perf = random_piece(1, 300);
  const TransferResult r = transfer_performance(perf, a, a);
  CHECK(r.report.transferred == 300);
  CHECK(r.report.changed == 0);
  CHECK(r.report.max_residual == 0.0);
  CHECK(write_midi(r.performance) == write_midi(perf));
}

TEST_CASE("halved loudness doubles the velocity") {
  const LoudnessTable src = table_of([](int, int v) { return v / 10.0; });
  const LoudnessTable tgt = table_of([](int, int v) { return v / 20.0; });
  std::vector<NoteEvent> notes;
  for (int v = 1; v <= 127; ++v) notes.push_back(NoteEvent{60, v, static_cast<std::uint64_t>(v) * 10, 5});
  const TransferResult r = transfer_performance(performance_from_notes(notes), src, tgt);
  for (int v = 1; v <= 127; ++v) {
    const auto& n = r.report.notes[static_cast<std::size_t>(v - 1)];
    CHECK(n.v_tgt == std::min(2 * v, 127));
    CHECK(n.v_tgt == brute_argmin(tgt, 60, src.at(Tone{60, v})));
    CHECK(n.residual == doctest::Approx(std::abs(n.sones_tgt - n.sones_src)));
    CHECK(r.performance.notes[static_cast<std::size_t>(v - 1)].velocity == n.v_tgt);
  }
}

TEST_CASE("ties go to the lower velocity") {
  LoudnessTable t = table_of([](int, int v) { return v < 50 ? 1.0 : 2.0; });
  CHECK(best_velocity(t, 40, 1.0) == 1);
  CHECK(best_velocity(t, 40, 1.5) == 1);
  CHECK(best_velocity(t, 40, 1.6) == 50);
  CHECK(best_velocity(t, 40, 9.0) == 50);
}

TEST_CASE("round trip between two monotone models") {
  const LoudnessTable a = table_of([](int p, int v) { return std::pow(v / 127.0, 1.5) * (1.0 + p / 100.0); });
  // Same loudness range per pitch, different curvature.
  const LoudnessTable b = table_of([](int p, int v) { return std::pow(v / 127.0, 0.8) * (1.0 + p / 100.0); });
  const MidiPerformance perf = random_piece(2, 500);
  const TransferResult ab = transfer_performance(perf, a, b);
  const TransferResult aba = transfer_performance(ab.performance, b, a);
  std::size_t close = 0;
  for (std::size_t i = 0; i < perf.notes.size(); ++i)
    close += std::abs(aba.performance.notes[i].velocity - perf.notes[i].velocity) <= 2;
  CHECK(static_cast<double>(close) / perf.notes.size() >= 0.9);
}

TEST_CASE("every transferred note is a brute-force argmin") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd vs(kNumPitches, kNumVelocities), vt(kNumPitches, kNumVelocities);
  for (Eigen::Index i = 0; i < vs.rows(); ++i) {
    double s = 0.0, t = 0.0;
    for (Eigen::Index j = 0; j < vs.cols(); ++j) {
      vs(i, j) = s += u(rng);
      vt(i, j) = t += 2.0 * u(rng);
    }
  }
  const LoudnessTable src(vs), tgt(vt);
  const MidiPerformance perf = random_piece(6, 400);
  const TransferResult r = transfer_performance(perf, src, tgt);
  for (const auto& n : r.report.notes) {
    CHECK(n.status == TransferStatus::transferred);
    CHECK(n.v_tgt == brute_argmin(tgt, n.pitch, src.at(Tone{n.pitch, n.v_src})));
    for (int v = 1; v <= 127; ++v)
      CHECK(std::abs(tgt.at(Tone{n.pitch, v}) - n.sones_src) >= n.residual);
  }
  // Monotone in the source velocity at every pitch.
  for (int p = 21; p <= 108; p += 7) {
    int last = 0;
    for (int v = 1; v <= 127; ++v) {
      const int got = *best_velocity(tgt, p, src.at(Tone{p, v}));
      CHECK(got >= last);
      last = got;
    }
  }
}

TEST_CASE("masked target tones are never chosen") {
  const LoudnessTable src = table_of([](int, int v) { return v / 10.0; });
  const LoudnessTable tgt = LoudnessTable::from_function([](const Tone& t) -> std::optional<double> {
    if (t.velocity >= 40 && t.velocity <= 60) return std::nullopt;
    return t.velocity / 10.0;
  });
  std::vector<NoteEvent> notes;
  for (int v = 1; v <= 127; ++v) notes.push_back(NoteEvent{50, v, static_cast<std::uint64_t>(v) * 10, 5});
  const TransferResult r = transfer_performance(performance_from_notes(notes), src, tgt);
  for (const auto& n : r.report.notes) {
    CHECK(tgt.defined(Tone{50, n.v_tgt}));
    CHECK(n.v_tgt == brute_argmin(tgt, 50, n.sones_src));
  }
  CHECK(r.report.notes[44].v_tgt == 39);  // nearest defined neighbour below
  CHECK(r.report.notes[55].v_tgt == 61);

  // Masked source velocity: the nearest defined one stands in.
  const TransferResult back = transfer_performance(performance_from_notes({NoteEvent{50, 45, 0, 5}}), tgt, src);
  CHECK(back.report.notes[0].v_src_used == 39);
  CHECK(back.report.notes[0].v_tgt == 39);
}

TEST_CASE("notes outside the piano range pass through flagged") {
  const LoudnessTable a = table_of([](int, int v) { return v / 10.0; });
  const LoudnessTable b = table_of([](int, int v) { return v / 30.0; });
  const MidiPerformance perf =
      performance_from_notes({NoteEvent{10, 70, 0, 5}, NoteEvent{60, 30, 0, 5}, NoteEvent{120, 90, 0, 5}});
  const TransferResult r = transfer_performance(perf, a, b);
  CHECK(r.report.flagged == 2);
  CHECK(r.report.transferred == 1);
  CHECK(r.report.notes[0].status == TransferStatus::out_of_range);
  CHECK(r.performance.notes[0].velocity == 70);
  CHECK(r.performance.notes[2].velocity == 90);
  CHECK(r.performance.notes[1].velocity == 90);
  const LoudnessTable empty;
  const TransferResult none = transfer_performance(perf, a, empty);
  CHECK(none.report.notes[1].status == TransferStatus::no_candidates);
  CHECK(none.performance.notes[1].velocity == 30);
}

TEST_CASE("only note-on velocity bytes change") {
  const LoudnessTable a = table_of([](int p, int v) { return v * (1.0 + p / 90.0); });
  const LoudnessTable b = table_of([](int p, int v) { return std::pow(v, 1.2) * (1.0 + p / 300.0); });
  const MidiPerformance perf = random_piece(7, 250);
  const auto before = write_midi(perf);
  const TransferResult r = transfer_performance(perf, a, b);
  const auto after = write_midi(r.performance);
  REQUIRE(before.size() == after.size());
  std::size_t diffs = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (before[i] == after[i]) continue;
    ++diffs;
    REQUIRE(i >= 2);
    CHECK((before[i - 2] & 0xF0) == 0x90);
    CHECK((after[i - 2] & 0xF0) == 0x90);
  }
  CHECK(diffs > 0);
  CHECK(diffs <= r.report.changed);
  const MidiPerformance back = parse_midi(after);
  REQUIRE(back.notes.size() == perf.notes.size());
  for (std::size_t i = 0; i < perf.notes.size(); ++i) {
    NoteEvent x = back.notes[i];
    x.velocity = perf.notes[i].velocity;
    CHECK(x == perf.notes[i]);
  }
  CHECK(back.tracks[0].events == parse_midi(before).tracks[0].events);
}

TEST_CASE("transfer report output") {
  const LoudnessTable a = table_of([](int, int v) { return v / 10.0; });
  const LoudnessTable b = table_of([](int, int v) { return v / 20.0; });
  const TransferResult r = transfer_performance(random_piece(8, 20), a, b);
  const Json j = r.report;
  CHECK(j.at("notes").size() == 20);
  CHECK(j.at("summary").at("transferred") == 20);
  CHECK(j.at("notes")[0].contains("residual"));
  std::ostringstream csv;
  write_transfer_csv(csv, r.report, "hash");
  std::istringstream in(csv.str());
  std::string line;
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') ++rows;
  CHECK(rows == 21);
}
