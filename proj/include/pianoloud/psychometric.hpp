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
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pianoloud/json_io.hpp"
#include "pianoloud/tone.hpp"

namespace pianoloud {

enum class PresentationOrder { reference_first, variable_first };

std::string to_string(PresentationOrder order);
PresentationOrder presentation_order_from_string(const std::string& s);

struct TrialRecord {
  int round_index = 1;
  int variable_velocity = 64;
  PresentationOrder presentation_order = PresentationOrder::reference_first;
  bool response_variable_louder = false;

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

void to_json(Json& j, const TrialRecord& r);
void from_json(const Json& j, TrialRecord& r);

/// P(variable judged louder | v) = sigmoid(intercept + slope * v).
struct PsychometricFit {
  double intercept = 0.0;
  double slope = 1.0;
  double pse = 0.0;        // -intercept / slope, velocity units
  int iterations = 0;
  bool converged = false;
};

inline constexpr double kFitRidge = 1e-3;
inline constexpr double kMinSlope = 1e-4;
inline constexpr double kFitGradientTolerance = 1e-8;
inline constexpr int kFitMaxIterations = 200;

/// Penalised logistic negative log-likelihood minimised by fit_psychometric,
/// in the centred parametrisation logit = c + b (v - mean_v). Exposed for the
/// grid-search oracle in the tests.
double psychometric_objective(std::span<const TrialRecord> history, double centred_intercept,
                              double slope);

/// Ridge-regularised logistic MLE via damped Newton. The intercept penalty
/// acts in the centred parametrisation (velocities minus their mean) so that
/// the prior does not drag the PSE toward velocity 0. Throws
/// InsufficientDataError for fewer than two trials.
PsychometricFit fit_psychometric(std::span<const TrialRecord> history);

inline constexpr int kFirstProbeVelocity = 90;
inline constexpr int kSecondProbeVelocity = 30;
inline constexpr int kWindowHalfWidth = 6;
inline constexpr int kDefaultRounds = 32;

/// Inclusive integer velocity window centred on round(pse), intersected
/// with [1, 127]; an empty intersection collapses to the nearest endpoint.
std::pair<int, int> velocity_window(double pse);

struct Stimulus {
  int variable_velocity = 0;
  PresentationOrder presentation_order = PresentationOrder::reference_first;
  friend bool operator==(const Stimulus&, const Stimulus&) = default;
};

/// Draws the stimulus for `round_index` (1-based). Rounds 1 and 2 use the
/// fixed probes 90 and 30; later rounds need the current PSE.
Stimulus draw_stimulus(int round_index, std::optional<double> pse, std::mt19937_64& rng);

enum class SessionStatus { in_progress, complete };
enum class Saturation { none, floor, ceiling };

std::string to_string(Saturation s);

struct ReportedPse {
  double value = 0.0;  // clamped into [1, 127]
  Saturation saturation = Saturation::none;
};

/// One adaptive two-interval loudness-matching session. All randomness comes
/// from a generator seeded by `seed`, consumed once per round when the round
/// becomes pending, so (seed, responses) fully determine the transcript.
class SessionState {
 public:
  static SessionState start(const Tone& reference, int variable_pitch,
                            int rounds_total = kDefaultRounds, std::uint64_t seed = 0);

  const Tone& reference() const { return reference_; }
  int variable_pitch() const { return variable_pitch_; }
  int rounds_total() const { return rounds_total_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<TrialRecord>& history() const { return history_; }
  const std::optional<PsychometricFit>& fit() const { return fit_; }
  SessionStatus status() const;
  bool complete() const { return status() == SessionStatus::complete; }
  int pending_round() const { return static_cast<int>(history_.size()) + 1; }

  /// Idempotent. Throws StateError once the session is complete.
  Stimulus next_stimulus() const;

  /// Throws ProtocolError when (velocity, order) differs from the pending
  /// stimulus and StateError when complete.
  void record_response(int variable_velocity, PresentationOrder order,
                       bool response_variable_louder);

  /// Final (or current) PSE clamped into the velocity range, flagged when the
  /// estimate saturates. Throws StateError when no fit exists yet.
  ReportedPse reported_pse() const;

 private:
  SessionState() = default;
  void draw_pending();

  Tone reference_;
  int variable_pitch_ = 69;
  int rounds_total_ = kDefaultRounds;
  std::uint64_t seed_ = 0;
  std::vector<TrialRecord> history_;
  std::optional<PsychometricFit> fit_;
  std::optional<Stimulus> pending_;
  std::mt19937_64 rng_;
};

/// Header line of a session transcript (without the trailing newline).
Json transcript_header(const SessionState& state, const Json& metadata = Json::object());

/// JSONL: header line, then one TrialRecord per line.
void write_transcript(std::ostream& out, const SessionState& state,
                      const Json& metadata = Json::object());

/// Rebuilds a session by replaying a transcript; validates every line
/// against the engine. Returns the state and the header object.
std::pair<SessionState, Json> read_transcript(std::istream& in);

/// Logistic listener with P(variable louder | v) = sigmoid((v - pse) / slope).
/// A slope of zero (or below 1e-9) gives a deterministic step subject.
class SimulatedSubject {
 public:
  SimulatedSubject(double pse, double slope, std::uint64_t seed);
  bool judges_variable_louder(int variable_velocity);

 private:
  double pse_;
  double slope_;
  std::mt19937_64 rng_;
};

/// Seed used for the simulated listener of a session seeded with `seed`.
std::uint64_t subject_seed(std::uint64_t session_seed);

struct SimulationResult {
  SessionState state;
  double pse_error = 0.0;   // |reported pse - true pse|
  ReportedPse reported;
};

SimulationResult simulate_session(double true_pse, double true_slope, const Tone& reference,
                                  int variable_pitch, std::uint64_t seed,
                                  int rounds_total = kDefaultRounds);

}  // namespace pianoloud
