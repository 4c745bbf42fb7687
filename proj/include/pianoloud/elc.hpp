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

// Closed-loop equal-loudness measurement against a synthetic listener whose
// judgements follow the ground-truth oracle of a synthesised environment.

#include <cstdint>
#include <vector>

#include "pianoloud/psychometric.hpp"
#include "pianoloud/ribbons.hpp"
#include "pianoloud/synth.hpp"

namespace pianoloud {

struct ElcProtocol {
  int reference_pitch = 69;  // A4
  std::vector<int> reference_velocities{32, 44, 60, 80};
  std::vector<int> variable_pitches{21, 33, 45, 57, 69, 81, 93, 105, 108};
  int subjects_per_level = 6;
  int rounds_total = kDefaultRounds;
  double slope_min = 2.0;
  double slope_max = 6.0;
  double pse_jitter = 1.0;  // per-subject N(0, jitter) offset, velocity units
};

void to_json(Json& j, const ElcProtocol& p);
void from_json(const Json& j, ElcProtocol& p);

/// Oracle loudness of every velocity at one pitch, index v - 1.
std::vector<double> oracle_velocity_curve(const SynthEnvSpec& spec, int pitch);

/// Real-valued velocity at which `curve` (increasing) reaches `target`,
/// by linear interpolation; values beyond the range are linearly
/// extrapolated from the end segments.
double level_crossing(const std::vector<double>& curve, double target);

/// The exact PSE at `pitch` for `reference` under the oracle.
double oracle_pse(const SynthEnvSpec& spec, const Tone& reference, int pitch);

struct SimulatedRun {
  int level = 0;          // index into reference_velocities
  int subject = 0;
  double true_pse = 0.0;
  double true_slope = 0.0;
  SessionState state;
};

struct SimulatedElc {
  std::vector<SimulatedRun> runs;
  RibbonSet ribbons;
};

/// Runs subjects_per_level simulated listeners for each reference velocity
/// over all variable pitches and aggregates the ribbons. Deterministic in
/// (spec, protocol, seed).
SimulatedElc simulate_elc(const SynthEnvSpec& spec, const ElcProtocol& protocol,
                          std::uint64_t seed);

/// splitmix64 step, used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace pianoloud
