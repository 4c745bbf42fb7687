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

#include "pianoloud/elc.hpp"

#include <algorithm>
#include <map>
#include <random>

namespace pianoloud {

void to_json(Json& j, const ElcProtocol& p) {
  j = Json{{"reference_pitch", p.reference_pitch},
           {"reference_velocities", p.reference_velocities},
           {"variable_pitches", p.variable_pitches},
           {"subjects_per_level", p.subjects_per_level},
           {"rounds_total", p.rounds_total},
           {"slope_min", p.slope_min},
           {"slope_max", p.slope_max},
           {"pse_jitter", p.pse_jitter}};
}

void from_json(const Json& j, ElcProtocol& p) {
  auto opt = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  opt("reference_pitch", p.reference_pitch);
  opt("reference_velocities", p.reference_velocities);
  opt("variable_pitches", p.variable_pitches);
  opt("subjects_per_level", p.subjects_per_level);
  opt("rounds_total", p.rounds_total);
  opt("slope_min", p.slope_min);
  opt("slope_max", p.slope_max);
  opt("pse_jitter", p.pse_jitter);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<double> oracle_velocity_curve(const SynthEnvSpec& spec, int pitch) {
  std::vector<double> curve;
  curve.reserve(kNumVelocities);
  for (int v = kMinVelocity; v <= kMaxVelocity; ++v) {
    curve.push_back(true_loudness_oracle(spec, Tone{pitch, v}));
  }
  return curve;
}

double level_crossing(const std::vector<double>& curve, double target) {
  const std::size_t n = curve.size();
  if (n < 2) throw DomainError("level_crossing needs at least two points");
  auto segment = [&](std::size_t i) {
    // Velocity of point i is i + 1.
    const double d = curve[i + 1] - curve[i];
    if (d <= 0.0) return static_cast<double>(i + 1);
    return static_cast<double>(i + 1) + (target - curve[i]) / d;
  };
  if (target <= curve.front()) return segment(0);
  if (target >= curve.back()) return segment(n - 2);
  const auto it = std::lower_bound(curve.begin(), curve.end(), target);
  const auto i = static_cast<std::size_t>(it - curve.begin());
  return segment(i - 1);
}

double oracle_pse(const SynthEnvSpec& spec, const Tone& reference, int pitch) {
  if (pitch == reference.pitch) return reference.velocity;
  return level_crossing(oracle_velocity_curve(spec, pitch), true_loudness_oracle(spec, reference));
}

SimulatedElc simulate_elc(const SynthEnvSpec& spec, const ElcProtocol& protocol,
                          std::uint64_t seed) {
  spec.validate();
  if (protocol.subjects_per_level < 2) throw ConfigError("need at least 2 subjects per level");
  std::vector<int> levels = protocol.reference_velocities;
  std::sort(levels.begin(), levels.end());

  std::map<int, std::vector<double>> curves;
  for (int p : protocol.variable_pitches) curves[p] = oracle_velocity_curve(spec, p);
  const std::vector<double> ref_curve = protocol.variable_pitches.end() !=
                                                std::find(protocol.variable_pitches.begin(),
                                                          protocol.variable_pitches.end(),
                                                          protocol.reference_pitch)
                                            ? curves[protocol.reference_pitch]
                                            : oracle_velocity_curve(spec, protocol.reference_pitch);

  SimulatedElc out;
  out.ribbons.environment_id = spec.environment_id;
  for (std::size_t level = 0; level < levels.size(); ++level) {
    const Tone reference{protocol.reference_pitch, levels[level]};
    validate(reference);
    const double target = ref_curve[static_cast<std::size_t>(reference.velocity - 1)];
    std::vector<SessionState> sessions;
    for (int subject = 0; subject < protocol.subjects_per_level; ++subject) {
      std::mt19937_64 rng(mix_seed(seed, 1000 * level + subject));
      const double slope =
          std::uniform_real_distribution<double>(protocol.slope_min, protocol.slope_max)(rng);
      std::normal_distribution<double> jitter(0.0, protocol.pse_jitter);
      for (int pitch : protocol.variable_pitches) {
        const double exact = pitch == reference.pitch
                                 ? static_cast<double>(reference.velocity)
                                 : level_crossing(curves[pitch], target);
        const double true_pse = exact + (protocol.pse_jitter > 0.0 ? jitter(rng) : 0.0);
        auto sim = simulate_session(true_pse, slope, reference, pitch,
                                    mix_seed(rng(), static_cast<std::uint64_t>(pitch)),
                                    protocol.rounds_total);
        sessions.push_back(sim.state);
        out.runs.push_back(SimulatedRun{static_cast<int>(level), subject, true_pse, slope,
                                        std::move(sim.state)});
      }
    }
    out.ribbons.ribbons.push_back(aggregate_ribbons(sessions, reference.velocity));
  }
  return out;
}

}  // namespace pianoloud
