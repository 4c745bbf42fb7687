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
#include <string>
#include <vector>

#include "pianoloud/tone.hpp"
#include "pianoloud/wav.hpp"

namespace pianoloud {

struct GainKnot {
  double hz = 0.0;
  double gain = 1.0;
};

/// Parameters of a synthetic piano-in-a-room. Each environment stands in for
/// one physical instrument and its acoustics.
///
/// A tone (p, v) renders as
///
///   x(t) = sum_k  A(v) * G(k f0) * k^-alpha(v) * env_k(t) * sin(2 pi k f0 t)
///          + noise
///
/// with A(v) = peak_gain * 10^(dynamic_range_db * (v - 127) / (126 * 20)),
/// alpha(v) interpolating linearly from tilt_soft (v = 1) to tilt_loud
/// (v = 127), env_k(t) = exp(-t d(p) k - max(0, t - note_duration) damper),
/// d(p) = decay_at_a4 * 2^(decay_pitch_slope (p - 69) / 12) and G the room
/// gain profile (piecewise linear over log-frequency, flat 1 when empty).
struct SynthEnvSpec {
  std::string environment_id = "synthetic";
  int harmonic_count = 12;
  double peak_gain = 0.08;
  double dynamic_range_db = 40.0;
  double tilt_soft = 2.0;
  double tilt_loud = 0.8;
  double decay_at_a4 = 1.5;
  double decay_pitch_slope = 0.5;
  double damper_rate = 12.0;
  std::vector<GainKnot> room_gain;
  double noise_floor = 1e-4;  // -80 dBFS RMS
  std::uint64_t seed = 0;
  int sample_rate = 22050;
  double clip_duration = 1.3;
  double note_duration = 0.3;
  std::vector<Tone> failed_tones;

  double amplitude(int velocity) const;
  double tilt(int velocity) const;
  double decay(int pitch) const;
  double room(double hz) const;

  /// Throws ConfigError when a parameter violates the invariants (monotone
  /// amplitude law, finite non-negative gains, ...).
  void validate() const;

  Eigen::Index clip_samples() const;

  /// "env1": grand piano, anechoic (flat room). "env2": upright piano in a
  /// small room with a low-mid resonance around A3.
  static SynthEnvSpec preset(const std::string& name);
};

/// Deterministic in (spec, tone, sample_rate): repeated calls return
/// bit-identical samples.
Clip synthesize_tone(const SynthEnvSpec& spec, const Tone& tone, int sample_rate);
inline Clip synthesize_tone(const SynthEnvSpec& spec, const Tone& tone) {
  return synthesize_tone(spec, tone, spec.sample_rate);
}

/// Frequency weighting used by the ground-truth loudness: band-pass with
/// second-order skirts below 200 Hz and fourth-order above 5 kHz.
double loudness_weighting(double hz);

/// sum_f w(f) |X(f)|^2 / N over the clip's DFT (Parseval-normalised, so an
/// unweighted sum equals the clip's sum of squares).
double band_weighted_energy(const Clip& clip, int sample_rate);

inline constexpr double kOracleExponent = 0.3;
inline constexpr double kOracleReferenceEnergy = 1e-3;

/// (band_weighted_energy / reference)^0.3 -- loudness in sones of an
/// arbitrary clip under the synthetic listener.
double oracle_loudness_of_clip(const Clip& clip, int sample_rate);

/// Ground-truth loudness of a synthetic tone.
double true_loudness_oracle(const SynthEnvSpec& spec, const Tone& tone);

}  // namespace pianoloud
