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

#include "pianoloud/synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <unsupported/Eigen/FFT>

namespace pianoloud {

double SynthEnvSpec::amplitude(int velocity) const {
  const double rel = static_cast<double>(velocity - kMaxVelocity) / (kMaxVelocity - kMinVelocity);
  return peak_gain * std::pow(10.0, dynamic_range_db * rel / 20.0);
}

double SynthEnvSpec::tilt(int velocity) const {
  const double u = static_cast<double>(velocity - kMinVelocity) / (kMaxVelocity - kMinVelocity);
  return tilt_soft + (tilt_loud - tilt_soft) * u;
}

double SynthEnvSpec::decay(int pitch) const {
  return decay_at_a4 * std::exp2(decay_pitch_slope * (pitch - 69) / 12.0);
}

double SynthEnvSpec::room(double hz) const {
  if (room_gain.empty()) return 1.0;
  if (hz <= room_gain.front().hz) return room_gain.front().gain;
  if (hz >= room_gain.back().hz) return room_gain.back().gain;
  const double x = std::log(hz);
  for (std::size_t i = 1; i < room_gain.size(); ++i) {
    if (hz <= room_gain[i].hz) {
      const double x0 = std::log(room_gain[i - 1].hz);
      const double x1 = std::log(room_gain[i].hz);
      const double u = (x - x0) / (x1 - x0);
      return room_gain[i - 1].gain + u * (room_gain[i].gain - room_gain[i - 1].gain);
    }
  }
  return room_gain.back().gain;
}

void SynthEnvSpec::validate() const {
  auto finite_nonneg = [](double x) { return std::isfinite(x) && x >= 0.0; };
  if (harmonic_count < 1) throw ConfigError("harmonic_count must be >= 1");
  if (!(peak_gain > 0.0) || !std::isfinite(peak_gain)) {
    throw ConfigError("peak_gain must be positive and finite");
  }
  // A(v) is strictly increasing iff the dynamic range is positive.
  if (!(dynamic_range_db > 0.0) || !std::isfinite(dynamic_range_db)) {
    throw ConfigError("dynamic_range_db must be positive (amplitude law must increase)");
  }
  if (!std::isfinite(tilt_soft) || !std::isfinite(tilt_loud)) {
    throw ConfigError("spectral tilt must be finite");
  }
  if (!finite_nonneg(decay_at_a4) || !std::isfinite(decay_pitch_slope) ||
      !finite_nonneg(damper_rate)) {
    throw ConfigError("decay parameters must be finite and non-negative");
  }
  if (!finite_nonneg(noise_floor)) throw ConfigError("noise_floor must be finite and >= 0");
  for (std::size_t i = 0; i < room_gain.size(); ++i) {
    if (!(room_gain[i].hz > 0.0) || !finite_nonneg(room_gain[i].gain)) {
      throw ConfigError("room_gain knots need positive frequency and finite gain >= 0");
    }
    if (i > 0 && !(room_gain[i].hz > room_gain[i - 1].hz)) {
      throw ConfigError("room_gain knots must be sorted by frequency");
    }
  }
  if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
  if (!(clip_duration > 0.0) || !(note_duration > 0.0) || note_duration > clip_duration) {
    throw ConfigError("durations must satisfy 0 < note_duration <= clip_duration");
  }
}

Eigen::Index SynthEnvSpec::clip_samples() const {
  return static_cast<Eigen::Index>(std::llround(clip_duration * sample_rate));
}

SynthEnvSpec SynthEnvSpec::preset(const std::string& name) {
  SynthEnvSpec s;
  if (name == "env1") {
    s.environment_id = "env1";
    s.seed = 1;
    return s;
  }
  if (name == "env2") {
    s.environment_id = "env2";
    s.seed = 2;
    s.peak_gain = 0.06;
    s.dynamic_range_db = 34.0;
    s.tilt_soft = 1.7;
    s.tilt_loud = 0.6;
    s.decay_at_a4 = 2.2;
    s.decay_pitch_slope = 0.6;
    s.damper_rate = 9.0;
    s.room_gain = {{60.0, 0.9}, {160.0, 1.1}, {220.0, 2.2}, {300.0, 1.1},
                   {1500.0, 0.8}, {4000.0, 1.2}, {11025.0, 0.7}};
    return s;
  }
  throw ConfigError("unknown synthetic environment preset '" + name + "'");
}

Clip synthesize_tone(const SynthEnvSpec& spec, const Tone& tone, int sample_rate) {
  validate(tone);
  if (sample_rate <= 0) throw DomainError("sample_rate must be positive");
  const auto n = static_cast<Eigen::Index>(std::llround(spec.clip_duration * sample_rate));
  Clip out = Clip::Zero(n);

  const double f0 = pitch_to_hz(tone.pitch);
  const double nyquist = 0.5 * sample_rate;
  const double amp = spec.amplitude(tone.velocity);
  const double alpha = spec.tilt(tone.velocity);
  const double decay = spec.decay(tone.pitch);
  const double dt = 1.0 / sample_rate;
  const double note_end = spec.note_duration;

  // Each partial runs a complex phasor recurrence, re-anchored to the closed
  // form at the start of every block to bound accumulated rounding.
  constexpr Eigen::Index kBlock = 256;
  for (int k = 1; k <= spec.harmonic_count; ++k) {
    const double f = k * f0;
    if (f >= nyquist) break;
    const double a_k = amp * spec.room(f) * std::pow(static_cast<double>(k), -alpha);
    const double rate = decay * k;
    const double omega = 2.0 * std::numbers::pi * f;
    auto closed_form = [&](Eigen::Index i) {
      const double t = static_cast<double>(i) * dt;
      const double env = std::exp(-t * rate - std::max(0.0, t - note_end) * spec.damper_rate);
      return std::polar(a_k * env, omega * t);
    };
    const std::complex<double> step_sustain = std::polar(std::exp(-rate * dt), omega * dt);
    const std::complex<double> step_damped =
        std::polar(std::exp(-(rate + spec.damper_rate) * dt), omega * dt);
    for (Eigen::Index start = 0; start < n; start += kBlock) {
      std::complex<double> z = closed_form(start);
      const Eigen::Index stop = std::min(n, start + kBlock);
      for (Eigen::Index i = start; i < stop; ++i) {
        out[i] += z.imag();
        z *= (static_cast<double>(i + 1) * dt > note_end) ? step_damped : step_sustain;
      }
    }
  }

  if (spec.noise_floor > 0.0) {
    // Same noise realisation for every velocity of a pitch.
    std::mt19937_64 rng(spec.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(tone.pitch));
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const double scale = spec.noise_floor * std::sqrt(3.0);  // unit RMS
    for (Eigen::Index i = 0; i < n; ++i) out[i] += scale * uni(rng);
  }
  return out;
}

double loudness_weighting(double hz) {
  const double lo = 200.0;
  const double hi = 5000.0;
  const double f2 = hz * hz;
  const double r = hz / hi;
  return f2 / (f2 + lo * lo) / (1.0 + r * r * r * r);
}

double band_weighted_energy(const Clip& clip, int sample_rate) {
  if (clip.size() == 0) return 0.0;
  std::size_t nfft = 1;
  while (nfft < static_cast<std::size_t>(clip.size())) nfft <<= 1;
  std::vector<double> padded(nfft, 0.0);
  std::copy(clip.data(), clip.data() + clip.size(), padded.begin());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, padded);
  // Real input: fold the negative frequencies onto their positive twins.
  double energy = 0.0;
  for (std::size_t i = 0; i <= nfft / 2; ++i) {
    const double hz = static_cast<double>(i) * sample_rate / static_cast<double>(nfft);
    const double mult = (i == 0 || i == nfft / 2) ? 1.0 : 2.0;
    energy += mult * loudness_weighting(hz) * std::norm(spectrum[i]);
  }
  return energy / static_cast<double>(nfft);
}

double oracle_loudness_of_clip(const Clip& clip, int sample_rate) {
  return std::pow(band_weighted_energy(clip, sample_rate) / kOracleReferenceEnergy,
                  kOracleExponent);
}

double true_loudness_oracle(const SynthEnvSpec& spec, const Tone& tone) {
  validate(tone);
  return oracle_loudness_of_clip(synthesize_tone(spec, tone), spec.sample_rate);
}

}  // namespace pianoloud
