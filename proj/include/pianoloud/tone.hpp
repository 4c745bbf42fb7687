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

#include <cmath>
#include <compare>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "pianoloud/error.hpp"

namespace pianoloud {

inline constexpr int kMinPitch = 21;
inline constexpr int kMaxPitch = 108;
inline constexpr int kNumPitches = kMaxPitch - kMinPitch + 1;  // 88 keys
inline constexpr int kMinVelocity = 1;
inline constexpr int kMaxVelocity = 127;
inline constexpr int kNumVelocities = kMaxVelocity - kMinVelocity + 1;

inline constexpr bool is_valid_pitch(int pitch) {
  return pitch >= kMinPitch && pitch <= kMaxPitch;
}

inline constexpr bool is_valid_velocity(int velocity) {
  return velocity >= kMinVelocity && velocity <= kMaxVelocity;
}

/// A (pitch, velocity) performance control addressing one clip of a bank.
/// Velocity 0 is a note-off and never a stimulus.
struct Tone {
  int pitch = 69;
  int velocity = 64;

  constexpr bool valid() const {
    return is_valid_pitch(pitch) && is_valid_velocity(velocity);
  }

  /// Row-major index into an 88 x 127 pitch-major grid.
  constexpr int grid_index() const {
    return (pitch - kMinPitch) * kNumVelocities + (velocity - kMinVelocity);
  }

  static constexpr Tone from_grid_index(int index) {
    return Tone{kMinPitch + index / kNumVelocities,
                kMinVelocity + index % kNumVelocities};
  }

  friend constexpr auto operator<=>(const Tone&, const Tone&) = default;
};

inline void validate(const Tone& tone) {
  if (!is_valid_pitch(tone.pitch)) {
    throw DomainError("pitch " + std::to_string(tone.pitch) +
                      " outside [21..108]");
  }
  if (!is_valid_velocity(tone.velocity)) {
    throw DomainError("velocity " + std::to_string(tone.velocity) +
                      " outside [1..127]");
  }
}

inline double pitch_to_hz(double pitch) {
  return 440.0 * std::exp2((pitch - 69.0) / 12.0);
}

inline std::string to_string(const Tone& tone) {
  return std::to_string(tone.pitch) + "_" + std::to_string(tone.velocity);
}

/// All velocities 1, 1+step, ... up to 127. A step of 1 gives the full range.
inline std::vector<int> velocity_grid(int step = 1) {
  if (step < 1) throw ConfigError("velocity step must be >= 1");
  std::vector<int> out;
  for (int v = kMinVelocity; v <= kMaxVelocity; v += step) out.push_back(v);
  return out;
}

}  // namespace pianoloud

template <>
struct std::hash<pianoloud::Tone> {
  std::size_t operator()(const pianoloud::Tone& t) const noexcept {
    return std::hash<int>{}(t.pitch * 131 + t.velocity);
  }
};
