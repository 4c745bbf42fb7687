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

#include "pianoloud/json_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "pianoloud/error.hpp"

namespace pianoloud {

void to_json(Json& j, const Tone& t) { j = Json{{"pitch", t.pitch}, {"velocity", t.velocity}}; }

void from_json(const Json& j, Tone& t) {
  j.at("pitch").get_to(t.pitch);
  j.at("velocity").get_to(t.velocity);
}

void to_json(Json& j, const GainKnot& k) { j = Json::array({k.hz, k.gain}); }

void from_json(const Json& j, GainKnot& k) {
  if (!j.is_array() || j.size() != 2) throw SchemaError("room_gain knot must be [hz, gain]");
  j[0].get_to(k.hz);
  j[1].get_to(k.gain);
}

void to_json(Json& j, const SynthEnvSpec& s) {
  j = Json{{"environment_id", s.environment_id},
           {"harmonic_count", s.harmonic_count},
           {"peak_gain", s.peak_gain},
           {"dynamic_range_db", s.dynamic_range_db},
           {"tilt_soft", s.tilt_soft},
           {"tilt_loud", s.tilt_loud},
           {"decay_at_a4", s.decay_at_a4},
           {"decay_pitch_slope", s.decay_pitch_slope},
           {"damper_rate", s.damper_rate},
           {"room_gain", s.room_gain},
           {"noise_floor", s.noise_floor},
           {"seed", s.seed},
           {"sample_rate", s.sample_rate},
           {"clip_duration", s.clip_duration},
           {"note_duration", s.note_duration},
           {"failed_tones", s.failed_tones}};
}

void from_json(const Json& j, SynthEnvSpec& s) {
  // Missing keys keep their defaults so presets can be partially overridden.
  auto opt = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  opt("environment_id", s.environment_id);
  opt("harmonic_count", s.harmonic_count);
  opt("peak_gain", s.peak_gain);
  opt("dynamic_range_db", s.dynamic_range_db);
  opt("tilt_soft", s.tilt_soft);
  opt("tilt_loud", s.tilt_loud);
  opt("decay_at_a4", s.decay_at_a4);
  opt("decay_pitch_slope", s.decay_pitch_slope);
  opt("damper_rate", s.damper_rate);
  opt("room_gain", s.room_gain);
  opt("noise_floor", s.noise_floor);
  opt("seed", s.seed);
  opt("sample_rate", s.sample_rate);
  opt("clip_duration", s.clip_duration);
  opt("note_duration", s.note_duration);
  opt("failed_tones", s.failed_tones);
}

std::string config_hash(const Json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  try {
    return Json::parse(f);
  } catch (const Json::parse_error& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << j.dump(2) << '\n';
  if (!f) throw IoError("write failed for " + path);
}

}  // namespace pianoloud
