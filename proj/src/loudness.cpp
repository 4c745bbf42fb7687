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

#include "pianoloud/loudness.hpp"

#include <ostream>

namespace pianoloud {

PureToneAnchor PureToneAnchor::from_phons(int velocity, double phons) {
  if (!is_valid_velocity(velocity)) throw DomainError("anchor velocity outside [1..127]");
  return PureToneAnchor{velocity, phons, sones_from_phons(phons)};
}

PureToneAnchor PureToneAnchor::from_sones(int velocity, double sones) {
  return from_phons(velocity, phons_from_sones(sones));
}

void to_json(Json& j, const PureToneAnchor& a) {
  j = Json{{"velocity", a.velocity}, {"matched_phons", a.matched_phons}, {"sones", a.sones}};
}

void from_json(const Json& j, PureToneAnchor& a) {
  // Either field may be supplied; phons win when both are present.
  const int v = j.at("velocity").get<int>();
  if (j.contains("matched_phons")) {
    a = PureToneAnchor::from_phons(v, j.at("matched_phons").get<double>());
  } else {
    a = PureToneAnchor::from_sones(v, j.at("sones").get<double>());
  }
}

std::vector<PureToneAnchor> anchors_from_oracle(const SynthEnvSpec& spec, int reference_pitch,
                                                const std::vector<int>& velocities) {
  std::vector<PureToneAnchor> out;
  for (int v : velocities) {
    out.push_back(PureToneAnchor::from_sones(v, true_loudness_oracle(spec, Tone{reference_pitch, v})));
  }
  return out;
}

std::vector<int> default_anchor_velocities() { return {1, 32, 44, 60, 80, 127}; }

LoudnessTable::LoudnessTable()
    : values_(Eigen::MatrixXd::Constant(kNumPitches, kNumVelocities,
                                        std::numeric_limits<double>::quiet_NaN())) {}

LoudnessTable::LoudnessTable(Eigen::MatrixXd values) : values_(std::move(values)) {
  if (values_.rows() != kNumPitches || values_.cols() != kNumVelocities) {
    throw DomainError("loudness table must be 88 x 127");
  }
}

LoudnessTable LoudnessTable::from_function(
    const std::function<std::optional<double>(const Tone&)>& f) {
  LoudnessTable t;
  for (int p = kMinPitch; p <= kMaxPitch; ++p)
    for (int v = kMinVelocity; v <= kMaxVelocity; ++v) {
      if (auto s = f(Tone{p, v})) t.values_(p - kMinPitch, v - kMinVelocity) = *s;
    }
  return t;
}

bool LoudnessTable::defined(const Tone& tone) const {
  return tone.valid() && std::isfinite(values_(tone.pitch - kMinPitch, tone.velocity - kMinVelocity));
}

double LoudnessTable::at(const Tone& tone) const {
  if (!defined(tone)) throw DomainError("loudness undefined for tone " + to_string(tone));
  return values_(tone.pitch - kMinPitch, tone.velocity - kMinVelocity);
}

void to_json(Json& j, const AccuracyReport& r) {
  j = Json{{"accuracy_C1", r.c1 ? Json(*r.c1) : Json(nullptr)},
           {"accuracy_C2", r.c2 ? Json(*r.c2) : Json(nullptr)},
           {"pairs_C1", r.c1_pairs},
           {"pairs_C2", r.c2_pairs}};
}

void write_heatmap_csv(std::ostream& out, const LoudnessTable& table, const std::string& comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "pitch";
  for (int v = kMinVelocity; v <= kMaxVelocity; ++v) out << ",v" << v;
  out << '\n';
  out.precision(10);
  for (int p = kMinPitch; p <= kMaxPitch; ++p) {
    out << p;
    for (int v = kMinVelocity; v <= kMaxVelocity; ++v) {
      out << ',';
      if (table.defined(Tone{p, v})) out << table.at(Tone{p, v});
    }
    out << '\n';
  }
}

}  // namespace pianoloud
