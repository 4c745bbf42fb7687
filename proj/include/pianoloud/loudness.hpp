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

#include <Eigen/Core>
#include <cmath>
#include <concepts>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pianoloud/json_io.hpp"
#include "pianoloud/ribbons.hpp"
#include "pianoloud/synth.hpp"
#include "pianoloud/tone.hpp"

namespace pianoloud {

/// 2^((phons - 40) / 10), applied over the whole range (including below
/// 40 phon, where standard practice switches to a different law). Whole
/// decades are applied as an exact power of two, so +10 phon doubles exactly.
inline double sones_from_phons(double phons) {
  const double d = phons - 40.0;
  const double decades = std::floor(d / 10.0);
  return std::ldexp(std::exp2((d - 10.0 * decades) / 10.0), static_cast<int>(decades));
}

inline double phons_from_sones(double sones) {
  if (!(sones > 0.0)) throw DomainError("sones must be positive");
  return 40.0 + 10.0 * std::log2(sones);
}

/// A reference-pitch tone matched to a pure tone of `matched_phons`.
struct PureToneAnchor {
  int velocity = 64;
  double matched_phons = 40.0;
  double sones = 1.0;

  static PureToneAnchor from_phons(int velocity, double phons);
  static PureToneAnchor from_sones(int velocity, double sones);
};

void to_json(Json& j, const PureToneAnchor& a);
void from_json(const Json& j, PureToneAnchor& a);

/// Anchors whose matched loudness comes from the synthetic oracle.
std::vector<PureToneAnchor> anchors_from_oracle(const SynthEnvSpec& spec, int reference_pitch,
                                                const std::vector<int>& velocities);

/// Default anchor velocities: the four reference levels plus the extremes.
std::vector<int> default_anchor_velocities();

/// Scores (sones or raw) for the 88 x 127 grid; NaN marks an undefined tone.
class LoudnessTable {
 public:
  LoudnessTable();
  explicit LoudnessTable(Eigen::MatrixXd values);

  static LoudnessTable from_function(const std::function<std::optional<double>(const Tone&)>& f);

  bool defined(const Tone& tone) const;
  /// Throws DomainError when undefined.
  double at(const Tone& tone) const;
  const Eigen::MatrixXd& values() const { return values_; }

 private:
  Eigen::MatrixXd values_;  // kNumPitches x kNumVelocities
};

struct AccuracyReport {
  std::optional<double> c1;  // absent when the subset is empty
  std::optional<double> c2;
  std::size_t c1_pairs = 0;
  std::size_t c2_pairs = 0;
};

void to_json(Json& j, const AccuracyReport& r);

/// Fraction of pairs whose score order agrees with the label, per
/// condition; ties score 0.5. `score` maps a Tone to a double.
template <typename Scorer>
  requires std::invocable<Scorer&, const Tone&>
AccuracyReport evaluate_accuracy(Scorer&& score, std::span<const ComparisonPair> pairs) {
  double hits[2] = {0.0, 0.0};
  std::size_t counts[2] = {0, 0};
  for (const ComparisonPair& p : pairs) {
    const double s1 = score(p.x1);
    const double s2 = score(p.x2);
    if (!std::isfinite(s1) || !std::isfinite(s2)) {
      throw DomainError("model score undefined for pair member");
    }
    const int c = p.condition == PairCondition::C1 ? 0 : 1;
    ++counts[c];
    if (s1 == s2) {
      hits[c] += 0.5;
    } else if ((s1 > s2) == p.label) {
      hits[c] += 1.0;
    }
  }
  AccuracyReport r;
  r.c1_pairs = counts[0];
  r.c2_pairs = counts[1];
  if (counts[0]) r.c1 = hits[0] / static_cast<double>(counts[0]);
  if (counts[1]) r.c2 = hits[1] / static_cast<double>(counts[1]);
  return r;
}

inline AccuracyReport evaluate_accuracy(const LoudnessTable& table,
                                        std::span<const ComparisonPair> pairs) {
  return evaluate_accuracy([&](const Tone& t) { return table.at(t); }, pairs);
}

/// 88 rows (pitch) x 127 columns (velocity); undefined cells are empty.
void write_heatmap_csv(std::ostream& out, const LoudnessTable& table,
                       const std::string& comment = "");

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// P(x1 louder than x2) from two loudness scores.
inline double prob_louder(double score1, double score2) { return sigmoid(score1 - score2); }

}  // namespace pianoloud
