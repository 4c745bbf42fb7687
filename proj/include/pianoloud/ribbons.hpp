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
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pianoloud/bank.hpp"
#include "pianoloud/json_io.hpp"
#include "pianoloud/psychometric.hpp"
#include "pianoloud/tone.hpp"

namespace pianoloud {

/// Inclusive linear-interpolation quantile of unsorted samples: position
/// q * (n - 1) in the sorted order, interpolated between neighbours.
template <typename Scalar>
Scalar inclusive_quantile(std::vector<Scalar> samples, Scalar q) {
  if (samples.empty()) throw AggregationError("quantile of an empty sample");
  std::sort(samples.begin(), samples.end());
  const Scalar pos = q * Scalar(samples.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, samples.size() - 1);
  const Scalar frac = pos - Scalar(lo);
  return samples[lo] + frac * (samples[hi] - samples[lo]);
}

struct RibbonPoint {
  int pitch = 69;
  std::vector<double> pse_samples;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;

  static RibbonPoint from_samples(int pitch, std::vector<double> samples);
};

/// Interquartile band of subjects' PSEs per variable pitch, for one
/// reference tone.
struct EqualLoudnessRibbon {
  Tone reference;
  std::vector<RibbonPoint> points;  // sorted by pitch, unique
  bool self_consistent = true;      // q1 <= v_ref <= q3 at the reference pitch

  const RibbonPoint* at(int pitch) const;
  int reference_velocity() const { return reference.velocity; }
  int reference_pitch() const { return reference.pitch; }
};

/// Builds a ribbon from per-pitch PSE samples (sorted and validated).
EqualLoudnessRibbon make_ribbon(const Tone& reference, std::vector<RibbonPoint> points);

/// Per-pitch quartiles of the sessions' reported PSEs. All sessions must be
/// complete and share the reference tone (whose velocity must be v_ref);
/// every variable pitch needs at least two sessions.
EqualLoudnessRibbon aggregate_ribbons(std::span<const SessionState> sessions, int v_ref);

enum class Comparison { x1_louder, x2_louder, incomparable };

std::string to_string(Comparison c);

/// Loudness order of two different-pitch tones as implied by the ribbons
/// (ascending reference velocity). x1 is louder when
///   - some level k has v1 > q3(k, p1) and v2 < q1(k, p2), or
///   - levels k1 > k2 have v1 >= q1(k1, p1), v2 <= q3(k2, p2) and the two
///     bands are disjoint (q1(k1, p) > q3(k2, p)) at both pitches.
/// Symmetrically for x2. Conflicting or absent evidence is incomparable, as
/// is any pitch outside the measured set.
Comparison ribbon_compare(std::span<const EqualLoudnessRibbon> ribbons, const Tone& x1,
                          const Tone& x2);

enum class PairCondition { C1, C2 };

struct ComparisonPair {
  Tone x1;
  Tone x2;
  bool label = false;  // true iff x1 is louder
  PairCondition condition = PairCondition::C1;

  friend bool operator==(const ComparisonPair&, const ComparisonPair&) = default;
};

struct PairDataset {
  std::vector<ComparisonPair> train;
  std::vector<ComparisonPair> test;
  std::size_t c1_count = 0;
  std::size_t c2_count = 0;
};

/// C1: every same-pitch pair of distinct unmasked velocities, louder = larger
/// velocity. C2: every cross-pitch pair of measured pitches that
/// ribbon_compare decides. Pair orientation is randomised (label follows) and
/// the union is split train/test by `split_ratio`, all driven by `seed`.
PairDataset build_pair_dataset(const ToneBank& bank, std::span<const EqualLoudnessRibbon> ribbons,
                               double split_ratio, std::uint64_t seed);

struct RibbonSet {
  std::string environment_id;
  std::vector<EqualLoudnessRibbon> ribbons;  // ascending reference velocity
};

void to_json(Json& j, const RibbonPoint& p);
void from_json(const Json& j, RibbonPoint& p);
void to_json(Json& j, const EqualLoudnessRibbon& r);
void from_json(const Json& j, EqualLoudnessRibbon& r);
void to_json(Json& j, const RibbonSet& s);
void from_json(const Json& j, RibbonSet& s);

/// CSV "p1,v1,p2,v2,y,condition"; lines starting with '#' are comments.
void write_pairs_csv(std::ostream& out, std::span<const ComparisonPair> pairs,
                     const std::string& comment = "");
std::vector<ComparisonPair> read_pairs_csv(std::istream& in);

}  // namespace pianoloud
