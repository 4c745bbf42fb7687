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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pianoloud/loudness.hpp"
#include "pianoloud/ribbons.hpp"

namespace pianoloud {

/// Piecewise-linear curve through (x, y) knots sorted by x; linear
/// continuation of the end segments outside the knot range.
class PiecewiseLinear {
 public:
  PiecewiseLinear() = default;
  explicit PiecewiseLinear(std::vector<std::pair<double, double>> knots);

  double operator()(double x) const;
  const std::vector<std::pair<double, double>>& knots() const { return knots_; }
  bool empty() const { return knots_.empty(); }

 private:
  std::vector<std::pair<double, double>> knots_;
};

/// Loudness in sones on the 88 x 127 grid by interpolating measured
/// equal-loudness contours.
struct NonParametricModel {
  std::string environment_id;
  Eigen::MatrixXd grid;  // kNumPitches x kNumVelocities, sones
  /// Per-pitch velocity->sones curves the grid was sampled from. Empty for
  /// models loaded from file (the grid is then interpolated instead).
  std::vector<PiecewiseLinear> columns;

  double at(const Tone& tone) const;
  /// Loudness at a real-valued velocity.
  double at(int pitch, double velocity) const;
  LoudnessTable table() const { return LoudnessTable(grid); }
};

struct NonParametricBuild {
  NonParametricModel model;
  Eigen::MatrixXd contours;          // kNumPitches x levels, contour velocity per pitch
  std::vector<double> level_sones;   // sones assigned to each contour
  std::vector<std::string> warnings; // crossing contours resolved by isotonic pooling
};

/// Reference column from the anchors, every contour carried to all pitches
/// by linear interpolation of its median PSEs (flat outside the measured
/// pitches) and tagged with the sones of its reference tone, then each pitch
/// column (the reference pitch included) interpolated in velocity between
/// the contours and the velocity 1 and 127 anchors, with isotonic pooling
/// wherever contours cross.
NonParametricBuild build_nonparametric(std::span<const EqualLoudnessRibbon> ribbons,
                                       std::span<const PureToneAnchor> anchors,
                                       const std::string& environment_id = "");

inline double nonparametric_loudness(const NonParametricModel& model, const Tone& tone) {
  return model.at(tone);
}

void to_json(Json& j, const NonParametricModel& m);
void from_json(const Json& j, NonParametricModel& m);

}  // namespace pianoloud
