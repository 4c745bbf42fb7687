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

#include "pianoloud/nonparametric.hpp"

#include <algorithm>
#include <map>

#include "pianoloud/isotonic.hpp"

namespace pianoloud {

PiecewiseLinear::PiecewiseLinear(std::vector<std::pair<double, double>> knots)
    : knots_(std::move(knots)) {
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    if (!(knots_[i].first > knots_[i - 1].first)) {
      throw DomainError("piecewise-linear knots must be strictly increasing in x");
    }
  }
}

double PiecewiseLinear::operator()(double x) const {
  if (knots_.empty()) throw DomainError("empty piecewise-linear curve");
  if (knots_.size() == 1) return knots_.front().second;
  std::size_t i;
  if (x <= knots_.front().first) {
    i = 0;
  } else if (x >= knots_.back().first) {
    i = knots_.size() - 2;
  } else {
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), x,
                                     [](double v, const auto& k) { return v < k.first; });
    i = static_cast<std::size_t>(it - knots_.begin()) - 1;
  }
  const auto& [x0, y0] = knots_[i];
  const auto& [x1, y1] = knots_[i + 1];
  if (x == x0) return y0;
  if (x == x1) return y1;
  return y0 + (x - x0) * (y1 - y0) / (x1 - x0);
}

double NonParametricModel::at(const Tone& tone) const {
  validate(tone);
  return grid(tone.pitch - kMinPitch, tone.velocity - kMinVelocity);
}

double NonParametricModel::at(int pitch, double velocity) const {
  if (!is_valid_pitch(pitch)) throw DomainError("pitch outside [21..108]");
  const Eigen::Index row = pitch - kMinPitch;
  if (!columns.empty()) return columns[static_cast<std::size_t>(row)](velocity);
  const double v = std::clamp(velocity, double(kMinVelocity), double(kMaxVelocity));
  const auto lo = static_cast<Eigen::Index>(std::floor(v)) - kMinVelocity;
  const Eigen::Index hi = std::min<Eigen::Index>(lo + 1, kNumVelocities - 1);
  const double frac = v - std::floor(v);
  return grid(row, lo) + frac * (grid(row, hi) - grid(row, lo));
}

namespace {

// Merges knots at equal velocity (averaging), after isotonic pooling of the
// values in velocity order. Returns true when pooling changed anything.
bool monotone_knots(std::vector<std::pair<double, double>>& knots) {
  std::stable_sort(knots.begin(), knots.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  Eigen::VectorXd y(static_cast<Eigen::Index>(knots.size()));
  for (std::size_t i = 0; i < knots.size(); ++i) y[static_cast<Eigen::Index>(i)] = knots[i].second;
  const Eigen::VectorXd iso = isotonic_regression<double>(y);
  const bool changed = (iso - y).cwiseAbs().maxCoeff() > 0.0;
  std::vector<std::pair<double, double>> merged;
  std::vector<int> counts;
  for (std::size_t i = 0; i < knots.size(); ++i) {
    const double v = iso[static_cast<Eigen::Index>(i)];
    if (!merged.empty() && merged.back().first == knots[i].first) {
      merged.back().second += v;
      ++counts.back();
    } else {
      merged.emplace_back(knots[i].first, v);
      counts.push_back(1);
    }
  }
  for (std::size_t i = 0; i < merged.size(); ++i) merged[i].second /= counts[i];
  knots = std::move(merged);
  return changed;
}

}  // namespace

NonParametricBuild build_nonparametric(std::span<const EqualLoudnessRibbon> ribbons,
                                       std::span<const PureToneAnchor> anchors,
                                       const std::string& environment_id) {
  if (ribbons.empty()) throw DomainError("build_nonparametric needs at least one ribbon");
  const int p_ref = ribbons.front().reference_pitch();
  for (const auto& r : ribbons) {
    if (r.reference_pitch() != p_ref) throw DomainError("ribbons disagree on the reference pitch");
    if (r.points.empty()) throw DomainError("ribbon without points");
  }

  std::map<int, double> anchor_map;
  for (const PureToneAnchor& a : anchors) {
    if (!is_valid_velocity(a.velocity)) throw DomainError("anchor velocity outside [1..127]");
    if (!(a.sones > 0.0)) throw DomainError("anchor sones must be positive");
    if (!anchor_map.emplace(a.velocity, a.sones).second) {
      throw DomainError("duplicate anchor at velocity " + std::to_string(a.velocity));
    }
  }
  if (!anchor_map.count(kMinVelocity) || !anchor_map.count(kMaxVelocity)) {
    throw DomainError("anchors must include velocities 1 and 127");
  }
  std::vector<std::pair<double, double>> anchor_knots(anchor_map.begin(), anchor_map.end());
  const bool anchors_monotone = !monotone_knots(anchor_knots);
  const PiecewiseLinear reference_column(anchor_knots);

  NonParametricBuild out;
  if (!anchors_monotone) out.warnings.push_back("anchor sones not monotone in velocity; pooled");
  const auto levels = static_cast<Eigen::Index>(ribbons.size());
  out.contours.resize(kNumPitches, levels);
  for (Eigen::Index k = 0; k < levels; ++k) {
    const auto& r = ribbons[static_cast<std::size_t>(k)];
    out.level_sones.push_back(reference_column(r.reference_velocity()));
    std::vector<std::pair<double, double>> medians;
    for (const RibbonPoint& p : r.points) medians.emplace_back(p.pitch, p.median);
    const PiecewiseLinear across(medians);
    const double first = medians.front().first;
    const double last = medians.back().first;
    for (int p = kMinPitch; p <= kMaxPitch; ++p) {
      out.contours(p - kMinPitch, k) = across(std::clamp(double(p), first, last));
    }
  }

  NonParametricModel& m = out.model;
  m.environment_id = environment_id;
  m.grid.resize(kNumPitches, kNumVelocities);
  m.columns.reserve(kNumPitches);
  for (int p = kMinPitch; p <= kMaxPitch; ++p) {
    // The reference pitch is filled like any other: its measured contour
    // crossings win over the anchor column between the extremes.
    std::vector<std::pair<double, double>> knots;
    std::map<double, bool> contour_at;
    for (Eigen::Index k = 0; k < levels; ++k) {
      const double v = std::clamp(out.contours(p - kMinPitch, k), double(kMinVelocity),
                                  double(kMaxVelocity));
      knots.emplace_back(v, out.level_sones[static_cast<std::size_t>(k)]);
      contour_at[v] = true;
    }
    // Extreme anchors yield to a contour sitting on the same velocity.
    if (!contour_at.count(kMinVelocity)) knots.emplace_back(kMinVelocity, anchor_map[kMinVelocity]);
    if (!contour_at.count(kMaxVelocity)) knots.emplace_back(kMaxVelocity, anchor_map[kMaxVelocity]);
    if (monotone_knots(knots)) {
      out.warnings.push_back("crossing contours at pitch " + std::to_string(p) +
                             " resolved by isotonic pooling");
    }
    m.columns.emplace_back(std::move(knots));
    for (int v = kMinVelocity; v <= kMaxVelocity; ++v) {
      m.grid(p - kMinPitch, v - kMinVelocity) = m.columns.back()(v);
    }
  }
  return out;
}

void to_json(Json& j, const NonParametricModel& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.grid.rows(); ++r) {
    std::vector<double> row(m.grid.cols());
    for (Eigen::Index c = 0; c < m.grid.cols(); ++c) row[c] = m.grid(r, c);
    rows.push_back(row);
  }
  j = Json{{"type", "nonparametric"}, {"environment_id", m.environment_id}, {"grid", rows}};
}

void from_json(const Json& j, NonParametricModel& m) {
  if (j.at("type").get<std::string>() != "nonparametric") throw SchemaError("not a nonparametric model");
  m.environment_id = j.value("environment_id", std::string());
  const auto& rows = j.at("grid");
  if (rows.size() != kNumPitches) throw SchemaError("grid must have 88 rows");
  m.grid.resize(kNumPitches, kNumVelocities);
  for (Eigen::Index r = 0; r < kNumPitches; ++r) {
    const auto row = rows[static_cast<std::size_t>(r)].get<std::vector<double>>();
    if (row.size() != kNumVelocities) throw SchemaError("grid rows must have 127 entries");
    for (Eigen::Index c = 0; c < kNumVelocities; ++c) m.grid(r, c) = row[static_cast<std::size_t>(c)];
  }
  m.columns.clear();
}

}  // namespace pianoloud
