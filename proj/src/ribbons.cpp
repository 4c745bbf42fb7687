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

#include "pianoloud/ribbons.hpp"

#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

namespace pianoloud {

RibbonPoint RibbonPoint::from_samples(int pitch, std::vector<double> samples) {
  if (!is_valid_pitch(pitch)) throw DomainError("ribbon pitch " + std::to_string(pitch));
  RibbonPoint p;
  p.pitch = pitch;
  p.q1 = inclusive_quantile(samples, 0.25);
  p.median = inclusive_quantile(samples, 0.5);
  p.q3 = inclusive_quantile(samples, 0.75);
  p.pse_samples = std::move(samples);
  return p;
}

const RibbonPoint* EqualLoudnessRibbon::at(int pitch) const {
  auto it = std::lower_bound(points.begin(), points.end(), pitch,
                             [](const RibbonPoint& p, int x) { return p.pitch < x; });
  return (it != points.end() && it->pitch == pitch) ? &*it : nullptr;
}

EqualLoudnessRibbon make_ribbon(const Tone& reference, std::vector<RibbonPoint> points) {
  validate(reference);
  std::sort(points.begin(), points.end(),
            [](const RibbonPoint& a, const RibbonPoint& b) { return a.pitch < b.pitch; });
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].pitch == points[i - 1].pitch) {
      throw AggregationError("duplicate ribbon pitch " + std::to_string(points[i].pitch));
    }
  }
  EqualLoudnessRibbon r{reference, std::move(points), true};
  if (const RibbonPoint* self = r.at(reference.pitch)) {
    r.self_consistent = self->q1 <= reference.velocity && reference.velocity <= self->q3;
  }
  return r;
}

EqualLoudnessRibbon aggregate_ribbons(std::span<const SessionState> sessions, int v_ref) {
  if (sessions.empty()) throw AggregationError("no sessions to aggregate");
  const Tone reference = sessions.front().reference();
  if (reference.velocity != v_ref) {
    throw AggregationError("sessions use reference velocity " +
                           std::to_string(reference.velocity) + ", expected " +
                           std::to_string(v_ref));
  }
  std::map<int, std::vector<double>> by_pitch;
  for (const SessionState& s : sessions) {
    if (s.reference() != reference) throw AggregationError("sessions disagree on the reference tone");
    if (!s.complete()) throw AggregationError("session at pitch " +
                                              std::to_string(s.variable_pitch()) +
                                              " is not complete");
    by_pitch[s.variable_pitch()].push_back(s.reported_pse().value);
  }
  std::vector<RibbonPoint> points;
  for (auto& [pitch, samples] : by_pitch) {
    if (samples.size() < 2) {
      throw AggregationError("pitch " + std::to_string(pitch) + " has fewer than 2 sessions");
    }
    points.push_back(RibbonPoint::from_samples(pitch, std::move(samples)));
  }
  return make_ribbon(reference, std::move(points));
}

std::string to_string(Comparison c) {
  switch (c) {
    case Comparison::x1_louder: return "x1_louder";
    case Comparison::x2_louder: return "x2_louder";
    case Comparison::incomparable: return "incomparable";
  }
  return "incomparable";
}

namespace {

struct Band {
  double q1, q3;
};

bool apart(const Band& x, const Band& y) { return x.q1 > y.q3 || y.q1 > x.q3; }

// Evidence that a is louder than b. bands_a[k] / bands_b[k] are the level-k
// bands at a's and b's pitch.
bool louder(const std::vector<Band>& bands_a, const std::vector<Band>& bands_b, int va, int vb) {
  const std::size_t levels = bands_a.size();
  for (std::size_t k = 0; k < levels; ++k) {
    if (va > bands_a[k].q3 && vb < bands_b[k].q1) return true;
  }
  for (std::size_t hi = 0; hi < levels; ++hi) {
    for (std::size_t lo = 0; lo < hi; ++lo) {
      const bool disjoint = apart(bands_a[hi], bands_a[lo]) && apart(bands_b[hi], bands_b[lo]);
      if (disjoint && va >= bands_a[hi].q1 && vb <= bands_b[lo].q3) return true;
    }
  }
  return false;
}

}  // namespace

Comparison ribbon_compare(std::span<const EqualLoudnessRibbon> ribbons, const Tone& x1,
                          const Tone& x2) {
  if (x1.pitch == x2.pitch) throw DomainError("ribbon_compare needs tones of different pitch");
  for (std::size_t i = 1; i < ribbons.size(); ++i) {
    if (!(ribbons[i - 1].reference_velocity() < ribbons[i].reference_velocity())) {
      throw DomainError("ribbons must be sorted by strictly increasing reference velocity");
    }
  }
  std::vector<Band> b1, b2;
  b1.reserve(ribbons.size());
  b2.reserve(ribbons.size());
  for (const auto& r : ribbons) {
    const RibbonPoint* p1 = r.at(x1.pitch);
    const RibbonPoint* p2 = r.at(x2.pitch);
    if (!p1 || !p2) return Comparison::incomparable;
    b1.push_back({p1->q1, p1->q3});
    b2.push_back({p2->q1, p2->q3});
  }
  if (b1.empty()) return Comparison::incomparable;
  const bool one = louder(b1, b2, x1.velocity, x2.velocity);
  const bool two = louder(b2, b1, x2.velocity, x1.velocity);
  if (one && !two) return Comparison::x1_louder;
  if (two && !one) return Comparison::x2_louder;
  return Comparison::incomparable;
}

PairDataset build_pair_dataset(const ToneBank& bank, std::span<const EqualLoudnessRibbon> ribbons,
                               double split_ratio, std::uint64_t seed) {
  if (ribbons.empty()) throw DatasetError("no ribbons supplied");
  if (!(split_ratio >= 0.0 && split_ratio <= 1.0)) throw DatasetError("split_ratio outside [0, 1]");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution flip(0.5);
  std::vector<ComparisonPair> all;

  auto emit = [&](const Tone& louder_tone, const Tone& softer_tone, PairCondition c) {
    if (flip(rng)) {
      all.push_back({softer_tone, louder_tone, false, c});
    } else {
      all.push_back({louder_tone, softer_tone, true, c});
    }
  };

  // Unmasked velocities per pitch.
  std::map<int, std::vector<int>> velocities;
  for (const Tone& t : bank.tones()) velocities[t.pitch].push_back(t.velocity);

  PairDataset out;
  for (const auto& [pitch, vs] : velocities) {
    for (std::size_t i = 0; i < vs.size(); ++i)
      for (std::size_t j = i + 1; j < vs.size(); ++j) {
        emit(Tone{pitch, vs[j]}, Tone{pitch, vs[i]}, PairCondition::C1);
      }
  }
  out.c1_count = all.size();

  std::vector<int> measured;
  for (const RibbonPoint& p : ribbons.front().points) {
    const bool everywhere = std::all_of(ribbons.begin(), ribbons.end(),
                                        [&](const auto& r) { return r.at(p.pitch) != nullptr; });
    if (everywhere && velocities.count(p.pitch)) measured.push_back(p.pitch);
  }
  for (std::size_t a = 0; a < measured.size(); ++a)
    for (std::size_t b = a + 1; b < measured.size(); ++b) {
      for (int va : velocities[measured[a]])
        for (int vb : velocities[measured[b]]) {
          const Tone ta{measured[a], va};
          const Tone tb{measured[b], vb};
          switch (ribbon_compare(ribbons, ta, tb)) {
            case Comparison::x1_louder: emit(ta, tb, PairCondition::C2); break;
            case Comparison::x2_louder: emit(tb, ta, PairCondition::C2); break;
            case Comparison::incomparable: break;
          }
        }
    }
  out.c2_count = all.size() - out.c1_count;

  std::shuffle(all.begin(), all.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(split_ratio * all.size()));
  out.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train), all.end());
  return out;
}

void to_json(Json& j, const RibbonPoint& p) {
  j = Json{{"pitch", p.pitch}, {"q1", p.q1}, {"median", p.median}, {"q3", p.q3},
           {"samples", p.pse_samples}};
}

void from_json(const Json& j, RibbonPoint& p) {
  p = RibbonPoint::from_samples(j.at("pitch").get<int>(),
                                j.at("samples").get<std::vector<double>>());
}

void to_json(Json& j, const EqualLoudnessRibbon& r) {
  j = Json{{"reference", r.reference}, {"self_consistent", r.self_consistent},
           {"points", r.points}};
}

void from_json(const Json& j, EqualLoudnessRibbon& r) {
  r = make_ribbon(j.at("reference").get<Tone>(), j.at("points").get<std::vector<RibbonPoint>>());
}

void to_json(Json& j, const RibbonSet& s) {
  j = Json{{"environment_id", s.environment_id}, {"ribbons", s.ribbons}};
}

void from_json(const Json& j, RibbonSet& s) {
  s.environment_id = j.value("environment_id", std::string());
  s.ribbons = j.at("ribbons").get<std::vector<EqualLoudnessRibbon>>();
  std::sort(s.ribbons.begin(), s.ribbons.end(), [](const auto& a, const auto& b) {
    return a.reference_velocity() < b.reference_velocity();
  });
}

void write_pairs_csv(std::ostream& out, std::span<const ComparisonPair> pairs,
                     const std::string& comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "p1,v1,p2,v2,y,condition\n";
  for (const auto& p : pairs) {
    out << p.x1.pitch << ',' << p.x1.velocity << ',' << p.x2.pitch << ',' << p.x2.velocity << ','
        << (p.label ? 1 : 0) << ',' << (p.condition == PairCondition::C1 ? "C1" : "C2") << '\n';
  }
}

std::vector<ComparisonPair> read_pairs_csv(std::istream& in) {
  std::vector<ComparisonPair> out;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "p1,v1,p2,v2,y,condition") throw SchemaError("unexpected pair CSV header");
      header_seen = true;
      continue;
    }
    std::istringstream ss(line);
    ComparisonPair p;
    char c1, c2, c3, c4, c5;
    int y = 0;
    std::string cond;
    if (!(ss >> p.x1.pitch >> c1 >> p.x1.velocity >> c2 >> p.x2.pitch >> c3 >> p.x2.velocity >>
          c4 >> y >> c5 >> cond) ||
        (cond != "C1" && cond != "C2") || (y != 0 && y != 1)) {
      throw SchemaError("bad pair CSV line " + std::to_string(line_no));
    }
    validate(p.x1);
    validate(p.x2);
    p.label = y == 1;
    p.condition = cond == "C1" ? PairCondition::C1 : PairCondition::C2;
    out.push_back(p);
  }
  if (!header_seen) throw SchemaError("pair CSV has no header");
  return out;
}

}  // namespace pianoloud
