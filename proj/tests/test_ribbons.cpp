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

#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "pianoloud/elc.hpp"
#include "pianoloud/ribbons.hpp"

using namespace pianoloud;

namespace {

// Quantile by sorting and reading off the definition.
double sorted_quantile(std::vector<double> s, double q) {
  std::sort(s.begin(), s.end());
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= s.size()) return s.back();
  return s[i] * (1.0 - (pos - static_cast<double>(i))) + s[i + 1] * (pos - static_cast<double>(i));
}

// The comparison rule evaluated literally over every level and level pair.
bool brute_louder(const std::vector<EqualLoudnessRibbon>& rs, const Tone& a, const Tone& b) {
  const auto q1 = [&](std::size_t k, int p) { return rs[k].at(p)->q1; };
  const auto q3 = [&](std::size_t k, int p) { return rs[k].at(p)->q3; };
  const auto overlap = [&](std::size_t k1, std::size_t k2, int p) {
    return !(q3(k1, p) < q1(k2, p) || q3(k2, p) < q1(k1, p));
  };
  for (std::size_t k = 0; k < rs.size(); ++k)
    if (a.velocity > q3(k, a.pitch) && b.velocity < q1(k, b.pitch)) return true;
  for (std::size_t k1 = 0; k1 < rs.size(); ++k1)
    for (std::size_t k2 = 0; k2 < rs.size(); ++k2) {
      if (!(rs[k1].reference_velocity() > rs[k2].reference_velocity())) continue;
      if (overlap(k1, k2, a.pitch) || overlap(k1, k2, b.pitch)) continue;
      if (a.velocity >= q1(k1, a.pitch) && b.velocity <= q3(k2, b.pitch)) return true;
    }
  return false;
}

Comparison brute_compare(const std::vector<EqualLoudnessRibbon>& rs, const Tone& x1,
                         const Tone& x2) {
  const bool one = brute_louder(rs, x1, x2);
  const bool two = brute_louder(rs, x2, x1);
  if (one == two) return Comparison::incomparable;
  return one ? Comparison::x1_louder : Comparison::x2_louder;
}

std::vector<EqualLoudnessRibbon> random_ribbons(std::mt19937_64& rng, const std::vector<int>& pitches) {
  std::vector<EqualLoudnessRibbon> rs;
  std::uniform_real_distribution<double> centre(10.0, 118.0), half(0.0, 8.0);
  for (int vref : {32, 44, 60, 80}) {
    std::vector<RibbonPoint> pts;
    for (int p : pitches) {
      const double c = centre(rng), w = half(rng);
      pts.push_back(RibbonPoint::from_samples(p, {c - w, c, c, c + w}));
    }
    rs.push_back(make_ribbon(Tone{69, vref}, pts));
  }
  return rs;
}

SessionState finished_session(const Tone& ref, int pitch, double pse, std::uint64_t seed) {
  return simulate_session(pse, 3.0, ref, pitch, seed).state;
}

}  // namespace

TEST_CASE("inclusive quartiles") {
  const RibbonPoint p = RibbonPoint::from_samples(60, {56, 50, 54, 52});
  CHECK(p.q1 == doctest::Approx(51.5));
  CHECK(p.median == doctest::Approx(53.0));
  CHECK(p.q3 == doctest::Approx(54.5));
  const RibbonPoint flat = RibbonPoint::from_samples(60, {60, 60, 60, 60, 60});
  CHECK(flat.q1 == 60.0);
  CHECK(flat.median == 60.0);
  CHECK(flat.q3 == 60.0);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(2 + rng() % 20);
    for (double& x : s) x = std::uniform_real_distribution<double>(1, 127)(rng);
    const RibbonPoint r = RibbonPoint::from_samples(40, s);
    CHECK(r.q1 == doctest::Approx(sorted_quantile(s, 0.25)));
    CHECK(r.median == doctest::Approx(sorted_quantile(s, 0.5)));
    CHECK(r.q3 == doctest::Approx(sorted_quantile(s, 0.75)));
    CHECK(r.q1 <= r.median);
    CHECK(r.median <= r.q3);
  }
  CHECK_THROWS_AS(inclusive_quantile(std::vector<double>{}, 0.5), AggregationError);
}

TEST_CASE("aggregation collects final PSEs per pitch") {
  const Tone ref{69, 60};
  std::vector<SessionState> sessions;
  std::map<int, std::vector<double>> expected;
  std::uint64_t seed = 10;
  for (int pitch : {45, 69, 93})
    for (int i = 0; i < 4; ++i) {
      sessions.push_back(finished_session(ref, pitch, 50.0 + pitch / 10.0 + i, seed++));
      expected[pitch].push_back(sessions.back().reported_pse().value);
    }
  const EqualLoudnessRibbon r = aggregate_ribbons(sessions, 60);
  REQUIRE(r.points.size() == 3);
  CHECK(r.reference == ref);
  for (const auto& pt : r.points) {
    CHECK(pt.q1 == doctest::Approx(sorted_quantile(expected[pt.pitch], 0.25)));
    CHECK(pt.q3 == doctest::Approx(sorted_quantile(expected[pt.pitch], 0.75)));
  }
  CHECK(r.points[0].pitch == 45);
  CHECK(r.points[2].pitch == 93);
  CHECK(r.at(45) != nullptr);
  CHECK(r.at(46) == nullptr);
}

TEST_CASE("aggregation errors") {
  const Tone ref{69, 60};
  std::vector<SessionState> s{finished_session(ref, 45, 50, 1), finished_session(ref, 45, 52, 2)};
  CHECK_THROWS_AS(aggregate_ribbons(s, 44), AggregationError);
  s.push_back(finished_session(Tone{69, 44}, 45, 50, 3));
  CHECK_THROWS_AS(aggregate_ribbons(s, 60), AggregationError);
  s.pop_back();
  s.push_back(finished_session(ref, 57, 50, 4));
  CHECK_THROWS_AS(aggregate_ribbons(s, 60), AggregationError);
  s.pop_back();
  s.push_back(SessionState::start(ref, 45, 32, 5));
  CHECK_THROWS_AS(aggregate_ribbons(s, 60), AggregationError);
  CHECK_THROWS_AS(aggregate_ribbons(std::span<const SessionState>{}, 60), AggregationError);
}

TEST_CASE("self-consistency flag") {
  const auto ok = make_ribbon(Tone{69, 60}, {RibbonPoint::from_samples(69, {58, 60, 61, 62})});
  CHECK(ok.self_consistent);
  const auto off = make_ribbon(Tone{69, 60}, {RibbonPoint::from_samples(69, {63, 64, 65, 66})});
  CHECK_FALSE(off.self_consistent);
  CHECK_THROWS_AS(make_ribbon(Tone{69, 60}, {RibbonPoint::from_samples(45, {1, 2}),
                                             RibbonPoint::from_samples(45, {1, 2})}),
                  AggregationError);
}

TEST_CASE("separated and overlapping tones") {
  const std::vector<int> pitches{45, 69, 93};
  std::vector<EqualLoudnessRibbon> rs;
  int base = 20;
  for (int vref : {32, 44, 60, 80}) {
    std::vector<RibbonPoint> pts;
    for (int p : pitches) pts.push_back(RibbonPoint::from_samples(p, {base - 2.0, base + 0.0, base + 2.0}));
    rs.push_back(make_ribbon(Tone{69, vref}, pts));
    base += 20;
  }
  // Above the top ribbon against below the bottom one.
  CHECK(ribbon_compare(rs, Tone{45, 100}, Tone{93, 10}) == Comparison::x1_louder);
  CHECK(ribbon_compare(rs, Tone{93, 10}, Tone{45, 100}) == Comparison::x2_louder);
  // Both inside the same band.
  CHECK(ribbon_compare(rs, Tone{45, 40}, Tone{93, 41}) == Comparison::incomparable);
  // Unmeasured pitch.
  CHECK(ribbon_compare(rs, Tone{46, 127}, Tone{93, 1}) == Comparison::incomparable);
  CHECK_THROWS_AS(ribbon_compare(rs, Tone{45, 10}, Tone{45, 20}), DomainError);
}

TEST_CASE("comparison agrees with the literal rule and is antisymmetric") {
  std::mt19937_64 rng(77);
  const std::vector<int> pitches{21, 45, 69, 93, 108};
  std::size_t decisive = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const auto rs = random_ribbons(rng, pitches);
    for (int i = 0; i < 300; ++i) {
      const int p1 = pitches[rng() % pitches.size()];
      int p2 = pitches[rng() % pitches.size()];
      if (p1 == p2) continue;
      const Tone a{p1, static_cast<int>(1 + rng() % 127)};
      const Tone b{p2, static_cast<int>(1 + rng() % 127)};
      const Comparison c = ribbon_compare(rs, a, b);
      CHECK(c == brute_compare(rs, a, b));
      const Comparison r = ribbon_compare(rs, b, a);
      CHECK((c == Comparison::x1_louder) == (r == Comparison::x2_louder));
      CHECK((c == Comparison::incomparable) == (r == Comparison::incomparable));
      decisive += c != Comparison::incomparable;
    }
  }
  CHECK(decisive > 100);
}

TEST_CASE("full bank yields every same-pitch pair") {
  const SynthEnvSpec spec = SynthEnvSpec::preset("env1");
  const ToneBank bank = build_synthetic_bank(spec);
  std::vector<RibbonPoint> pts{RibbonPoint::from_samples(69, {59, 60, 61})};
  const std::vector<EqualLoudnessRibbon> rs{make_ribbon(Tone{69, 60}, pts)};
  const PairDataset d = build_pair_dataset(bank, rs, 0.8, 3);
  CHECK(d.c1_count == 704088);
  CHECK(d.c1_count == 88u * (127u * 126u / 2u));
  CHECK(d.c2_count == 0);
  const std::size_t total = d.train.size() + d.test.size();
  CHECK(total == 704088);
  CHECK(std::abs(static_cast<double>(d.test.size()) - 0.2 * total) <= 1.0);
  std::size_t flipped = 0;
  for (const auto& p : d.train) {
    REQUIRE(p.x1.pitch == p.x2.pitch);
    REQUIRE(p.x1.velocity != p.x2.velocity);
    REQUIRE(p.label == (p.x1.velocity > p.x2.velocity));
    flipped += !p.label;
  }
  CHECK(std::abs(static_cast<double>(flipped) / d.train.size() - 0.5) < 0.01);
  CHECK_THROWS_AS(build_pair_dataset(bank, std::span<const EqualLoudnessRibbon>{}, 0.8, 3),
                  DatasetError);
}

TEST_CASE("pairs never include masked tones and follow the seed") {
  SynthEnvSpec spec = SynthEnvSpec::preset("env2");
  spec.failed_tones = {Tone{45, 10}, Tone{69, 64}, Tone{93, 100}};
  const ToneBank bank = build_synthetic_bank(spec, BankGrid::full(3));
  ElcProtocol proto;
  proto.variable_pitches = {45, 69, 93};
  proto.subjects_per_level = 3;
  const SimulatedElc elc = simulate_elc(spec, proto, 5);
  const PairDataset a = build_pair_dataset(bank, elc.ribbons.ribbons, 0.8, 11);
  const PairDataset b = build_pair_dataset(bank, elc.ribbons.ribbons, 0.8, 11);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(a.c2_count > 0);
  const std::set<Tone> masked(spec.failed_tones.begin(), spec.failed_tones.end());
  for (const auto* set : {&a.train, &a.test})
    for (const auto& p : *set) {
      CHECK(masked.count(p.x1) == 0);
      CHECK(masked.count(p.x2) == 0);
      CHECK(bank.contains(p.x1));
      CHECK(bank.contains(p.x2));
      if (p.condition == PairCondition::C2) CHECK(p.x1.pitch != p.x2.pitch);
    }
  const PairDataset c = build_pair_dataset(bank, elc.ribbons.ribbons, 0.8, 12);
  CHECK_FALSE(c.train == a.train);
}

TEST_CASE("cross-pitch labels agree with the ground truth") {
  const SynthEnvSpec spec = SynthEnvSpec::preset("env2");
  const ToneBank bank = build_synthetic_bank(spec, BankGrid::full(2));
  const ElcProtocol proto;
  const SimulatedElc elc = simulate_elc(spec, proto, 2024);
  REQUIRE(elc.ribbons.ribbons.size() == 4);
  std::map<int, std::vector<double>> curve;
  for (int p : proto.variable_pitches) curve[p] = oracle_velocity_curve(spec, p);
  const PairDataset d = build_pair_dataset(bank, elc.ribbons.ribbons, 0.8, 9);
  std::size_t agree = 0, total = 0;
  for (const auto* set : {&d.train, &d.test})
    for (const auto& p : *set) {
      if (p.condition != PairCondition::C2) continue;
      const double l1 = curve[p.x1.pitch][static_cast<std::size_t>(p.x1.velocity - 1)];
      const double l2 = curve[p.x2.pitch][static_cast<std::size_t>(p.x2.velocity - 1)];
      agree += (l1 > l2) == p.label;
      ++total;
    }
  REQUIRE(total > 1000);
  CHECK(total == d.c2_count);
  CHECK(static_cast<double>(agree) / total >= 0.99);
}

TEST_CASE("pair CSV and ribbon JSON round trip") {
  const std::vector<ComparisonPair> pairs{{Tone{21, 1}, Tone{21, 127}, false, PairCondition::C1},
                                          {Tone{108, 64}, Tone{45, 3}, true, PairCondition::C2}};
  std::stringstream ss;
  write_pairs_csv(ss, pairs, "seed=1");
  CHECK(ss.str().rfind("# seed=1\np1,v1,p2,v2,y,condition\n", 0) == 0);
  CHECK(read_pairs_csv(ss) == pairs);
  std::istringstream bad("p1,v1,p2,v2,y,condition\n21,1,21,2,3,C1\n");
  CHECK_THROWS_AS(read_pairs_csv(bad), SchemaError);
  std::istringstream out_of_range("p1,v1,p2,v2,y,condition\n20,1,21,2,1,C1\n");
  CHECK_THROWS_AS(read_pairs_csv(out_of_range), DomainError);

  RibbonSet set;
  set.environment_id = "env1";
  set.ribbons.push_back(make_ribbon(Tone{69, 80}, {RibbonPoint::from_samples(69, {78, 80, 83})}));
  set.ribbons.push_back(make_ribbon(Tone{69, 32}, {RibbonPoint::from_samples(69, {30, 33})}));
  const RibbonSet back = Json(set).get<RibbonSet>();
  REQUIRE(back.ribbons.size() == 2);
  CHECK(back.environment_id == "env1");
  CHECK(back.ribbons[0].reference_velocity() == 32);
  CHECK(back.ribbons[1].points[0].q3 == set.ribbons[0].points[0].q3);
  CHECK(back.ribbons[1].points[0].pse_samples == set.ribbons[0].points[0].pse_samples);
}
