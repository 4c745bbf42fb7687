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
#include <array>
#include <cmath>
#include <sstream>

#include "pianoloud/psychometric.hpp"

using namespace pianoloud;

namespace {

// Penalised negative log-likelihood written out directly from the model
// definition, independent of the library objective.
double nll(const std::vector<TrialRecord>& h, double c, double b) {
  double centre = 0.0;
  for (const auto& r : h) centre += r.variable_velocity;
  centre /= static_cast<double>(h.size());
  long double f = 1e-3L * (c * c + b * b);
  for (const auto& r : h) {
    const long double z = c + b * (r.variable_velocity - centre);
    const long double p = 1.0L / (1.0L + std::exp(-z));
    f -= r.response_variable_louder ? std::log(p) : std::log(1.0L - p);
  }
  return static_cast<double>(f);
}

// Exhaustive grid search with successive zooms; returns the PSE of the best
// grid point (slope floored like the fitted model).
double grid_oracle_pse(const std::vector<TrialRecord>& h) {
  double centre = 0.0;
  for (const auto& r : h) centre += r.variable_velocity;
  centre /= static_cast<double>(h.size());
  double c_lo = -20.0, c_hi = 20.0, b_lo = 0.0, b_hi = 5.0;
  double best_c = 0.0, best_b = 0.0;
  for (int zoom = 0; zoom < 6; ++zoom) {
    double best = std::numeric_limits<double>::infinity();
    const int n = 81;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double c = c_lo + (c_hi - c_lo) * i / (n - 1);
        const double b = b_lo + (b_hi - b_lo) * j / (n - 1);
        const double f = nll(h, c, b);
        if (f < best) {
          best = f;
          best_c = c;
          best_b = b;
        }
      }
    }
    const double dc = (c_hi - c_lo) / 8.0, db = (b_hi - b_lo) / 8.0;
    c_lo = best_c - dc;
    c_hi = best_c + dc;
    b_lo = std::max(0.0, best_b - db);
    b_hi = best_b + db;
  }
  return centre - best_c / std::max(best_b, 1e-4);
}

std::vector<TrialRecord> logistic_history(double pse, double slope, std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> vel(35, 75);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<TrialRecord> h;
  for (int i = 1; i <= n; ++i) {
    const int v = vel(rng);
    const bool louder = u(rng) < 1.0 / (1.0 + std::exp(-(v - pse) / slope));
    h.push_back(TrialRecord{i, v, PresentationOrder::reference_first, louder});
  }
  return h;
}

}  // namespace

TEST_CASE("first two probes are fixed at 90 and 30") {
  for (bool first : {true, false}) {
    auto s = SessionState::start(Tone{69, 44}, 57, 32, 11);
    CHECK(s.status() == SessionStatus::in_progress);
    CHECK(s.history().empty());
    const Stimulus a = s.next_stimulus();
    CHECK(a.variable_velocity == 90);
    s.record_response(a.variable_velocity, a.presentation_order, first);
    CHECK_FALSE(s.fit().has_value());
    CHECK(s.next_stimulus().variable_velocity == 30);
  }
}

TEST_CASE("zero rounds completes immediately without a fit") {
  auto s = SessionState::start(Tone{69, 44}, 57, 0, 1);
  CHECK(s.complete());
  CHECK_FALSE(s.fit().has_value());
  CHECK_THROWS_AS(s.next_stimulus(), StateError);
  CHECK_THROWS_AS(s.reported_pse(), StateError);
}

TEST_CASE("invalid session parameters are domain errors") {
  CHECK_THROWS_AS(SessionState::start(Tone{20, 44}, 57), DomainError);
  CHECK_THROWS_AS(SessionState::start(Tone{69, 0}, 57), DomainError);
  CHECK_THROWS_AS(SessionState::start(Tone{69, 44}, 109), DomainError);
}

TEST_CASE("window draws are uniform over 13 velocities around the rounded PSE") {
  std::mt19937_64 rng(2024);
  std::array<int, 13> counts{};
  int variable_first = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const Stimulus s = draw_stimulus(3, 55.2, rng);
    REQUIRE(s.variable_velocity >= 49);
    REQUIRE(s.variable_velocity <= 61);
    ++counts[static_cast<std::size_t>(s.variable_velocity - 49)];
    variable_first += s.presentation_order == PresentationOrder::variable_first;
  }
  double chi2 = 0.0;
  const double expected = n / 13.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 99.9th percentile of chi-square with 12 degrees of freedom.
  CHECK(chi2 < 32.909);
  // Order is a fair coin: 4 sigma band.
  CHECK(std::abs(variable_first - n / 2) < 4 * 50);
}

TEST_CASE("windows clamp at the velocity range") {
  std::mt19937_64 rng(5);
  std::array<int, 10> seen{};
  for (int i = 0; i < 2000; ++i) {
    const int v = draw_stimulus(4, 3.0, rng).variable_velocity;
    REQUIRE(v >= 1);
    REQUIRE(v <= 9);
    seen[static_cast<std::size_t>(v)] = 1;
  }
  for (int v = 1; v <= 9; ++v) CHECK(seen[static_cast<std::size_t>(v)] == 1);
  CHECK(velocity_window(3.0) == std::pair{1, 9});
  CHECK(velocity_window(124.4) == std::pair{118, 127});
  CHECK(velocity_window(-50.0) == std::pair{1, 1});
  CHECK(velocity_window(400.0) == std::pair{127, 127});
  CHECK(velocity_window(60.5) == std::pair{55, 67});
}

TEST_CASE("equal seeds and histories give identical draws") {
  auto a = SessionState::start(Tone{69, 60}, 45, 32, 99);
  auto b = SessionState::start(Tone{69, 60}, 45, 32, 99);
  int diverged = 0;
  auto c = SessionState::start(Tone{69, 60}, 45, 32, 100);
  for (int r = 0; r < 32; ++r) {
    const Stimulus sa = a.next_stimulus();
    CHECK(sa == b.next_stimulus());
    CHECK(sa == a.next_stimulus());  // idempotent
    const bool louder = sa.variable_velocity > 50;
    a.record_response(sa.variable_velocity, sa.presentation_order, louder);
    b.record_response(sa.variable_velocity, sa.presentation_order, louder);
    const Stimulus sc = c.next_stimulus();
    diverged += sc.presentation_order != sa.presentation_order;
    c.record_response(sc.variable_velocity, sc.presentation_order, sc.variable_velocity > 50);
  }
  CHECK(a.history() == b.history());
  CHECK(diverged > 0);
  CHECK(a.complete());
  CHECK(a.history().size() == 32);
}

TEST_CASE("symmetric two-point history puts the PSE at the midpoint") {
  const std::vector<TrialRecord> h{{1, 90, PresentationOrder::reference_first, true},
                                   {2, 30, PresentationOrder::variable_first, false}};
  const PsychometricFit f = fit_psychometric(h);
  CHECK(f.pse == doctest::Approx(60.0).epsilon(1e-12));
  CHECK(f.slope > 0.0);
  CHECK(f.converged);
  CHECK(std::abs(grid_oracle_pse(h) - 60.0) < 1e-6);
  auto s = SessionState::start(Tone{69, 44}, 57, 32, 3);
  s.record_response(90, s.next_stimulus().presentation_order, true);
  s.record_response(30, s.next_stimulus().presentation_order, false);
  REQUIRE(s.fit().has_value());
  CHECK(s.fit()->pse == doctest::Approx(60.0).epsilon(1e-12));
}

TEST_CASE("Newton fit agrees with the grid-search oracle") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto h = logistic_history(55.0, 4.0, seed, 32);
    const PsychometricFit f = fit_psychometric(h);
    CHECK(f.converged);
    CHECK(f.slope > 0.0);
    CHECK(std::abs(f.pse - grid_oracle_pse(h)) <= 1.0);
    // Stationarity: the fitted point is not beaten by nearby points.
    double centre = 0.0;
    for (const auto& r : h) centre += r.variable_velocity;
    centre /= 32.0;
    const double c = (centre - f.pse) * f.slope;
    const double at = nll(h, c, f.slope);
    for (double dc : {-1e-3, 1e-3})
      for (double db : {-1e-4, 1e-4}) CHECK(nll(h, c + dc, f.slope + db) >= at - 1e-9);
    CHECK(psychometric_objective(h, c, f.slope) == doctest::Approx(at).epsilon(1e-9));
  }
}

TEST_CASE("separable data stays finite and brackets the boundary") {
  std::vector<TrialRecord> h;
  int round = 1;
  for (int v = 40; v <= 80; v += 2) {
    if (v == 60) continue;
    h.push_back(TrialRecord{round++, v, PresentationOrder::reference_first, v > 60});
  }
  const PsychometricFit f = fit_psychometric(h);
  CHECK(std::isfinite(f.intercept));
  CHECK(std::isfinite(f.slope));
  CHECK(f.pse > 55.0);
  CHECK(f.pse < 65.0);
}

TEST_CASE("duplicating the history barely moves the PSE") {
  for (std::uint64_t seed = 21; seed <= 25; ++seed) {
    const auto h = logistic_history(50.0, 5.0, seed, 32);
    std::vector<TrialRecord> d;
    for (const auto& r : h) {
      d.push_back(r);
      d.push_back(r);
    }
    const double a = fit_psychometric(h).pse;
    const double b = fit_psychometric(d).pse;
    CHECK(std::abs(a - b) < 0.5);
    CHECK(std::abs(grid_oracle_pse(d) - b) <= 1.0);
  }
}

TEST_CASE("uniform responses push the PSE past the presented range") {
  std::vector<TrialRecord> h{{1, 90, PresentationOrder::reference_first, true},
                             {2, 30, PresentationOrder::reference_first, true},
                             {3, 45, PresentationOrder::reference_first, true}};
  CHECK(fit_psychometric(h).pse <= 30.0);
  for (auto& r : h) r.response_variable_louder = false;
  CHECK(fit_psychometric(h).pse >= 90.0);
}

TEST_CASE("fit needs two trials") {
  const std::vector<TrialRecord> h{{1, 90, PresentationOrder::reference_first, true}};
  CHECK_THROWS_AS(fit_psychometric(h), InsufficientDataError);
  CHECK_THROWS_AS(fit_psychometric(std::span<const TrialRecord>{}), InsufficientDataError);
}

TEST_CASE("mismatched responses are protocol errors and complete sessions reject input") {
  auto s = SessionState::start(Tone{69, 44}, 57, 3, 8);
  const Stimulus a = s.next_stimulus();
  CHECK_THROWS_AS(s.record_response(89, a.presentation_order, true), ProtocolError);
  const PresentationOrder other = a.presentation_order == PresentationOrder::reference_first
                                      ? PresentationOrder::variable_first
                                      : PresentationOrder::reference_first;
  CHECK_THROWS_AS(s.record_response(90, other, true), ProtocolError);
  CHECK(s.history().empty());
  for (int i = 0; i < 3; ++i) {
    const Stimulus x = s.next_stimulus();
    s.record_response(x.variable_velocity, x.presentation_order, i == 0);
  }
  CHECK(s.complete());
  CHECK_THROWS_AS(s.record_response(60, PresentationOrder::reference_first, true), StateError);
}

TEST_CASE("later rounds stay within the window of the previous PSE") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto r = simulate_session(20.0 + 2.0 * seed, 2.0 + 0.1 * seed, Tone{69, 60}, 45, seed);
    const auto& h = r.state.history();
    REQUIRE(h.size() == 32);
    for (std::size_t i = 0; i < h.size(); ++i) CHECK(h[i].round_index == static_cast<int>(i + 1));
    CHECK(h[0].variable_velocity == 90);
    CHECK(h[1].variable_velocity == 30);
    for (std::size_t i = 2; i < h.size(); ++i) {
      const std::vector<TrialRecord> prefix(h.begin(), h.begin() + static_cast<long>(i));
      const long centre = std::lround(fit_psychometric(prefix).pse);
      const long lo = std::clamp(centre - 6, 1L, 127L);
      const long hi = std::clamp(centre + 6, 1L, 127L);
      CHECK(h[i].variable_velocity >= lo);
      CHECK(h[i].variable_velocity <= hi);
    }
    CHECK(r.state.fit()->slope > 0.0);
    CHECK(std::isfinite(r.state.fit()->pse));
  }
}

TEST_CASE("deterministic subject converges onto its PSE") {
  // The step subject answers at random exactly at its PSE, and the window
  // draws need not sample both neighbours of the step, so a small share of
  // seeds lands just outside one velocity step.
  int within = 0;
  double worst = 0.0;
  const int n = 1000;
  for (int seed = 0; seed < n; ++seed) {
    const auto r = simulate_session(50.0, 0.0, Tone{69, 60}, 45, static_cast<std::uint64_t>(seed));
    within += r.pse_error <= 1.0;
    worst = std::max(worst, r.pse_error);
    CHECK(r.reported.saturation == Saturation::none);
  }
  CHECK(within >= 980);
  CHECK(worst <= 2.5);
}

TEST_CASE("a PSE above the range saturates at the ceiling") {
  const auto r = simulate_session(130.0, 3.0, Tone{69, 120}, 21, 77);
  CHECK(r.reported.saturation == Saturation::ceiling);
  CHECK(r.reported.value == 127.0);
  CHECK(r.state.fit()->pse > 127.0);
  const auto f = simulate_session(-20.0, 3.0, Tone{69, 5}, 108, 78);
  CHECK(f.reported.saturation == Saturation::floor);
  CHECK(f.reported.value == 1.0);
}

TEST_CASE("simulated sessions recover their PSE") {
  std::mt19937_64 rng(31);
  std::vector<double> errors;
  for (int i = 0; i < 60; ++i) {
    const double pse = std::uniform_real_distribution<double>(20.0, 100.0)(rng);
    const double slope = std::uniform_real_distribution<double>(2.0, 6.0)(rng);
    errors.push_back(simulate_session(pse, slope, Tone{69, 60}, 57, rng()).pse_error);
  }
  std::nth_element(errors.begin(), errors.begin() + 30, errors.end());
  CHECK(errors[30] <= 2.0);
}

TEST_CASE("transcripts replay into the same state") {
  const auto r = simulate_session(62.0, 3.0, Tone{69, 80}, 93, 4242);
  std::stringstream ss;
  write_transcript(ss, r.state, Json{{"environment_id", "env1"}});
  std::string first;
  std::getline(ss, first);
  const Json header = Json::parse(first);
  CHECK(header.at("environment_id") == "env1");
  CHECK(header.at("seed") == 4242);
  ss.seekg(0);
  auto [state, h] = read_transcript(ss);
  CHECK(state.history() == r.state.history());
  CHECK(state.fit()->pse == r.state.fit()->pse);
  CHECK(h == header);
  std::stringstream again;
  write_transcript(again, state, Json{{"environment_id", "env1"}});
  ss.clear();
  ss.seekg(0);
  CHECK(again.str() == ss.str());
}

TEST_CASE("corrupted transcripts are rejected") {
  const auto r = simulate_session(62.0, 3.0, Tone{69, 80}, 93, 4243);
  std::stringstream ss;
  write_transcript(ss, r.state);
  std::string text = ss.str();
  // Flip the first probe velocity: replay no longer matches the engine.
  const auto pos = text.find("\"variable_velocity\":90");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 22, "\"variable_velocity\":91");
  std::istringstream bad(text);
  CHECK_THROWS_AS(read_transcript(bad), ProtocolError);
  std::istringstream empty("");
  CHECK_THROWS_AS(read_transcript(empty), SchemaError);
  std::istringstream garbage("{not json\n");
  CHECK_THROWS_AS(read_transcript(garbage), SchemaError);
}
