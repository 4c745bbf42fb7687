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

#include "pianoloud/psychometric.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

namespace pianoloud {
namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double mean_velocity(std::span<const TrialRecord> h) {
  double s = 0.0;
  for (const auto& r : h) s += r.variable_velocity;
  return s / static_cast<double>(h.size());
}

}  // namespace

std::string to_string(PresentationOrder order) {
  return order == PresentationOrder::reference_first ? "reference_first" : "variable_first";
}

PresentationOrder presentation_order_from_string(const std::string& s) {
  if (s == "reference_first") return PresentationOrder::reference_first;
  if (s == "variable_first") return PresentationOrder::variable_first;
  throw SchemaError("unknown presentation order '" + s + "'");
}

std::string to_string(Saturation s) {
  switch (s) {
    case Saturation::none: return "none";
    case Saturation::floor: return "floor";
    case Saturation::ceiling: return "ceiling";
  }
  return "none";
}

void to_json(Json& j, const TrialRecord& r) {
  j = Json{{"round_index", r.round_index},
           {"variable_velocity", r.variable_velocity},
           {"presentation_order", to_string(r.presentation_order)},
           {"response_variable_louder", r.response_variable_louder}};
}

void from_json(const Json& j, TrialRecord& r) {
  j.at("round_index").get_to(r.round_index);
  j.at("variable_velocity").get_to(r.variable_velocity);
  r.presentation_order = presentation_order_from_string(j.at("presentation_order").get<std::string>());
  j.at("response_variable_louder").get_to(r.response_variable_louder);
}

double psychometric_objective(std::span<const TrialRecord> history, double c, double b) {
  const double centre = mean_velocity(history);
  double f = kFitRidge * (c * c + b * b);
  for (const auto& r : history) {
    const double z = c + b * (r.variable_velocity - centre);
    // -log sigmoid(z) = softplus(-z); -log(1 - sigmoid(z)) = softplus(z)
    f += r.response_variable_louder ? softplus(-z) : softplus(z);
  }
  return f;
}

PsychometricFit fit_psychometric(std::span<const TrialRecord> history) {
  if (history.size() < 2) {
    throw InsufficientDataError("psychometric fit needs at least 2 trials, got " +
                                std::to_string(history.size()));
  }
  const double centre = mean_velocity(history);
  Eigen::Vector2d theta = Eigen::Vector2d::Zero();
  double f = psychometric_objective(history, 0.0, 0.0);
  PsychometricFit fit;
  for (int it = 0; it < kFitMaxIterations; ++it) {
    Eigen::Vector2d g = 2.0 * kFitRidge * theta;
    Eigen::Matrix2d h = 2.0 * kFitRidge * Eigen::Matrix2d::Identity();
    for (const auto& r : history) {
      const double u = r.variable_velocity - centre;
      const double p = sigmoid(theta[0] + theta[1] * u);
      const double resid = p - (r.response_variable_louder ? 1.0 : 0.0);
      g += resid * Eigen::Vector2d(1.0, u);
      const double w = p * (1.0 - p);
      h(0, 0) += w;
      h(0, 1) += w * u;
      h(1, 1) += w * u * u;
    }
    h(1, 0) = h(0, 1);
    fit.iterations = it;
    if (g.norm() < kFitGradientTolerance) {
      fit.converged = true;
      break;
    }
    const Eigen::Vector2d step = -h.ldlt().solve(g);
    // Inside the quadratic basin the decrease drops below what the objective
    // can resolve; take the pure Newton step there.
    if (-g.dot(step) < 1e-10 * (1.0 + std::abs(f))) {
      theta += step;
      f = psychometric_objective(history, theta[0], theta[1]);
      fit.iterations = it + 1;
      continue;
    }
    // Backtracking keeps every accepted step a strict decrease.
    double t = 1.0;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      const Eigen::Vector2d cand = theta + t * step;
      const double fc = psychometric_objective(history, cand[0], cand[1]);
      if (fc <= f + 1e-4 * t * g.dot(step)) {
        theta = cand;
        f = fc;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    fit.iterations = it + 1;
    if (!accepted) {
      // No representable decrease left: stationary to machine precision.
      fit.converged = g.norm() < 1e-6;
      break;
    }
  }
  const double slope = std::max(theta[1], kMinSlope);
  fit.slope = slope;
  fit.intercept = theta[0] - slope * centre;
  fit.pse = centre - theta[0] / slope;
  return fit;
}

std::pair<int, int> velocity_window(double pse) {
  const double bounded = std::clamp(pse, -1e6, 1e6);
  const int r = static_cast<int>(std::lround(bounded));
  int lo = std::max(kMinVelocity, r - kWindowHalfWidth);
  int hi = std::min(kMaxVelocity, r + kWindowHalfWidth);
  if (lo > hi) {
    lo = hi = (r + kWindowHalfWidth < kMinVelocity) ? kMinVelocity : kMaxVelocity;
  }
  return {lo, hi};
}

Stimulus draw_stimulus(int round_index, std::optional<double> pse, std::mt19937_64& rng) {
  Stimulus s;
  if (round_index == 1) {
    s.variable_velocity = kFirstProbeVelocity;
  } else if (round_index == 2) {
    s.variable_velocity = kSecondProbeVelocity;
  } else {
    if (!pse) throw StateError("round >= 3 needs a current PSE estimate");
    const auto [lo, hi] = velocity_window(*pse);
    s.variable_velocity = std::uniform_int_distribution<int>(lo, hi)(rng);
  }
  s.presentation_order = std::uniform_int_distribution<int>(0, 1)(rng) == 0
                             ? PresentationOrder::reference_first
                             : PresentationOrder::variable_first;
  return s;
}

SessionState SessionState::start(const Tone& reference, int variable_pitch, int rounds_total,
                                 std::uint64_t seed) {
  validate(reference);
  if (!is_valid_pitch(variable_pitch)) {
    throw DomainError("variable pitch " + std::to_string(variable_pitch) + " outside [21..108]");
  }
  if (rounds_total < 0) throw DomainError("rounds_total must be >= 0");
  SessionState s;
  s.reference_ = reference;
  s.variable_pitch_ = variable_pitch;
  s.rounds_total_ = rounds_total;
  s.seed_ = seed;
  s.rng_.seed(seed);
  s.draw_pending();
  return s;
}

SessionStatus SessionState::status() const {
  return static_cast<int>(history_.size()) >= rounds_total_ ? SessionStatus::complete
                                                            : SessionStatus::in_progress;
}

void SessionState::draw_pending() {
  pending_.reset();
  if (complete()) return;
  std::optional<double> pse;
  if (fit_) pse = fit_->pse;
  pending_ = draw_stimulus(pending_round(), pse, rng_);
}

Stimulus SessionState::next_stimulus() const {
  if (complete() || !pending_) throw StateError("session is complete");
  return *pending_;
}

void SessionState::record_response(int variable_velocity, PresentationOrder order,
                                   bool response_variable_louder) {
  const Stimulus expected = next_stimulus();
  if (expected.variable_velocity != variable_velocity || expected.presentation_order != order) {
    throw ProtocolError("response for stimulus (" + std::to_string(variable_velocity) + ", " +
                        to_string(order) + ") but round " + std::to_string(pending_round()) +
                        " is pending (" + std::to_string(expected.variable_velocity) + ", " +
                        to_string(expected.presentation_order) + ")");
  }
  history_.push_back(TrialRecord{pending_round(), variable_velocity, order, response_variable_louder});
  if (history_.size() >= 2) fit_ = fit_psychometric(history_);
  draw_pending();
}

ReportedPse SessionState::reported_pse() const {
  if (!fit_) throw StateError("no psychometric fit yet");
  ReportedPse out;
  out.value = fit_->pse;
  if (out.value < kMinVelocity) {
    out.value = kMinVelocity;
    out.saturation = Saturation::floor;
  } else if (out.value > kMaxVelocity) {
    out.value = kMaxVelocity;
    out.saturation = Saturation::ceiling;
  }
  return out;
}

Json transcript_header(const SessionState& state, const Json& metadata) {
  Json h{{"type", "session"},
         {"reference", state.reference()},
         {"variable_pitch", state.variable_pitch()},
         {"rounds_total", state.rounds_total()},
         {"seed", state.seed()}};
  for (const auto& [k, v] : metadata.items()) h[k] = v;
  return h;
}

void write_transcript(std::ostream& out, const SessionState& state, const Json& metadata) {
  out << transcript_header(state, metadata).dump() << '\n';
  for (const auto& r : state.history()) out << Json(r).dump() << '\n';
}

std::pair<SessionState, Json> read_transcript(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty transcript");
  Json header;
  try {
    header = Json::parse(line);
    auto state = SessionState::start(header.at("reference").get<Tone>(),
                                     header.at("variable_pitch").get<int>(),
                                     header.at("rounds_total").get<int>(),
                                     header.at("seed").get<std::uint64_t>());
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto r = Json::parse(line).get<TrialRecord>();
      if (r.round_index != state.pending_round()) {
        throw SchemaError("transcript round " + std::to_string(r.round_index) +
                          " out of sequence");
      }
      state.record_response(r.variable_velocity, r.presentation_order, r.response_variable_louder);
    }
    return {std::move(state), header};
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("bad transcript: ") + e.what());
  }
}

SimulatedSubject::SimulatedSubject(double pse, double slope, std::uint64_t seed)
    : pse_(pse), slope_(slope), rng_(seed) {}

bool SimulatedSubject::judges_variable_louder(int variable_velocity) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
  double p;
  if (slope_ < 1e-9) {
    p = variable_velocity > pse_ ? 1.0 : (variable_velocity < pse_ ? 0.0 : 0.5);
  } else {
    p = sigmoid((variable_velocity - pse_) / slope_);
  }
  return u < p;
}

std::uint64_t subject_seed(std::uint64_t session_seed) {
  return session_seed ^ 0x5DEECE66DULL;
}

SimulationResult simulate_session(double true_pse, double true_slope, const Tone& reference,
                                  int variable_pitch, std::uint64_t seed, int rounds_total) {
  if (true_slope < 0.0) throw DomainError("true_slope must be positive");
  SimulationResult res{SessionState::start(reference, variable_pitch, rounds_total, seed), 0.0, {}};
  SimulatedSubject subject(true_pse, true_slope, subject_seed(seed));
  while (!res.state.complete()) {
    const Stimulus s = res.state.next_stimulus();
    res.state.record_response(s.variable_velocity, s.presentation_order,
                              subject.judges_variable_louder(s.variable_velocity));
  }
  if (res.state.fit()) {
    res.reported = res.state.reported_pse();
    res.pse_error = std::abs(res.reported.value - true_pse);
  }
  return res;
}

}  // namespace pianoloud
