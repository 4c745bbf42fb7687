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

#include "pianoloud/parametric.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "pianoloud/isotonic.hpp"

namespace pianoloud {

double CalibrationMap::operator()(double raw) const {
  if (knots.empty()) throw CalibrationError("empty calibration map");
  if (knots.size() == 1) return std::max(knots.front().second, kMinCalibratedSones);
  std::size_t i;
  if (raw <= knots.front().first) {
    i = 0;
  } else if (raw >= knots.back().first) {
    i = knots.size() - 2;
  } else {
    const auto it = std::upper_bound(knots.begin(), knots.end(), raw,
                                     [](double r, const auto& k) { return r < k.first; });
    i = static_cast<std::size_t>(it - knots.begin()) - 1;
  }
  const auto& [x0, y0] = knots[i];
  const auto& [x1, y1] = knots[i + 1];
  double y;
  if (raw == x0) {
    y = y0;
  } else if (raw == x1) {
    y = y1;
  } else {
    y = y0 + (raw - x0) * (y1 - y0) / (x1 - x0);
  }
  return std::max(y, kMinCalibratedSones);
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> difference_features(std::span<const ComparisonPair> pairs,
                                                                 const FeatureTable& features) {
  const int d = features.config().feature_length();
  Eigen::MatrixXd diffs(static_cast<Eigen::Index>(pairs.size()), d);
  Eigen::VectorXd labels(static_cast<Eigen::Index>(pairs.size()));
  Eigen::Index row = 0;
  for (const ComparisonPair& p : pairs) {
    diffs.row(row) = (features.at(p.x1).values - features.at(p.x2).values).transpose();
    labels[row] = p.label ? 1.0 : 0.0;
    ++row;
  }
  return {std::move(diffs), std::move(labels)};
}

TrainResult train_parametric(std::span<const PairSource> sources, const TrainHyper& hyper,
                             const std::string& environment_id) {
  if (sources.empty()) throw DomainError("train_parametric needs at least one pair source");
  const MelConfig& config = sources.front().features->config();
  const int d = config.feature_length();
  std::size_t n = 0;
  for (const PairSource& s : sources) {
    if (!s.features) throw DomainError("pair source without features");
    if (s.features->config().feature_length() != d) {
      throw DomainError("pair sources disagree on the feature length");
    }
    n += s.pairs.size();
  }
  if (n == 0) throw DomainError("train_parametric needs at least one pair");

  Eigen::MatrixXd diffs(static_cast<Eigen::Index>(n), d);
  Eigen::VectorXd labels(static_cast<Eigen::Index>(n));
  // Per-dimension scale over every tone used in training.
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(d);
  double count = 0.0;
  Eigen::Index row = 0;
  for (const PairSource& s : sources) {
    auto [D, y] = difference_features(s.pairs, *s.features);
    diffs.middleRows(row, D.rows()) = D;
    labels.segment(row, y.size()) = y;
    row += D.rows();
    std::set<Tone> seen;
    for (const ComparisonPair& p : s.pairs) {
      for (const Tone& t : {p.x1, p.x2}) {
        if (!seen.insert(t).second) continue;
        const Eigen::VectorXd& v = s.features->at(t).values;
        sum += v;
        sum_sq += v.cwiseProduct(v);
        count += 1.0;
      }
    }
  }
  bool degenerate = true;
  for (Eigen::Index i = 1; i < diffs.rows() && degenerate; ++i) {
    degenerate = diffs.row(i) == diffs.row(0);
  }
  if (degenerate) throw DegenerateDataError("all pair feature differences are identical");

  const Eigen::VectorXd mean = sum / count;
  Eigen::VectorXd scale = (sum_sq / count - mean.cwiseProduct(mean)).cwiseMax(0.0).cwiseSqrt();
  for (Eigen::Index k = 0; k < d; ++k) {
    if (!(scale[k] > 0.0) || !std::isfinite(scale[k])) scale[k] = 1.0;
  }
  diffs = diffs * scale.cwiseInverse().asDiagonal();

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd grad;
  double loss = pairwise_bce<double>(diffs, labels, theta, &grad);
  double step = hyper.initial_step;
  TrainStats stats;
  stats.pairs = n;
  int it = 0;
  for (; it < hyper.max_iters; ++it) {
    if (grad.lpNorm<Eigen::Infinity>() < hyper.tolerance) {
      stats.converged = true;
      break;
    }
    const double g2 = grad.squaredNorm();
    step *= 2.0;
    Eigen::VectorXd candidate;
    double candidate_loss;
    for (;;) {
      candidate = theta - step * grad;
      candidate_loss = pairwise_bce<double>(diffs, labels, candidate);
      if (candidate_loss <= loss - hyper.armijo * step * g2) break;
      step *= hyper.backtrack;
      if (step < 1e-20) break;
    }
    if (step < 1e-20) break;  // no descent possible at machine precision
    theta = std::move(candidate);
    loss = pairwise_bce<double>(diffs, labels, theta, &grad);
  }
  stats.iterations = it;
  stats.loss = loss;
  stats.gradient_norm = grad.lpNorm<Eigen::Infinity>();
  if (!stats.converged) stats.converged = stats.gradient_norm < hyper.tolerance;

  TrainResult out;
  out.stats = stats;
  out.model.environment_id = environment_id;
  out.model.feature_config = config;
  out.model.weights = theta.cwiseQuotient(scale);
  return out;
}

double parametric_score(const ParametricModel& model, const FeatureVector& features) {
  if (features.values.size() != model.weights.size()) {
    throw DomainError("feature length does not match the model weights");
  }
  return model.weights.dot(features.values);
}

double parametric_score(const ParametricModel& model, const Tone& tone, const FeatureTable& features) {
  return parametric_score(model, features.at(tone));
}

double parametric_score(const ParametricModel& model, const Tone& tone, const ToneBank& bank) {
  return parametric_score(model, extract_features(bank, tone, model.feature_config));
}

CalibrationMap fit_calibration(std::span<const double> raw_scores, std::span<const double> sones) {
  if (raw_scores.size() != sones.size()) throw CalibrationError("score and sone counts differ");
  if (raw_scores.size() < 2) throw CalibrationError("calibration needs at least two anchors");
  std::vector<std::size_t> order(raw_scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return raw_scores[a] < raw_scores[b]; });
  if (raw_scores[order.front()] == raw_scores[order.back()]) {
    throw CalibrationError("all anchor raw scores are equal");
  }
  // Tied scores form one weighted point.
  std::vector<double> xs, ys, ws;
  for (std::size_t i : order) {
    if (!std::isfinite(raw_scores[i]) || !std::isfinite(sones[i])) {
      throw CalibrationError("non-finite anchor score or sones");
    }
    if (!xs.empty() && xs.back() == raw_scores[i]) {
      ys.back() = (ys.back() * ws.back() + sones[i]) / (ws.back() + 1.0);
      ws.back() += 1.0;
    } else {
      xs.push_back(raw_scores[i]);
      ys.push_back(sones[i]);
      ws.push_back(1.0);
    }
  }
  const Eigen::Map<const Eigen::VectorXd> y(ys.data(), static_cast<Eigen::Index>(ys.size()));
  const Eigen::Map<const Eigen::VectorXd> w(ws.data(), static_cast<Eigen::Index>(ws.size()));
  const Eigen::VectorXd fit = isotonic_regression<double>(y, w);

  CalibrationMap map;
  std::size_t i = 0;
  while (i < xs.size()) {
    std::size_t j = i;
    double wx = 0.0, wsum = 0.0;
    while (j < xs.size() && fit[static_cast<Eigen::Index>(j)] == fit[static_cast<Eigen::Index>(i)]) {
      wx += ws[j] * xs[j];
      wsum += ws[j];
      ++j;
    }
    map.knots.emplace_back(j - i == 1 ? xs[i] : wx / wsum, fit[static_cast<Eigen::Index>(i)]);
    i = j;
  }
  return map;
}

CalibrationMap fit_calibration(const ParametricModel& model, std::span<const PureToneAnchor> anchors,
                               const FeatureTable& features, int reference_pitch) {
  std::set<int> velocities;
  std::vector<double> raw, sones;
  for (const PureToneAnchor& a : anchors) {
    if (!velocities.insert(a.velocity).second) {
      throw CalibrationError("duplicate anchor velocity " + std::to_string(a.velocity));
    }
    raw.push_back(parametric_score(model, Tone{reference_pitch, a.velocity}, features));
    sones.push_back(a.sones);
  }
  return fit_calibration(raw, sones);
}

double loudness_sones(const ParametricModel& model, const Tone& tone, const FeatureTable& features) {
  if (!model.calibration) throw CalibrationError("model has no calibration");
  return (*model.calibration)(parametric_score(model, tone, features));
}

double loudness_sones(const ParametricModel& model, const Tone& tone, const ToneBank& bank) {
  if (!model.calibration) throw CalibrationError("model has no calibration");
  return (*model.calibration)(parametric_score(model, tone, bank));
}

LoudnessTable parametric_table(const ParametricModel& model, const FeatureTable& features,
                               bool calibrated) {
  if (calibrated && !model.calibration) throw CalibrationError("model has no calibration");
  return LoudnessTable::from_function([&](const Tone& t) -> std::optional<double> {
    if (!features.contains(t)) return std::nullopt;
    const double raw = parametric_score(model, t, features);
    return calibrated ? (*model.calibration)(raw) : raw;
  });
}

void to_json(Json& j, const CalibrationMap& c) {
  Json knots = Json::array();
  for (const auto& [r, s] : c.knots) knots.push_back({r, s});
  j = Json{{"knots", knots}};
}

void from_json(const Json& j, CalibrationMap& c) {
  c.knots.clear();
  for (const auto& k : j.at("knots")) c.knots.emplace_back(k.at(0).get<double>(), k.at(1).get<double>());
  for (std::size_t i = 1; i < c.knots.size(); ++i) {
    if (!(c.knots[i].first > c.knots[i - 1].first) || c.knots[i].second < c.knots[i - 1].second) {
      throw SchemaError("calibration knots must increase");
    }
  }
}

void to_json(Json& j, const ParametricModel& m) {
  j = Json{{"type", "parametric"},
           {"environment_id", m.environment_id},
           {"feature_config", m.feature_config},
           {"weights", std::vector<double>(m.weights.data(), m.weights.data() + m.weights.size())},
           {"calibration", m.calibration ? Json(*m.calibration) : Json(nullptr)}};
}

void from_json(const Json& j, ParametricModel& m) {
  if (j.at("type").get<std::string>() != "parametric") throw SchemaError("not a parametric model");
  m.environment_id = j.value("environment_id", std::string());
  m.feature_config = j.at("feature_config").get<MelConfig>();
  const auto w = j.at("weights").get<std::vector<double>>();
  if (static_cast<int>(w.size()) != m.feature_config.feature_length()) {
    throw SchemaError("weight count does not match the feature configuration");
  }
  m.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  m.calibration.reset();
  if (j.contains("calibration") && !j.at("calibration").is_null()) {
    m.calibration = j.at("calibration").get<CalibrationMap>();
  }
}

void to_json(Json& j, const TrainStats& s) {
  j = Json{{"iterations", s.iterations},
           {"converged", s.converged},
           {"loss", s.loss},
           {"gradient_norm", s.gradient_norm},
           {"pairs", s.pairs}};
}

}  // namespace pianoloud
