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
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pianoloud/bank.hpp"
#include "pianoloud/dsp.hpp"
#include "pianoloud/loudness.hpp"
#include "pianoloud/ribbons.hpp"

namespace pianoloud {

inline constexpr double kMinCalibratedSones = 0.01;

/// Monotone piecewise-linear map from raw score to sones. Beyond the end
/// knots the end segments continue linearly, floored at 0.01 sone.
struct CalibrationMap {
  std::vector<std::pair<double, double>> knots;  // (raw, sones), raw ascending

  double operator()(double raw) const;
};

struct ParametricModel {
  std::string environment_id;  // or "hybrid"
  MelConfig feature_config;
  Eigen::VectorXd weights;     // no intercept
  std::optional<CalibrationMap> calibration;
};

struct TrainHyper {
  double initial_step = 1.0;
  double backtrack = 0.5;
  double armijo = 1e-4;
  double tolerance = 1e-6;  // on the gradient infinity-norm
  int max_iters = 10000;
};

struct TrainStats {
  int iterations = 0;
  bool converged = false;
  double loss = 0.0;
  double gradient_norm = 0.0;  // infinity-norm, standardized coordinates
  std::size_t pairs = 0;
};

/// Mean binary cross-entropy of sigmoid(diffs * theta) against `labels`
/// (rows of `diffs` are phi(x1) - phi(x2)); writes the gradient when asked.
template <typename Scalar>
Scalar pairwise_bce(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& diffs,
                    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& labels,
                    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& theta,
                    Eigen::Matrix<Scalar, Eigen::Dynamic, 1>* gradient = nullptr) {
  using std::abs;
  using std::exp;
  using std::log1p;
  const Eigen::Index n = diffs.rows();
  if (n == 0) throw DomainError("pairwise_bce on an empty pair set");
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> z = diffs * theta;
  Scalar loss(0);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> residual(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar zi = z[i];
    // softplus(z) - y z, stable for both signs
    const Scalar softplus = (zi > Scalar(0) ? zi : Scalar(0)) + log1p(exp(-abs(zi)));
    loss += softplus - labels[i] * zi;
    const Scalar p = zi >= Scalar(0) ? Scalar(1) / (Scalar(1) + exp(-zi))
                                     : exp(zi) / (Scalar(1) + exp(zi));
    residual[i] = p - labels[i];
  }
  if (gradient) *gradient = diffs.transpose() * residual / Scalar(n);
  return loss / Scalar(n);
}

/// Pairs together with the features their tones are scored with.
struct PairSource {
  std::span<const ComparisonPair> pairs;
  const FeatureTable* features = nullptr;
};

struct TrainResult {
  ParametricModel model;  // uncalibrated
  TrainStats stats;
};

/// Full-batch gradient descent with backtracking line search on
/// per-dimension standardized features; the scaling is folded back into the
/// exported weights. All sources must share one feature configuration.
TrainResult train_parametric(std::span<const PairSource> sources, const TrainHyper& hyper = {},
                             const std::string& environment_id = "");

inline TrainResult train_parametric(std::span<const ComparisonPair> pairs,
                                    const FeatureTable& features, const TrainHyper& hyper = {}) {
  const PairSource source{pairs, &features};
  return train_parametric(std::span<const PairSource>(&source, 1), hyper,
                          features.environment_id());
}

/// Difference-feature matrix and labels for a set of pairs.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> difference_features(std::span<const ComparisonPair> pairs,
                                                                 const FeatureTable& features);

double parametric_score(const ParametricModel& model, const FeatureVector& features);
double parametric_score(const ParametricModel& model, const Tone& tone, const FeatureTable& features);
/// Extracts the tone's features from the bank; masked tones throw.
double parametric_score(const ParametricModel& model, const Tone& tone, const ToneBank& bank);

/// Weighted isotonic fit of anchor sones against raw scores at
/// (reference_pitch, anchor velocity); one knot per pool.
CalibrationMap fit_calibration(const ParametricModel& model, std::span<const PureToneAnchor> anchors,
                               const FeatureTable& features, int reference_pitch = 69);
CalibrationMap fit_calibration(std::span<const double> raw_scores, std::span<const double> sones);

/// Throws CalibrationError when the model has no calibration.
double loudness_sones(const ParametricModel& model, const Tone& tone, const FeatureTable& features);
double loudness_sones(const ParametricModel& model, const Tone& tone, const ToneBank& bank);

/// Raw scores (or sones when `calibrated`) for every tone in the table.
LoudnessTable parametric_table(const ParametricModel& model, const FeatureTable& features,
                               bool calibrated = false);

void to_json(Json& j, const CalibrationMap& c);
void from_json(const Json& j, CalibrationMap& c);
void to_json(Json& j, const ParametricModel& m);
void from_json(const Json& j, ParametricModel& m);
void to_json(Json& j, const TrainStats& s);

}  // namespace pianoloud
