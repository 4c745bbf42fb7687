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
#include <string>

#include "pianoloud/error.hpp"

namespace pianoloud {

template <typename Scalar>
Scalar hz_to_mel(Scalar hz) {
  using std::log10;
  return Scalar(2595) * log10(Scalar(1) + hz / Scalar(700));
}

template <typename Scalar>
Scalar mel_to_hz(Scalar mel) {
  using std::pow;
  return Scalar(700) * (pow(Scalar(10), mel / Scalar(2595)) - Scalar(1));
}

/// n_mels + 2 edge/centre frequencies, uniformly spaced on the mel scale
/// between fmin and fmax. Filter m spans points m .. m+2 and peaks at m+1.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mel_points(int n_mels, Scalar fmin, Scalar fmax) {
  const Scalar lo = hz_to_mel(fmin);
  const Scalar hi = hz_to_mel(fmax);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> pts(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    pts[i] = mel_to_hz(lo + (hi - lo) * Scalar(i) / Scalar(n_mels + 1));
  }
  return pts;
}

/// Triangular mel filterbank of shape n_mels x (n_fft / 2 + 1). Each row is
/// scaled by 2 / (f_right - f_left) so all filters have unit area.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> triangular_mel_filterbank(
    int n_mels, int n_fft, Scalar sample_rate, Scalar fmin, Scalar fmax) {
  if (n_mels < 1) throw ConfigError("n_mels must be >= 1");
  if (n_fft < 2) throw ConfigError("window must hold at least two samples");
  if (!(fmin >= Scalar(0)) || !(fmin < fmax) || fmax > sample_rate / Scalar(2)) {
    throw ConfigError("need 0 <= fmin < fmax <= sample_rate / 2");
  }
  const int n_bins = n_fft / 2 + 1;
  const auto pts = mel_points<Scalar>(n_mels, fmin, fmax);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> fb =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(n_mels, n_bins);
  for (int m = 0; m < n_mels; ++m) {
    const Scalar left = pts[m];
    const Scalar centre = pts[m + 1];
    const Scalar right = pts[m + 2];
    const Scalar norm = Scalar(2) / (right - left);
    bool support = false;
    for (int b = 0; b < n_bins; ++b) {
      const Scalar f = Scalar(b) * sample_rate / Scalar(n_fft);
      Scalar w(0);
      if (f > left && f <= centre) {
        w = (f - left) / (centre - left);
      } else if (f > centre && f < right) {
        w = (right - f) / (right - centre);
      }
      if (w > Scalar(0)) {
        fb(m, b) = w * norm;
        support = true;
      }
    }
    if (!support) {
      throw ConfigError("mel filter " + std::to_string(m) +
                        " covers no FFT bin; reduce n_mels or enlarge the window");
    }
  }
  return fb;
}

}  // namespace pianoloud
