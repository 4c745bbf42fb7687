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
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "pianoloud/bank.hpp"
#include "pianoloud/json_io.hpp"
#include "pianoloud/tone.hpp"
#include "pianoloud/wav.hpp"

namespace pianoloud {

enum class Compression { power, log_power };

struct MelConfig {
  int n_mels = 8;
  int window_size = 2048;
  int hop_size = 512;
  double sample_rate = 22050.0;
  double fmin = 0.0;
  double fmax = -1.0;  // negative means sample_rate / 2
  int frames_after_onset = 5;
  Compression compression = Compression::power;

  double effective_fmax() const { return fmax < 0.0 ? sample_rate / 2.0 : fmax; }
  int n_bins() const { return window_size / 2 + 1; }
  int feature_length() const { return n_mels * frames_after_onset; }
  void validate() const;
};

void to_json(Json& j, const MelConfig& c);
void from_json(const Json& j, MelConfig& c);

/// n_mels x n_bins, rows triangular and area-normalised.
Eigen::MatrixXd mel_filterbank(const MelConfig& config);

/// Number of analysis frames: frame t covers [t * hop, t * hop + window).
Eigen::Index frame_count(Eigen::Index clip_length, const MelConfig& config);

/// |STFT|^2 with a periodic Hann window, n_bins x n_frames, no centring.
Eigen::MatrixXd power_spectrogram(const Clip& clip, const MelConfig& config);

/// Filterbank projection of the power spectrogram, n_mels x n_frames;
/// log_power applies 10 log10(x + 1e-10).
Eigen::MatrixXd mel_spectrogram(const Clip& clip, const MelConfig& config);

/// Columns [first, first + count) of mel_spectrogram; frames past the end of
/// the clip are left at zero.
Eigen::MatrixXd mel_spectrogram_frames(const Clip& clip, const MelConfig& config,
                                       Eigen::Index first, Eigen::Index count);

/// Energy of the leading hop of each analysis frame.
Eigen::VectorXd onset_frame_energy(const Clip& clip, const MelConfig& config);

inline constexpr double kOnsetThresholdDb = -20.0;

/// Earliest frame whose leading-hop energy is within 20 dB of the loudest
/// frame. Throws NoOnsetError on silence.
int detect_onset(const Clip& clip, const MelConfig& config);

struct FeatureVector {
  Tone tone;
  int onset_frame = 0;
  bool padded = false;     // clip ended before frames_after_onset frames
  Eigen::VectorXd values;  // n_mels x frames, row-major (mel-major)
};

FeatureVector features_from_clip(const Clip& clip, const Tone& tone, const MelConfig& config);

/// Throws MaskedToneError for masked tones and NoOnsetError for silence.
FeatureVector extract_features(const ToneBank& bank, const Tone& tone, const MelConfig& config);

/// Features for every unmasked tone of a bank, computed once.
class FeatureTable {
 public:
  FeatureTable() = default;
  FeatureTable(const ToneBank& bank, const MelConfig& config);

  const std::string& environment_id() const { return environment_id_; }
  const MelConfig& config() const { return config_; }
  bool contains(const Tone& tone) const { return rows_.count(tone) > 0; }
  const FeatureVector& at(const Tone& tone) const;
  std::vector<Tone> tones() const;
  std::size_t size() const { return rows_.size(); }

  void insert(FeatureVector fv);

  /// Tones whose extraction failed (no onset), with the error message.
  const std::vector<std::pair<Tone, std::string>>& skipped() const { return skipped_; }

 private:
  std::vector<std::pair<Tone, std::string>> skipped_;
  std::string environment_id_;
  MelConfig config_;
  std::unordered_map<Tone, FeatureVector> rows_;
};

/// CSV: env,pitch,velocity,onset_frame,f0..f{n-1}
void write_feature_csv(std::ostream& out, const FeatureTable& table);

}  // namespace pianoloud
