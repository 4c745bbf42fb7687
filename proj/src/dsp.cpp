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

#include "pianoloud/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>
#include <unsupported/Eigen/FFT>

#include "pianoloud/mel.hpp"

namespace pianoloud {

void MelConfig::validate() const {
  if (n_mels < 1) throw ConfigError("n_mels must be >= 1");
  if (window_size < 2) throw ConfigError("window_size must be >= 2");
  if (hop_size < 1 || hop_size > window_size) throw ConfigError("need 1 <= hop_size <= window_size");
  if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be positive");
  const double hi = effective_fmax();
  if (!(fmin >= 0.0) || !(fmin < hi) || hi > sample_rate / 2.0) {
    throw ConfigError("need 0 <= fmin < fmax <= sample_rate / 2");
  }
  if (frames_after_onset < 1) throw ConfigError("frames_after_onset must be >= 1");
}

void to_json(Json& j, const MelConfig& c) {
  j = Json{{"n_mels", c.n_mels},
           {"window_size", c.window_size},
           {"hop_size", c.hop_size},
           {"sample_rate", c.sample_rate},
           {"fmin", c.fmin},
           {"fmax", c.effective_fmax()},
           {"frames_after_onset", c.frames_after_onset},
           {"compression", c.compression == Compression::power ? "power" : "log_power"}};
}

void from_json(const Json& j, MelConfig& c) {
  auto opt = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  opt("n_mels", c.n_mels);
  opt("window_size", c.window_size);
  opt("hop_size", c.hop_size);
  opt("sample_rate", c.sample_rate);
  opt("fmin", c.fmin);
  opt("fmax", c.fmax);
  opt("frames_after_onset", c.frames_after_onset);
  if (j.contains("compression")) {
    const auto s = j.at("compression").get<std::string>();
    if (s == "power") {
      c.compression = Compression::power;
    } else if (s == "log_power") {
      c.compression = Compression::log_power;
    } else {
      throw SchemaError("unknown compression '" + s + "'");
    }
  }
}

Eigen::MatrixXd mel_filterbank(const MelConfig& config) {
  config.validate();
  return triangular_mel_filterbank<double>(config.n_mels, config.window_size, config.sample_rate,
                                           config.fmin, config.effective_fmax());
}

Eigen::Index frame_count(Eigen::Index clip_length, const MelConfig& config) {
  if (clip_length < config.window_size) return 0;
  return 1 + (clip_length - config.window_size) / config.hop_size;
}

namespace {

Eigen::VectorXd hann(int n) {
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

// Power spectra of frames [first, first + count); frames beyond the clip stay zero.
Eigen::MatrixXd power_frames(const Clip& clip, const MelConfig& config, Eigen::Index first,
                             Eigen::Index count) {
  config.validate();
  if (clip.size() < config.window_size) {
    throw InputError("clip of " + std::to_string(clip.size()) + " samples is shorter than one " +
                     std::to_string(config.window_size) + "-sample window");
  }
  const Eigen::Index total = frame_count(clip.size(), config);
  const int w = config.window_size;
  const Eigen::VectorXd window = hann(w);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(config.n_bins(), count);
  Eigen::FFT<double> fft;
  std::vector<double> frame(static_cast<std::size_t>(w));
  std::vector<std::complex<double>> spectrum;
  for (Eigen::Index c = 0; c < count; ++c) {
    const Eigen::Index t = first + c;
    if (t < 0 || t >= total) continue;
    const Eigen::Index start = t * config.hop_size;
    for (int i = 0; i < w; ++i) frame[i] = clip[start + i] * window[i];
    fft.fwd(spectrum, frame);
    for (int b = 0; b < config.n_bins(); ++b) out(b, c) = std::norm(spectrum[b]);
  }
  return out;
}

void compress(Eigen::MatrixXd& m, const MelConfig& config) {
  if (config.compression == Compression::log_power) {
    m = (10.0 * (m.array() + 1e-10).log10()).matrix();
  }
}

}  // namespace

Eigen::MatrixXd power_spectrogram(const Clip& clip, const MelConfig& config) {
  config.validate();
  return power_frames(clip, config, 0, frame_count(clip.size(), config));
}

Eigen::MatrixXd mel_spectrogram(const Clip& clip, const MelConfig& config) {
  Eigen::MatrixXd m = mel_filterbank(config) * power_spectrogram(clip, config);
  compress(m, config);
  return m;
}

Eigen::MatrixXd mel_spectrogram_frames(const Clip& clip, const MelConfig& config,
                                       Eigen::Index first, Eigen::Index count) {
  Eigen::MatrixXd m = mel_filterbank(config) * power_frames(clip, config, first, count);
  compress(m, config);
  const Eigen::Index total = frame_count(clip.size(), config);
  for (Eigen::Index c = 0; c < count; ++c) {
    if (first + c >= total) m.col(c).setZero();
  }
  return m;
}

Eigen::VectorXd onset_frame_energy(const Clip& clip, const MelConfig& config) {
  config.validate();
  const Eigen::Index frames = frame_count(clip.size(), config);
  Eigen::VectorXd e(frames);
  for (Eigen::Index t = 0; t < frames; ++t) {
    e[t] = clip.segment(t * config.hop_size, config.hop_size).squaredNorm();
  }
  return e;
}

int detect_onset(const Clip& clip, const MelConfig& config) {
  if (clip.size() < config.window_size) {
    throw InputError("clip shorter than one analysis window");
  }
  const Eigen::VectorXd e = onset_frame_energy(clip, config);
  const double peak = e.maxCoeff();
  // Gate: mean square below -100 dBFS counts as silence.
  if (!(peak > 1e-10 * config.hop_size)) throw NoOnsetError("clip is silent");
  const double threshold = peak * std::pow(10.0, kOnsetThresholdDb / 10.0);
  for (Eigen::Index t = 0; t < e.size(); ++t) {
    if (e[t] >= threshold) return static_cast<int>(t);
  }
  return static_cast<int>(e.size() - 1);  // unreachable: the peak qualifies
}

FeatureVector features_from_clip(const Clip& clip, const Tone& tone, const MelConfig& config) {
  FeatureVector fv;
  fv.tone = tone;
  fv.onset_frame = detect_onset(clip, config);
  const int frames = config.frames_after_onset;
  const Eigen::MatrixXd block = mel_spectrogram_frames(clip, config, fv.onset_frame, frames);
  fv.padded = fv.onset_frame + frames > frame_count(clip.size(), config);
  fv.values.resize(config.feature_length());
  for (int m = 0; m < config.n_mels; ++m)
    for (int f = 0; f < frames; ++f) fv.values[m * frames + f] = block(m, f);
  return fv;
}

FeatureVector extract_features(const ToneBank& bank, const Tone& tone, const MelConfig& config) {
  return features_from_clip(bank.clip(tone), tone, config);
}

FeatureTable::FeatureTable(const ToneBank& bank, const MelConfig& config)
    : environment_id_(bank.environment_id()), config_(config) {
  config.validate();
  if (std::abs(config.sample_rate - bank.sample_rate()) > 1e-9) {
    throw ConfigError("feature sample rate does not match bank '" + bank.environment_id() + "'");
  }
  for (const Tone& t : bank.tones()) {
    try {
      insert(extract_features(bank, t, config));
    } catch (const NoOnsetError& e) {
      skipped_.emplace_back(t, e.what());
    }
  }
}

const FeatureVector& FeatureTable::at(const Tone& tone) const {
  auto it = rows_.find(tone);
  if (it == rows_.end()) {
    throw MaskedToneError("no features for tone " + to_string(tone) + " in '" + environment_id_ +
                          "'");
  }
  return it->second;
}

std::vector<Tone> FeatureTable::tones() const {
  std::vector<Tone> out;
  out.reserve(rows_.size());
  for (const auto& [t, fv] : rows_) out.push_back(t);
  std::sort(out.begin(), out.end());
  return out;
}

void FeatureTable::insert(FeatureVector fv) {
  const Tone t = fv.tone;
  rows_.insert_or_assign(t, std::move(fv));
}

void write_feature_csv(std::ostream& out, const FeatureTable& table) {
  const int n = table.config().feature_length();
  out << "env,pitch,velocity,onset_frame";
  for (int i = 0; i < n; ++i) out << ",f" << i;
  out << '\n';
  out.precision(17);
  for (const Tone& t : table.tones()) {
    const FeatureVector& fv = table.at(t);
    out << table.environment_id() << ',' << t.pitch << ',' << t.velocity << ',' << fv.onset_frame;
    for (int i = 0; i < n; ++i) out << ',' << fv.values[i];
    out << '\n';
  }
}

}  // namespace pianoloud
