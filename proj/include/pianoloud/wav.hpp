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
#include <filesystem>
#include <string>
#include <string_view>

namespace pianoloud {

/// Mono audio, samples nominally in [-1, 1].
using Clip = Eigen::VectorXd;

struct WavAudio {
  int sample_rate = 0;
  int channels = 0;
  int bits_per_sample = 0;
  Clip samples;  // first channel only
};

/// RIFF/WAVE, PCM 16-bit signed little-endian, mono. Samples are clamped to
/// [-1, 1] and rounded to the nearest integer level.
std::string encode_wav(const Clip& clip, int sample_rate);

/// Accepts PCM 16-bit files. Throws InputError on anything malformed.
WavAudio decode_wav(std::string_view bytes);

void write_wav(const std::filesystem::path& path, const Clip& clip,
               int sample_rate);
WavAudio read_wav(const std::filesystem::path& path);

}  // namespace pianoloud
