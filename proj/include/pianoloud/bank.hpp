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

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pianoloud/synth.hpp"
#include "pianoloud/tone.hpp"
#include "pianoloud/wav.hpp"

namespace pianoloud {

struct MaskEntry {
  Tone tone;
  std::string reason;
};

/// Which tones a bank is expected to cover. Defaults to all 88 x 127.
struct BankGrid {
  std::vector<int> pitches;
  std::vector<int> velocities;

  static BankGrid full(int velocity_step = 1);
  std::vector<Tone> tones() const;
  std::size_t size() const { return pitches.size() * velocities.size(); }
};

/// An immutable grid of tone recordings for one environment. Clips are either
/// rendered on demand from a synthesis spec, read from a directory of WAV
/// files, or held in memory. Safe for concurrent readers.
class ToneBank {
 public:
  class Source;

  ToneBank(std::string environment_id, int sample_rate, double clip_duration,
           double note_duration, BankGrid grid, std::vector<MaskEntry> failure_mask,
           std::shared_ptr<const Source> source);

  const std::string& environment_id() const { return environment_id_; }
  int sample_rate() const { return sample_rate_; }
  double clip_duration() const { return clip_duration_; }
  double note_duration() const { return note_duration_; }
  Eigen::Index clip_samples() const;
  const BankGrid& grid() const { return grid_; }

  /// Unmasked tones in grid order (pitch-major).
  const std::vector<Tone>& tones() const { return tones_; }
  const std::vector<MaskEntry>& failure_mask() const { return failure_mask_; }

  bool in_grid(const Tone& tone) const;
  bool is_masked(const Tone& tone) const;
  /// In the grid and not masked.
  bool contains(const Tone& tone) const;

  /// Throws MaskedToneError for masked or out-of-grid tones.
  Clip clip(const Tone& tone) const;

  /// Present when the bank was synthesised; carries the ground-truth oracle.
  const std::optional<SynthEnvSpec>& synth_spec() const;

 private:
  std::string environment_id_;
  int sample_rate_;
  double clip_duration_;
  double note_duration_;
  BankGrid grid_;
  std::vector<MaskEntry> failure_mask_;
  std::vector<Tone> tones_;
  std::vector<char> in_grid_;  // indexed by Tone::grid_index
  std::vector<char> masked_;
  std::shared_ptr<const Source> source_;
};

/// Bank rendered from a synthesis spec. Tones listed in spec.failed_tones are
/// masked with reason "mechanical_failure".
ToneBank build_synthetic_bank(const SynthEnvSpec& spec, const BankGrid& grid = BankGrid::full());

/// Bank held in memory; the grid is exactly the provided clips.
ToneBank build_memory_bank(std::string environment_id, int sample_rate, double clip_duration,
                           double note_duration, std::map<Tone, Clip> clips);

struct IngestOptions {
  std::string environment_id;
  int sample_rate = 22050;
  double clip_duration = 1.3;
  double note_duration = 0.3;
  BankGrid grid = BankGrid::full();
};

/// Scans `<root>/<env>/<pitch>_<velocity>.wav`. Missing or invalid files
/// (wrong rate, channel count, length beyond +-1 sample) are masked with a
/// reason instead of failing the build.
ToneBank ingest_bank(const std::filesystem::path& root, const IngestOptions& options);

/// Writes every unmasked clip as 16-bit WAV plus `<root>/<env>/manifest.json`.
void write_bank(const ToneBank& bank, const std::filesystem::path& root,
                const std::string& config_hash = "");

/// Reopens a bank from its manifest. Synthetic banks keep their spec so the
/// oracle remains available; clips are read from the WAV files.
ToneBank load_bank(const std::filesystem::path& env_dir);

std::filesystem::path clip_path(const std::filesystem::path& root, const std::string& env,
                                const Tone& tone);

}  // namespace pianoloud
