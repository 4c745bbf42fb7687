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

#include "pianoloud/bank.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "pianoloud/json_io.hpp"

namespace pianoloud {

class ToneBank::Source {
 public:
  virtual ~Source() = default;
  virtual Clip load(const Tone& tone) const = 0;
  virtual const std::optional<SynthEnvSpec>& spec() const {
    static const std::optional<SynthEnvSpec> none;
    return none;
  }
};

namespace {

class SynthSource final : public ToneBank::Source {
 public:
  explicit SynthSource(SynthEnvSpec spec) : spec_(std::move(spec)) {}
  Clip load(const Tone& tone) const override { return synthesize_tone(*spec_, tone); }
  const std::optional<SynthEnvSpec>& spec() const override { return spec_; }

 private:
  std::optional<SynthEnvSpec> spec_;
};

class MemorySource final : public ToneBank::Source {
 public:
  explicit MemorySource(std::map<Tone, Clip> clips) : clips_(std::move(clips)) {}
  Clip load(const Tone& tone) const override { return clips_.at(tone); }

 private:
  std::map<Tone, Clip> clips_;
};

class DirectorySource final : public ToneBank::Source {
 public:
  DirectorySource(std::filesystem::path root, std::string env,
                  std::optional<SynthEnvSpec> spec)
      : root_(std::move(root)), env_(std::move(env)), spec_(std::move(spec)) {}
  Clip load(const Tone& tone) const override {
    return read_wav(clip_path(root_, env_, tone)).samples;
  }
  const std::optional<SynthEnvSpec>& spec() const override { return spec_; }

 private:
  std::filesystem::path root_;
  std::string env_;
  std::optional<SynthEnvSpec> spec_;
};

std::vector<MaskEntry> dedupe(std::vector<MaskEntry> mask) {
  std::sort(mask.begin(), mask.end(),
            [](const MaskEntry& a, const MaskEntry& b) { return a.tone < b.tone; });
  mask.erase(std::unique(mask.begin(), mask.end(),
                         [](const MaskEntry& a, const MaskEntry& b) { return a.tone == b.tone; }),
             mask.end());
  return mask;
}

}  // namespace

BankGrid BankGrid::full(int velocity_step) {
  BankGrid g;
  for (int p = kMinPitch; p <= kMaxPitch; ++p) g.pitches.push_back(p);
  g.velocities = velocity_grid(velocity_step);
  return g;
}

std::vector<Tone> BankGrid::tones() const {
  std::vector<Tone> out;
  out.reserve(size());
  for (int p : pitches)
    for (int v : velocities) out.push_back(Tone{p, v});
  return out;
}

ToneBank::ToneBank(std::string environment_id, int sample_rate, double clip_duration,
                   double note_duration, BankGrid grid, std::vector<MaskEntry> failure_mask,
                   std::shared_ptr<const Source> source)
    : environment_id_(std::move(environment_id)),
      sample_rate_(sample_rate),
      clip_duration_(clip_duration),
      note_duration_(note_duration),
      grid_(std::move(grid)),
      failure_mask_(dedupe(std::move(failure_mask))),
      in_grid_(kNumPitches * kNumVelocities, 0),
      masked_(kNumPitches * kNumVelocities, 0),
      source_(std::move(source)) {
  std::sort(grid_.pitches.begin(), grid_.pitches.end());
  std::sort(grid_.velocities.begin(), grid_.velocities.end());
  for (const Tone& t : grid_.tones()) {
    validate(t);
    in_grid_[t.grid_index()] = 1;
  }
  for (const MaskEntry& m : failure_mask_) {
    validate(m.tone);
    masked_[m.tone.grid_index()] = 1;
  }
  for (const Tone& t : grid_.tones())
    if (!masked_[t.grid_index()]) tones_.push_back(t);
}

Eigen::Index ToneBank::clip_samples() const {
  return static_cast<Eigen::Index>(std::llround(clip_duration_ * sample_rate_));
}

bool ToneBank::in_grid(const Tone& tone) const {
  return tone.valid() && in_grid_[tone.grid_index()];
}

bool ToneBank::is_masked(const Tone& tone) const {
  return tone.valid() && masked_[tone.grid_index()];
}

bool ToneBank::contains(const Tone& tone) const { return in_grid(tone) && !is_masked(tone); }

Clip ToneBank::clip(const Tone& tone) const {
  if (!contains(tone)) {
    throw MaskedToneError("tone " + to_string(tone) + " is masked or absent in bank '" +
                          environment_id_ + "'");
  }
  return source_->load(tone);
}

const std::optional<SynthEnvSpec>& ToneBank::synth_spec() const { return source_->spec(); }

std::filesystem::path clip_path(const std::filesystem::path& root, const std::string& env,
                                const Tone& tone) {
  return root / env / (to_string(tone) + ".wav");
}

ToneBank build_synthetic_bank(const SynthEnvSpec& spec, const BankGrid& grid) {
  spec.validate();
  std::vector<MaskEntry> mask;
  for (const Tone& t : spec.failed_tones) {
    validate(t);
    if (std::find(grid.pitches.begin(), grid.pitches.end(), t.pitch) != grid.pitches.end() &&
        std::find(grid.velocities.begin(), grid.velocities.end(), t.velocity) !=
            grid.velocities.end()) {
      mask.push_back({t, "mechanical_failure"});
    }
  }
  return ToneBank(spec.environment_id, spec.sample_rate, spec.clip_duration, spec.note_duration,
                  grid, std::move(mask), std::make_shared<SynthSource>(spec));
}

ToneBank build_memory_bank(std::string environment_id, int sample_rate, double clip_duration,
                           double note_duration, std::map<Tone, Clip> clips) {
  BankGrid grid;
  std::vector<Tone> present;
  for (const auto& [tone, clip] : clips) present.push_back(tone);
  // The grid is the smallest rectangle covering the clips; holes are masked.
  for (const Tone& t : present) {
    grid.pitches.push_back(t.pitch);
    grid.velocities.push_back(t.velocity);
  }
  auto uniq = [](std::vector<int>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  uniq(grid.pitches);
  uniq(grid.velocities);
  std::vector<MaskEntry> mask;
  for (const Tone& t : grid.tones())
    if (!clips.count(t)) mask.push_back({t, "missing"});
  return ToneBank(std::move(environment_id), sample_rate, clip_duration, note_duration,
                  std::move(grid), std::move(mask),
                  std::make_shared<MemorySource>(std::move(clips)));
}

namespace {

std::vector<MaskEntry> scan_directory(const std::filesystem::path& root, const std::string& env,
                                      int sample_rate, Eigen::Index expected,
                                      const std::vector<Tone>& tones) {
  std::vector<MaskEntry> mask;
  for (const Tone& t : tones) {
    const auto path = clip_path(root, env, t);
    std::string reason;
    if (!std::filesystem::exists(path)) {
      reason = "missing";
    } else {
      try {
        const WavAudio wav = read_wav(path);
        if (wav.sample_rate != sample_rate) {
          reason = "sample_rate " + std::to_string(wav.sample_rate);
        } else if (wav.channels != 1) {
          reason = "channels " + std::to_string(wav.channels);
        } else if (std::abs(wav.samples.size() - expected) > 1) {
          reason = "length " + std::to_string(wav.samples.size());
        }
      } catch (const Error& e) {
        reason = std::string("corrupt: ") + e.what();
      }
    }
    if (!reason.empty()) {
      std::cerr << "warning: masking " << path.string() << " (" << reason << ")\n";
      mask.push_back({t, reason});
    }
  }
  return mask;
}

}  // namespace

ToneBank ingest_bank(const std::filesystem::path& root, const IngestOptions& options) {
  if (options.environment_id.empty()) throw ConfigError("environment_id required for ingestion");
  const auto expected =
      static_cast<Eigen::Index>(std::llround(options.clip_duration * options.sample_rate));
  auto mask = scan_directory(root, options.environment_id, options.sample_rate, expected,
                             options.grid.tones());
  return ToneBank(options.environment_id, options.sample_rate, options.clip_duration,
                  options.note_duration, options.grid, std::move(mask),
                  std::make_shared<DirectorySource>(root, options.environment_id, std::nullopt));
}

void write_bank(const ToneBank& bank, const std::filesystem::path& root,
                const std::string& config_hash) {
  const auto dir = root / bank.environment_id();
  std::filesystem::create_directories(dir);
  Json clips = Json::array();
  for (const Tone& t : bank.tones()) {
    write_wav(clip_path(root, bank.environment_id(), t), bank.clip(t), bank.sample_rate());
    clips.push_back(bank.environment_id() + "/" + to_string(t) + ".wav");
  }
  Json mask = Json::array();
  for (const MaskEntry& m : bank.failure_mask()) {
    mask.push_back({{"pitch", m.tone.pitch}, {"velocity", m.tone.velocity}, {"reason", m.reason}});
  }
  Json manifest{{"environment_id", bank.environment_id()},
                {"sample_rate", bank.sample_rate()},
                {"clip_duration", bank.clip_duration()},
                {"note_duration", bank.note_duration()},
                {"grid", {{"pitches", bank.grid().pitches}, {"velocities", bank.grid().velocities}}},
                {"clips", clips},
                {"failure_mask", mask},
                {"synth_spec", bank.synth_spec() ? Json(*bank.synth_spec()) : Json(nullptr)},
                {"config_hash", config_hash}};
  write_json_file((dir / "manifest.json").string(), manifest);
}

ToneBank load_bank(const std::filesystem::path& env_dir) {
  const Json m = read_json_file((env_dir / "manifest.json").string());
  try {
    const std::string env = m.at("environment_id").get<std::string>();
    const int sr = m.at("sample_rate").get<int>();
    const double clip_duration = m.at("clip_duration").get<double>();
    const double note_duration = m.at("note_duration").get<double>();
    BankGrid grid;
    m.at("grid").at("pitches").get_to(grid.pitches);
    m.at("grid").at("velocities").get_to(grid.velocities);
    std::vector<MaskEntry> mask;
    for (const Json& e : m.at("failure_mask")) {
      mask.push_back({Tone{e.at("pitch").get<int>(), e.at("velocity").get<int>()},
                      e.value("reason", std::string("listed"))});
    }
    // Re-validate: the manifest may predate file damage.
    std::vector<Tone> to_scan;
    for (const Tone& t : grid.tones()) {
      const bool listed = std::any_of(mask.begin(), mask.end(),
                                      [&](const MaskEntry& e) { return e.tone == t; });
      if (!listed) to_scan.push_back(t);
    }
    const auto root = env_dir.parent_path();
    auto scanned = scan_directory(root, env, sr,
                                  static_cast<Eigen::Index>(std::llround(clip_duration * sr)),
                                  to_scan);
    for (auto& s : scanned) mask.push_back(std::move(s));
    std::optional<SynthEnvSpec> spec;
    if (m.contains("synth_spec") && !m.at("synth_spec").is_null()) {
      spec = m.at("synth_spec").get<SynthEnvSpec>();
    }
    return ToneBank(env, sr, clip_duration, note_duration, std::move(grid), std::move(mask),
                    std::make_shared<DirectorySource>(root, env, std::move(spec)));
  } catch (const Json::exception& e) {
    throw SchemaError("bad manifest in " + env_dir.string() + ": " + e.what());
  }
}

}  // namespace pianoloud
