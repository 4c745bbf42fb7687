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

#include "pianoloud/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "pianoloud/bank.hpp"
#include "pianoloud/dsp.hpp"
#include "pianoloud/elc.hpp"
#include "pianoloud/json_io.hpp"
#include "pianoloud/loudness.hpp"
#include "pianoloud/midi.hpp"
#include "pianoloud/nonparametric.hpp"
#include "pianoloud/parametric.hpp"
#include "pianoloud/psychometric.hpp"
#include "pianoloud/ribbons.hpp"
#include "pianoloud/service.hpp"
#include "pianoloud/transfer.hpp"

namespace fs = std::filesystem;

namespace pianoloud {

namespace {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

Level log_level() {
  const char* v = std::getenv("PIANOLOUD_LOG_LEVEL");
  if (!v) return Level::warn;
  const std::string s(v);
  if (s == "error") return Level::error;
  if (s == "info") return Level::info;
  if (s == "debug") return Level::debug;
  return Level::warn;
}

class Log {
 public:
  explicit Log(std::ostream& err) : err_(err), level_(log_level()) {}
  void operator()(Level l, const std::string& msg) const {
    static const char* names[] = {"error", "warn", "info", "debug"};
    if (l <= level_) err_ << "[" << names[static_cast<int>(l)] << "] " << msg << '\n';
  }

 private:
  std::ostream& err_;
  Level level_;
};

// JSON config files: top-level keys are options of the main app, nested
// objects address subcommands.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    Json j;
    for (const CLI::Option* opt : app->get_options({})) {
      if (!opt->get_lnames().empty() && opt->get_configurable()) {
        const std::string name = opt->get_lnames()[0];
        if (opt->count() > 0) {
          j[name] = opt->results().size() == 1 ? Json(opt->results()[0]) : Json(opt->results());
        } else if (default_also && !opt->get_default_str().empty()) {
          j[name] = opt->get_default_str();
        }
      }
    }
    for (const CLI::App* sub : app->get_subcommands({})) {
      if (sub->count() > 0) j[sub->get_name()] = Json::parse(to_config(sub, default_also, false, ""));
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    Json j;
    try {
      input >> j;
    } catch (const Json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> out;
    collect(j, {}, out);
    return out;
  }

 private:
  static std::string scalar(const Json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConversionError("unsupported config value " + v.dump());
  }

  static void collect(const Json& j, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto p = parents;
        p.push_back(key);
        collect(value, p, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs = {scalar(value)};
      }
      out.push_back(std::move(item));
    }
  }
};

// Effective configuration of a subcommand: every option's value (given or
// default), in option order.
Json effective_config(const CLI::App* sub) {
  Json j{{"command", sub->get_name()}};
  for (const CLI::Option* opt : sub->get_options({})) {
    if (opt->get_lnames().empty() || opt->get_lnames()[0] == "help") continue;
    const std::string name = opt->get_lnames()[0];
    if (opt->count() > 0) {
      j[name] = opt->results();
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

struct Context {
  std::ostream& out;
  Log log;
  Json config;
  std::string hash;
};

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::ofstream open_out(const fs::path& p) {
  ensure_parent(p);
  std::ofstream f(p);
  if (!f) throw IoError("cannot write " + p.string());
  return f;
}

std::ifstream open_in(const fs::path& p) {
  if (!fs::exists(p)) throw IoError("missing file " + p.string());
  std::ifstream f(p);
  if (!f) throw IoError("cannot read " + p.string());
  return f;
}

void write_artifact(const fs::path& p, Json j, const Context& ctx) {
  j["config_hash"] = ctx.hash;
  ensure_parent(p);
  write_json_file(p.string(), j);
}

SynthEnvSpec spec_from(const std::string& preset, const std::string& spec_file) {
  if (!spec_file.empty()) {
    return read_json_file(spec_file).get<SynthEnvSpec>();
  }
  return SynthEnvSpec::preset(preset);
}

const SynthEnvSpec& require_synth(const ToneBank& bank) {
  if (!bank.synth_spec()) {
    throw InputError("bank " + bank.environment_id() + " has no synthesis spec; supply --anchors");
  }
  return *bank.synth_spec();
}

MelConfig mel_from(const std::string& file, int sample_rate) {
  MelConfig c;
  c.sample_rate = sample_rate;
  if (!file.empty()) c = read_json_file(file).get<MelConfig>();
  c.validate();
  return c;
}

std::vector<PureToneAnchor> anchors_for(const std::string& anchors_file, const ToneBank* bank,
                                        int reference_pitch) {
  if (!anchors_file.empty()) {
    const Json j = read_json_file(anchors_file);
    const Json& list = j.is_object() ? j.at("anchors") : j;
    return list.get<std::vector<PureToneAnchor>>();
  }
  if (!bank) throw InputError("anchors need --anchors or a synthetic --bank");
  return anchors_from_oracle(require_synth(*bank), reference_pitch, default_anchor_velocities());
}

// Calibration anchors must be tones the bank holds. Coarse banks miss most
// default velocities; they fall back to every velocity held at the pitch.
std::vector<PureToneAnchor> calibration_anchors_for(const std::string& anchors_file, const ToneBank& bank,
                                                    int reference_pitch) {
  if (!anchors_file.empty()) return anchors_for(anchors_file, &bank, reference_pitch);
  std::vector<int> present, held;
  for (int v : default_anchor_velocities())
    if (bank.contains(Tone{reference_pitch, v})) present.push_back(v);
  for (int v : bank.grid().velocities)
    if (bank.contains(Tone{reference_pitch, v})) held.push_back(v);
  return anchors_from_oracle(require_synth(bank), reference_pitch, present.size() >= 3 ? present : held);
}

std::vector<ComparisonPair> read_pairs(const fs::path& p) {
  auto in = open_in(p);
  return read_pairs_csv(in);
}

struct LoadedModel {
  std::optional<NonParametricModel> nonparametric;
  std::optional<ParametricModel> parametric;
};

LoadedModel load_model(const fs::path& p) {
  const Json j = read_json_file(p.string());
  LoadedModel m;
  const std::string type = j.value("type", std::string());
  if (type == "nonparametric") {
    m.nonparametric = j.get<NonParametricModel>();
  } else if (type == "parametric") {
    m.parametric = j.get<ParametricModel>();
  } else {
    throw SchemaError("unknown model type '" + type + "' in " + p.string());
  }
  return m;
}

// Loudness table of a model: sones for the non-parametric grid, calibrated
// sones (or raw scores when `allow_raw` and uncalibrated) for the parametric
// model over the bank's unmasked tones.
LoudnessTable model_table(const LoadedModel& m, const ToneBank* bank, bool allow_raw) {
  if (m.nonparametric) {
    if (!bank) return m.nonparametric->table();
    return LoudnessTable::from_function([&](const Tone& t) -> std::optional<double> {
      if (!bank->contains(t)) return std::nullopt;
      return m.nonparametric->at(t);
    });
  }
  if (!bank) throw InputError("parametric models need --bank");
  const FeatureTable features(*bank, m.parametric->feature_config);
  const bool calibrated = m.parametric->calibration.has_value();
  if (!calibrated && !allow_raw) throw CalibrationError("parametric model is not calibrated");
  return parametric_table(*m.parametric, features, calibrated);
}

// --- commands ---

struct SynthArgs {
  std::string env = "env1";
  std::string spec_file;
  std::string out = "banks";
  int velocity_step = 1;
  std::uint64_t seed = 0;
};

void cmd_synth_bank(const SynthArgs& a, Context& ctx) {
  SynthEnvSpec spec = spec_from(a.env, a.spec_file);
  spec.seed = a.seed;
  const ToneBank bank = build_synthetic_bank(spec, BankGrid::full(a.velocity_step));
  write_bank(bank, a.out, ctx.hash);
  ctx.log(Level::info, "wrote " + std::to_string(bank.tones().size()) + " clips to " +
                           (fs::path(a.out) / bank.environment_id()).string());
  ctx.out << Json{{"environment_id", bank.environment_id()},
                  {"clips", bank.tones().size()},
                  {"masked", bank.failure_mask().size()},
                  {"config_hash", ctx.hash}}
                 .dump()
          << '\n';
}

struct IngestArgs {
  std::string root;
  std::string env;
  std::string out;
  int sample_rate = 22050;
  double clip_duration = 1.3;
  double note_duration = 0.3;
  int velocity_step = 1;
};

void cmd_ingest_bank(const IngestArgs& a, Context& ctx) {
  IngestOptions o;
  o.environment_id = a.env;
  o.sample_rate = a.sample_rate;
  o.clip_duration = a.clip_duration;
  o.note_duration = a.note_duration;
  o.grid = BankGrid::full(a.velocity_step);
  const ToneBank bank = ingest_bank(a.root, o);
  if (!a.out.empty()) write_bank(bank, a.out, ctx.hash);
  ctx.out << Json{{"environment_id", bank.environment_id()},
                  {"clips", bank.tones().size()},
                  {"masked", bank.failure_mask().size()},
                  {"config_hash", ctx.hash}}
                 .dump()
          << '\n';
}

struct ElcArgs {
  std::string bank;
  std::string env = "env1";
  std::string spec_file;
  std::string protocol_file;
  std::string out = "elc";
  std::vector<int> reference_velocities;
  std::vector<int> variable_pitches;
  int rounds = kDefaultRounds;
  int subjects = 6;
  std::uint64_t seed = 0;
};

void cmd_simulate_elc(const ElcArgs& a, Context& ctx) {
  SynthEnvSpec spec;
  if (!a.bank.empty()) {
    spec = require_synth(load_bank(a.bank));
  } else {
    spec = spec_from(a.env, a.spec_file);
  }
  ElcProtocol protocol;
  if (!a.protocol_file.empty()) protocol = read_json_file(a.protocol_file).get<ElcProtocol>();
  if (!a.reference_velocities.empty()) protocol.reference_velocities = a.reference_velocities;
  if (!a.variable_pitches.empty()) protocol.variable_pitches = a.variable_pitches;
  protocol.rounds_total = a.rounds;
  protocol.subjects_per_level = a.subjects;
  const SimulatedElc elc = simulate_elc(spec, protocol, a.seed);

  const fs::path out(a.out);
  fs::create_directories(out / "transcripts");
  std::ofstream summary = open_out(out / "sessions.csv");
  summary << "# config_hash=" << ctx.hash << '\n'
          << "v_ref,subject,variable_pitch,true_pse,true_slope,pse,saturation,file\n";
  summary.precision(10);
  for (const SimulatedRun& r : elc.runs) {
    const int v_ref = protocol.reference_velocities[static_cast<std::size_t>(r.level)];
    const std::string name = "ref" + std::to_string(v_ref) + "_p" + std::to_string(r.state.variable_pitch()) +
                             "_s" + std::to_string(r.subject) + ".jsonl";
    std::ofstream t = open_out(out / "transcripts" / name);
    write_transcript(t, r.state,
                     Json{{"environment_id", spec.environment_id},
                          {"subject", r.subject},
                          {"config_hash", ctx.hash}});
    const ReportedPse pse = r.state.reported_pse();
    summary << v_ref << ',' << r.subject << ',' << r.state.variable_pitch() << ',' << r.true_pse << ','
            << r.true_slope << ',' << pse.value << ',' << to_string(pse.saturation) << ',' << name << '\n';
  }
  write_artifact(out / "ribbons.json", Json(elc.ribbons), ctx);
  write_artifact(out / "protocol.json", Json(protocol), ctx);
  ctx.out << Json{{"sessions", elc.runs.size()}, {"ribbons", elc.ribbons.ribbons.size()},
                  {"config_hash", ctx.hash}}
                 .dump()
          << '\n';
}

struct PairsArgs {
  std::string bank;
  std::string ribbons;
  std::string out = "pairs";
  double split = 0.8;
  std::uint64_t seed = 0;
};

void cmd_build_pairs(const PairsArgs& a, Context& ctx) {
  const ToneBank bank = load_bank(a.bank);
  const RibbonSet ribbons = read_json_file(a.ribbons).get<RibbonSet>();
  const PairDataset ds = build_pair_dataset(bank, ribbons.ribbons, a.split, a.seed);
  const fs::path out(a.out);
  const std::string comment = "config_hash=" + ctx.hash;
  {
    std::ofstream f = open_out(out / "train.csv");
    write_pairs_csv(f, ds.train, comment);
  }
  {
    std::ofstream f = open_out(out / "test.csv");
    write_pairs_csv(f, ds.test, comment);
  }
  ctx.out << Json{{"train", ds.train.size()}, {"test", ds.test.size()}, {"pairs_C1", ds.c1_count},
                  {"pairs_C2", ds.c2_count}, {"config_hash", ctx.hash}}
                 .dump()
          << '\n';
}

struct TrainArgs {
  std::vector<std::string> banks;
  std::vector<std::string> pairs;
  std::string mel_config;
  std::string out = "model.json";
  bool hybrid = false;
  double initial_step = 1.0;
  double tolerance = 1e-6;
  int max_iters = 10000;
  std::uint64_t seed = 0;
};

void cmd_train(const TrainArgs& a, Context& ctx) {
  if (a.banks.size() != a.pairs.size()) throw InputError("give one --pairs file per --bank");
  if (!a.hybrid && a.banks.size() != 1) throw InputError("per-environment training takes one --bank; use --hybrid");
  std::vector<ToneBank> banks;
  std::vector<std::vector<ComparisonPair>> pairs;
  std::vector<FeatureTable> tables;
  for (std::size_t i = 0; i < a.banks.size(); ++i) {
    banks.push_back(load_bank(a.banks[i]));
    pairs.push_back(read_pairs(a.pairs[i]));
  }
  for (const ToneBank& b : banks) {
    tables.emplace_back(b, mel_from(a.mel_config, b.sample_rate()));
    for (const auto& [tone, why] : tables.back().skipped()) {
      ctx.log(Level::warn, b.environment_id() + " " + to_string(tone) + ": " + why);
    }
  }
  std::vector<PairSource> sources;
  for (std::size_t i = 0; i < banks.size(); ++i) sources.push_back({pairs[i], &tables[i]});
  TrainHyper hyper;
  hyper.initial_step = a.initial_step;
  hyper.tolerance = a.tolerance;
  hyper.max_iters = a.max_iters;
  const TrainResult r =
      train_parametric(sources, hyper, a.hybrid ? std::string("hybrid") : banks.front().environment_id());
  if (!r.stats.converged) {
    ctx.log(Level::warn, "training stopped after " + std::to_string(r.stats.iterations) +
                             " iterations without reaching the gradient tolerance");
  }
  Json j = r.model;
  j["training"] = r.stats;
  write_artifact(a.out, j, ctx);
  ctx.out << Json{{"model", a.out}, {"training", r.stats}, {"config_hash", ctx.hash}}.dump() << '\n';
}

struct EvalArgs {
  std::string model;
  std::string bank;
  std::string pairs;
  std::string out;
};

void cmd_eval(const EvalArgs& a, Context& ctx) {
  const LoadedModel m = load_model(a.model);
  std::optional<ToneBank> bank;
  if (!a.bank.empty()) bank = load_bank(a.bank);
  const LoudnessTable table = model_table(m, bank ? &*bank : nullptr, true);
  const std::vector<ComparisonPair> pairs = read_pairs(a.pairs);
  const AccuracyReport r = evaluate_accuracy(table, pairs);
  Json j = r;
  j["environment_id"] = bank ? bank->environment_id() : std::string();
  if (!a.out.empty()) write_artifact(a.out, j, ctx);
  j["config_hash"] = ctx.hash;
  ctx.out << j.dump() << '\n';
}

struct CalibrateArgs {
  std::string model;
  std::string bank;
  std::string anchors;
  std::string out;
  int reference_pitch = 69;
};

void cmd_calibrate(const CalibrateArgs& a, Context& ctx) {
  LoadedModel m = load_model(a.model);
  if (!m.parametric) throw InputError("calibrate needs a parametric model");
  const ToneBank bank = load_bank(a.bank);
  const FeatureTable features(bank, m.parametric->feature_config);
  const auto anchors = calibration_anchors_for(a.anchors, bank, a.reference_pitch);
  m.parametric->calibration = fit_calibration(*m.parametric, anchors, features, a.reference_pitch);
  const std::string out = a.out.empty() ? a.model : a.out;
  write_artifact(out, Json(*m.parametric), ctx);
  ctx.out << Json{{"model", out}, {"calibration", *m.parametric->calibration}, {"config_hash", ctx.hash}}.dump()
          << '\n';
}

struct NonparametricArgs {
  std::string ribbons;
  std::string anchors;
  std::string bank;
  std::string out = "nonparametric.json";
};

void cmd_nonparametric(const NonparametricArgs& a, Context& ctx) {
  const RibbonSet ribbons = read_json_file(a.ribbons).get<RibbonSet>();
  if (ribbons.ribbons.empty()) throw InputError("ribbon file holds no ribbons");
  std::optional<ToneBank> bank;
  if (!a.bank.empty()) bank = load_bank(a.bank);
  const int p_ref = ribbons.ribbons.front().reference_pitch();
  const auto anchors = anchors_for(a.anchors, bank ? &*bank : nullptr, p_ref);
  const NonParametricBuild b = build_nonparametric(ribbons.ribbons, anchors, ribbons.environment_id);
  for (const auto& w : b.warnings) ctx.log(Level::warn, w);
  write_artifact(a.out, Json(b.model), ctx);
  ctx.out << Json{{"model", a.out}, {"warnings", b.warnings}, {"config_hash", ctx.hash}}.dump() << '\n';
}

struct HeatmapArgs {
  std::string model;
  std::string bank;
  std::string out = "heatmap.csv";
  bool raw = false;
};

void cmd_heatmap(const HeatmapArgs& a, Context& ctx) {
  const LoadedModel m = load_model(a.model);
  std::optional<ToneBank> bank;
  if (!a.bank.empty()) bank = load_bank(a.bank);
  const LoudnessTable table = model_table(m, bank ? &*bank : nullptr, a.raw);
  std::ofstream f = open_out(a.out);
  write_heatmap_csv(f, table, "config_hash=" + ctx.hash);
  ctx.out << Json{{"heatmap", a.out}, {"config_hash", ctx.hash}}.dump() << '\n';
}

struct TransferArgs {
  std::string midi;
  std::string source_model;
  std::string source_bank;
  std::string target_model;
  std::string target_bank;
  std::string out = "transferred.mid";
  std::string report;
};

void cmd_transfer(const TransferArgs& a, Context& ctx) {
  const MidiPerformance perf = read_midi_file(a.midi);
  std::optional<ToneBank> sb, tb;
  if (!a.source_bank.empty()) sb = load_bank(a.source_bank);
  if (!a.target_bank.empty()) tb = load_bank(a.target_bank);
  const LoudnessTable src = model_table(load_model(a.source_model), sb ? &*sb : nullptr, false);
  const LoudnessTable tgt = model_table(load_model(a.target_model), tb ? &*tb : nullptr, false);
  const TransferResult r = transfer_performance(perf, src, tgt);
  write_midi_file(r.performance, a.out);
  const fs::path report = a.report.empty() ? fs::path(a.out).replace_extension(".report.json") : fs::path(a.report);
  if (report.extension() == ".csv") {
    std::ofstream f = open_out(report);
    write_transfer_csv(f, r.report, "config_hash=" + ctx.hash);
  } else {
    write_artifact(report, Json(r.report), ctx);
  }
  for (const NoteTransfer& n : r.report.notes) {
    if (n.status != TransferStatus::transferred) {
      ctx.log(Level::warn, "note " + std::to_string(n.note_index) + " (pitch " + std::to_string(n.pitch) +
                               ") passed through: " + to_string(n.status));
    }
  }
  ctx.out << Json{{"midi", a.out}, {"report", report.string()}, {"notes", r.report.notes.size()},
                  {"flagged", r.report.flagged}, {"mean_residual", r.report.mean_residual},
                  {"config_hash", ctx.hash}}
                 .dump()
          << '\n';
}

struct ServeArgs {
  std::vector<std::string> banks;
  std::string data_dir = "sessions";
  std::string host = "127.0.0.1";
  int port = 8080;
};

void cmd_serve(const ServeArgs& a, Context& ctx) {
  SessionService service(a.data_dir);
  for (const auto& b : a.banks) service.add_bank(std::make_shared<const ToneBank>(load_bank(b)));
  HttpService http(service);
  ctx.log(Level::info, "serving on " + a.host + ":" + std::to_string(a.port));
  http.listen(a.host, a.port);
}

struct FeaturesArgs {
  std::string bank;
  std::string mel_config;
  std::string out = "features.csv";
};

void cmd_features(const FeaturesArgs& a, Context& ctx) {
  const ToneBank bank = load_bank(a.bank);
  const FeatureTable table(bank, mel_from(a.mel_config, bank.sample_rate()));
  std::ofstream f = open_out(a.out);
  f << "# config_hash=" << ctx.hash << '\n';
  write_feature_csv(f, table);
  ctx.out << Json{{"features", a.out}, {"tones", table.size()}, {"skipped", table.skipped().size()},
                  {"config_hash", ctx.hash}}
                 .dump()
          << '\n';
}

void print_error(std::ostream& err, const std::string& code, const std::string& message) {
  err << Json{{"code", code}, {"message", message}}.dump() << '\n';
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Piano-tone loudness toolkit", "pianoloud"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON configuration file");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth-bank", "Render a synthetic tone bank");
  c_synth->add_option("--env", synth.env, "Preset environment (env1, env2)")->capture_default_str();
  c_synth->add_option("--spec", synth.spec_file, "SynthEnvSpec JSON file (overrides --env)");
  c_synth->add_option("--out", synth.out, "Bank root directory")->capture_default_str();
  c_synth->add_option("--velocity-step", synth.velocity_step, "Render every n-th velocity")
      ->capture_default_str()
      ->check(CLI::Range(1, 127));
  c_synth->add_option("--seed", synth.seed, "Noise seed")->capture_default_str();

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest-bank", "Index a directory of recorded WAV clips");
  c_ingest->add_option("--root", ingest.root, "Directory holding <env>/<pitch>_<velocity>.wav")->required();
  c_ingest->add_option("--env", ingest.env, "Environment id")->required();
  c_ingest->add_option("--out", ingest.out, "Write a normalized copy of the bank here");
  c_ingest->add_option("--sample-rate", ingest.sample_rate)->capture_default_str();
  c_ingest->add_option("--clip-duration", ingest.clip_duration)->capture_default_str();
  c_ingest->add_option("--note-duration", ingest.note_duration)->capture_default_str();
  c_ingest->add_option("--velocity-step", ingest.velocity_step)->capture_default_str()->check(CLI::Range(1, 127));

  ElcArgs elc;
  auto* c_elc = app.add_subcommand("simulate-elc", "Run simulated loudness-matching sessions");
  c_elc->add_option("--bank", elc.bank, "Synthetic bank directory (its spec drives the listeners)");
  c_elc->add_option("--env", elc.env, "Preset environment when no bank is given")->capture_default_str();
  c_elc->add_option("--spec", elc.spec_file, "SynthEnvSpec JSON file");
  c_elc->add_option("--protocol", elc.protocol_file, "Protocol JSON file");
  c_elc->add_option("--reference-velocities", elc.reference_velocities, "Reference velocities");
  c_elc->add_option("--variable-pitches", elc.variable_pitches, "Variable pitches");
  c_elc->add_option("--rounds", elc.rounds)->capture_default_str()->check(CLI::Range(2, 1000));
  c_elc->add_option("--subjects", elc.subjects)->capture_default_str()->check(CLI::Range(2, 1000));
  c_elc->add_option("--out", elc.out, "Output directory")->capture_default_str();
  c_elc->add_option("--seed", elc.seed)->capture_default_str();

  PairsArgs pairs;
  auto* c_pairs = app.add_subcommand("build-pairs", "Build labelled comparison pairs");
  c_pairs->add_option("--bank", pairs.bank, "Bank directory")->required();
  c_pairs->add_option("--ribbons", pairs.ribbons, "Ribbon JSON file")->required();
  c_pairs->add_option("--split", pairs.split, "Training fraction")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  c_pairs->add_option("--out", pairs.out, "Output directory")->capture_default_str();
  c_pairs->add_option("--seed", pairs.seed)->capture_default_str();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train the parametric loudness model");
  c_train->add_option("--bank", train.banks, "Bank directory (repeat with --hybrid)")->required();
  c_train->add_option("--pairs", train.pairs, "Training pairs CSV, one per bank")->required();
  c_train->add_flag("--hybrid", train.hybrid, "Train one model on every environment");
  c_train->add_option("--mel-config", train.mel_config, "MelConfig JSON file");
  c_train->add_option("--initial-step", train.initial_step)->capture_default_str();
  c_train->add_option("--tolerance", train.tolerance)->capture_default_str();
  c_train->add_option("--max-iters", train.max_iters)->capture_default_str();
  c_train->add_option("--out", train.out, "Model JSON")->capture_default_str();
  c_train->add_option("--seed", train.seed)->capture_default_str();

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Pairwise accuracy of a model");
  c_eval->add_option("--model", eval.model, "Model JSON")->required();
  c_eval->add_option("--bank", eval.bank, "Bank directory");
  c_eval->add_option("--pairs", eval.pairs, "Test pairs CSV")->required();
  c_eval->add_option("--out", eval.out, "Report JSON");

  CalibrateArgs cal;
  auto* c_cal = app.add_subcommand("calibrate", "Fit the sone calibration of a parametric model");
  c_cal->add_option("--model", cal.model, "Model JSON")->required();
  c_cal->add_option("--bank", cal.bank, "Bank directory")->required();
  c_cal->add_option("--anchors", cal.anchors, "Anchor JSON (default: oracle anchors)");
  c_cal->add_option("--reference-pitch", cal.reference_pitch)->capture_default_str();
  c_cal->add_option("--out", cal.out, "Output model JSON (default: overwrite)");

  NonparametricArgs np;
  auto* c_np = app.add_subcommand("nonparametric", "Build the contour-interpolation model");
  c_np->add_option("--ribbons", np.ribbons, "Ribbon JSON file")->required();
  c_np->add_option("--anchors", np.anchors, "Anchor JSON");
  c_np->add_option("--bank", np.bank, "Synthetic bank for oracle anchors");
  c_np->add_option("--out", np.out, "Model JSON")->capture_default_str();

  HeatmapArgs heat;
  auto* c_heat = app.add_subcommand("heatmap", "Export a pitch x velocity loudness grid");
  c_heat->add_option("--model", heat.model, "Model JSON")->required();
  c_heat->add_option("--bank", heat.bank, "Bank directory");
  c_heat->add_flag("--raw", heat.raw, "Raw scores for uncalibrated parametric models");
  c_heat->add_option("--out", heat.out, "CSV file")->capture_default_str();

  TransferArgs tr;
  auto* c_tr = app.add_subcommand("transfer", "Remap MIDI velocities between environments");
  c_tr->add_option("--midi", tr.midi, "Source MIDI file")->required();
  c_tr->add_option("--source-model", tr.source_model, "Source-environment model JSON")->required();
  c_tr->add_option("--source-bank", tr.source_bank, "Source-environment bank");
  c_tr->add_option("--target-model", tr.target_model, "Target-environment model JSON")->required();
  c_tr->add_option("--target-bank", tr.target_bank, "Target-environment bank");
  c_tr->add_option("--out", tr.out, "Output MIDI file")->capture_default_str();
  c_tr->add_option("--report", tr.report, "Report file (.json or .csv)");

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "Host live sessions over HTTP");
  c_serve->add_option("--bank", serve.banks, "Bank directory (repeatable)")->required();
  c_serve->add_option("--data-dir", serve.data_dir)->capture_default_str();
  c_serve->add_option("--host", serve.host)->capture_default_str();
  c_serve->add_option("--port", serve.port)->capture_default_str();

  FeaturesArgs feat;
  auto* c_feat = app.add_subcommand("features", "Export onset mel features of a bank");
  c_feat->add_option("--bank", feat.bank, "Bank directory")->required();
  c_feat->add_option("--mel-config", feat.mel_config, "MelConfig JSON file");
  c_feat->add_option("--out", feat.out, "CSV file")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage_error", e.what());
    return 2;
  }

  const CLI::App* sub = app.get_subcommands().front();
  Context ctx{out, Log(err), effective_config(sub), ""};
  ctx.hash = config_hash(ctx.config);
  try {
    const std::string name = sub->get_name();
    if (name == "synth-bank") cmd_synth_bank(synth, ctx);
    else if (name == "ingest-bank") cmd_ingest_bank(ingest, ctx);
    else if (name == "simulate-elc") cmd_simulate_elc(elc, ctx);
    else if (name == "build-pairs") cmd_build_pairs(pairs, ctx);
    else if (name == "train") cmd_train(train, ctx);
    else if (name == "eval") cmd_eval(eval, ctx);
    else if (name == "calibrate") cmd_calibrate(cal, ctx);
    else if (name == "nonparametric") cmd_nonparametric(np, ctx);
    else if (name == "heatmap") cmd_heatmap(heat, ctx);
    else if (name == "transfer") cmd_transfer(tr, ctx);
    else if (name == "serve") cmd_serve(serve, ctx);
    else if (name == "features") cmd_features(feat, ctx);
  } catch (const IoError& e) {
    print_error(err, e.code(), e.what());
    return 3;
  } catch (const SchemaError& e) {
    print_error(err, e.code(), e.what());
    return 3;
  } catch (const Error& e) {
    print_error(err, e.code(), e.what());
    return 1;
  } catch (const Json::exception& e) {
    print_error(err, "schema_error", e.what());
    return 3;
  } catch (const std::exception& e) {
    print_error(err, "internal_error", e.what());
    return 1;
  }
  return 0;
}

}  // namespace pianoloud
