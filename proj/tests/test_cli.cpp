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

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pianoloud/cli.hpp"
#include "pianoloud/json_io.hpp"
#include "pianoloud/midi.hpp"

using namespace pianoloud;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int status = run_command(args, out, err);
  return {status, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("pianoloud_test_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json last_json_line(const std::string& out) {
  std::istringstream in(out);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  return Json::parse(last);
}

std::string s(const fs::path& p) { return p.string(); }

}  // namespace

TEST_CASE("simulate-elc is deterministic in its seed") {
  const fs::path d = fresh_dir("elc");
  // The output path is part of the config, so every run writes to one place.
  const auto once = [&](const std::string& seed, const std::string& keep) {
    const Run r = run({"simulate-elc", "--seed", seed, "--out", s(d / "run")});
    fs::rename(d / "run", d / keep);
    return r;
  };
  const Run a = once("7", "a");
  const Run b = once("7", "b");
  const Run c = once("8", "c");
  REQUIRE(a.status == 0);
  REQUIRE(b.status == 0);
  REQUIRE(c.status == 0);
  std::size_t files = 0, differ = 0;
  for (const auto& e : fs::directory_iterator(d / "a" / "transcripts")) {
    const std::string name = e.path().filename().string();
    CHECK(slurp(e.path()) == slurp(d / "b" / "transcripts" / name));
    differ += slurp(e.path()) != slurp(d / "c" / "transcripts" / name);
    ++files;
  }
  CHECK(files == 4 * 9 * 6);
  CHECK(differ > 0);
  CHECK(slurp(d / "a" / "ribbons.json") == slurp(d / "b" / "ribbons.json"));
  CHECK(slurp(d / "a" / "sessions.csv") == slurp(d / "b" / "sessions.csv"));
  CHECK(last_json_line(a.out).at("sessions") == 216);
}

TEST_CASE("simulate-elc defaults follow the measurement protocol") {
  const fs::path d = fresh_dir("defaults");
  REQUIRE(run({"simulate-elc", "--out", s(d)}).status == 0);
  const Json p = read_json_file(d / "protocol.json");
  CHECK(p.at("reference_pitch") == 69);
  CHECK(p.at("reference_velocities") == Json::array({32, 44, 60, 80}));
  CHECK(p.at("variable_pitches") == Json::array({21, 33, 45, 57, 69, 81, 93, 105, 108}));
  CHECK(p.at("rounds_total") == 32);
  CHECK(p.contains("config_hash"));
  std::ifstream t(d / "transcripts" / "ref60_p21_s0.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(t, line)) ++lines;
  CHECK(lines == 33);
}

TEST_CASE("errors exit nonzero with a machine-readable message") {
  const fs::path d = fresh_dir("errors");
  const Run none = run({});
  CHECK(none.status == 2);
  const Run unknown = run({"simulate-elc", "--no-such-flag"});
  CHECK(unknown.status == 2);
  CHECK(Json::parse(unknown.err).at("code") == "usage_error");
  CHECK(run({"frobnicate"}).status == 2);
  CHECK(run({"train"}).status == 2);  // required options missing

  const Run missing = run({"eval", "--model", s(d / "none.json"), "--pairs", s(d / "none.csv")});
  CHECK(missing.status == 3);
  const Json e = Json::parse(missing.err.substr(missing.err.rfind('{')));
  CHECK(e.contains("code"));
  CHECK(e.contains("message"));

  std::ofstream(d / "bad.json") << "{broken";
  CHECK(run({"simulate-elc", "--protocol", s(d / "bad.json"), "--out", s(d / "x")}).status == 3);

  std::ofstream(d / "proto.json") << R"({"reference_velocities":[200]})";
  CHECK(run({"simulate-elc", "--protocol", s(d / "proto.json"), "--out", s(d / "y")}).status == 1);

  const Run help = run({"--help"});
  CHECK(help.status == 0);
  CHECK(help.out.find("simulate-elc") != std::string::npos);
}

TEST_CASE("config file supplies subcommand options") {
  const fs::path d = fresh_dir("config");
  std::ofstream(d / "run.json") << Json{{"simulate-elc", {{"seed", 7}, {"subjects", 2}, {"out", s(d / "run")}}}}.dump();
  const Run a = run({"--config", s(d / "run.json"), "simulate-elc"});
  REQUIRE(a.status == 0);
  CHECK(last_json_line(a.out).at("sessions") == 4 * 9 * 2);
  fs::rename(d / "run", d / "cfg");
  const Run b = run({"simulate-elc", "--seed", "7", "--subjects", "2", "--out", s(d / "run")});
  REQUIRE(b.status == 0);
  fs::rename(d / "run", d / "flags");
  // Options from a file and from flags hash alike.
  CHECK(last_json_line(a.out).at("config_hash") == last_json_line(b.out).at("config_hash"));
  CHECK(slurp(d / "cfg" / "transcripts" / "ref80_p108_s1.jsonl") ==
        slurp(d / "flags" / "transcripts" / "ref80_p108_s1.jsonl"));
  std::ofstream(d / "broken.json") << "[1,2";
  CHECK(run({"--config", s(d / "broken.json"), "simulate-elc"}).status == 2);
}

TEST_CASE("coarse pipeline from bank to transfer") {
  const fs::path d = fresh_dir("pipeline");
  const std::string banks = s(d / "banks");
  REQUIRE(run({"synth-bank", "--env", "env1", "--velocity-step", "16", "--out", banks}).status == 0);
  REQUIRE(run({"synth-bank", "--env", "env2", "--velocity-step", "16", "--out", banks}).status == 0);
  const std::string b1 = s(d / "banks" / "env1"), b2 = s(d / "banks" / "env2");
  CHECK(fs::exists(d / "banks" / "env1" / "manifest.json"));

  for (const std::string env : {"env1", "env2"}) {
    const std::string bank = env == "env1" ? b1 : b2;
    const fs::path e = d / env;
    REQUIRE(run({"simulate-elc", "--bank", bank, "--subjects", "3", "--seed", "3", "--out", s(e / "elc")}).status == 0);
    const Run pairs = run({"build-pairs", "--bank", bank, "--ribbons", s(e / "elc" / "ribbons.json"), "--out",
                           s(e / "pairs"), "--seed", "3"});
    REQUIRE(pairs.status == 0);
    CHECK(last_json_line(pairs.out).at("train").get<int>() > 0);
    const Run train = run({"train", "--bank", bank, "--pairs", s(e / "pairs" / "train.csv"), "--max-iters", "300",
                           "--out", s(e / "model.json")});
    REQUIRE(train.status == 0);
    const Run eval = run({"eval", "--model", s(e / "model.json"), "--bank", bank, "--pairs",
                          s(e / "pairs" / "test.csv"), "--out", s(e / "eval.json")});
    REQUIRE(eval.status == 0);
    CHECK(last_json_line(eval.out).at("accuracy_C1").get<double>() > 0.8);
    REQUIRE(run({"calibrate", "--model", s(e / "model.json"), "--bank", bank}).status == 0);
    REQUIRE(run({"nonparametric", "--ribbons", s(e / "elc" / "ribbons.json"), "--bank", bank, "--out",
                 s(e / "np.json")})
                .status == 0);
    REQUIRE(run({"heatmap", "--model", s(e / "np.json"), "--out", s(e / "heat.csv")}).status == 0);
    REQUIRE(run({"heatmap", "--model", s(e / "model.json"), "--bank", bank, "--out", s(e / "heat_p.csv")}).status ==
            0);
    const std::string heat = slurp(e / "heat.csv");
    CHECK(heat.rfind("# config_hash=", 0) == 0);
    CHECK(heat.find("pitch,v1,") != std::string::npos);
    CHECK(read_json_file(e / "model.json").contains("config_hash"));
  }

  write_midi_file(performance_from_notes({NoteEvent{60, 40, 0, 100}, NoteEvent{69, 90, 100, 100},
                                          NoteEvent{108, 120, 200, 100}, NoteEvent{5, 64, 300, 10}}),
                  d / "in.mid");
  const Run tr = run({"transfer", "--midi", s(d / "in.mid"), "--source-model", s(d / "env1" / "np.json"),
                      "--target-model", s(d / "env2" / "np.json"), "--out", s(d / "out.mid"), "--report",
                      s(d / "report.csv")});
  REQUIRE(tr.status == 0);
  CHECK(last_json_line(tr.out).at("flagged") == 1);
  const MidiPerformance out = read_midi_file(d / "out.mid");
  REQUIRE(out.notes.size() == 4);
  CHECK(out.notes[3].velocity == 64);
  CHECK(slurp(d / "report.csv").find("note_index,pitch,v_src") != std::string::npos);

  // Same config, same artifact.
  REQUIRE(run({"heatmap", "--model", s(d / "env1" / "np.json"), "--out", s(d / "again.csv")}).status == 0);
  const std::string a = slurp(d / "env1" / "heat.csv"), b = slurp(d / "again.csv");
  CHECK(a.substr(a.find('\n')) == b.substr(b.find('\n')));
}

TEST_CASE("installed binary runs") {
  const fs::path d = fresh_dir("binary");
  const std::string tool = PIANOLOUD_TOOL_PATH;
  const std::string cmd = "\"" + tool + "\" simulate-elc --seed 7 --subjects 2 --out \"" + s(d / "elc") + "\" > \"" +
                          s(d / "stdout.txt") + "\" 2>&1";
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(last_json_line(slurp(d / "stdout.txt")).at("sessions") == 72);
  const std::string bad = "\"" + tool + "\" --bogus > /dev/null 2>&1";
  const int status = std::system(bad.c_str());
  CHECK(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 2);
}
