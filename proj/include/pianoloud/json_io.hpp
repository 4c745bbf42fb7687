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

// nlohmann::json bindings for the domain types that appear in artifact files.

#include <cstdint>
#include <json.hpp>
#include <string>

#include "pianoloud/synth.hpp"
#include "pianoloud/tone.hpp"

namespace pianoloud {

using Json = nlohmann::json;

void to_json(Json& j, const Tone& t);
void from_json(const Json& j, Tone& t);
void to_json(Json& j, const GainKnot& k);
void from_json(const Json& j, GainKnot& k);
void to_json(Json& j, const SynthEnvSpec& s);
void from_json(const Json& j, SynthEnvSpec& s);

/// FNV-1a 64-bit over the compact dump of `config`, as 16 hex digits.
std::string config_hash(const Json& config);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace pianoloud
