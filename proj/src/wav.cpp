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

#include "pianoloud/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "pianoloud/error.hpp"

namespace pianoloud {
namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[at + i]);
  return v;
}

std::uint16_t get_u16(std::string_view b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    (static_cast<unsigned char>(b[at + 1]) << 8));
}

}  // namespace

std::string encode_wav(const Clip& clip, int sample_rate) {
  if (sample_rate <= 0) throw InputError("sample rate must be positive");
  const auto n = static_cast<std::uint32_t>(clip.size());
  const std::uint32_t data_bytes = n * 2;
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (Eigen::Index i = 0; i < clip.size(); ++i) {
    const double x = std::clamp(clip[i], -1.0, 1.0);
    const auto level = static_cast<std::int16_t>(
        std::clamp(std::lround(x * 32767.0), -32768L, 32767L));
    put_u16(out, static_cast<std::uint16_t>(level));
  }
  return out;
}

WavAudio decode_wav(std::string_view b) {
  if (b.size() < 12 || b.substr(0, 4) != "RIFF" || b.substr(8, 4) != "WAVE") {
    throw InputError("not a RIFF/WAVE file");
  }
  WavAudio out;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::string_view id = b.substr(pos, 4);
    const std::uint32_t size = get_u32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > b.size()) throw InputError("truncated chunk '" + std::string(id) + "'");
    if (id == "fmt ") {
      if (size < 16) throw InputError("fmt chunk too small");
      if (get_u16(b, body) != 1) throw InputError("only PCM WAV is supported");
      out.channels = get_u16(b, body + 2);
      out.sample_rate = static_cast<int>(get_u32(b, body + 4));
      out.bits_per_sample = get_u16(b, body + 14);
      if (out.bits_per_sample != 16) throw InputError("only 16-bit PCM is supported");
      if (out.channels < 1) throw InputError("zero channels");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw InputError("data chunk before fmt chunk");
      const std::size_t frame_bytes = 2 * static_cast<std::size_t>(out.channels);
      const std::size_t frames = size / frame_bytes;
      out.samples.resize(static_cast<Eigen::Index>(frames));
      for (std::size_t i = 0; i < frames; ++i) {
        const auto level = static_cast<std::int16_t>(get_u16(b, body + i * frame_bytes));
        out.samples[static_cast<Eigen::Index>(i)] = level / 32767.0;
      }
      return out;
    }
    pos = body + size + (size & 1);
  }
  throw InputError("missing data chunk");
}

void write_wav(const std::filesystem::path& path, const Clip& clip, int sample_rate) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  const std::string bytes = encode_wav(clip, sample_rate);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

WavAudio read_wav(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_wav(ss.str());
}

}  // namespace pianoloud
