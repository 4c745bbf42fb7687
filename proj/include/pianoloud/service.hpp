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
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>

#include "pianoloud/bank.hpp"
#include "pianoloud/json_io.hpp"
#include "pianoloud/psychometric.hpp"

namespace pianoloud {

struct ServiceReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  bool immutable = false;  // long-lived cache headers
};

/// Live loudness-matching sessions over a set of tone banks. Every session
/// is an append-only JSONL transcript under `data_dir`, synced before a
/// response is acknowledged; existing transcripts are replayed on
/// construction. Handlers are thread-safe; one session serializes its own
/// requests.
class SessionService {
 public:
  explicit SessionService(std::filesystem::path data_dir);
  ~SessionService();

  void add_bank(std::shared_ptr<const ToneBank> bank);

  /// {environment_id, reference: {pitch, velocity}, variable_pitch,
  ///  rounds_total?, subject_label?, seed?} -> {session_id}
  ServiceReply create_session(const Json& request);
  /// Two blinded stimulus URLs for the pending round, or the final PSE.
  ServiceReply get_next(const std::string& session_id) const;
  /// {round_index, choice: "first" | "second"} -> {accepted, next_available}
  ServiceReply post_response(const std::string& session_id, const Json& request);
  ServiceReply get_clip(const std::string& environment_id, int pitch, int velocity) const;
  /// WAV of interval `which` ("first"/"second") of a pending or past round.
  ServiceReply get_stimulus(const std::string& session_id, int round_index, const std::string& which) const;
  ServiceReply healthz() const;

  std::size_t session_count() const;
  std::filesystem::path transcript_path(const std::string& session_id) const;
  /// Copy of a session's state; nullopt for unknown ids.
  std::optional<SessionState> session_state(const std::string& session_id) const;

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id) const;
  void restore();

  std::filesystem::path data_dir_;
  std::map<std::string, std::shared_ptr<const ToneBank>> banks_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

/// HTTP binding of a SessionService:
///   POST /sessions, GET /sessions/{id}/next, POST /sessions/{id}/response,
///   GET /sessions/{id}/stimulus/{round}/{first|second}.wav,
///   GET /clips/{env}/{pitch}/{velocity}.wav, GET /healthz.
class HttpService {
 public:
  explicit HttpService(SessionService& service);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Binds and serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace pianoloud
