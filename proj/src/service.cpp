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

#include "pianoloud/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "httplib.h"
#include "pianoloud/wav.hpp"

namespace pianoloud {

namespace {

ServiceReply json_reply(int status, const Json& body) {
  return ServiceReply{status, "application/json", body.dump(), false};
}

ServiceReply error_reply(int status, const std::string& code, const std::string& message) {
  return json_reply(status, Json{{"code", code}, {"message", message}});
}

std::string random_id() {
  std::random_device rd;
  std::string out;
  char buf[9];
  for (int i = 0; i < 4; ++i) {
    std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(rd()));
    out += buf;
  }
  return out;
}

std::uint64_t random_seed() {
  std::random_device rd;
  return (std::uint64_t(rd()) << 32) | rd();
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void fsync_path(const std::filesystem::path& p) {
  const int fd = ::open(p.c_str(), O_RDONLY);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
}

void append_durably(const std::filesystem::path& path, const std::string& line) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
  if (fd < 0) throw IoError("cannot open transcript " + path.string());
  const std::string data = line + '\n';
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      ::close(fd);
      throw IoError("cannot append to transcript " + path.string());
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    throw IoError("cannot sync transcript " + path.string());
  }
  ::close(fd);
}

bool valid_id(const std::string& id) {
  if (id.size() != 32) return false;
  for (char c : id)
    if (!std::isxdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

std::string wav_bytes(const Clip& clip, int sample_rate) {
  return encode_wav(clip, sample_rate);
}

}  // namespace

struct SessionService::Session {
  explicit Session(SessionState s) : state(std::move(s)) {}
  std::mutex mutex;
  std::string id;
  std::string environment_id;
  std::string created_at;
  std::optional<std::string> subject_label;
  SessionState state;
  std::filesystem::path path;
};

SessionService::SessionService(std::filesystem::path data_dir) : data_dir_(std::move(data_dir)) {
  std::filesystem::create_directories(data_dir_);
  restore();
}

SessionService::~SessionService() = default;

void SessionService::add_bank(std::shared_ptr<const ToneBank> bank) {
  std::unique_lock lock(mutex_);
  banks_[bank->environment_id()] = std::move(bank);
}

std::filesystem::path SessionService::transcript_path(const std::string& session_id) const {
  return data_dir_ / (session_id + ".jsonl");
}

std::size_t SessionService::session_count() const {
  std::shared_lock lock(mutex_);
  return sessions_.size();
}

void SessionService::restore() {
  for (const auto& entry : std::filesystem::directory_iterator(data_dir_)) {
    if (entry.path().extension() != ".jsonl") continue;
    std::ifstream in(entry.path());
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);)
      if (!line.empty()) lines.push_back(line);
    // A torn final line belongs to a response that was never acknowledged.
    for (int attempt = 0; attempt < 2 && !lines.empty(); ++attempt) {
      std::stringstream ss;
      for (const auto& l : lines) ss << l << '\n';
      try {
        auto [state, header] = read_transcript(ss);
        auto s = std::make_shared<Session>(std::move(state));
        s->id = header.at("session_id").get<std::string>();
        s->environment_id = header.at("environment_id").get<std::string>();
        s->created_at = header.value("created_at", std::string());
        if (header.contains("subject_label") && !header["subject_label"].is_null()) {
          s->subject_label = header["subject_label"].get<std::string>();
        }
        s->path = entry.path();
        if (attempt == 1) {
          std::ofstream rewrite(entry.path(), std::ios::trunc);
          rewrite << ss.str();
          rewrite.close();
          fsync_path(entry.path());
        }
        sessions_[s->id] = std::move(s);
        break;
      } catch (const std::exception& e) {
        if (attempt == 1) {
          std::cerr << "warning: skipping unreadable transcript " << entry.path() << ": " << e.what() << '\n';
        }
        lines.pop_back();
      }
    }
  }
}

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& id) const {
  if (!valid_id(id)) return nullptr;
  std::shared_lock lock(mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::optional<SessionState> SessionService::session_state(const std::string& session_id) const {
  const auto s = find(session_id);
  if (!s) return std::nullopt;
  std::lock_guard lock(s->mutex);
  return s->state;
}

ServiceReply SessionService::create_session(const Json& request) {
  try {
    const std::string env = request.at("environment_id").get<std::string>();
    {
      std::shared_lock lock(mutex_);
      if (!banks_.count(env)) return error_reply(404, "unknown_environment", "no tone bank for environment " + env);
    }
    const Tone reference = request.at("reference").get<Tone>();
    const int variable_pitch = request.at("variable_pitch").get<int>();
    const int rounds = request.value("rounds_total", kDefaultRounds);
    const std::uint64_t seed =
        request.contains("seed") ? request.at("seed").get<std::uint64_t>() : random_seed();
    validate(reference);
    if (!is_valid_pitch(variable_pitch)) throw DomainError("variable pitch outside [21..108]");
    auto s = std::make_shared<Session>(SessionState::start(reference, variable_pitch, rounds, seed));
    s->environment_id = env;
    s->created_at = utc_now();
    if (request.contains("subject_label") && !request["subject_label"].is_null()) {
      s->subject_label = request["subject_label"].get<std::string>();
    }
    std::unique_lock lock(mutex_);
    do {
      s->id = random_id();
    } while (sessions_.count(s->id));
    s->path = transcript_path(s->id);
    Json meta{{"session_id", s->id}, {"environment_id", env}, {"created_at", s->created_at},
              {"subject_label", s->subject_label ? Json(*s->subject_label) : Json(nullptr)}};
    append_durably(s->path, transcript_header(s->state, meta).dump());
    fsync_path(data_dir_);
    sessions_[s->id] = s;
    return json_reply(201, Json{{"session_id", s->id}});
  } catch (const Json::exception& e) {
    return error_reply(400, "validation_error", e.what());
  } catch (const DomainError& e) {
    return error_reply(400, "validation_error", e.what());
  } catch (const Error& e) {
    return error_reply(500, e.code(), e.what());
  }
}

ServiceReply SessionService::get_next(const std::string& session_id) const {
  const auto s = find(session_id);
  if (!s) return error_reply(404, "not_found", "unknown session");
  std::lock_guard lock(s->mutex);
  const SessionState& st = s->state;
  if (st.complete()) {
    const ReportedPse pse = st.reported_pse();
    return json_reply(200, Json{{"session_id", s->id},
                                {"done", true},
                                {"round_index", st.rounds_total()},
                                {"rounds_total", st.rounds_total()},
                                {"pse", pse.value},
                                {"saturation", to_string(pse.saturation)}});
  }
  const int round = st.pending_round();
  const std::string base = "/sessions/" + s->id + "/stimulus/" + std::to_string(round) + "/";
  return json_reply(200, Json{{"session_id", s->id},
                              {"done", false},
                              {"round_index", round},
                              {"rounds_total", st.rounds_total()},
                              {"clip_a_url", base + "first.wav"},
                              {"clip_b_url", base + "second.wav"}});
}

ServiceReply SessionService::post_response(const std::string& session_id, const Json& request) {
  const auto s = find(session_id);
  if (!s) return error_reply(404, "not_found", "unknown session");
  std::lock_guard lock(s->mutex);
  SessionState& st = s->state;
  try {
    const int round = request.at("round_index").get<int>();
    const std::string choice = request.at("choice").get<std::string>();
    if (choice != "first" && choice != "second") {
      return error_reply(400, "validation_error", "choice must be \"first\" or \"second\"");
    }
    if (st.complete()) return error_reply(409, "session_complete", "session already complete");
    if (round != st.pending_round()) {
      return error_reply(409, "round_mismatch",
                         "round " + std::to_string(round) + " is not pending (pending round " +
                             std::to_string(st.pending_round()) + ")");
    }
    const Stimulus stim = st.next_stimulus();
    const bool variable_first = stim.presentation_order == PresentationOrder::variable_first;
    const bool variable_louder = (choice == "first") == variable_first;
    SessionState next = st;
    next.record_response(stim.variable_velocity, stim.presentation_order, variable_louder);
    append_durably(s->path, Json(next.history().back()).dump());
    st = std::move(next);
    return json_reply(200, Json{{"accepted", true}, {"next_available", !st.complete()}});
  } catch (const Json::exception& e) {
    return error_reply(400, "validation_error", e.what());
  } catch (const Error& e) {
    return error_reply(500, e.code(), e.what());
  }
}

ServiceReply SessionService::get_clip(const std::string& environment_id, int pitch, int velocity) const {
  std::shared_ptr<const ToneBank> bank;
  {
    std::shared_lock lock(mutex_);
    const auto it = banks_.find(environment_id);
    if (it == banks_.end()) return error_reply(404, "unknown_environment", "no tone bank for " + environment_id);
    bank = it->second;
  }
  const Tone t{pitch, velocity};
  if (!t.valid()) return error_reply(400, "validation_error", "invalid tone " + to_string(t));
  if (!bank->contains(t)) return error_reply(404, "not_found", "tone " + to_string(t) + " not in bank");
  ServiceReply r{200, "audio/wav", wav_bytes(bank->clip(t), bank->sample_rate()), true};
  return r;
}

ServiceReply SessionService::get_stimulus(const std::string& session_id, int round_index,
                                          const std::string& which) const {
  const auto s = find(session_id);
  if (!s) return error_reply(404, "not_found", "unknown session");
  if (which != "first" && which != "second") return error_reply(404, "not_found", "unknown interval");
  Tone reference;
  Stimulus stim;
  std::string env;
  {
    std::lock_guard lock(s->mutex);
    const SessionState& st = s->state;
    if (round_index < 1 || round_index > st.pending_round() || round_index > st.rounds_total()) {
      return error_reply(404, "not_found", "round not available");
    }
    if (round_index == st.pending_round()) {
      stim = st.next_stimulus();
    } else {
      const TrialRecord& r = st.history()[static_cast<std::size_t>(round_index - 1)];
      stim = Stimulus{r.variable_velocity, r.presentation_order};
    }
    reference = st.reference();
    env = s->environment_id;
    const bool first_is_reference = stim.presentation_order == PresentationOrder::reference_first;
    if ((which == "first") != first_is_reference) {
      reference = Tone{st.variable_pitch(), stim.variable_velocity};
    }
  }
  return get_clip(env, reference.pitch, reference.velocity);
}

ServiceReply SessionService::healthz() const {
  std::shared_lock lock(mutex_);
  Json envs = Json::array();
  for (const auto& [k, v] : banks_) envs.push_back(k);
  return json_reply(200, Json{{"status", "ok"}, {"environments", envs}, {"sessions", sessions_.size()}});
}

struct HttpService::Impl {
  httplib::Server server;
};

namespace {

void send(httplib::Response& res, const ServiceReply& r) {
  res.status = r.status;
  if (r.immutable) res.set_header("Cache-Control", "public, max-age=31536000, immutable");
  else res.set_header("Cache-Control", "no-store");
  res.set_content(r.body, r.content_type);
}

Json parse_body(const httplib::Request& req, httplib::Response& res, bool& ok) {
  try {
    ok = true;
    return Json::parse(req.body);
  } catch (const Json::exception& e) {
    ok = false;
    send(res, error_reply(400, "validation_error", std::string("malformed JSON body: ") + e.what()));
    return Json();
  }
}

}  // namespace

HttpService::HttpService(SessionService& service) : impl_(std::make_unique<Impl>()) {
  auto& srv = impl_->server;
  SessionService* svc = &service;
  srv.Post("/sessions", [svc](const httplib::Request& req, httplib::Response& res) {
    bool ok;
    const Json body = parse_body(req, res, ok);
    if (ok) send(res, svc->create_session(body));
  });
  srv.Get(R"(/sessions/([0-9a-fA-F]+)/next)", [svc](const httplib::Request& req, httplib::Response& res) {
    send(res, svc->get_next(req.matches[1]));
  });
  srv.Post(R"(/sessions/([0-9a-fA-F]+)/response)", [svc](const httplib::Request& req, httplib::Response& res) {
    bool ok;
    const Json body = parse_body(req, res, ok);
    if (ok) send(res, svc->post_response(req.matches[1], body));
  });
  srv.Get(R"(/sessions/([0-9a-fA-F]+)/stimulus/(\d+)/(first|second)\.wav)",
          [svc](const httplib::Request& req, httplib::Response& res) {
            send(res, svc->get_stimulus(req.matches[1], std::stoi(req.matches[2]), req.matches[3]));
          });
  srv.Get(R"(/clips/([^/]+)/(\d+)/(\d+)\.wav)", [svc](const httplib::Request& req, httplib::Response& res) {
    send(res, svc->get_clip(req.matches[1], std::stoi(req.matches[2]), std::stoi(req.matches[3])));
  });
  srv.Get("/healthz", [svc](const httplib::Request&, httplib::Response& res) { send(res, svc->healthz()); });
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      const std::string code = res.status == 404 ? "not_found" : "http_error";
      res.set_content(Json{{"code", code}, {"message", "no such endpoint"}}.dump(), "application/json");
    }
  });
  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    send(res, error_reply(500, "internal_error", message));
  });
}

HttpService::~HttpService() { stop(); }

int HttpService::start(const std::string& host, int port) {
  auto& srv = impl_->server;
  port_ = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  if (port_ < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  return port_;
}

void HttpService::listen(const std::string& host, int port) {
  port_ = port;
  if (!impl_->server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpService::stop() {
  if (impl_) impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace pianoloud
