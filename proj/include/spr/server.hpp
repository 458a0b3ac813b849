// Copyright 2026 The spr-annotate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include <json.hpp>

#include "spr/corpus.hpp"
#include "spr/event_log.hpp"
#include "spr/session.hpp"

namespace spr::server {

inline constexpr int kProtocolVersion = 1;

struct HubOptions {
    std::filesystem::path log_dir;
    std::uint64_t seed = 0;
    LogWriter::Durability durability = LogWriter::Durability::Fsync;
};

/// Wall clock in milliseconds.
using Clock = std::function<std::int64_t()>;
/// Fresh opaque identifiers (session ids and tokens).
using IdSource = std::function<std::string()>;

Clock system_clock();
IdSource random_ids();

/// Owns every live session of one experiment. All methods are thread-safe;
/// messages for one session are processed one at a time, in arrival order.
///
/// Each transition's events are appended (and synced) to the session log
/// before the reply is produced, so a client never sees state that is not on
/// disk.
class SessionHub {
public:
    SessionHub(std::shared_ptr<const ExperimentDef> def, HubOptions options, Clock clock = system_clock(),
               IdSource ids = random_ids());
    ~SessionHub();

    SessionHub(const SessionHub&) = delete;
    SessionHub& operator=(const SessionHub&) = delete;

    /// Dispatches one client frame. `bound_token` is the token this connection
    /// obtained from its hello (empty before that); it is updated on a
    /// successful hello.
    nlohmann::json handle(std::string_view frame, std::string& bound_token);

    nlohmann::json open_session(const nlohmann::json& hello);
    nlohmann::json handle_message(const std::string& token, const nlohmann::json& msg);

    /// Marks the session abandoned. Its respondent stays blocked until an
    /// operator calls release(). No-op for finished sessions.
    void disconnect(const std::string& token);

    /// Lets an abandoned respondent start again. Returns false when nothing
    /// was blocked.
    bool release(const std::string& respondent_id);

    std::size_t active_sessions() const;
    nlohmann::json health() const;

    const ExperimentDef& experiment() const noexcept { return *def_; }

    /// Path of a session's log (for operators and tests).
    std::filesystem::path log_path(const std::string& session_id) const;

private:
    struct Session;

    std::shared_ptr<Session> find(const std::string& token) const;

    std::shared_ptr<const ExperimentDef> def_;
    HubOptions options_;
    Clock clock_;
    IdSource ids_;

    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Session>> by_token_;
    std::map<std::string, std::string> blocking_;  // respondent -> token (active or abandoned)
};

nlohmann::json error_message(std::string_view code, std::string_view message);

/// HTTP + WebSocket front end: GET /health, GET /<file> from the UI bundle,
/// POST /admin/release/<respondent_id>, and WebSocket upgrades on /ws.
class WebServer {
public:
    WebServer(SessionHub& hub, std::string address, unsigned short port, std::filesystem::path ui_dir = {});
    ~WebServer();

    WebServer(const WebServer&) = delete;
    WebServer& operator=(const WebServer&) = delete;

    /// Binds and starts accepting in a background thread.
    void start();
    /// Stops accepting, closes open connections, joins all threads.
    void stop();
    /// Blocks until stop() is called from another thread.
    void wait();

    unsigned short port() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace spr::server
