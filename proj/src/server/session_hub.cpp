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

#include <algorithm>
#include <atomic>
#include <chrono>
#include <random>

#include <fmt/format.h>

#include "spr/errors.hpp"
#include "spr/server.hpp"

namespace spr::server {

namespace {

using nlohmann::json;

class BadMessage : public Error {
public:
    using Error::Error;
};

const json& field(const json& msg, std::string_view key) {
    auto it = msg.find(key);
    if (it == msg.end()) throw BadMessage("missing field '" + std::string(key) + "'");
    return *it;
}

std::string string_field(const json& msg, std::string_view key) {
    const auto& v = field(msg, key);
    if (!v.is_string()) throw BadMessage("field '" + std::string(key) + "' must be a string");
    return v.get<std::string>();
}

std::int64_t int_field(const json& msg, std::string_view key) {
    const auto& v = field(msg, key);
    if (!v.is_number_integer()) throw BadMessage("field '" + std::string(key) + "' must be an integer");
    return v.get<std::int64_t>();
}

Action parse_action(const std::string& type, const json& msg) {
    if (type == "ack_instructions") return cmd::AckInstructions{};
    if (type == "advance_word") return cmd::AdvanceWord{};
    if (type == "confirm_text") return cmd::ConfirmText{};
    if (type == "confirm_no_category") return cmd::ConfirmNoCategory{};
    if (type == "cancel_no_category") return cmd::CancelNoCategory{};
    if (type == "select_category") return cmd::SelectCategory{string_field(msg, "category")};
    if (type == "rate") {
        const auto score = int_field(msg, "score");
        const auto method = parse_input_method(string_field(msg, "input_method"));
        if (!method) throw BadMessage("input_method must be 'digit', 'arrow' or 'pointer'");
        if (score < INT32_MIN || score > INT32_MAX) throw BadMessage("score out of range");
        return cmd::Rate{static_cast<int>(score), *method};
    }
    if (type == "submit_profile") {
        const auto& p = field(msg, "profile");
        if (!p.is_object()) throw BadMessage("profile must be an object");
        RespondentProfile profile;
        auto opt = [&](std::string_view key, std::string& out) {
            if (p.contains(key)) out = string_field(p, key);
        };
        opt("respondent_id", profile.respondent_id);
        opt("sex", profile.sex);
        opt("age", profile.age);
        opt("education", profile.education);
        opt("native_language", profile.native_language);
        opt("mood", profile.mood);
        opt("attitude", profile.attitude);
        return cmd::SubmitProfile{std::move(profile)};
    }
    throw BadMessage("unknown message type '" + type + "'");
}

json envelope(std::string_view type) {
    json out = json::object();
    out["protocol_version"] = kProtocolVersion;
    out["type"] = std::string(type);
    return out;
}

}  // namespace

json error_message(std::string_view code, std::string_view message) {
    auto out = envelope("error");
    out["code"] = std::string(code);
    out["message"] = std::string(message);
    return out;
}

Clock system_clock() {
    return [] {
        using namespace std::chrono;
        return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
    };
}

IdSource random_ids() {
    auto engine = std::make_shared<std::mt19937_64>(std::random_device{}() ^
                                                    (static_cast<std::uint64_t>(std::random_device{}()) << 32));
    auto mu = std::make_shared<std::mutex>();
    return [engine, mu] {
        std::lock_guard lock(*mu);
        return fmt::format("{:016x}{:016x}", (*engine)(), (*engine)());
    };
}

struct SessionHub::Session {
    std::mutex mu;
    SessionState state;
    LogWriter writer;
    std::string token;
    std::string respondent_id;
    bool closed = false;
    std::atomic<bool> finished{false};
    std::atomic<bool> abandoned{false};

    Session(SessionState s, LogWriter w, std::string t, std::string r)
        : state(std::move(s)), writer(std::move(w)), token(std::move(t)), respondent_id(std::move(r)) {}
};

SessionHub::SessionHub(std::shared_ptr<const ExperimentDef> def, HubOptions options, Clock clock, IdSource ids)
    : def_(std::move(def)), options_(std::move(options)), clock_(std::move(clock)), ids_(std::move(ids)) {
    std::filesystem::create_directories(options_.log_dir);
}

SessionHub::~SessionHub() = default;

std::filesystem::path SessionHub::log_path(const std::string& session_id) const {
    return options_.log_dir / log_file_name(session_id);
}

std::shared_ptr<SessionHub::Session> SessionHub::find(const std::string& token) const {
    std::lock_guard lock(mu_);
    auto it = by_token_.find(token);
    return it == by_token_.end() ? nullptr : it->second;
}

json SessionHub::handle(std::string_view frame, std::string& bound_token) {
    json msg;
    try {
        msg = json::parse(frame);
    } catch (const json::parse_error&) {
        return error_message("bad_message", "frame is not valid JSON");
    }
    if (!msg.is_object()) return error_message("bad_message", "frame must be a JSON object");
    auto version = msg.find("protocol_version");
    if (version == msg.end() || !version->is_number_integer() || version->get<std::int64_t>() != kProtocolVersion) {
        return error_message("unsupported_protocol_version",
                             fmt::format("expected protocol_version {}", kProtocolVersion));
    }
    auto type = msg.find("type");
    if (type == msg.end() || !type->is_string()) return error_message("bad_message", "missing message type");

    if (*type == "hello") {
        if (!bound_token.empty()) {
            return error_message("session_already_open", "this connection already has a session");
        }
        auto reply = open_session(msg);
        if (reply.at("type") == "session_ack") bound_token = reply.at("token").get<std::string>();
        return reply;
    }
    auto token = msg.find("token");
    if (token == msg.end() || !token->is_string()) return error_message("invalid_token", "missing session token");
    if (!bound_token.empty() && *token != bound_token) {
        return error_message("invalid_token", "token does not belong to this connection");
    }
    return handle_message(token->get<std::string>(), msg);
}

json SessionHub::open_session(const json& hello) {
    std::string experiment_id;
    std::string respondent_id;
    std::int64_t t_client = 0;
    try {
        experiment_id = string_field(hello, "experiment_id");
        respondent_id = string_field(hello, "respondent_id");
        if (hello.contains("t_client_ms")) t_client = int_field(hello, "t_client_ms");
    } catch (const BadMessage& e) {
        return error_message("bad_message", e.what());
    }
    if (hello.contains("resume_token") && !hello.at("resume_token").is_null()) {
        return error_message("resume_not_supported", "sessions are single-shot; start a new session");
    }
    if (experiment_id != def_->experiment_id) {
        return error_message("unknown_experiment", "unknown experiment '" + experiment_id + "'");
    }
    if (respondent_id.empty()) return error_message("bad_message", "respondent_id must not be empty");

    std::lock_guard lock(mu_);
    if (blocking_.contains(respondent_id)) {
        return error_message("duplicate_active_session",
                             "respondent '" + respondent_id + "' already has an open or abandoned session");
    }
    const auto session_id = ids_();
    const auto token = ids_();
    std::shared_ptr<Session> session;
    try {
        LogWriter writer(log_path(session_id), options_.durability);
        auto started = new_session(*def_, {session_id, respondent_id, options_.seed, t_client, clock_()});
        writer.append(started.events);
        session = std::make_shared<Session>(std::move(started.state), std::move(writer), token, respondent_id);
    } catch (const Error& e) {
        return error_message("log_write_failed", e.what());
    }
    by_token_[token] = session;
    blocking_[respondent_id] = token;

    auto reply = envelope("session_ack");
    reply["token"] = token;
    reply["session_id"] = session_id;
    reply["display"] = to_json(view(*def_, session->state));
    return reply;
}

json SessionHub::handle_message(const std::string& token, const json& msg) {
    auto session = find(token);
    if (!session) return error_message("invalid_token", "unknown session token");

    Command command;
    try {
        command.action = parse_action(string_field(msg, "type"), msg);
        command.t_client_ms = int_field(msg, "t_client_ms");
    } catch (const BadMessage& e) {
        return error_message("bad_message", e.what());
    }

    std::unique_lock lock(session->mu);
    if (session->closed) return error_message("session_closed", "session is no longer accepting input");

    auto result = apply(*def_, session->state, command, clock_());
    try {
        session->writer.append(result.events);
    } catch (const Error& e) {
        session->closed = true;
        return error_message("log_write_failed", e.what());
    }
    session->state = std::move(result.state);
    auto display = to_json(view(*def_, session->state));

    json reply;
    if (result.rejection) {
        reply = envelope("rejection");
        reply["reason"] = std::string(to_string(*result.rejection));
    } else if (session->state.phase == Phase::Completed) {
        reply = envelope("session_complete");
    } else {
        reply = envelope("display_state");
    }
    reply["display"] = std::move(display);

    if (session->state.phase == Phase::Completed && !session->finished.exchange(true)) {
        lock.unlock();
        std::lock_guard hub_lock(mu_);
        auto it = blocking_.find(session->respondent_id);
        if (it != blocking_.end() && it->second == token) blocking_.erase(it);
    }
    return reply;
}

void SessionHub::disconnect(const std::string& token) {
    auto session = find(token);
    if (!session) return;
    std::lock_guard lock(session->mu);
    if (session->finished) return;
    session->closed = true;
    session->abandoned = true;
}

bool SessionHub::release(const std::string& respondent_id) {
    std::lock_guard lock(mu_);
    auto it = blocking_.find(respondent_id);
    if (it == blocking_.end()) return false;
    auto session = by_token_.at(it->second);
    if (!session->abandoned) return false;
    by_token_.erase(it->second);
    blocking_.erase(it);
    return true;
}

std::size_t SessionHub::active_sessions() const {
    std::lock_guard lock(mu_);
    return static_cast<std::size_t>(std::count_if(by_token_.begin(), by_token_.end(), [](const auto& kv) {
        return !kv.second->finished && !kv.second->abandoned;
    }));
}

json SessionHub::health() const {
    json out = json::object();
    out["status"] = "ok";
    out["protocol_version"] = kProtocolVersion;
    out["experiment_id"] = def_->experiment_id;
    out["active_sessions"] = active_sessions();
    return out;
}

}  // namespace spr::server
