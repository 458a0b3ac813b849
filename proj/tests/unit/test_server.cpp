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

#include <doctest.h>

#include <atomic>
#include <fstream>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "spr/event_log.hpp"
#include "spr/server.hpp"
#include "spr/session.hpp"
#include "support.hpp"

using namespace spr;
using namespace spr::server;
using nlohmann::json;

namespace {

struct Fixture {
    testing::TempDir dir;
    std::shared_ptr<const ExperimentDef> def = std::make_shared<const ExperimentDef>(testing::small_experiment());
    std::shared_ptr<std::atomic<std::int64_t>> now = std::make_shared<std::atomic<std::int64_t>>(1'700'000'000'000);
    std::shared_ptr<std::atomic<int>> next_id = std::make_shared<std::atomic<int>>(0);
    SessionHub hub{def, {dir.path(), 42, LogWriter::Durability::Fsync},
                   [now = now] { return now->fetch_add(7); },
                   [ids = next_id] { return "id" + std::to_string(ids->fetch_add(1)); }};
};

/// One connection's view of the protocol.
class Client {
public:
    Client(SessionHub& hub, std::string respondent = "R01") : hub_(hub), respondent_(std::move(respondent)) {}

    json hello(const std::string& experiment = "small") {
        json m = {{"protocol_version", 1}, {"type", "hello"}, {"experiment_id", experiment},
                  {"respondent_id", respondent_}, {"t_client_ms", 0}};
        auto reply = hub_.handle(m.dump(), token_);
        if (reply["type"] == "session_ack") session_id_ = reply["session_id"];
        return reply;
    }

    json send(const std::string& type, json extra = json::object(), std::int64_t dt = 1000) {
        t_ += dt;
        extra["protocol_version"] = 1;
        extra["type"] = type;
        extra["token"] = token_;
        extra["t_client_ms"] = t_;
        return hub_.handle(extra.dump(), token_);
    }

    json profile() { return send("submit_profile", {{"profile", {{"respondent_id", respondent_}, {"sex", "m"}}}}); }

    const std::string& token() const { return token_; }
    const std::string& session_id() const { return session_id_; }
    std::int64_t& clock() { return t_; }

private:
    SessionHub& hub_;
    std::string respondent_;
    std::string token_;
    std::string session_id_;
    std::int64_t t_ = 0;
};

/// Reads the current text to the end, choosing `category` at word 1 (or none).
json read_text(Client& c, const std::optional<std::string>& category) {
    json reply;
    do {
        reply = c.send("advance_word");
        REQUIRE(reply["type"] == "display_state");
        if (category && reply["display"]["tokens"].size() == 1) {
            reply = c.send("select_category", {{"category", *category}}, 10);
        }
    } while (!reply["display"]["text_complete"].get<bool>());
    reply = c.send("confirm_text", json::object(), 10);
    if (!category) {
        REQUIRE(reply["display"]["prompt"] == "no_category_confirm");
        reply = c.send("confirm_no_category", json::object(), 10);
    }
    return reply;
}

}  // namespace

TEST_CASE("first hello opens a session in intake") {
    Fixture f;
    Client c(f.hub);
    const auto ack = c.hello();
    CHECK(ack["type"] == "session_ack");
    CHECK(ack["protocol_version"] == 1);
    CHECK(ack["display"]["phase"] == "intake");
    CHECK_FALSE(c.token().empty());
    CHECK(f.hub.active_sessions() == 1);
    const auto log = read_log_file(f.hub.log_path(c.session_id()));
    REQUIRE(log.events.size() == 1);
    CHECK(log.events[0].kind == EventKind::SessionStarted);
    CHECK(log.events[0].payload.respondent_id == "R01");
}

TEST_CASE("open_session errors") {
    Fixture f;
    Client a(f.hub);
    a.hello();
    Client b(f.hub);
    CHECK(b.hello()["code"] == "duplicate_active_session");
    Client other(f.hub, "R02");
    CHECK(other.hello("nope")["code"] == "unknown_experiment");
    CHECK(f.hub.open_session({{"experiment_id", "small"}, {"respondent_id", "R03"}, {"resume_token", "x"}})["code"] ==
          "resume_not_supported");
    CHECK(f.hub.open_session({{"experiment_id", "small"}, {"respondent_id", ""}})["code"] == "bad_message");
    CHECK(f.hub.open_session({{"experiment_id", "small"}})["code"] == "bad_message");
    std::string bound = a.token();
    CHECK(f.hub.handle(R"({"protocol_version":1,"type":"hello","experiment_id":"small","respondent_id":"R9"})", bound)["code"] ==
          "session_already_open");
}

TEST_CASE("frame validation") {
    Fixture f;
    std::string bound;
    CHECK(f.hub.handle("not json", bound)["code"] == "bad_message");
    CHECK(f.hub.handle("[]", bound)["code"] == "bad_message");
    CHECK(f.hub.handle(R"({"type":"hello"})", bound)["code"] == "unsupported_protocol_version");
    CHECK(f.hub.handle(R"({"protocol_version":2,"type":"hello"})", bound)["code"] == "unsupported_protocol_version");
    CHECK(f.hub.handle(R"({"protocol_version":1})", bound)["code"] == "bad_message");
    CHECK(f.hub.handle(R"({"protocol_version":1,"type":"advance_word","t_client_ms":1})", bound)["code"] ==
          "invalid_token");
    CHECK(f.hub.handle(R"({"protocol_version":1,"type":"advance_word","token":"zzz","t_client_ms":1})", bound)["code"] ==
          "invalid_token");

    Client c(f.hub);
    c.hello();
    CHECK(c.send("dance")["code"] == "bad_message");
    CHECK(c.send("rate", {{"score", "3"}, {"input_method", "digit"}})["code"] == "bad_message");
    CHECK(c.send("rate", {{"score", 3}, {"input_method", "voice"}})["code"] == "bad_message");
    std::string wrong = "another";
    json m = {{"protocol_version", 1}, {"type", "advance_word"}, {"token", c.token()}, {"t_client_ms", 5}};
    CHECK(f.hub.handle(m.dump(), wrong)["code"] == "invalid_token");
}

TEST_CASE("protocol walk through a full session") {
    Fixture f;
    Client c(f.hub);
    c.hello();
    auto r = c.profile();
    CHECK(r["type"] == "display_state");
    CHECK(r["display"]["phase"] == "instructions");
    r = c.send("ack_instructions");
    CHECK(r["display"]["phase"] == "practice");
    CHECK(r["display"]["practice"] == true);
    r = read_text(c, "pun");
    CHECK(r["display"]["phase"] == "annotation");

    SUBCASE("advance too early is rejected and the display is unchanged") {
        const auto first = c.send("advance_word");
        const auto early = c.send("advance_word", json::object(), 400);
        CHECK(early["type"] == "rejection");
        CHECK(early["reason"] == "min_delay");
        CHECK(early["display"] == first["display"]);
        const auto log = read_log_file(f.hub.log_path(c.session_id()));
        CHECK(log.events.back().kind == EventKind::InputSuppressed);
    }

    SUBCASE("confirm with a category moves to an empty next text") {
        r = read_text(c, "irony");
        CHECK(r["type"] == "display_state");
        CHECK(r["display"]["tokens"].empty());
        CHECK(r["display"]["text_position"] == 2);
        CHECK(r["display"]["selected_category"].is_null());
    }

    SUBCASE("ratings then completion") {
        r = read_text(c, "pun");
        r = read_text(c, "pun");
        r = read_text(c, std::nullopt);
        r = read_text(c, "metaphor");
        CHECK(r["display"]["phase"] == "rating");
        CHECK(r["display"]["rating_count"] == 2);
        CHECK(c.send("rate", {{"score", 7}, {"input_method", "digit"}})["reason"] == "invalid_score");
        r = c.send("rate", {{"score", 3}, {"input_method", "arrow"}});
        CHECK(r["type"] == "display_state");
        CHECK(r["display"]["rating_position"] == 2);
        r = c.send("rate", {{"score", 5}, {"input_method", "pointer"}});
        CHECK(r["type"] == "session_complete");
        CHECK(r["display"]["phase"] == "completed");
        CHECK(f.hub.active_sessions() == 0);

        const auto log = read_log_file(f.hub.log_path(c.session_id()));
        CHECK(validate_parsed_log(log, *f.def).clean());

        // Completion releases the respondent; a finished session ignores disconnects.
        f.hub.disconnect(c.token());
        CHECK_FALSE(f.hub.release("R01"));
        Client again(f.hub);
        CHECK(again.hello()["type"] == "session_ack");
    }
}

TEST_CASE("disconnect abandons the session until released") {
    Fixture f;
    Client c(f.hub);
    c.hello();
    c.profile();
    c.send("ack_instructions");
    c.send("advance_word");
    f.hub.disconnect(c.token());
    CHECK(f.hub.active_sessions() == 0);
    CHECK(c.send("advance_word")["code"] == "session_closed");

    const auto log = read_log_file(f.hub.log_path(c.session_id()));
    CHECK(log.events.back().kind == EventKind::WordRevealed);
    CHECK(validate_parsed_log(log, *f.def).only_incomplete());

    Client again(f.hub);
    CHECK(again.hello()["code"] == "duplicate_active_session");
    CHECK_FALSE(f.hub.release("nobody"));
    CHECK(f.hub.release("R01"));
    CHECK(again.hello()["type"] == "session_ack");
    CHECK_FALSE(f.hub.release("R01"));  // the new session is live
}

TEST_CASE("every reply is already on disk and hides unrevealed text") {
    Fixture f;
    Client c(f.hub);
    c.hello();
    SplitMix64 rng(3);
    const std::vector<std::string> types = {"advance_word", "advance_word", "advance_word", "select_category",
                                            "confirm_text", "confirm_no_category", "cancel_no_category", "rate"};
    c.profile();
    c.send("ack_instructions");
    for (int i = 0; i < 400; ++i) {
        const auto& type = types[static_cast<std::size_t>(rng.uniform_int(0, types.size() - 1))];
        json extra = json::object();
        if (type == "select_category") extra["category"] = f.def->categories[rng.uniform_int(0, 2)];
        if (type == "rate") extra = {{"score", rng.uniform_int(1, 6)}, {"input_method", "digit"}};
        const auto reply = c.send(type, extra, rng.uniform_int(0, 1500));
        if (reply["type"] == "error") break;

        // Write-ahead: the log alone reproduces the state the reply shows.
        const auto log = read_log_file(f.hub.log_path(c.session_id()));
        const auto folded = fold_events(*f.def, log.events);
        REQUIRE(to_json(view(*f.def, folded)) == reply["display"]);

        // Information hiding: only revealed tokens, never ground truth.
        const auto text = reply.dump();
        REQUIRE(text.find("truth") == std::string::npos);
        if (const auto* current = current_text(*f.def, folded)) {
            const auto& tokens = reply["display"]["tokens"];
            REQUIRE(tokens.size() == folded.revealed);
            for (std::size_t w = 0; w < tokens.size(); ++w) REQUIRE(tokens[w] == current->tokens[w]);
        }
        if (reply["type"] == "session_complete") break;
    }
}

TEST_CASE("concurrent sessions and interleaved messages keep logs valid") {
    Fixture f;
    std::vector<std::unique_ptr<Client>> clients;
    for (int i = 0; i < 8; ++i) {
        clients.push_back(std::make_unique<Client>(f.hub, "R" + std::to_string(i)));
        REQUIRE(clients.back()->hello()["type"] == "session_ack");
    }
    std::vector<std::thread> threads;
    for (auto& c : clients) {
        threads.emplace_back([&c] {
            c->profile();
            c->send("ack_instructions");
            for (int t = 0; t < 5; ++t) {
                // "one two three" practice, then whatever the order gives.
                for (int w = 0; w < 6; ++w) c->send("advance_word");
                c->send("select_category", {{"category", "irony"}}, 1);
                c->send("confirm_text", json::object(), 1);
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& c : clients) {
        const auto log = read_log_file(f.hub.log_path(c->session_id()));
        const auto report = validate_parsed_log(log, *f.def);
        CHECK(report.complete());
        CHECK(report.clean());
    }

    // Several threads hammering one session: serialized, so the log stays a legal trace.
    Client shared(f.hub, "shared");
    shared.hello();
    shared.profile();
    shared.send("ack_instructions");
    std::atomic<std::int64_t> clock{100000};
    std::vector<std::thread> writers;
    for (int i = 0; i < 4; ++i) {
        writers.emplace_back([&] {
            for (int n = 0; n < 50; ++n) {
                json m = {{"protocol_version", 1}, {"type", "advance_word"}, {"token", shared.token()},
                          {"t_client_ms", clock.fetch_add(300)}};
                f.hub.handle_message(shared.token(), m);
            }
        });
    }
    for (auto& t : writers) t.join();
    const auto report = validate_parsed_log(read_log_file(f.hub.log_path(shared.session_id())), *f.def);
    CHECK(report.only_incomplete());
}

TEST_CASE("health") {
    Fixture f;
    const auto h = f.hub.health();
    CHECK(h["status"] == "ok");
    CHECK(h["protocol_version"] == kProtocolVersion);
    CHECK(h["experiment_id"] == "small");
}

namespace {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

http::response<http::string_body> http_request(unsigned short port, http::verb verb, const std::string& target) {
    net::io_context ioc;
    tcp::socket socket(ioc);
    socket.connect({net::ip::make_address("127.0.0.1"), port});
    http::request<http::string_body> req{verb, target, 11};
    req.set(http::field::host, "localhost");
    req.prepare_payload();
    http::write(socket, req);
    beast::flat_buffer buffer;
    http::response<http::string_body> res;
    http::read(socket, buffer, res);
    beast::error_code ec;
    socket.shutdown(tcp::socket::shutdown_both, ec);
    return res;
}

class WsClient {
public:
    explicit WsClient(unsigned short port) : ws_(ioc_) {
        ws_.next_layer().connect({net::ip::make_address("127.0.0.1"), port});
        ws_.handshake("localhost", "/ws");
    }
    json call(const json& msg) {
        ws_.write(net::buffer(msg.dump()));
        beast::flat_buffer buffer;
        ws_.read(buffer);
        return json::parse(beast::buffers_to_string(buffer.data()));
    }
    void close() { ws_.close(websocket::close_code::normal); }

private:
    net::io_context ioc_;
    websocket::stream<tcp::socket> ws_;
};

}  // namespace

TEST_CASE("websocket and http endpoints") {
    Fixture f;
    std::ofstream(f.dir.path() / "index.html") << "<html>ui</html>";
    WebServer web(f.hub, "127.0.0.1", 0, f.dir.path());
    web.start();
    const auto port = web.port();
    REQUIRE(port != 0);

    auto health = http_request(port, http::verb::get, "/health");
    CHECK(health.result() == http::status::ok);
    CHECK(json::parse(health.body())["experiment_id"] == "small");
    auto index = http_request(port, http::verb::get, "/");
    CHECK(index.result() == http::status::ok);
    CHECK(index.body() == "<html>ui</html>");
    CHECK(http_request(port, http::verb::get, "/../secret").result() == http::status::not_found);
    CHECK(http_request(port, http::verb::get, "/missing.js").result() == http::status::not_found);

    std::string session_id;
    {
        WsClient ws(port);
        auto ack = ws.call({{"protocol_version", 1}, {"type", "hello"}, {"experiment_id", "small"},
                            {"respondent_id", "W1"}, {"t_client_ms", 0}});
        REQUIRE(ack["type"] == "session_ack");
        session_id = ack["session_id"];
        const std::string token = ack["token"];
        std::int64_t t = 0;
        auto send = [&](const std::string& type, json extra = json::object()) {
            extra["protocol_version"] = 1;
            extra["type"] = type;
            extra["token"] = token;
            extra["t_client_ms"] = t += 1000;
            return ws.call(extra);
        };
        CHECK(send("submit_profile", {{"profile", {{"respondent_id", "W1"}}}})["display"]["phase"] == "instructions");
        CHECK(send("ack_instructions")["display"]["phase"] == "practice");
        CHECK(send("advance_word")["display"]["tokens"] == json::array({"one"}));
        CHECK(ws.call({{"protocol_version", 1}, {"type", "advance_word"}, {"token", "forged"}, {"t_client_ms", t}})["code"] ==
              "invalid_token");
        ws.close();
    }
    // Closing the socket abandons the session.
    for (int i = 0; i < 100 && f.hub.active_sessions() != 0; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    CHECK(f.hub.active_sessions() == 0);
    CHECK(http_request(port, http::verb::get, "/admin/release/W1").result() == http::status::method_not_allowed);
    auto released = http_request(port, http::verb::post, "/admin/release/W1");
    CHECK(json::parse(released.body())["released"] == true);

    // An idle open connection must not block shutdown.
    WsClient idle(port);
    web.stop();
    const auto log = read_log_file(f.hub.log_path(session_id));
    CHECK(validate_parsed_log(log, *f.def).only_incomplete());
}
