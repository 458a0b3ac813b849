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

#include <condition_variable>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "spr/errors.hpp"
#include "spr/server.hpp"

namespace spr::server {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

std::string_view mime_type(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
    if (ext == ".js" || ext == ".mjs") return "text/javascript; charset=utf-8";
    if (ext == ".css") return "text/css; charset=utf-8";
    if (ext == ".json") return "application/json";
    if (ext == ".svg") return "image/svg+xml";
    if (ext == ".png") return "image/png";
    if (ext == ".ico") return "image/vnd.microsoft.icon";
    return "application/octet-stream";
}

http::response<http::string_body> make_response(const http::request<http::string_body>& req, http::status status,
                                                std::string body, std::string_view content_type) {
    http::response<http::string_body> res{status, req.version()};
    res.set(http::field::server, "spr-annotate");
    res.set(http::field::content_type, std::string(content_type));
    res.keep_alive(req.keep_alive());
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
}

}  // namespace

struct WebServer::Impl {
    SessionHub& hub;
    std::string address;
    unsigned short requested_port;
    std::filesystem::path ui_dir;

    net::io_context ioc;
    std::optional<tcp::acceptor> acceptor;
    unsigned short bound_port = 0;
    std::thread accept_thread;

    std::mutex mu;
    std::condition_variable stopped_cv;
    bool stopping = false;
    bool stopped = false;
    std::vector<std::thread> workers;
    std::set<std::shared_ptr<tcp::socket>> sockets;

    Impl(SessionHub& h, std::string a, unsigned short p, std::filesystem::path ui)
        : hub(h), address(std::move(a)), requested_port(p), ui_dir(std::move(ui)) {}

    void accept_loop() {
        for (;;) {
            auto socket = std::make_shared<tcp::socket>(ioc);
            beast::error_code ec;
            acceptor->accept(*socket, ec);
            std::lock_guard lock(mu);
            if (stopping) break;
            if (ec) continue;
            sockets.insert(socket);
            workers.emplace_back([this, socket] {
                serve(*socket);
                std::lock_guard inner(mu);
                sockets.erase(socket);
            });
        }
    }

    void serve(tcp::socket& socket) {
        beast::flat_buffer buffer;
        beast::error_code ec;
        for (;;) {
            http::request<http::string_body> req;
            http::read(socket, buffer, req, ec);
            if (ec) break;
            if (websocket::is_upgrade(req)) {
                if (req.target() == "/ws") {
                    run_websocket(socket, std::move(req));
                    return;
                }
                http::write(socket, make_response(req, http::status::not_found, "not found\n", "text/plain"), ec);
                break;
            }
            auto res = route(socket, req);
            http::write(socket, res, ec);
            if (ec || !res.keep_alive()) break;
        }
        socket.shutdown(tcp::socket::shutdown_send, ec);
    }

    void run_websocket(tcp::socket& socket, http::request<http::string_body> req) {
        websocket::stream<tcp::socket&> ws{socket};
        std::string token;
        beast::error_code ec;
        ws.accept(req, ec);
        if (ec) return;
        for (;;) {
            beast::flat_buffer buffer;
            ws.read(buffer, ec);
            if (ec) break;
            const auto frame = beast::buffers_to_string(buffer.data());
            const auto reply = hub.handle(frame, token);
            ws.text(true);
            ws.write(net::buffer(reply.dump()), ec);
            if (ec) break;
        }
        if (!token.empty()) hub.disconnect(token);
    }

    http::response<http::string_body> route(const tcp::socket& socket, const http::request<http::string_body>& req) {
        const std::string target(req.target());
        if (req.method() == http::verb::get && target == "/health") {
            return make_response(req, http::status::ok, hub.health().dump() + "\n", "application/json");
        }
        constexpr std::string_view kRelease = "/admin/release/";
        if (target.rfind(kRelease, 0) == 0) {
            if (req.method() != http::verb::post) {
                return make_response(req, http::status::method_not_allowed, "use POST\n", "text/plain");
            }
            beast::error_code ec;
            const auto remote = socket.remote_endpoint(ec);
            if (ec || !remote.address().is_loopback()) {
                return make_response(req, http::status::forbidden, "operator endpoints are local only\n",
                                     "text/plain");
            }
            const bool released = hub.release(target.substr(kRelease.size()));
            nlohmann::json body = {{"released", released}};
            return make_response(req, http::status::ok, body.dump() + "\n", "application/json");
        }
        if (req.method() == http::verb::get) return static_file(req, target);
        return make_response(req, http::status::not_found, "not found\n", "text/plain");
    }

    http::response<http::string_body> static_file(const http::request<http::string_body>& req,
                                                  std::string target) {
        if (auto q = target.find('?'); q != std::string::npos) target.resize(q);
        if (ui_dir.empty() || target.find("..") != std::string::npos) {
            return make_response(req, http::status::not_found, "not found\n", "text/plain");
        }
        if (target.empty() || target.back() == '/') target += "index.html";
        const auto path = ui_dir / std::filesystem::path(target).relative_path();
        std::ifstream in(path, std::ios::binary);
        if (!in) return make_response(req, http::status::not_found, "not found\n", "text/plain");
        std::ostringstream body;
        body << in.rdbuf();
        return make_response(req, http::status::ok, body.str(), mime_type(path));
    }
};

WebServer::WebServer(SessionHub& hub, std::string address, unsigned short port, std::filesystem::path ui_dir)
    : impl_(std::make_unique<Impl>(hub, std::move(address), port, std::move(ui_dir))) {}

WebServer::~WebServer() { stop(); }

void WebServer::start() {
    auto& d = *impl_;
    const tcp::endpoint endpoint{net::ip::make_address(d.address), d.requested_port};
    d.acceptor.emplace(d.ioc);
    d.acceptor->open(endpoint.protocol());
    d.acceptor->set_option(net::socket_base::reuse_address(true));
    d.acceptor->bind(endpoint);
    d.acceptor->listen();
    d.bound_port = d.acceptor->local_endpoint().port();
    d.accept_thread = std::thread([&d] { d.accept_loop(); });
}

void WebServer::stop() {
    auto& d = *impl_;
    {
        std::lock_guard lock(d.mu);
        if (d.stopped || !d.acceptor) return;
        d.stopping = true;
    }
    // Wake the blocking accept() with a throwaway connection.
    {
        beast::error_code ec;
        tcp::socket poke(d.ioc);
        auto addr = d.acceptor->local_endpoint().address();
        if (addr.is_unspecified()) addr = net::ip::make_address(addr.is_v6() ? "::1" : "127.0.0.1");
        poke.connect({addr, d.bound_port}, ec);
    }
    if (d.accept_thread.joinable()) d.accept_thread.join();
    std::vector<std::thread> workers;
    {
        std::lock_guard lock(d.mu);
        for (const auto& s : d.sockets) {
            beast::error_code ec;
            s->shutdown(tcp::socket::shutdown_both, ec);
        }
        workers.swap(d.workers);
    }
    for (auto& t : workers) t.join();
    beast::error_code ec;
    d.acceptor->close(ec);
    {
        std::lock_guard lock(d.mu);
        d.stopped = true;
    }
    d.stopped_cv.notify_all();
}

void WebServer::wait() {
    auto& d = *impl_;
    std::unique_lock lock(d.mu);
    d.stopped_cv.wait(lock, [&] { return d.stopped; });
}

unsigned short WebServer::port() const noexcept { return impl_->bound_port; }

}  // namespace spr::server
