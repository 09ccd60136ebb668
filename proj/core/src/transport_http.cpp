#include "taiji/transport_http.hpp"

#include <atomic>
#include <map>
#include <mutex>
#include <thread>

#define CPPHTTPLIB_NO_EXCEPTIONS
#include <httplib.h>

#include "taiji/common.hpp"

namespace taiji {

struct HttpClientChannel::Impl {
    std::string base_url;
    std::string session;
    std::mutex send_mutex, poll_mutex;
    std::unique_ptr<httplib::Client> sender;
    std::unique_ptr<httplib::Client> poller;
    std::atomic<bool> closed{false};
};

HttpClientChannel::HttpClientChannel(const std::string& base_url, std::string session_id)
    : impl_(std::make_unique<Impl>()) {
    impl_->base_url = base_url;
    impl_->session = std::move(session_id);
    impl_->sender = std::make_unique<httplib::Client>(base_url);
    impl_->poller = std::make_unique<httplib::Client>(base_url);
    impl_->sender->set_read_timeout(30, 0);
    impl_->poller->set_read_timeout(30, 0);
}

HttpClientChannel::~HttpClientChannel() { close(); }

void HttpClientChannel::send(const std::string& frame) {
    if (impl_->closed) throw Error("send on closed channel");
    std::lock_guard lock(impl_->send_mutex);
    httplib::Headers headers{{"X-Session", impl_->session}};
    auto res = impl_->sender->Post("/rpc", headers, frame, "application/json");
    if (!res) throw Error("http transport unreachable: " + impl_->base_url);
    if (res->status / 100 != 2) {
        throw Error("http transport error " + std::to_string(res->status));
    }
}

std::optional<std::string> HttpClientChannel::receive(int timeout_ms) {
    auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);
    while (!impl_->closed) {
        auto now = Clock::now();
        if (now >= deadline) return std::nullopt;
        int remaining = static_cast<int>(
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count());
        int ask = std::min(remaining, 1000);
        std::lock_guard lock(impl_->poll_mutex);
        httplib::Headers headers{{"X-Session", impl_->session},
                                 {"X-Timeout-Ms", std::to_string(ask)}};
        auto res = impl_->poller->Post("/poll", headers, "", "application/json");
        if (!res) return std::nullopt;  // transient outage; caller retries
        if (res->status == 200 && !res->body.empty()) return res->body;
        // 204: nothing pending yet
    }
    return std::nullopt;
}

void HttpClientChannel::close() {
    if (impl_) impl_->closed = true;
}

bool HttpClientChannel::closed() { return impl_->closed; }

struct HttpServerHost::Impl {
    McpServer* server = nullptr;
    httplib::Server http;
    std::thread thread;
    int port = 0;
    std::string bind_addr;

    std::mutex mutex;
    struct Session {
        std::shared_ptr<QueueChannel> bridge;  // http handler side
        std::shared_ptr<RpcEndpoint> endpoint;
    };
    std::map<std::string, Session> sessions;

    Session& session_for(const std::string& id) {
        std::lock_guard lock(mutex);
        auto it = sessions.find(id);
        if (it == sessions.end()) {
            auto [server_side, bridge_side] = QueueChannel::make_pair();
            Session s;
            s.bridge = bridge_side;
            s.endpoint = server->attach(server_side);
            it = sessions.emplace(id, std::move(s)).first;
        }
        return it->second;
    }
};

HttpServerHost::HttpServerHost(McpServer& server, const std::string& bind_addr, int port)
    : impl_(std::make_unique<Impl>()) {
    impl_->server = &server;
    impl_->bind_addr = bind_addr;

    impl_->http.Post("/rpc", [this](const httplib::Request& req, httplib::Response& res) {
        auto& session = impl_->session_for(req.has_header("X-Session") ? req.get_header_value("X-Session") : "s1");
        session.bridge->send(req.body);
        res.status = 202;
    });

    impl_->http.Post("/poll", [this](const httplib::Request& req, httplib::Response& res) {
        auto& session = impl_->session_for(req.has_header("X-Session") ? req.get_header_value("X-Session") : "s1");
        int timeout_ms = 200;
        if (req.has_header("X-Timeout-Ms")) {
            timeout_ms = std::stoi(req.get_header_value("X-Timeout-Ms"));
        }
        auto frame = session.bridge->receive(std::clamp(timeout_ms, 1, 5000));
        if (frame) {
            res.status = 200;
            res.set_content(*frame, "application/json");
        } else {
            res.status = 204;
        }
    });

    if (port == 0) {
        impl_->port = impl_->http.bind_to_any_port(bind_addr);
    } else {
        impl_->http.bind_to_port(bind_addr, port);
        impl_->port = port;
    }
    impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
    impl_->http.wait_until_ready();
}

HttpServerHost::~HttpServerHost() { stop(); }

int HttpServerHost::port() const { return impl_->port; }

std::string HttpServerHost::base_url() const {
    return "http://" + impl_->bind_addr + ":" + std::to_string(impl_->port);
}

void HttpServerHost::stop() {
    if (!impl_) return;
    impl_->http.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
    std::lock_guard lock(impl_->mutex);
    for (auto& [_, s] : impl_->sessions) {
        s.bridge->close();
        s.endpoint->stop();
    }
    impl_->sessions.clear();
}

}  // namespace taiji
