#include "taiji/mcp.hpp"

#include <algorithm>

namespace taiji {

RpcEndpoint::RpcEndpoint(ChannelPtr channel, std::string connection_id, int worker_threads)
    : channel_(std::move(channel)),
      connection_id_(std::move(connection_id)),
      worker_count_(std::max(1, worker_threads)) {}

RpcEndpoint::~RpcEndpoint() { stop(); }

void RpcEndpoint::register_method(const std::string& name, MethodHandler handler) {
    std::lock_guard lock(methods_mutex_);
    methods_[name] = std::move(handler);
}

void RpcEndpoint::set_notification_handler(NotificationHandler handler) {
    std::lock_guard lock(methods_mutex_);
    notification_handler_ = std::move(handler);
}

void RpcEndpoint::set_frame_logger(FrameLogger logger) { frame_logger_ = std::move(logger); }

void RpcEndpoint::start() {
    if (started_.exchange(true)) return;
    stopping_ = false;
    pump_ = std::thread([this] { pump_loop(); });
    for (int i = 0; i < worker_count_; ++i) {
        workers_.emplace_back([this] { worker_loop(); });
    }
}

void RpcEndpoint::stop() {
    if (!started_) return;
    stopping_ = true;
    channel_->close();
    jobs_cv_.notify_all();
    if (pump_.joinable()) pump_.join();
    for (auto& w : workers_) {
        if (w.joinable()) w.join();
    }
    workers_.clear();
    started_ = false;
    fail_pending("connection closed");
}

void RpcEndpoint::send_frame(const RpcMessage& msg) {
    std::string frame = encode(msg);
    if (frame_logger_) frame_logger_(true, frame);
    channel_->send(frame);
}

void RpcEndpoint::fail_pending(const std::string& why) {
    std::lock_guard lock(pending_mutex_);
    for (auto& [id, call] : pending_) {
        std::lock_guard cl(call->mutex);
        if (!call->done) {
            call->response = RpcMessage::error_response(nlohmann::json(), rpc_error::kInternal, why);
            call->done = true;
            call->cv.notify_all();
        }
    }
    pending_.clear();
}

nlohmann::json RpcEndpoint::call(const std::string& method, nlohmann::json params,
                                 int timeout_ms) {
    if (timeout_ms < 0) timeout_ms = default_timeout_ms_;
    int64_t id = next_id_.fetch_add(1);
    auto pending = std::make_shared<PendingCall>();
    {
        std::lock_guard lock(pending_mutex_);
        pending_[std::to_string(id)] = pending;
    }
    send_frame(RpcMessage::request(id, method, std::move(params)));

    std::unique_lock lock(pending->mutex);
    bool got = pending->cv.wait_for(lock, std::chrono::milliseconds(timeout_ms),
                                    [&] { return pending->done; });
    if (!got) {
        std::lock_guard pl(pending_mutex_);
        pending_.erase(std::to_string(id));
        throw RpcError(rpc_error::kTimeout, "timeout calling " + method);
    }
    if (pending->response.is_error) {
        throw RpcError(pending->response.error_code, pending->response.error_message);
    }
    return pending->response.result;
}

void RpcEndpoint::notify(const std::string& method, nlohmann::json params) {
    send_frame(RpcMessage::notification(method, std::move(params)));
}

std::vector<RpcMessage> RpcEndpoint::drain_notifications() {
    std::lock_guard lock(notif_mutex_);
    std::vector<RpcMessage> out(notifications_.begin(), notifications_.end());
    notifications_.clear();
    return out;
}

bool RpcEndpoint::wait_for_notifications(size_t n, int timeout_ms) {
    std::unique_lock lock(notif_mutex_);
    return notif_cv_.wait_for(lock, std::chrono::milliseconds(timeout_ms),
                              [&] { return notifications_seen_ >= n; });
}

void RpcEndpoint::pump_loop() {
    while (!stopping_) {
        auto frame = channel_->receive(50);
        if (!frame) {
            if (channel_->closed()) break;
            continue;
        }
        if (frame_logger_) frame_logger_(false, *frame);
        RpcMessage msg;
        try {
            msg = decode(*frame);
        } catch (const RpcError& e) {
            // Cannot address the sender without an id; report and move on.
            send_frame(RpcMessage::error_response(nlohmann::json(), e.code(), e.what()));
            continue;
        }
        handle_inbound(std::move(msg));
    }
    fail_pending("connection closed");
    // Unblock workers waiting for jobs.
    stopping_ = true;
    jobs_cv_.notify_all();
}

void RpcEndpoint::handle_inbound(RpcMessage msg) {
    switch (msg.kind) {
        case RpcMessage::Kind::Request: {
            std::lock_guard lock(jobs_mutex_);
            jobs_.push_back(std::move(msg));
            jobs_cv_.notify_one();
            break;
        }
        case RpcMessage::Kind::Response: {
            std::shared_ptr<PendingCall> pending;
            {
                std::lock_guard lock(pending_mutex_);
                auto it = pending_.find(msg.id.is_string() ? msg.id.get<std::string>()
                                                           : msg.id.dump());
                if (it != pending_.end()) {
                    pending = it->second;
                    pending_.erase(it);
                }
            }
            if (pending) {  // late/orphan responses are dropped
                std::lock_guard lock(pending->mutex);
                pending->response = std::move(msg);
                pending->done = true;
                pending->cv.notify_all();
            }
            break;
        }
        case RpcMessage::Kind::Notification: {
            NotificationHandler handler;
            {
                std::lock_guard lock(methods_mutex_);
                handler = notification_handler_;
            }
            {
                std::lock_guard lock(notif_mutex_);
                notifications_.push_back(msg);
                notifications_seen_++;
                notif_cv_.notify_all();
            }
            if (handler) handler(msg.method, msg.params);
            break;
        }
    }
}

void RpcEndpoint::worker_loop() {
    while (true) {
        RpcMessage job;
        {
            std::unique_lock lock(jobs_mutex_);
            jobs_cv_.wait(lock, [&] { return stopping_ || !jobs_.empty(); });
            if (jobs_.empty()) {
                if (stopping_) return;
                continue;
            }
            job = std::move(jobs_.front());
            jobs_.pop_front();
        }
        dispatch_request(std::move(job));
    }
}

void RpcEndpoint::dispatch_request(RpcMessage msg) {
    MethodHandler handler;
    {
        std::lock_guard lock(methods_mutex_);
        auto it = methods_.find(msg.method);
        if (it != methods_.end()) handler = it->second;
    }
    RequestContext ctx;
    ctx.connection_id = connection_id_;
    ctx.endpoint = this;

    RpcMessage response;
    if (!handler) {
        response = RpcMessage::error_response(msg.id, rpc_error::kMethodNotFound,
                                              "method not found: " + msg.method);
    } else {
        try {
            response = RpcMessage::response(msg.id, handler(msg.params, ctx));
        } catch (const RpcError& e) {
            response = RpcMessage::error_response(msg.id, e.code(), e.what());
        } catch (const std::exception& e) {
            response = RpcMessage::error_response(msg.id, rpc_error::kInternal, e.what());
        }
    }
    try {
        send_frame(response);
    } catch (const Error&) {
        return;  // peer gone
    }
    for (auto& action : ctx.post_response) {
        try {
            action();
        } catch (const Error&) {
            // notification targets may have vanished; request already served
        }
    }
}

McpServer::McpServer(std::string server_id) : server_id_(std::move(server_id)) {}

McpServer::~McpServer() {
    std::map<std::string, ConnEntry> conns;
    {
        std::lock_guard lock(mutex_);
        conns.swap(connections_);
    }
    for (auto& [_, conn] : conns) conn.endpoint->stop();
}

void McpServer::add_tool(const std::string& name, nlohmann::json input_schema,
                         ToolHandler handler, bool exclusive) {
    std::lock_guard lock(mutex_);
    if (tools_.count(name)) throw Error("duplicate tool name " + name);
    tools_[name] = ToolEntry{{name, std::move(input_schema), server_id_}, std::move(handler),
                             exclusive};
}

void McpServer::add_resource(const std::string& uri, const std::string& name) {
    std::lock_guard lock(mutex_);
    resources_[uri] = name;
}

bool McpServer::has_resource(const std::string& uri) const {
    std::lock_guard lock(mutex_);
    return resources_.count(uri) > 0;
}

std::vector<ToolDescriptor> McpServer::tool_descriptors() const {
    std::lock_guard lock(mutex_);
    std::vector<ToolDescriptor> out;
    for (const auto& [_, entry] : tools_) out.push_back(entry.descriptor);
    return out;
}

std::vector<Subscription> McpServer::subscriptions() const {
    std::lock_guard lock(mutex_);
    std::vector<Subscription> out;
    for (const auto& [_, conn] : connections_) {
        for (const auto& [__, sub] : conn.subs) out.push_back(sub);
    }
    return out;
}

void McpServer::resource_updated(const std::string& uri, nlohmann::json change,
                                 RequestContext* ctx) {
    nlohmann::json params{{"uri", uri}};
    if (!change.is_null()) params["change"] = change;

    std::vector<std::shared_ptr<RpcEndpoint>> now, deferred;
    {
        std::lock_guard lock(mutex_);
        for (auto& [conn_id, conn] : connections_) {
            if (!conn.subs.count(uri)) continue;
            if (ctx && ctx->connection_id == conn_id) {
                deferred.push_back(conn.endpoint);
            } else {
                now.push_back(conn.endpoint);
            }
        }
    }
    for (auto& ep : now) ep->notify("resources/updated", params);
    for (auto& ep : deferred) {
        ctx->after_response([ep, params] { ep->notify("resources/updated", params); });
    }
}

std::shared_ptr<RpcEndpoint> McpServer::attach(ChannelPtr channel) {
    std::string conn_id;
    {
        std::lock_guard lock(mutex_);
        conn_id = server_id_ + "/conn-" + std::to_string(next_conn_++);
    }
    auto endpoint = std::make_shared<RpcEndpoint>(std::move(channel), conn_id);
    bind_methods(endpoint);
    {
        std::lock_guard lock(mutex_);
        connections_[conn_id] = ConnEntry{endpoint, {}};
    }
    endpoint->start();
    return endpoint;
}

void McpServer::serve_blocking(ChannelPtr channel) {
    auto endpoint = attach(channel);
    // Poll until the connection drops; requests are served by the endpoint's
    // own pump/worker threads.
    while (endpoint->running() && !channel->closed()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    endpoint->stop();
}

void McpServer::bind_methods(const std::shared_ptr<RpcEndpoint>& endpoint) {
    std::string conn_id = endpoint->connection_id();

    endpoint->register_method("initialize", [this](const nlohmann::json&, RequestContext&) {
        return nlohmann::json{{"protocolVersion", "2.0"},
                              {"serverInfo", {{"id", server_id_}, {"version", "0.1.0"}}},
                              {"capabilities",
                               {{"tools", true}, {"resources", {{"subscribe", true}}}}}};
    });

    endpoint->register_method("tools/list", [this](const nlohmann::json&, RequestContext&) {
        nlohmann::json tools = nlohmann::json::array();
        for (const auto& d : tool_descriptors()) {
            tools.push_back({{"name", d.name},
                             {"input_schema", d.input_schema},
                             {"server_id", d.server_id}});
        }
        return nlohmann::json{{"tools", tools}};
    });

    endpoint->register_method("tools/call",
                              [this](const nlohmann::json& params, RequestContext& ctx) {
                                  return handle_tool_call(params, ctx);
                              });

    endpoint->register_method("resources/list", [this](const nlohmann::json&, RequestContext&) {
        nlohmann::json rs = nlohmann::json::array();
        std::lock_guard lock(mutex_);
        for (const auto& [uri, name] : resources_) {
            rs.push_back({{"uri", uri}, {"name", name}});
        }
        return nlohmann::json{{"resources", rs}};
    });

    endpoint->register_method(
        "resources/subscribe", [this, conn_id](const nlohmann::json& params, RequestContext&) {
            std::string uri = params.at("uri").get<std::string>();
            std::lock_guard lock(mutex_);
            if (!resources_.count(uri)) {
                throw RpcError(rpc_error::kUnknownResource, "unknown resource: " + uri);
            }
            auto& conn = connections_.at(conn_id);
            auto it = conn.subs.find(uri);
            if (it == conn.subs.end()) {  // duplicate subscribe is idempotent
                it = conn.subs.emplace(uri, Subscription{uri, conn_id, now_()}).first;
            }
            return nlohmann::json{{"uri", uri},
                                  {"subscriber", conn_id},
                                  {"created_at_us", it->second.created_at_us}};
        });

    endpoint->register_method(
        "resources/unsubscribe", [this, conn_id](const nlohmann::json& params, RequestContext&) {
            std::string uri = params.at("uri").get<std::string>();
            std::lock_guard lock(mutex_);
            auto& conn = connections_.at(conn_id);
            bool removed = conn.subs.erase(uri) > 0;
            return nlohmann::json{{"uri", uri}, {"removed", removed}};
        });
}

nlohmann::json McpServer::handle_tool_call(const nlohmann::json& params, RequestContext& ctx) {
    std::string name = params.at("name").get<std::string>();
    ToolEntry entry;
    {
        std::lock_guard lock(mutex_);
        auto it = tools_.find(name);
        if (it == tools_.end()) {
            throw RpcError(rpc_error::kMethodNotFound, "unknown tool: " + name);
        }
        entry = it->second;
    }
    nlohmann::json args = params.value("arguments", nlohmann::json::object());
    try {
        if (entry.exclusive) {
            std::lock_guard lock(exclusive_mutex_);
            return entry.handler(args, ctx);
        }
        return entry.handler(args, ctx);
    } catch (const RpcError&) {
        throw;
    } catch (const std::exception& e) {
        throw RpcError(rpc_error::kToolExecution, std::string(e.what()));
    }
}

McpClient::McpClient(ChannelPtr channel, std::string client_name, int default_timeout_ms) {
    endpoint_ = std::make_shared<RpcEndpoint>(std::move(channel), std::move(client_name));
    endpoint_->set_default_timeout_ms(default_timeout_ms);
    endpoint_->start();
}

nlohmann::json McpClient::initialize() {
    return endpoint_->call("initialize", nlohmann::json::object());
}

std::vector<ToolDescriptor> McpClient::list_tools() {
    auto result = endpoint_->call("tools/list", nlohmann::json::object());
    std::vector<ToolDescriptor> out;
    for (const auto& t : result.at("tools")) {
        out.push_back({t.at("name").get<std::string>(), t.value("input_schema", nlohmann::json()),
                       t.value("server_id", std::string())});
    }
    return out;
}

nlohmann::json McpClient::call_tool(const std::string& name, nlohmann::json args,
                                    int timeout_ms) {
    return endpoint_->call("tools/call", {{"name", name}, {"arguments", std::move(args)}},
                           timeout_ms);
}

nlohmann::json McpClient::subscribe(const std::string& uri) {
    return endpoint_->call("resources/subscribe", {{"uri", uri}});
}

void McpClient::unsubscribe(const std::string& uri) {
    endpoint_->call("resources/unsubscribe", {{"uri", uri}});
}

}  // namespace taiji
