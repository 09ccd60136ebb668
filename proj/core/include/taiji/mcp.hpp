#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <thread>
#include <vector>

#include "taiji/rpc.hpp"
#include "taiji/transport.hpp"

namespace taiji {

class RpcEndpoint;

// Per-request context handed to method/tool handlers. after_response actions
// run once the response frame is on the wire, which keeps change
// notifications ordered after the response that caused them.
struct RequestContext {
    std::string connection_id;
    RpcEndpoint* endpoint = nullptr;

    void after_response(std::function<void()> action) {
        post_response.push_back(std::move(action));
    }
    std::vector<std::function<void()>> post_response;
};

// Symmetric JSON-RPC peer over a MessageChannel: dispatches inbound requests
// to registered methods on a small worker pool, matches inbound responses to
// pending calls by id, and queues inbound notifications. Either side of a
// connection may call the other.
class RpcEndpoint {
public:
    using MethodHandler =
        std::function<nlohmann::json(const nlohmann::json& params, RequestContext& ctx)>;
    using NotificationHandler =
        std::function<void(const std::string& method, const nlohmann::json& params)>;
    using FrameLogger = std::function<void(bool outbound, const std::string& frame)>;

    explicit RpcEndpoint(ChannelPtr channel, std::string connection_id = "conn",
                         int worker_threads = 2);
    ~RpcEndpoint();

    RpcEndpoint(const RpcEndpoint&) = delete;
    RpcEndpoint& operator=(const RpcEndpoint&) = delete;

    void register_method(const std::string& name, MethodHandler handler);
    void set_notification_handler(NotificationHandler handler);
    void set_frame_logger(FrameLogger logger);

    void start();
    void stop();
    bool running() const { return started_ && !stopping_; }

    // Sends a request and waits for the matching response. Throws RpcError
    // on error responses, timeout (kTimeout), or a closed connection.
    nlohmann::json call(const std::string& method, nlohmann::json params, int timeout_ms = -1);
    void notify(const std::string& method, nlohmann::json params);

    // Queued notifications (drained in arrival order) when no handler is set.
    std::vector<RpcMessage> drain_notifications();
    // Blocks until at least `n` notifications have ever arrived (or timeout).
    bool wait_for_notifications(size_t n, int timeout_ms);

    void set_default_timeout_ms(int ms) { default_timeout_ms_ = ms; }
    const std::string& connection_id() const { return connection_id_; }

private:
    void pump_loop();
    void worker_loop();
    void dispatch_request(RpcMessage msg);
    void handle_inbound(RpcMessage msg);
    void send_frame(const RpcMessage& msg);
    void fail_pending(const std::string& why);

    ChannelPtr channel_;
    std::string connection_id_;
    int worker_count_;
    int default_timeout_ms_ = 30'000;

    std::atomic<bool> started_{false};
    std::atomic<bool> stopping_{false};
    std::thread pump_;
    std::vector<std::thread> workers_;

    std::mutex jobs_mutex_;
    std::condition_variable jobs_cv_;
    std::deque<RpcMessage> jobs_;

    struct PendingCall {
        std::mutex mutex;
        std::condition_variable cv;
        bool done = false;
        RpcMessage response;
    };
    std::mutex pending_mutex_;
    std::map<std::string, std::shared_ptr<PendingCall>> pending_;
    std::atomic<int64_t> next_id_{1};

    std::mutex methods_mutex_;
    std::map<std::string, MethodHandler> methods_;
    NotificationHandler notification_handler_;

    std::mutex notif_mutex_;
    std::condition_variable notif_cv_;
    std::deque<RpcMessage> notifications_;
    size_t notifications_seen_ = 0;

    FrameLogger frame_logger_;
};

struct ToolDescriptor {
    std::string name;
    nlohmann::json input_schema;
    std::string server_id;
};

struct Subscription {
    std::string resource_uri;
    std::string subscriber;  // connection id
    int64_t created_at_us = 0;
};

// MCP server: a named tool/resource registry servable over any number of
// connections. Implements the subset {initialize, tools/list, tools/call,
// resources/list, resources/subscribe, resources/unsubscribe} plus the
// resources/updated notification.
class McpServer {
public:
    using ToolHandler =
        std::function<nlohmann::json(const nlohmann::json& args, RequestContext& ctx)>;

    explicit McpServer(std::string server_id);
    virtual ~McpServer();

    // `exclusive` tools serialize against each other (index write path).
    void add_tool(const std::string& name, nlohmann::json input_schema, ToolHandler handler,
                  bool exclusive = false);
    void add_resource(const std::string& uri, const std::string& name);
    bool has_resource(const std::string& uri) const;

    // Records a committed change to `uri`. Every active subscriber receives
    // one resources/updated notification; the subscriber on the connection
    // currently handling `ctx` (if any) receives it after its response.
    void resource_updated(const std::string& uri, nlohmann::json change,
                          RequestContext* ctx = nullptr);

    std::shared_ptr<RpcEndpoint> attach(ChannelPtr channel);
    // Serves a single connection on the calling thread until it closes
    // (stdio mode).
    void serve_blocking(ChannelPtr channel);

    const std::string& server_id() const { return server_id_; }
    std::vector<Subscription> subscriptions() const;
    std::vector<ToolDescriptor> tool_descriptors() const;

    // Timestamp source for subscription records; injectable for reproducible
    // wire traces.
    void set_clock(std::function<int64_t()> now) { now_ = std::move(now); }

private:
    void bind_methods(const std::shared_ptr<RpcEndpoint>& endpoint);
    nlohmann::json handle_tool_call(const nlohmann::json& params, RequestContext& ctx);

    std::string server_id_;
    mutable std::mutex mutex_;
    struct ToolEntry {
        ToolDescriptor descriptor;
        ToolHandler handler;
        bool exclusive = false;
    };
    std::map<std::string, ToolEntry> tools_;
    std::map<std::string, std::string> resources_;  // uri -> display name
    // connection id -> (endpoint, subscribed uris)
    struct ConnEntry {
        std::shared_ptr<RpcEndpoint> endpoint;
        std::map<std::string, Subscription> subs;
    };
    std::map<std::string, ConnEntry> connections_;
    std::mutex exclusive_mutex_;
    int64_t next_conn_ = 1;
    std::function<int64_t()> now_ = [] { return now_micros(); };
};

// Client-side convenience wrapper around an endpoint.
class McpClient {
public:
    explicit McpClient(ChannelPtr channel, std::string client_name = "host",
                       int default_timeout_ms = 30'000);

    nlohmann::json initialize();
    std::vector<ToolDescriptor> list_tools();
    nlohmann::json call_tool(const std::string& name, nlohmann::json args, int timeout_ms = -1);
    nlohmann::json subscribe(const std::string& uri);
    void unsubscribe(const std::string& uri);

    RpcEndpoint& endpoint() { return *endpoint_; }

private:
    std::shared_ptr<RpcEndpoint> endpoint_;
};

}  // namespace taiji
