#pragma once

#include <memory>
#include <string>

#include "taiji/mcp.hpp"
#include "taiji/transport.hpp"

namespace taiji {

// Client side of the HTTP transport. One message per HTTP POST body:
// outbound frames go to POST /rpc, inbound frames are fetched one at a time
// from POST /poll (which blocks server-side up to the requested timeout).
class HttpClientChannel : public MessageChannel {
public:
    explicit HttpClientChannel(const std::string& base_url, std::string session_id = "s1");
    ~HttpClientChannel() override;

    void send(const std::string& frame) override;
    std::optional<std::string> receive(int timeout_ms) override;
    void close() override;
    bool closed() override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Serves an McpServer over HTTP. Each session id becomes one MCP connection;
// frames preserve per-session order in both directions.
class HttpServerHost {
public:
    HttpServerHost(McpServer& server, const std::string& bind_addr = "127.0.0.1", int port = 0);
    ~HttpServerHost();

    int port() const;
    std::string base_url() const;
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace taiji
