#pragma once

#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <sys/types.h>

namespace taiji {

// A bidirectional ordered channel of framed messages (one encoded RpcMessage
// per frame). Both MCP transports and the in-process test harness implement
// this surface.
class MessageChannel {
public:
    virtual ~MessageChannel() = default;
    virtual void send(const std::string& frame) = 0;
    // Next inbound frame; nullopt on timeout. Returns nullopt with closed()
    // true once the peer is gone and the inbox is drained.
    virtual std::optional<std::string> receive(int timeout_ms) = 0;
    virtual void close() = 0;
    virtual bool closed() = 0;
};

using ChannelPtr = std::shared_ptr<MessageChannel>;

// In-process queue-backed channel; make_inproc_pair cross-wires two of them.
class QueueChannel : public MessageChannel {
public:
    void send(const std::string& frame) override;
    std::optional<std::string> receive(int timeout_ms) override;
    void close() override;
    bool closed() override;

    static std::pair<std::shared_ptr<QueueChannel>, std::shared_ptr<QueueChannel>> make_pair();

private:
    struct Inbox;
    std::shared_ptr<Inbox> inbox_;
    std::weak_ptr<Inbox> peer_inbox_;
};

// Newline-delimited JSON over a pair of file descriptors (the pipe/stdio
// transport). Owns the descriptors.
class FdChannel : public MessageChannel {
public:
    FdChannel(int read_fd, int write_fd);
    ~FdChannel() override;

    void send(const std::string& frame) override;
    std::optional<std::string> receive(int timeout_ms) override;
    void close() override;
    bool closed() override;

private:
    int read_fd_;
    int write_fd_;
    bool closed_ = false;
    std::string buffer_;
    std::mutex write_mutex_;
    std::mutex read_mutex_;
};

// Spawned child process speaking the pipe transport on its stdio.
struct ProcessChannel {
    ChannelPtr channel;
    pid_t pid = -1;

    // Closes the channel and reaps the child.
    void shutdown();
};

ProcessChannel spawn_process_channel(const std::vector<std::string>& argv);

// Connected pair of raw OS pipes wrapped as channels, for single-process
// deterministic tests of the pipe framing.
std::pair<ChannelPtr, ChannelPtr> make_fd_pipe_pair();

}  // namespace taiji
