#include "taiji/transport.hpp"

#include <condition_variable>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include "taiji/common.hpp"

namespace taiji {

struct QueueChannel::Inbox {
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<std::string> frames;
    bool closed = false;

    void push(std::string frame) {
        {
            std::lock_guard lock(mutex);
            if (closed) return;
            frames.push_back(std::move(frame));
        }
        cv.notify_all();
    }

    void mark_closed() {
        {
            std::lock_guard lock(mutex);
            closed = true;
        }
        cv.notify_all();
    }
};

void QueueChannel::send(const std::string& frame) {
    auto peer = peer_inbox_.lock();
    if (!peer) throw Error("channel peer is gone");
    peer->push(frame);
}

std::optional<std::string> QueueChannel::receive(int timeout_ms) {
    std::unique_lock lock(inbox_->mutex);
    inbox_->cv.wait_for(lock, std::chrono::milliseconds(timeout_ms),
                        [&] { return !inbox_->frames.empty() || inbox_->closed; });
    if (inbox_->frames.empty()) return std::nullopt;
    std::string frame = std::move(inbox_->frames.front());
    inbox_->frames.pop_front();
    return frame;
}

void QueueChannel::close() {
    inbox_->mark_closed();
    if (auto peer = peer_inbox_.lock()) peer->mark_closed();
}

bool QueueChannel::closed() {
    std::lock_guard lock(inbox_->mutex);
    return inbox_->closed && inbox_->frames.empty();
}

std::pair<std::shared_ptr<QueueChannel>, std::shared_ptr<QueueChannel>>
QueueChannel::make_pair() {
    auto a = std::make_shared<QueueChannel>();
    auto b = std::make_shared<QueueChannel>();
    a->inbox_ = std::make_shared<Inbox>();
    b->inbox_ = std::make_shared<Inbox>();
    a->peer_inbox_ = b->inbox_;
    b->peer_inbox_ = a->inbox_;
    return {a, b};
}

FdChannel::FdChannel(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}

FdChannel::~FdChannel() { close(); }

void FdChannel::send(const std::string& frame) {
    if (frame.find('\n') != std::string::npos) {
        throw Error("frame must not contain a newline");
    }
    std::lock_guard lock(write_mutex_);
    if (closed_) throw Error("send on closed channel");
    std::string line = frame + "\n";
    size_t off = 0;
    while (off < line.size()) {
        ssize_t n = ::write(write_fd_, line.data() + off, line.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error("pipe write failed");
        }
        off += static_cast<size_t>(n);
    }
}

std::optional<std::string> FdChannel::receive(int timeout_ms) {
    std::lock_guard lock(read_mutex_);
    auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);
    while (true) {
        auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string frame = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return frame;
        }
        if (closed_) return std::nullopt;
        auto now = Clock::now();
        if (now >= deadline) return std::nullopt;
        int remaining = static_cast<int>(
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count());
        pollfd pfd{read_fd_, POLLIN, 0};
        int pr = ::poll(&pfd, 1, std::max(1, remaining));
        if (pr < 0) {
            if (errno == EINTR) continue;
            throw Error("pipe poll failed");
        }
        if (pr == 0) return std::nullopt;
        char chunk[4096];
        ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error("pipe read failed");
        }
        if (n == 0) {  // peer closed
            closed_ = true;
            return std::nullopt;
        }
        buffer_.append(chunk, static_cast<size_t>(n));
    }
}

void FdChannel::close() {
    std::scoped_lock lock(write_mutex_, read_mutex_);
    if (closed_) return;
    closed_ = true;
    if (read_fd_ >= 0) ::close(read_fd_);
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    read_fd_ = write_fd_ = -1;
}

bool FdChannel::closed() {
    std::lock_guard lock(read_mutex_);
    return closed_ && buffer_.find('\n') == std::string::npos;
}

ProcessChannel spawn_process_channel(const std::vector<std::string>& argv) {
    if (argv.empty()) throw Error("spawn needs a command");
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) throw Error("pipe() failed");

    pid_t pid = fork();
    if (pid < 0) throw Error("fork() failed");
    if (pid == 0) {
        dup2(to_child[0], STDIN_FILENO);
        dup2(from_child[1], STDOUT_FILENO);
        ::close(to_child[0]);
        ::close(to_child[1]);
        ::close(from_child[0]);
        ::close(from_child[1]);
        std::vector<char*> args;
        for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        execvp(args[0], args.data());
        _exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);

    ProcessChannel pc;
    pc.channel = std::make_shared<FdChannel>(from_child[0], to_child[1]);
    pc.pid = pid;
    return pc;
}

void ProcessChannel::shutdown() {
    if (channel) channel->close();
    if (pid > 0) {
        int status = 0;
        // Give the child a moment to exit on EOF, then insist.
        for (int i = 0; i < 50; ++i) {
            if (waitpid(pid, &status, WNOHANG) == pid) {
                pid = -1;
                return;
            }
            usleep(10'000);
        }
        kill(pid, SIGTERM);
        waitpid(pid, &status, 0);
        pid = -1;
    }
}

std::pair<ChannelPtr, ChannelPtr> make_fd_pipe_pair() {
    int a_to_b[2], b_to_a[2];
    if (pipe(a_to_b) != 0 || pipe(b_to_a) != 0) throw Error("pipe() failed");
    auto a = std::make_shared<FdChannel>(b_to_a[0], a_to_b[1]);
    auto b = std::make_shared<FdChannel>(a_to_b[0], b_to_a[1]);
    return {a, b};
}

}  // namespace taiji
