#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "netpen/error.hpp"

namespace netpen {

/// TCP fan-out of LF-delimited JSON event lines. Any number of clients may
/// connect; each receives every event published after its connection.
/// publish() never blocks the caller: each client has its own writer thread
/// and a bounded outbox, and a client whose backlog exceeds the cap is
/// disconnected instead of stalling the pipeline.
class EventBroadcaster {
public:
    explicit EventBroadcaster(uint16_t port = 0, const std::string& bind_address = "0.0.0.0",
                              size_t client_buffer_cap = 1 << 20)
        : buffer_cap_(client_buffer_cap) {
        listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (listen_fd_ < 0) {
            throw Error(ErrorCategory::Pipeline, "event service error: socket() failed");
        }
        int one = 1;
        ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(port);
        if (::inet_pton(AF_INET, bind_address.c_str(), &addr.sin_addr) != 1) {
            ::close(listen_fd_);
            throw Error(ErrorCategory::Pipeline,
                        "event service error: bad bind address " + bind_address);
        }
        if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
            const std::string why = std::strerror(errno);
            ::close(listen_fd_);
            throw Error(ErrorCategory::Pipeline, "event service error: cannot bind " + bind_address +
                                                     ":" + std::to_string(port) + " (" + why + ")");
        }
        if (::listen(listen_fd_, 16) != 0) {
            const std::string why = std::strerror(errno);
            ::close(listen_fd_);
            throw Error(ErrorCategory::Pipeline, "event service error: listen failed (" + why + ")");
        }
        sockaddr_in bound{};
        socklen_t len = sizeof(bound);
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
        port_ = ntohs(bound.sin_port);
        accept_thread_ = std::thread([this] { accept_loop(); });
    }

    ~EventBroadcaster() { stop(); }

    EventBroadcaster(const EventBroadcaster&) = delete;
    EventBroadcaster& operator=(const EventBroadcaster&) = delete;

    uint16_t port() const { return port_; }

    size_t client_count() const {
        std::lock_guard lock(clients_mutex_);
        size_t n = 0;
        for (const auto& c : clients_) {
            if (!c->dead.load()) ++n;
        }
        return n;
    }

    /// Queue one line to every connected client. Non-blocking; slow clients
    /// are dropped once their backlog exceeds the configured cap.
    void publish(const std::string& line) {
        std::lock_guard lock(clients_mutex_);
        for (auto& c : clients_) {
            if (c->dead.load()) continue;
            std::lock_guard qlock(c->mutex);
            if (c->pending_bytes + line.size() > buffer_cap_) {
                c->dead.store(true);
                c->cv.notify_all();
                continue;
            }
            c->outbox.push_back(line);
            c->pending_bytes += line.size();
            c->cv.notify_all();
        }
        reap_locked();
    }

    /// Flush outstanding client backlogs and shut the service down.
    void stop() {
        bool expected = true;
        if (!running_.compare_exchange_strong(expected, false)) return;
        if (accept_thread_.joinable()) accept_thread_.join();
        ::close(listen_fd_);
        std::lock_guard lock(clients_mutex_);
        for (auto& c : clients_) {
            {
                std::lock_guard qlock(c->mutex);
                c->stopping = true;
                c->cv.notify_all();
            }
            if (c->writer.joinable()) c->writer.join();
            ::close(c->fd);
        }
        clients_.clear();
    }

private:
    struct Client {
        int fd = -1;
        std::thread writer;
        std::mutex mutex;
        std::condition_variable cv;
        std::deque<std::string> outbox;
        size_t pending_bytes = 0;
        bool stopping = false;
        std::atomic<bool> dead{false};
        bool closed = false;
    };

    void accept_loop() {
        while (running_.load()) {
            pollfd pfd{listen_fd_, POLLIN, 0};
            const int r = ::poll(&pfd, 1, 100);
            if (r <= 0) continue;
            const int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd < 0) continue;
            timeval send_timeout{5, 0};  // a wedged peer cannot hold the writer forever
            ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &send_timeout, sizeof(send_timeout));
            auto client = std::make_unique<Client>();
            client->fd = fd;
            Client* raw = client.get();
            client->writer = std::thread([this, raw] { writer_loop(raw); });
            std::lock_guard lock(clients_mutex_);
            clients_.push_back(std::move(client));
        }
    }

    void writer_loop(Client* c) {
        for (;;) {
            std::unique_lock lock(c->mutex);
            c->cv.wait(lock, [&] { return c->stopping || c->dead.load() || !c->outbox.empty(); });
            if (c->dead.load()) break;
            if (c->outbox.empty()) {
                if (c->stopping) break;
                continue;
            }
            std::string chunk = std::move(c->outbox.front());
            c->outbox.pop_front();
            c->pending_bytes -= chunk.size();
            lock.unlock();
            size_t off = 0;
            while (off < chunk.size()) {
                const ssize_t n =
                    ::send(c->fd, chunk.data() + off, chunk.size() - off, MSG_NOSIGNAL);
                if (n <= 0) {
                    c->dead.store(true);
                    return;
                }
                off += static_cast<size_t>(n);
            }
        }
    }

    /// Drop clients whose writer has finished. Called with clients_mutex_ held.
    void reap_locked() {
        for (auto it = clients_.begin(); it != clients_.end();) {
            auto& c = *it;
            if (c->dead.load()) {
                {
                    std::lock_guard qlock(c->mutex);
                    c->cv.notify_all();
                }
                if (c->writer.joinable()) c->writer.join();
                if (!c->closed) {
                    ::close(c->fd);
                    c->closed = true;
                }
                it = clients_.erase(it);
            } else {
                ++it;
            }
        }
    }

    int listen_fd_ = -1;
    uint16_t port_ = 0;
    size_t buffer_cap_;
    std::atomic<bool> running_{true};
    std::thread accept_thread_;
    mutable std::mutex clients_mutex_;
    std::vector<std::unique_ptr<Client>> clients_;
};

}  // namespace netpen
