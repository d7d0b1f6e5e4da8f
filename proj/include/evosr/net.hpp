#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <string>
#include <utility>

#include "evosr/errors.hpp"
#include "evosr/metrics.hpp"

namespace evosr {

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
};

/// Parses "host:port". The host part may be empty ("/:7201" style inputs are
/// rejected by the resolver later, not here).
inline Endpoint parse_endpoint(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos)
        throw InvalidParams("endpoint must be HOST:PORT, got: " + text);
    Endpoint ep;
    ep.host = text.substr(0, colon);
    const std::string port_text = text.substr(colon + 1);
    char* end = nullptr;
    const long port = std::strtol(port_text.c_str(), &end, 10);
    if (end == port_text.c_str() || *end != '\0' || port < 0 || port > 65535)
        throw InvalidParams("bad port in endpoint: " + text);
    ep.port = static_cast<std::uint16_t>(port);
    return ep;
}

namespace detail {

inline std::string errno_text(const char* what) {
    return std::string(what) + ": " + std::strerror(errno);
}

// poll() takes int milliseconds; negative blocks forever. Cap one round at
// an hour so huge timeouts cannot overflow the conversion (callers loop on
// their own deadlines).
inline int poll_millis(double seconds) {
    if (seconds < 0.0) return -1;
    const double ms = seconds * 1000.0;
    if (ms >= 3.6e6) return 3'600'000;
    return static_cast<int>(ms) + 1;
}

}  // namespace detail

/// Move-only owner of a connected stream socket.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
    Socket& operator=(Socket&& other) noexcept {
        if (this != &other) {
            close_fd();
            fd_ = std::exchange(other.fd_, -1);
        }
        return *this;
    }
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket() { close_fd(); }

    bool valid() const { return fd_ >= 0; }
    int fd() const { return fd_; }
    void close() { close_fd(); }

    void send_all(const char* data, std::size_t len) {
        std::size_t sent = 0;
        while (sent < len) {
            const ssize_t n = ::send(fd_, data + sent, len - sent, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw NetworkError(detail::errno_text("send failed"));
            }
            sent += static_cast<std::size_t>(n);
        }
    }
    void send_all(const std::string& data) { send_all(data.data(), data.size()); }

    /// Blocking read of up to len bytes; 0 means the peer closed.
    std::size_t recv_some(char* buf, std::size_t len) {
        while (true) {
            const ssize_t n = ::recv(fd_, buf, len, 0);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw NetworkError(detail::errno_text("recv failed"));
            }
            return static_cast<std::size_t>(n);
        }
    }

    /// Waits until readable or the timeout elapses. A negative timeout waits
    /// forever. Returns false on timeout.
    bool wait_readable(double timeout_seconds) {
        pollfd pfd{fd_, POLLIN, 0};
        Stopwatch waited;
        while (true) {
            double remaining = -1.0;
            if (timeout_seconds >= 0.0) {
                remaining = timeout_seconds - waited.seconds();
                if (remaining <= 0.0) return false;
            }
            const int rc = ::poll(&pfd, 1, detail::poll_millis(remaining));
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw NetworkError(detail::errno_text("poll failed"));
            }
            if (rc > 0) return true;
            if (timeout_seconds < 0.0) continue;
            if (waited.seconds() >= timeout_seconds) return false;
        }
    }

private:
    void close_fd() {
        if (fd_ >= 0) {
            ::close(fd_);
            fd_ = -1;
        }
    }
    int fd_ = -1;
};

/// Listening socket bound to host:port; port 0 picks an ephemeral port.
class Listener {
public:
    static Listener bind_listen(const Endpoint& ep, int backlog = 16) {
        const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) throw NetworkError(detail::errno_text("socket failed"));
        Listener lst;
        lst.fd_ = Socket(fd);
        const int one = 1;
        ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(ep.port);
        if (ep.host.empty() || ep.host == "0.0.0.0") {
            addr.sin_addr.s_addr = htonl(INADDR_ANY);
        } else if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1) {
            throw NetworkError("cannot parse listen address: " + ep.host);
        }
        if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
            throw NetworkError(detail::errno_text("bind failed"));
        if (::listen(fd, backlog) != 0) throw NetworkError(detail::errno_text("listen failed"));
        return lst;
    }

    std::uint16_t port() const {
        sockaddr_in addr{};
        socklen_t len = sizeof(addr);
        if (::getsockname(fd_.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0)
            throw NetworkError(detail::errno_text("getsockname failed"));
        return ntohs(addr.sin_port);
    }

    /// Accepts one connection within the deadline; invalid Socket on timeout.
    Socket accept_within(double timeout_seconds) {
        pollfd pfd{fd_.fd(), POLLIN, 0};
        Stopwatch waited;
        while (true) {
            double remaining = -1.0;
            if (timeout_seconds >= 0.0) {
                remaining = timeout_seconds - waited.seconds();
                if (remaining <= 0.0) return Socket();
            }
            const int rc = ::poll(&pfd, 1, detail::poll_millis(remaining));
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw NetworkError(detail::errno_text("poll failed"));
            }
            if (rc > 0) break;
            if (timeout_seconds >= 0.0 && waited.seconds() >= timeout_seconds) return Socket();
        }
        const int fd = ::accept(fd_.fd(), nullptr, nullptr);
        if (fd < 0) throw NetworkError(detail::errno_text("accept failed"));
        return Socket(fd);
    }

private:
    Socket fd_;
};

/// Connects to host:port within the timeout.
inline Socket connect_to(const Endpoint& ep, double timeout_seconds) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string port_text = std::to_string(ep.port);
    const int rc = ::getaddrinfo(ep.host.empty() ? "127.0.0.1" : ep.host.c_str(),
                                 port_text.c_str(), &hints, &res);
    if (rc != 0) throw NetworkError(std::string("cannot resolve host: ") + gai_strerror(rc));

    Stopwatch sw;
    int last_errno = 0;
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
        const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) {
            last_errno = errno;
            continue;
        }
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
            ::freeaddrinfo(res);
            return Socket(fd);
        }
        last_errno = errno;
        ::close(fd);
        if (sw.seconds() > timeout_seconds) break;
    }
    ::freeaddrinfo(res);
    errno = last_errno;
    throw NetworkError(detail::errno_text("connect failed"));
}

}  // namespace evosr
