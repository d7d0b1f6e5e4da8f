#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "evosr/engine.hpp"
#include "evosr/errors.hpp"
#include "evosr/net.hpp"
#include "evosr/wire.hpp"

namespace evosr {

/// Configuration shared by both network roles. Slaves dial the master, so
/// the endpoint is the listen address for the master role and the master's
/// address for the slave role.
struct ClusterConfig {
    enum class Role { master, slave };
    Role role = Role::master;
    Endpoint endpoint{"127.0.0.1", kDefaultPort};
    int slave_count = 1;              // master only
    double handshake_timeout = 10.0;  // seconds
    double gather_timeout = 30.0;     // seconds
};

namespace detail {

struct Channel {
    Socket socket;
    FrameReader reader;
};

/// Reads one message from a channel, honoring an optional deadline.
/// A negative timeout blocks indefinitely.
inline Message read_message(Channel& ch, double timeout_seconds, double* decode_seconds,
                            const char* who) {
    Stopwatch waited;
    while (true) {
        if (auto msg = ch.reader.next(decode_seconds)) return *msg;
        double remaining = -1.0;
        if (timeout_seconds >= 0.0) {
            remaining = timeout_seconds - waited.seconds();
            if (remaining <= 0.0)
                throw NetworkError(std::string("timed out waiting for ") + who);
            if (!ch.socket.wait_readable(remaining))
                throw NetworkError(std::string("timed out waiting for ") + who);
        }
        char buf[65536];
        const std::size_t n = ch.socket.recv_some(buf, sizeof(buf));
        if (n == 0) throw NetworkError(std::string(who) + ": connection closed by peer");
        ch.reader.feed(buf, n);
    }
}

}  // namespace detail

/// Master side of the per-generation exchange: sends one assignment per
/// slave, then blocks on the gather barrier until all m results of this
/// generation arrived. Slave k (registration order) computes with rng
/// stream k+1. Timing samples: assignment encode time is the marshalling
/// cost, reply decode time the unmarshalling cost, and the wait from
/// send-complete to a slave's first reply byte minus the slave's own
/// reported compute time approximates transmission (clocks across machines
/// are not comparable, so the master never uses slave timestamps).
class NetworkBackend : public Backend {
public:
    NetworkBackend(std::vector<detail::Channel> channels, const LinearSystem& sys,
                   const EvoParams& params, std::uint64_t seed, double gather_timeout)
        : channels_(std::move(channels)),
          sys_(sys),
          params_(params),
          seed_(seed),
          gather_timeout_(gather_timeout),
          sys_digest_(system_digest(sys)),
          par_digest_(params_digest(params)) {}

    std::vector<SlaveReturn> dispatch(std::int64_t t,
                                      const std::vector<std::vector<Individual>>& parts,
                                      CommSample& comm) override {
        const std::size_t m = channels_.size();
        if (parts.size() != m) throw InvalidParams("partition count does not match slave count");

        std::vector<Stopwatch> since_send(m);
        for (std::size_t i = 0; i < m; ++i) {
            const Assign assign =
                make_assign(t, parts[i], static_cast<int>(i), sys_digest_, par_digest_, params_,
                            /*include_setup=*/t == 0, sys_, seed_);
            Stopwatch sw;
            const std::string bytes = encode(assign);
            comm.t_marshal += sw.seconds();
            channels_[i].socket.send_all(bytes);
            since_send[i].reset();
        }

        std::vector<std::optional<SubResult>> replies(m);
        std::vector<double> wait_seconds(m, 0.0);
        std::vector<bool> first_byte_seen(m, false);
        Stopwatch barrier;
        std::size_t outstanding = m;
        while (outstanding > 0) {
            const double remaining = gather_timeout_ - barrier.seconds();
            if (remaining <= 0.0) {
                for (std::size_t i = 0; i < m; ++i)
                    if (!replies[i])
                        throw GatherTimeout("gather barrier timed out waiting for slave " +
                                                std::to_string(i),
                                            static_cast<int>(i));
            }
            std::vector<pollfd> pfds;
            std::vector<std::size_t> index_of;
            for (std::size_t i = 0; i < m; ++i) {
                if (replies[i]) continue;
                pfds.push_back({channels_[i].socket.fd(), POLLIN, 0});
                index_of.push_back(i);
            }
            const int rc = ::poll(pfds.data(), pfds.size(), detail::poll_millis(remaining));
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw NetworkError("poll failed during gather");
            }
            if (rc == 0) continue;  // deadline re-checked at loop head
            for (std::size_t p = 0; p < pfds.size(); ++p) {
                if (!(pfds[p].revents & (POLLIN | POLLHUP | POLLERR))) continue;
                const std::size_t i = index_of[p];
                char buf[65536];
                const std::size_t n = channels_[i].socket.recv_some(buf, sizeof(buf));
                if (n == 0)
                    throw GatherTimeout("slave " + std::to_string(i) +
                                            " disconnected during gather",
                                        static_cast<int>(i));
                if (!first_byte_seen[i]) {
                    first_byte_seen[i] = true;
                    wait_seconds[i] = since_send[i].seconds();
                }
                channels_[i].reader.feed(buf, n);
                double decode_seconds = 0.0;
                while (auto msg = channels_[i].reader.next(&decode_seconds)) {
                    if (replies[i])
                        throw MalformedPayload("slave " + std::to_string(i) +
                                               " sent more than one reply per generation");
                    if (auto* ack = std::get_if<Ack>(&*msg)) {
                        if (!ack->error.empty())
                            throw DigestMismatch("slave " + std::to_string(i) +
                                                 " rejected the assignment: " + ack->error);
                        throw MalformedPayload("slave " + std::to_string(i) +
                                               " sent an unexpected clean ack");
                    }
                    auto* sub = std::get_if<SubResult>(&*msg);
                    if (!sub)
                        throw MalformedPayload("slave " + std::to_string(i) +
                                               " sent an unexpected message type");
                    if (sub->t != t)
                        throw MalformedPayload("slave " + std::to_string(i) +
                                               " answered generation " + std::to_string(sub->t) +
                                               " instead of " + std::to_string(t));
                    if (sub->subpop.size() != parts[i].size())
                        throw MalformedPayload("slave " + std::to_string(i) +
                                               " changed its block size");
                    comm.t_unmarshal += decode_seconds;
                    replies[i].emplace(std::move(*sub));
                    --outstanding;
                }
            }
        }

        std::vector<SlaveReturn> out;
        out.reserve(m);
        for (std::size_t i = 0; i < m; ++i) {
            comm.t_trans +=
                std::max(0.0, wait_seconds[i] - replies[i]->timings.compute_total());
            out.push_back({std::move(replies[i]->subpop), replies[i]->timings});
        }
        return out;
    }

    void terminate_all(const std::string& reason) {
        const std::string bytes = encode(Terminate{reason});
        for (auto& ch : channels_) {
            if (!ch.socket.valid()) continue;
            try {
                ch.socket.send_all(bytes);
            } catch (const NetworkError&) {
                // the slave is already gone; shutdown proceeds regardless
            }
        }
    }

private:
    std::vector<detail::Channel> channels_;
    const LinearSystem& sys_;
    EvoParams params_;
    std::uint64_t seed_;
    double gather_timeout_;
    std::uint64_t sys_digest_;
    std::uint64_t par_digest_;
};

/// Accepts and handshakes the configured number of slaves, runs the solver
/// loop over them, and terminates every surviving slave at the end. Slave
/// identity is registration order. Handshake problems throw before the run
/// starts; failures mid-run come back as an aborted partial result.
inline SolveResult master_run(const LinearSystem& sys, const EvoParams& params,
                              const ClusterConfig& config, std::uint64_t seed) {
    params.validate();
    validate_topology(Topology{TopologyKind::network, config.slave_count, {}}, params);

    Listener listener = Listener::bind_listen(config.endpoint);
    std::vector<detail::Channel> channels;
    Stopwatch handshake;
    while (channels.size() < static_cast<std::size_t>(config.slave_count)) {
        const double remaining = config.handshake_timeout - handshake.seconds();
        if (remaining <= 0.0)
            throw HandshakeFailure("only " + std::to_string(channels.size()) + " of " +
                                   std::to_string(config.slave_count) +
                                   " slaves registered before the handshake deadline");
        Socket s = listener.accept_within(remaining);
        if (!s.valid()) continue;
        detail::Channel ch{std::move(s), {}};
        try {
            const Message hello = detail::read_message(
                ch, config.handshake_timeout - handshake.seconds(), nullptr, "slave hello");
            if (!std::holds_alternative<Hello>(hello))
                throw HandshakeFailure("peer opened with a non-hello message");
        } catch (const VersionMismatch& e) {
            throw HandshakeFailure(e.what());
        } catch (const NetworkError& e) {
            throw HandshakeFailure(e.what());
        }
        ch.socket.send_all(encode(Hello{kProtocolVersion, config.slave_count}));
        channels.push_back(std::move(ch));
    }

    NetworkBackend backend(std::move(channels), sys, params, seed, config.gather_timeout);
    SolveResult res = run_solver_with_backend(sys, params, TopologyKind::network,
                                              config.slave_count, seed, backend);
    backend.terminate_all(res.aborted ? ("aborted: " + res.abort_reason)
                                      : (res.converged ? "converged" : "generation-limit"));
    return res;
}

/// Slave role: dial the master, handshake, then serve assignments until a
/// terminate message arrives. Returns normally on terminate; connection
/// loss or protocol poison throws (the command-line wrapper maps that to a
/// nonzero exit). Digest mismatches are reported back to the master and the
/// slave keeps serving.
inline void slave_serve(const ClusterConfig& config) {
    detail::Channel ch{connect_to(config.endpoint, config.handshake_timeout), {}};
    ch.socket.send_all(encode(Hello{kProtocolVersion, 1}));
    const Message reply =
        detail::read_message(ch, config.handshake_timeout, nullptr, "master hello");
    if (!std::holds_alternative<Hello>(reply))
        throw HandshakeFailure("master answered the hello with a different message type");

    SlaveSession session;
    while (true) {
        double decode_seconds = 0.0;
        const Message msg = detail::read_message(ch, -1.0, &decode_seconds, "assignment");
        if (std::holds_alternative<Terminate>(msg)) return;
        const auto* assign = std::get_if<Assign>(&msg);
        if (!assign) throw MalformedPayload("master sent an unexpected message type");
        try {
            const SubResult result = session.handle(*assign, decode_seconds);
            ch.socket.send_all(encode(Message(result)));
        } catch (const DigestMismatch& e) {
            ch.socket.send_all(encode(Message(Ack{assign->t, e.what()})));
        }
    }
}

}  // namespace evosr
