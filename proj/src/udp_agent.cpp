#include "cgreplay/udp_agent.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <optional>
#include <vector>

namespace cgreplay {

const char* to_string(UdpOutcome outcome) {
  switch (outcome) {
    case UdpOutcome::Ok: return "ok";
    case UdpOutcome::Aborted: return "aborted";
    case UdpOutcome::PeerTimeout: return "peer_timeout";
    case UdpOutcome::BindFailure: return "bind_failure";
  }
  return "?";
}

namespace {

std::uint64_t wall_us() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::system_clock::now().time_since_epoch())
          .count());
}

class Socket {
 public:
  Socket() : fd_(::socket(AF_INET, SOCK_DGRAM, 0)) {}
  ~Socket() {
    if (fd_ >= 0) ::close(fd_);
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  // Empty string on success.
  std::string bind(const std::string& addr, std::uint16_t port) {
    if (fd_ < 0) return std::string("socket: ") + std::strerror(errno);
    const int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(port);
    if (::inet_pton(AF_INET, addr.c_str(), &sa.sin_addr) != 1) return "bad bind address '" + addr + "'";
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
      return "bind " + addr + ":" + std::to_string(port) + ": " + std::strerror(errno);
    }
    return {};
  }

  void send_to(const sockaddr_in& peer, const Bytes& datagram) {
    // Losses surface through the protocol, not through send errors.
    (void)::sendto(fd_, datagram.data(), datagram.size(), 0, reinterpret_cast<const sockaddr*>(&peer), sizeof peer);
  }

  /// Waits up to timeout_us for one datagram.
  std::optional<Bytes> receive(std::uint64_t timeout_us) {
    pollfd p{fd_, POLLIN, 0};
    const int ms = static_cast<int>(std::min<std::uint64_t>((timeout_us + 999) / 1000, 1000));
    if (::poll(&p, 1, ms) <= 0 || !(p.revents & POLLIN)) return std::nullopt;
    Bytes buf(65536);
    const auto n = ::recv(fd_, buf.data(), buf.size(), 0);
    if (n <= 0) return std::nullopt;
    buf.resize(static_cast<std::size_t>(n));
    return buf;
  }

 private:
  int fd_;
};

std::optional<sockaddr_in> make_addr(const std::string& addr, std::uint16_t port) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(port);
  if (::inet_pton(AF_INET, addr.c_str(), &sa.sin_addr) != 1) return std::nullopt;
  return sa;
}

class Logger {
 public:
  void operator()(Actor actor, EventKind kind, std::string subject) {
    // Wall clocks can step backwards; the log must not.
    last_ = std::max(last_, wall_us());
    log.push_back(SimEvent{last_, actor, kind, std::move(subject)});
  }
  EventLog log;

 private:
  std::uint64_t last_ = 0;
};

std::optional<Message> decode_or_log(const Bytes& datagram, Actor actor, Logger& logger) {
  try {
    return decode_message(datagram);
  } catch (const WireError& e) {
    logger(actor, EventKind::Delivered, Subject().add("msg", "invalid").add("error", to_string(e.code())));
    return std::nullopt;
  }
}

}  // namespace

UdpResult run_udp_server(const ServerSetup& setup) {
  UdpResult result;
  Logger logger;
  ServerAgent server(setup.agent);
  Socket sock;
  if (auto err = sock.bind(setup.bind_addr, setup.command_port); !err.empty()) {
    return UdpResult{UdpOutcome::BindFailure, err, {}};
  }
  const auto peer = make_addr(setup.player_addr, setup.frame_port);
  if (!peer) return UdpResult{UdpOutcome::BindFailure, "bad player_addr '" + setup.player_addr + "'", {}};

  std::uint64_t dgrams = 0;
  std::uint64_t last_heard = wall_us();
  bool started = false;

  auto handle = [&](const Bytes& datagram) {
    last_heard = wall_us();
    started = true;
    const auto msg = decode_or_log(datagram, Actor::Server, logger);
    if (!msg) return;
    Subject s;
    s.append(describe_message(*msg));
    const auto now = wall_us();
    std::optional<std::uint32_t> rollback;
    if (const auto* cmd = std::get_if<CommandMsg>(&*msg)) {
      const auto r = server.on_command(*cmd, now);
      if (r.outcome == CommandOutcome::Duplicate) s.add("result", "dup");
      if (r.outcome == CommandOutcome::Unknown) s.add("result", "unknown");
      rollback = r.rolled_back_to;
    } else if (const auto* st = std::get_if<StatusMsg>(&*msg)) {
      rollback = server.on_status(*st, now);
    }
    if (rollback) s.add("rollback", *rollback);
    logger(Actor::Server, EventKind::Delivered, s);
  };

  while (!started) {
    const auto waited = wall_us() - last_heard;
    if (waited >= setup.peer_timeout_us) {
      result.outcome = UdpOutcome::PeerTimeout;
      result.message = "no datagram from the player";
      result.log = std::move(logger.log);
      return result;
    }
    if (auto d = sock.receive(setup.peer_timeout_us - waited)) handle(*d);
  }

  while (true) {
    const auto now = wall_us();
    if (now - last_heard >= setup.peer_timeout_us) {
      result.outcome = UdpOutcome::PeerTimeout;
      result.message = "player went silent";
      break;
    }
    auto action = server.next_action(now);
    if (auto* send = std::get_if<SendFrame>(&action)) {
      if (send->is_retransmission) {
        logger(Actor::Server, EventKind::Retransmitted,
               Subject()
                   .add("frame_id", send->frame_id)
                   .add("reason", send->reason == RetransmitReason::Timeout ? "timeout" : "rollback"));
      }
      const auto& payload = setup.payloads.at(send->frame_id - 1);
      for (auto& chunk : encode_frame(send->frame_id, now, payload, setup.max_chunk_payload)) {
        Subject s;
        s.add("dgram", ++dgrams).append(describe_message(decode_message(chunk))).add("retx", send->is_retransmission);
        logger(Actor::Server, EventKind::Sent, s);
        sock.send_to(*peer, chunk);
      }
      continue;
    }
    if (auto* wait = std::get_if<Wait>(&action)) {
      const auto until = std::min(wait->until_us, last_heard + setup.peer_timeout_us);
      if (until > now) {
        if (auto d = sock.receive(until - now)) handle(*d);
      }
      continue;
    }
    if (auto* abort = std::get_if<Abort>(&action)) {
      logger(Actor::Server, EventKind::Aborted, Subject().add("reason", abort->reason));
      result.outcome = UdpOutcome::Aborted;
      result.message = abort->reason;
      break;
    }
    logger(Actor::Server, EventKind::Done, Subject().add("frames_stored", server.state().highest_acked_frame_id));
    break;
  }
  result.log = std::move(logger.log);
  return result;
}

UdpResult run_udp_player(const PlayerSetup& setup) {
  UdpResult result;
  Logger logger;
  PlayerAgent player(setup.agent);
  Socket sock;
  if (auto err = sock.bind(setup.bind_addr, setup.frame_port); !err.empty()) {
    return UdpResult{UdpOutcome::BindFailure, err, {}};
  }
  const auto peer = make_addr(setup.server_addr, setup.command_port);
  if (!peer) return UdpResult{UdpOutcome::BindFailure, "bad server_addr '" + setup.server_addr + "'", {}};
  if (!setup.frames_out_dir.empty()) std::filesystem::create_directories(setup.frames_out_dir);

  std::uint64_t dgrams = 0;
  auto send = [&](const Bytes& datagram) {
    Subject s;
    s.add("dgram", ++dgrams).append(describe_message(decode_message(datagram)));
    logger(Actor::Player, EventKind::Sent, s);
    sock.send_to(*peer, datagram);
  };
  auto act = [&](std::vector<PlayerAction> actions) {
    for (auto& a : actions) {
      if (auto* cmd = std::get_if<SendCommand>(&a)) {
        const auto& g = player.schedule().groups()[cmd->group];
        logger(Actor::Player, EventKind::CommandEmitted,
               Subject()
                   .add("cmd_id", cmd->msg.command_id)
                   .add("group", cmd->group + 1)
                   .add("pos", cmd->position + 1)
                   .add("of", g.size())
                   .add("gated_frame", g.gated_frame)
                   .add("resend", cmd->resend)
                   .add("ack", to_string(cmd->msg.ack_kind))
                   .add("acked", cmd->msg.acked_frame_id));
        send(encode_command(cmd->msg));
      } else if (auto* st = std::get_if<SendStatus>(&a)) {
        logger(Actor::Player, EventKind::StatusEmitted,
               Subject()
                   .add("kind", to_string(st->msg.kind))
                   .add("window_end", st->msg.window_end_frame_id)
                   .add("next_expected", st->msg.next_expected_frame_id));
        send(encode_status(st->msg));
      } else if (auto* store = std::get_if<StoreFrame>(&a)) {
        logger(Actor::Player, EventKind::FrameStored, Subject().add("frame_id", store->frame_id));
        if (!setup.frames_out_dir.empty()) {
          write_file(setup.frames_out_dir / ("f_" + std::to_string(store->frame_id) + ".bin"), store->payload);
        }
      }
    }
  };

  const auto start = wall_us();
  std::uint64_t last_heard = start;
  bool hello_pending = true;
  std::uint64_t next_hello = start;
  std::optional<std::uint64_t> completed_at;

  while (true) {
    const auto now = wall_us();
    if (completed_at && now - last_heard >= setup.linger_us) break;
    if (!completed_at && now - last_heard >= setup.peer_timeout_us) {
      result.outcome = UdpOutcome::PeerTimeout;
      result.message = hello_pending ? "no frame from the server" : "server went silent";
      break;
    }
    if (hello_pending && now >= next_hello) {
      const StatusMsg hello{AckKind::Ack, 0, 1, now};
      logger(Actor::Player, EventKind::StatusEmitted,
             Subject().add("kind", "ack").add("window_end", 0).add("next_expected", 1).add("hello", 1));
      send(encode_status(hello));
      next_hello = now + kHelloIntervalUs;
    }
    if (const auto due = player.next_tick_due(); due && now >= *due) {
      act(player.on_tick(now));
      continue;
    }

    std::uint64_t until = completed_at ? last_heard + setup.linger_us : last_heard + setup.peer_timeout_us;
    if (hello_pending) until = std::min(until, next_hello);
    if (const auto due = player.next_tick_due()) until = std::min(until, *due);
    auto d = sock.receive(until > now ? until - now : 0);
    if (!d) continue;
    last_heard = wall_us();
    const auto msg = decode_or_log(*d, Actor::Player, logger);
    if (!msg) continue;
    Subject s;
    s.append(describe_message(*msg));
    std::vector<PlayerAction> actions;
    if (const auto* chunk = std::get_if<FrameChunk>(&*msg)) {
      hello_pending = false;
      actions = player.on_chunk(*chunk, last_heard);
    }
    for (const auto& a : actions) {
      if (std::holds_alternative<RejectFrame>(a)) s.add("integrity", "bad");
    }
    logger(Actor::Player, EventKind::Delivered, s);
    act(std::move(actions));
    if (player.complete() && !completed_at) completed_at = last_heard;
  }
  result.log = std::move(logger.log);
  return result;
}

UdpResult run_udp_agent(UdpRole role, const std::filesystem::path& config_path,
                        const std::filesystem::path& log_path) {
  auto result = role == UdpRole::Server ? run_udp_server(load_server_config(config_path))
                                        : run_udp_player(load_player_config(config_path));
  write_event_log(log_path, result.log);
  return result;
}

}  // namespace cgreplay
