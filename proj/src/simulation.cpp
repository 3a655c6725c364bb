#include "cgreplay/simulation.hpp"

#include <queue>
#include <stdexcept>

namespace cgreplay {

const char* to_string(SimOutcome outcome) {
  switch (outcome) {
    case SimOutcome::Done: return "done";
    case SimOutcome::Aborted: return "aborted";
    case SimOutcome::HorizonExceeded: return "horizon_exceeded";
  }
  return "?";
}

namespace {

enum class EvType : std::uint8_t { ToPlayer, ToServer, ServerWake, PlayerTick };

struct QueuedEvent {
  std::uint64_t time_us;
  std::uint64_t seq;
  EvType type;
  std::uint64_t tag;  // datagram number, or timer generation
  Bytes datagram;
};

struct Later {
  bool operator()(const QueuedEvent& a, const QueuedEvent& b) const {
    return a.time_us != b.time_us ? a.time_us > b.time_us : a.seq > b.seq;
  }
};

class Session {
 public:
  Session(const ServerConfig& server_cfg, const PlayerConfig& player_cfg, const ChannelConfig& channel,
          const std::vector<ScriptedFault>& faults, std::uint64_t horizon_us, const SimOptions& options)
      : server_(server_cfg),
        player_(player_cfg),
        channel_(channel, faults),
        options_(options),
        frames_(server_cfg.trace.frames) {
    const auto n = server_.schedule().frame_count();
    if (player_.schedule().frame_count() != n || player_.schedule().command_count() != server_.schedule().command_count()) {
      throw std::invalid_argument("server and player traces differ");
    }
    if (server_cfg.window_w != player_cfg.window_w) throw std::invalid_argument("server and player window_w differ");
    if (!options_.payloads.empty() && options_.payloads.size() != n) {
      throw std::invalid_argument("payload count does not match frame count");
    }
    horizon_us_ = horizon_us ? horizon_us : 20 * static_cast<std::uint64_t>(n) * server_.interval_us() + 10'000'000;
  }

  SimResult run() {
    schedule_server_wake(0);
    while (!queue_.empty()) {
      auto ev = queue_.top();
      if (ev.time_us > horizon_us_) {
        if (!terminated_) {
          result_.outcome = SimOutcome::HorizonExceeded;
          result_.diagnosis = server_.describe() + " " + player_.describe();
          result_.end_time_us = now_;
        }
        break;
      }
      queue_.pop();
      now_ = ev.time_us;
      switch (ev.type) {
        case EvType::ServerWake:
          if (ev.tag == server_gen_ && !terminated_) pump_server();
          break;
        case EvType::PlayerTick:
          if (ev.tag == tick_gen_ && !terminated_) {
            handle_player(player_.on_tick(now_));
            schedule_player_tick();
          }
          break;
        case EvType::ToPlayer: deliver_to_player(ev); break;
        case EvType::ToServer: deliver_to_server(ev); break;
      }
    }
    if (!terminated_ && result_.outcome != SimOutcome::HorizonExceeded) {
      // Queue ran dry without an outcome: nothing could ever happen again.
      result_.outcome = SimOutcome::HorizonExceeded;
      result_.diagnosis = server_.describe() + " " + player_.describe();
      result_.end_time_us = now_;
    }
    result_.log = std::move(log_);
    return std::move(result_);
  }

 private:
  void log(Actor actor, EventKind kind, std::string subject) {
    log_.push_back(SimEvent{now_, actor, kind, std::move(subject)});
  }

  void push(std::uint64_t at, EvType type, std::uint64_t tag, Bytes datagram = {}) {
    queue_.push(QueuedEvent{at, seq_++, type, tag, std::move(datagram)});
  }

  void schedule_server_wake(std::uint64_t at) { push(at, EvType::ServerWake, ++server_gen_); }

  void schedule_player_tick() {
    ++tick_gen_;
    if (const auto due = player_.next_tick_due()) push(*due, EvType::PlayerTick, tick_gen_);
  }

  void transmit(Direction dir, Bytes datagram, const std::string& extra) {
    const auto msg = decode_message(datagram);
    const auto n = ++datagrams_;
    Subject s;
    s.add("dgram", n).append(describe_message(msg)).append(extra);
    log(dir == Direction::Downlink ? Actor::Server : Actor::Player, EventKind::Sent, s);
    const auto fate = channel_.transmit(dir, msg);
    if (fate.dropped) {
      Subject d;
      d.add("dgram", n).add("dir", to_string(dir)).append(describe_message(msg));
      if (fate.by_fault) d.add("fault", 1);
      log(Actor::Channel, EventKind::Dropped, d);
      return;
    }
    push(now_ + fate.delay_us, dir == Direction::Downlink ? EvType::ToPlayer : EvType::ToServer, n,
         std::move(datagram));
  }

  Bytes payload_for(std::uint32_t frame_id) const {
    if (!options_.payloads.empty()) return options_.payloads[frame_id - 1];
    const auto ts = frame_id <= frames_.size() ? frames_[frame_id - 1].timestamp_us : 0;
    return make_frame_payload(frame_id, ts, {});
  }

  void pump_server() {
    while (true) {
      auto action = server_.next_action(now_);
      if (auto* send = std::get_if<SendFrame>(&action)) {
        if (send->is_retransmission) {
          Subject s;
          s.add("frame_id", send->frame_id)
              .add("reason", send->reason == RetransmitReason::Timeout ? "timeout" : "rollback");
          log(Actor::Server, EventKind::Retransmitted, s);
        }
        const std::string retx = send->is_retransmission ? "retx=1" : "retx=0";
        for (auto& chunk : encode_frame(send->frame_id, now_, payload_for(send->frame_id), options_.max_chunk_payload)) {
          transmit(Direction::Downlink, std::move(chunk), retx);
        }
        continue;
      }
      if (auto* wait = std::get_if<Wait>(&action)) {
        schedule_server_wake(wait->until_us);
      } else if (auto* abort = std::get_if<Abort>(&action)) {
        log(Actor::Server, EventKind::Aborted, Subject().add("reason", abort->reason));
        finish(SimOutcome::Aborted, abort->reason);
      } else {
        log(Actor::Server, EventKind::Done, Subject().add("frames_stored", player_.state().frames_stored));
        finish(SimOutcome::Done, "");
      }
      return;
    }
  }

  void finish(SimOutcome outcome, std::string diagnosis) {
    terminated_ = true;
    result_.outcome = outcome;
    result_.diagnosis = std::move(diagnosis);
    result_.end_time_us = now_;
  }

  void handle_player(std::vector<PlayerAction> actions) {
    for (auto& action : actions) {
      if (auto* cmd = std::get_if<SendCommand>(&action)) {
        const auto& g = player_.schedule().groups()[cmd->group];
        Subject s;
        s.add("cmd_id", cmd->msg.command_id)
            .add("group", cmd->group + 1)
            .add("pos", cmd->position + 1)
            .add("of", g.size())
            .add("gated_frame", g.gated_frame)
            .add("resend", cmd->resend)
            .add("ack", to_string(cmd->msg.ack_kind))
            .add("acked", cmd->msg.acked_frame_id);
        log(Actor::Player, EventKind::CommandEmitted, s);
        transmit(Direction::Uplink, encode_command(cmd->msg), "");
      } else if (auto* st = std::get_if<SendStatus>(&action)) {
        Subject s;
        s.add("kind", to_string(st->msg.kind))
            .add("window_end", st->msg.window_end_frame_id)
            .add("next_expected", st->msg.next_expected_frame_id);
        log(Actor::Player, EventKind::StatusEmitted, s);
        transmit(Direction::Uplink, encode_status(st->msg), "");
      } else if (auto* store = std::get_if<StoreFrame>(&action)) {
        log(Actor::Player, EventKind::FrameStored, Subject().add("frame_id", store->frame_id));
        result_.stored_frames.push_back(store->frame_id);
        if (options_.on_store) options_.on_store(store->frame_id, store->payload);
      }
    }
  }

  void deliver_to_player(const QueuedEvent& ev) {
    const auto msg = decode_message(ev.datagram);
    Subject s;
    s.add("dgram", ev.tag).append(describe_message(msg));
    std::vector<PlayerAction> actions;
    if (const auto* chunk = std::get_if<FrameChunk>(&msg)) actions = player_.on_chunk(*chunk, now_);
    for (const auto& a : actions) {
      if (std::holds_alternative<RejectFrame>(a)) s.add("integrity", "bad");
    }
    log(Actor::Player, EventKind::Delivered, s);
    handle_player(std::move(actions));
    if (!terminated_) schedule_player_tick();
  }

  void deliver_to_server(const QueuedEvent& ev) {
    const auto msg = decode_message(ev.datagram);
    Subject s;
    s.add("dgram", ev.tag).append(describe_message(msg));
    if (terminated_) {
      log(Actor::Server, EventKind::Delivered, s);
      return;
    }
    std::optional<std::uint32_t> rollback;
    if (const auto* cmd = std::get_if<CommandMsg>(&msg)) {
      const auto r = server_.on_command(*cmd, now_);
      if (r.outcome == CommandOutcome::Duplicate) s.add("result", "dup");
      if (r.outcome == CommandOutcome::Unknown) s.add("result", "unknown");
      rollback = r.rolled_back_to;
    } else if (const auto* st = std::get_if<StatusMsg>(&msg)) {
      rollback = server_.on_status(*st, now_);
    }
    if (rollback) s.add("rollback", *rollback);
    log(Actor::Server, EventKind::Delivered, s);
    pump_server();
  }

  ServerAgent server_;
  PlayerAgent player_;
  Channel channel_;
  const SimOptions& options_;
  const std::vector<FrameRecord>& frames_;
  std::uint64_t horizon_us_ = 0;

  std::priority_queue<QueuedEvent, std::vector<QueuedEvent>, Later> queue_;
  std::uint64_t seq_ = 0;
  std::uint64_t now_ = 0;
  std::uint64_t server_gen_ = 0;
  std::uint64_t tick_gen_ = 0;
  std::uint64_t datagrams_ = 0;
  bool terminated_ = false;
  EventLog log_;
  SimResult result_;
};

}  // namespace

SimResult simulate_session(const ServerConfig& server_cfg, const PlayerConfig& player_cfg,
                           const ChannelConfig& channel, const std::vector<ScriptedFault>& faults,
                           std::uint64_t horizon_us, const SimOptions& options) {
  Session session(server_cfg, player_cfg, channel, faults, horizon_us, options);
  return session.run();
}

}  // namespace cgreplay
