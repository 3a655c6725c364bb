#include "cgreplay/server_agent.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cgreplay {

std::uint64_t frame_interval_us(double fps) {
  if (!(fps > 0.0)) throw std::invalid_argument("fps must be positive");
  return static_cast<std::uint64_t>(std::ceil(1e6 / fps));
}

std::uint32_t rollback_target(std::uint32_t next_expected, std::uint32_t window_w) {
  return next_expected > window_w ? next_expected - window_w : 1;
}

ServerAgent::ServerAgent(ServerConfig config)
    : config_(std::move(config)),
      schedule_(config_.trace.sync),
      interval_us_(frame_interval_us(config_.fps)),
      timeout_us_(config_.command_timeout_us ? config_.command_timeout_us : 2 * interval_us_) {
  if (config_.window_w < 1) throw std::invalid_argument("window_w must be >= 1");
  if (config_.slide_frames > config_.window_w) throw std::invalid_argument("slide_frames must be <= window_w");
  if (schedule_.frame_count() == 0) throw std::invalid_argument("trace has no frames");
  state_.command_received.assign(schedule_.command_count() + 1, false);
}

bool ServerAgent::frame_allowed(std::uint32_t frame_id) const {
  const auto missing = state_.first_missing_command;
  if (schedule_.commands_before_frame(frame_id) < missing) return true;
  return frame_id - schedule_.trigger_frame(missing) <= config_.slide_frames;
}

std::vector<std::uint32_t> ServerAgent::pending_commands() const {
  std::vector<std::uint32_t> out;
  if (state_.next_frame_id > schedule_.frame_count()) {
    for (std::uint32_t c = 1; c <= schedule_.command_count(); ++c) {
      if (!state_.command_received[c]) out.push_back(c);
    }
    return out;
  }
  const auto needed = schedule_.commands_before_frame(state_.next_frame_id);
  for (std::uint32_t c = 1; c <= needed; ++c) {
    if (!state_.command_received[c]) out.push_back(c);
  }
  return out;
}

void ServerAgent::refresh_slide_credit() {
  const auto missing = state_.first_missing_command;
  state_.slide_credit = 0;
  if (missing > schedule_.command_count() || state_.last_sent_frame_id == 0) return;
  const auto trigger = schedule_.trigger_frame(missing);
  if (state_.last_sent_frame_id > trigger) state_.slide_credit = state_.last_sent_frame_id - trigger;
}

SendFrame ServerAgent::emit(std::uint32_t frame_id, bool retransmission, RetransmitReason reason,
                            std::uint64_t now_us) {
  state_.last_sent_frame_id = frame_id;
  state_.highest_sent_frame_id = std::max(state_.highest_sent_frame_id, frame_id);
  state_.last_send_us = now_us;
  state_.last_activity_us = now_us;
  refresh_slide_credit();
  return SendFrame{frame_id, retransmission, reason};
}

ServerAction ServerAgent::next_action(std::uint64_t now_us) {
  state_.clock_us = now_us;
  if (state_.finished) return Done{};

  const auto frames = schedule_.frame_count();
  const bool stream_done = state_.next_frame_id > frames;
  const bool all_commands = state_.first_missing_command > schedule_.command_count();
  if (stream_done && all_commands && state_.highest_acked_frame_id >= frames) {
    state_.finished = true;
    return Done{};
  }

  const auto next_send = state_.last_send_us ? *state_.last_send_us + interval_us_ : 0;
  if (!stream_done && frame_allowed(state_.next_frame_id)) {
    if (now_us < next_send) return Wait{next_send};
    const auto id = state_.next_frame_id++;
    const bool retx = id <= state_.highest_sent_frame_id;
    if (!retx) state_.retransmit_count = 0;
    return emit(id, retx, retx ? RetransmitReason::Rollback : RetransmitReason::None, now_us);
  }

  // Held at a command gate, or waiting for the final acknowledgement.
  const auto deadline = std::max(state_.last_activity_us + timeout_us_, next_send);
  if (now_us < deadline) return Wait{deadline};
  if (state_.retransmit_count >= config_.max_retransmits) {
    std::ostringstream why;
    why << "no progress after " << state_.retransmit_count << " retransmissions of frame "
        << state_.last_sent_frame_id;
    state_.finished = true;
    return Abort{why.str()};
  }
  ++state_.retransmit_count;
  const auto id = state_.last_sent_frame_id ? state_.last_sent_frame_id : 1;
  return emit(id, true, RetransmitReason::Timeout, now_us);
}

void ServerAgent::apply_ack(std::uint32_t acked_frame_id) {
  state_.highest_acked_frame_id = std::max(state_.highest_acked_frame_id, acked_frame_id);
}

std::optional<std::uint32_t> ServerAgent::apply_nack(std::uint32_t next_expected) {
  const auto target = rollback_target(next_expected, config_.window_w);
  // Only ever rewind; a NACK that points at or past the cursor is already covered.
  if (target >= state_.next_frame_id) return std::nullopt;
  state_.next_frame_id = target;
  ++state_.rollbacks;
  return target;
}

CommandResult ServerAgent::on_command(const CommandMsg& msg, std::uint64_t now_us) {
  state_.clock_us = now_us;
  state_.last_activity_us = std::max(state_.last_activity_us, now_us);
  CommandResult result;
  if (msg.command_id == 0 || msg.command_id > schedule_.command_count()) {
    result.outcome = CommandOutcome::Unknown;
  } else if (state_.command_received[msg.command_id]) {
    result.outcome = CommandOutcome::Duplicate;
  } else {
    state_.command_received[msg.command_id] = true;
    while (state_.first_missing_command <= schedule_.command_count() &&
           state_.command_received[state_.first_missing_command]) {
      ++state_.first_missing_command;
    }
    state_.retransmit_count = 0;
    refresh_slide_credit();
  }
  if (state_.finished) return result;
  if (msg.ack_kind == AckKind::Ack) {
    apply_ack(msg.acked_frame_id);
  } else if (msg.ack_kind == AckKind::Nack) {
    result.rolled_back_to = apply_nack(msg.acked_frame_id + 1);
  }
  return result;
}

std::optional<std::uint32_t> ServerAgent::on_status(const StatusMsg& msg, std::uint64_t now_us) {
  state_.clock_us = now_us;
  if (state_.finished) return std::nullopt;
  if (msg.kind == AckKind::Ack) {
    apply_ack(msg.window_end_frame_id);
    return std::nullopt;
  }
  if (msg.kind == AckKind::Nack) return apply_nack(msg.next_expected_frame_id);
  return std::nullopt;
}

std::string ServerAgent::describe() const {
  std::ostringstream out;
  out << "server{cursor=" << state_.next_frame_id << " last_sent=" << state_.last_sent_frame_id
      << " highest_sent=" << state_.highest_sent_frame_id << " highest_acked=" << state_.highest_acked_frame_id
      << " first_missing_cmd=" << state_.first_missing_command << " slide_credit=" << state_.slide_credit
      << " retx=" << state_.retransmit_count << " rollbacks=" << state_.rollbacks << " pending=[";
  const auto pending = pending_commands();
  for (std::size_t i = 0; i < pending.size(); ++i) out << (i ? "," : "") << pending[i];
  out << "] finished=" << state_.finished << "}";
  return out.str();
}

}  // namespace cgreplay
