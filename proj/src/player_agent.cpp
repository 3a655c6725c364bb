#include "cgreplay/player_agent.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "cgreplay/server_agent.hpp"

namespace cgreplay {

PlayerAgent::PlayerAgent(PlayerConfig config)
    : config_(std::move(config)),
      schedule_(config_.trace.sync),
      controls_(ControlMap::from_commands(config_.trace.commands)),
      stall_us_(config_.stall_timeout_us ? config_.stall_timeout_us : 4 * frame_interval_us(config_.trace.fps)) {
  if (config_.window_w < 1) throw std::invalid_argument("window_w must be >= 1");
  if (schedule_.frame_count() == 0) throw std::invalid_argument("trace has no frames");
  if (config_.trace.commands.size() != schedule_.command_count()) {
    throw std::invalid_argument("command log does not match the sync order");
  }
  state_.frame_seen.assign(schedule_.frame_count() + 1, false);
  state_.group_emitted.assign(schedule_.groups().size(), false);
}

bool PlayerAgent::window_consistent() const {
  const auto& w = state_.received_in_window;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] != state_.window_start_frame_id + i) return false;
  }
  return true;
}

CommandMsg PlayerAgent::materialize(std::uint32_t command_id) const {
  auto msg = controls_.to_message(config_.trace.commands.at(command_id - 1));
  msg.send_ts_us = state_.clock_us;
  if (config_.status_piggyback) {
    msg.ack_kind = window_consistent() ? AckKind::Ack : AckKind::Nack;
    msg.acked_frame_id = state_.next_expected_frame_id - 1;
  }
  return msg;
}

std::vector<CommandMsg> PlayerAgent::due_commands(std::uint32_t frame_id) const {
  std::vector<CommandMsg> out;
  const auto group = schedule_.group_after_frame(frame_id);
  if (!group) return out;
  const auto& g = schedule_.groups()[*group];
  for (auto c = g.first_command; c <= g.last_command; ++c) out.push_back(materialize(c));
  return out;
}

void PlayerAgent::emit_group(std::vector<PlayerAction>& out, std::size_t group, bool resend) {
  const auto& g = schedule_.groups()[group];
  state_.group_emitted[group] = true;
  state_.last_command_group.clear();
  for (auto c = g.first_command; c <= g.last_command; ++c) {
    out.push_back(SendCommand{materialize(c), group, c - g.first_command, resend});
    state_.last_command_group.push_back(c);
  }
}

void PlayerAgent::resend_recent_groups(std::vector<PlayerAction>& out, std::uint32_t around_frame) {
  // The server holds at most window_w frames past the gate it is waiting on,
  // so the missing group was triggered by one of the last window_w + 1 frames.
  const auto lo = around_frame > config_.window_w ? around_frame - config_.window_w : 1;
  const auto groups = schedule_.groups();
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].trigger_frame >= lo && groups[i].trigger_frame <= around_frame && state_.group_emitted[i]) {
      emit_group(out, i, true);
    }
  }
}

StatusMsg PlayerAgent::window_status() const {
  StatusMsg s;
  s.kind = window_consistent() ? AckKind::Ack : AckKind::Nack;
  const auto& w = state_.received_in_window;
  s.window_end_frame_id = w.empty() ? state_.next_expected_frame_id - 1 : *std::max_element(w.begin(), w.end());
  s.next_expected_frame_id = state_.next_expected_frame_id;
  s.send_ts_us = state_.clock_us;
  return s;
}

void PlayerAgent::close_window() {
  state_.received_in_window.clear();
  state_.window_start_frame_id = state_.next_expected_frame_id;
}

void PlayerAgent::flush_status(std::vector<PlayerAction>& out) {
  if (complete()) {
    out.push_back(SendStatus{StatusMsg{AckKind::Ack, schedule_.frame_count(), schedule_.frame_count() + 1,
                                       state_.clock_us}});
    close_window();
  } else if (state_.highest_frame_id_seen >= state_.next_expected_frame_id) {
    out.push_back(SendStatus{StatusMsg{AckKind::Nack, state_.highest_frame_id_seen,
                                       state_.next_expected_frame_id, state_.clock_us}});
  }
}

std::vector<PlayerAction> PlayerAgent::on_chunk(const FrameChunk& chunk, std::uint64_t now_us) {
  std::vector<PlayerAction> out;
  state_.clock_us = now_us;
  auto done = assembler_.add(chunk);
  if (!done) return out;

  const auto id = done->frame_id;
  try {
    const auto header = read_frame_payload_header(done->payload);
    if (header.frame_id != id) {
      ++state_.integrity_failures;
      out.push_back(RejectFrame{id, "header frame_id " + std::to_string(header.frame_id) + " != chunk frame_id"});
      return out;
    }
  } catch (const WireError& e) {
    ++state_.integrity_failures;
    out.push_back(RejectFrame{id, to_string(e.code())});
    return out;
  }
  if (id == 0 || id > schedule_.frame_count()) {
    ++state_.integrity_failures;
    out.push_back(RejectFrame{id, "frame id outside sync order"});
    return out;
  }
  state_.stall_anchor_us = now_us;

  if (id == state_.last_frame_id_seen) {
    resend_recent_groups(out, id);
    flush_status(out);
    return out;
  }
  state_.last_frame_id_seen = id;
  const bool first_receipt = !state_.frame_seen[id];
  state_.frame_seen[id] = true;
  state_.highest_frame_id_seen = std::max(state_.highest_frame_id_seen, id);

  if (id < state_.next_expected_frame_id) {
    if (complete()) flush_status(out);
    return out;
  }
  if (id == state_.next_expected_frame_id) {
    ++state_.next_expected_frame_id;
    ++state_.frames_stored;
    out.push_back(StoreFrame{id, std::move(done->payload)});
  } else {
    ++state_.out_of_order_frames;
  }
  auto& window = state_.received_in_window;
  if (std::find(window.begin(), window.end(), id) == window.end()) window.push_back(id);

  if (first_receipt) {
    if (auto g = schedule_.group_after_frame(id); g && !state_.group_emitted[*g]) emit_group(out, *g, false);
  }

  bool final_acked = false;
  if (window.size() >= config_.window_w) {
    const auto status = window_status();
    final_acked = status.kind == AckKind::Ack && status.window_end_frame_id >= schedule_.frame_count();
    out.push_back(SendStatus{status});
    close_window();
  }
  if (complete() && !final_acked) flush_status(out);
  return out;
}

std::vector<PlayerAction> PlayerAgent::on_tick(std::uint64_t now_us) {
  std::vector<PlayerAction> out;
  state_.clock_us = now_us;
  const auto due = next_tick_due();
  if (!due || now_us < *due) return out;
  state_.stall_anchor_us = now_us;
  resend_recent_groups(out, state_.last_frame_id_seen);
  flush_status(out);
  return out;
}

std::optional<std::uint64_t> PlayerAgent::next_tick_due() const {
  if (!state_.stall_anchor_us || complete()) return std::nullopt;
  return *state_.stall_anchor_us + stall_us_;
}

std::string PlayerAgent::describe() const {
  std::ostringstream out;
  out << "player{next_expected=" << state_.next_expected_frame_id << " last_seen=" << state_.last_frame_id_seen
      << " highest_seen=" << state_.highest_frame_id_seen << " stored=" << state_.frames_stored << " window=[";
  for (std::size_t i = 0; i < state_.received_in_window.size(); ++i) {
    out << (i ? "," : "") << state_.received_in_window[i];
  }
  out << "] last_group=[";
  for (std::size_t i = 0; i < state_.last_command_group.size(); ++i) {
    out << (i ? "," : "") << state_.last_command_group[i];
  }
  out << "] integrity_failures=" << state_.integrity_failures << "}";
  return out.str();
}

}  // namespace cgreplay
