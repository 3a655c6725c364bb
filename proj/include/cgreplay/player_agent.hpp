#pragma once

// CG-player replay state machine.
//
// Completed frames are checked against the sync order. A frame is stored only
// when it is the next expected id; newer frames are noted (they still count
// toward the status window and still trigger their command group) and older
// ones are ignored. Two consecutive completions of the same frame id mean the
// server is waiting for commands, so recent command groups are re-sent.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cgreplay/trace_model.hpp"
#include "cgreplay/wire_protocol.hpp"

namespace cgreplay {

struct PlayerConfig {
  std::uint32_t window_w = 3;
  bool status_piggyback = true;
  // 0 selects four frame intervals at trace.fps.
  std::uint64_t stall_timeout_us = 0;
  CaptureTrace trace;
};

struct SendCommand {
  CommandMsg msg;
  std::size_t group = 0;     // index into SyncSchedule::groups()
  std::uint32_t position = 0;  // 0-based position inside the group
  bool resend = false;
};

struct SendStatus {
  StatusMsg msg;
};

struct StoreFrame {
  std::uint32_t frame_id = 0;
  Bytes payload;
};

struct RejectFrame {
  std::uint32_t frame_id = 0;
  std::string reason;
};

using PlayerAction = std::variant<SendCommand, SendStatus, StoreFrame, RejectFrame>;

struct PlayerState {
  std::uint32_t next_expected_frame_id = 1;
  std::uint32_t window_start_frame_id = 1;
  std::vector<std::uint32_t> received_in_window;
  std::uint32_t last_frame_id_seen = 0;
  std::uint32_t highest_frame_id_seen = 0;
  std::vector<std::uint32_t> last_command_group;
  std::vector<bool> frame_seen;     // indexed by frame id
  std::vector<bool> group_emitted;  // indexed by group
  std::uint32_t frames_stored = 0;
  std::uint32_t out_of_order_frames = 0;
  std::uint32_t integrity_failures = 0;
  std::optional<std::uint64_t> stall_anchor_us;
  std::uint64_t clock_us = 0;
};

class PlayerAgent {
 public:
  explicit PlayerAgent(PlayerConfig config);

  std::vector<PlayerAction> on_chunk(const FrameChunk& chunk, std::uint64_t now_us);
  std::vector<PlayerAction> on_tick(std::uint64_t now_us);

  /// Commands of the group that follows `frame_id` in sync order, with ack
  /// metadata reflecting the current window.
  std::vector<CommandMsg> due_commands(std::uint32_t frame_id) const;

  std::optional<std::uint64_t> next_tick_due() const;
  bool complete() const { return state_.next_expected_frame_id > schedule_.frame_count(); }
  /// True while the current status window matches the expected consecutive run.
  bool window_consistent() const;

  const PlayerState& state() const { return state_; }
  const PlayerConfig& config() const { return config_; }
  const SyncSchedule& schedule() const { return schedule_; }
  std::uint64_t stall_timeout_us() const { return stall_us_; }
  std::string describe() const;

 private:
  CommandMsg materialize(std::uint32_t command_id) const;
  void emit_group(std::vector<PlayerAction>& out, std::size_t group, bool resend);
  void resend_recent_groups(std::vector<PlayerAction>& out, std::uint32_t around_frame);
  StatusMsg window_status() const;
  void close_window();
  void flush_status(std::vector<PlayerAction>& out);

  PlayerConfig config_;
  SyncSchedule schedule_;
  ControlMap controls_;
  std::uint64_t stall_us_;
  FrameAssembler assembler_;
  PlayerState state_;
};

}  // namespace cgreplay
