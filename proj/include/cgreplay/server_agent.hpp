#pragma once

// CG-server replay state machine.
//
// Frames are streamed in sync order at the paced rate. A frame whose sync
// predecessors include an unreceived command is held back unless it lies at
// most `slide_frames` frame tokens past that command. While held back, the
// last sent frame is retransmitted every `command_timeout_us` to signal the
// player; a NACK rewinds the stream to rollback_target(next_expected, w).
// The session is Done once every frame has been sent, every command received
// and the final frame acknowledged.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cgreplay/trace_model.hpp"
#include "cgreplay/wire_protocol.hpp"

namespace cgreplay {

/// ceil(1e6 / fps) microseconds.
std::uint64_t frame_interval_us(double fps);

/// Frame id the stream resumes from after a NACK: next_expected - w, floor 1.
std::uint32_t rollback_target(std::uint32_t next_expected, std::uint32_t window_w);

struct ServerConfig {
  double fps = 30.0;
  std::uint32_t window_w = 3;
  // Frames the server may stream past an unsatisfied command gate; <= window_w.
  std::uint32_t slide_frames = 3;
  // 0 selects two frame intervals.
  std::uint64_t command_timeout_us = 0;
  std::uint32_t max_retransmits = 50;
  CaptureTrace trace;
};

enum class RetransmitReason : std::uint8_t { None, Timeout, Rollback };

struct SendFrame {
  std::uint32_t frame_id = 0;
  bool is_retransmission = false;
  RetransmitReason reason = RetransmitReason::None;

  bool operator==(const SendFrame&) const = default;
};

struct Wait {
  std::uint64_t until_us = 0;

  bool operator==(const Wait&) const = default;
};

struct Abort {
  std::string reason;

  bool operator==(const Abort&) const = default;
};

struct Done {
  bool operator==(const Done&) const = default;
};

using ServerAction = std::variant<SendFrame, Wait, Abort, Done>;

struct ServerState {
  std::uint32_t next_frame_id = 1;  // stream cursor
  std::uint32_t last_sent_frame_id = 0;
  std::uint32_t highest_sent_frame_id = 0;
  std::uint32_t highest_acked_frame_id = 0;
  std::uint32_t first_missing_command = 1;
  std::uint32_t slide_credit = 0;
  std::uint32_t retransmit_count = 0;
  std::uint32_t rollbacks = 0;
  std::vector<bool> command_received;  // indexed by command id
  std::optional<std::uint64_t> last_send_us;
  std::uint64_t last_activity_us = 0;
  std::uint64_t clock_us = 0;
  bool finished = false;
};

enum class CommandOutcome : std::uint8_t { Accepted, Duplicate, Unknown };

struct CommandResult {
  CommandOutcome outcome = CommandOutcome::Accepted;
  std::optional<std::uint32_t> rolled_back_to;
};

class ServerAgent {
 public:
  explicit ServerAgent(ServerConfig config);

  ServerAction next_action(std::uint64_t now_us);
  CommandResult on_command(const CommandMsg& msg, std::uint64_t now_us);
  /// Returns the frame the stream was rewound to, if the status caused a rollback.
  std::optional<std::uint32_t> on_status(const StatusMsg& msg, std::uint64_t now_us);

  /// Unreceived commands that gate the frame at the cursor.
  std::vector<std::uint32_t> pending_commands() const;
  bool frame_allowed(std::uint32_t frame_id) const;

  const ServerState& state() const { return state_; }
  const ServerConfig& config() const { return config_; }
  const SyncSchedule& schedule() const { return schedule_; }
  std::uint64_t interval_us() const { return interval_us_; }
  std::uint64_t command_timeout_us() const { return timeout_us_; }
  std::string describe() const;

 private:
  void apply_ack(std::uint32_t acked_frame_id);
  std::optional<std::uint32_t> apply_nack(std::uint32_t next_expected);
  void refresh_slide_credit();
  SendFrame emit(std::uint32_t frame_id, bool retransmission, RetransmitReason reason, std::uint64_t now_us);

  ServerConfig config_;
  SyncSchedule schedule_;
  std::uint64_t interval_us_;
  std::uint64_t timeout_us_;
  ServerState state_;
};

}  // namespace cgreplay
