#pragma once

// Binary UDP message codecs. All integers are big-endian; byte 0 is a type tag.
//
//   FrameChunk : 0x01 | frame_id u32 | send_ts_us u64 | total_chunks u16
//                | chunk_index u16 | payload_len u16 | payload
//   CommandMsg : 0x02 | command_id u32 | send_ts_us u64 | ack_kind u8
//                | acked_frame_id u32 | n_axes u8 | (axis_id u8, value i16)*
//                | n_buttons u8 | (button_id u8, state u8)*
//   StatusMsg  : 0x03 | kind u8 | window_end_frame_id u32
//                | next_expected_frame_id u32 | send_ts_us u64
//
// Frame payloads start with a 16-octet identity header: "CGRF" | frame_id u32
// | capture_ts_us u64.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "cgreplay/trace_model.hpp"

namespace cgreplay {

inline constexpr std::uint8_t kTagFrameChunk = 0x01;
inline constexpr std::uint8_t kTagCommand = 0x02;
inline constexpr std::uint8_t kTagStatus = 0x03;
inline constexpr std::uint16_t kDefaultMaxChunkPayload = 1200;
inline constexpr std::size_t kFrameHeaderSize = 16;
inline constexpr std::size_t kFrameChunkHeaderSize = 19;

enum class WireErrc {
  UnknownMessageType,
  TruncatedMessage,
  TrailingBytes,
  DomainError,
  PayloadTooLarge,
  InvalidPayload,
  BadMagic,
  TruncatedHeader,
};

const char* to_string(WireErrc code);

class WireError : public std::runtime_error {
 public:
  WireError(WireErrc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  WireErrc code() const noexcept { return code_; }

 private:
  WireErrc code_;
};

enum class AckKind : std::uint8_t { None = 0, Ack = 1, Nack = 2 };

const char* to_string(AckKind kind);

struct FrameChunk {
  std::uint32_t frame_id = 0;
  std::uint64_t send_ts_us = 0;
  std::uint16_t total_chunks = 1;
  std::uint16_t chunk_index = 0;
  Bytes payload;

  bool operator==(const FrameChunk&) const = default;
};

struct AxisValue {
  std::uint8_t axis_id = 0;
  std::int16_t value = 0;

  bool operator==(const AxisValue&) const = default;
};

struct ButtonState {
  std::uint8_t button_id = 0;
  std::uint8_t state = 0;

  bool operator==(const ButtonState&) const = default;
};

struct CommandMsg {
  std::uint32_t command_id = 0;
  std::uint64_t send_ts_us = 0;
  AckKind ack_kind = AckKind::None;
  std::uint32_t acked_frame_id = 0;
  std::vector<AxisValue> axes;
  std::vector<ButtonState> buttons;

  bool operator==(const CommandMsg&) const = default;
};

struct StatusMsg {
  AckKind kind = AckKind::Ack;
  std::uint32_t window_end_frame_id = 0;
  std::uint32_t next_expected_frame_id = 1;
  std::uint64_t send_ts_us = 0;

  bool operator==(const StatusMsg&) const = default;
};

struct FramePayloadHeader {
  std::uint32_t frame_id = 0;
  std::uint64_t capture_ts_us = 0;

  bool operator==(const FramePayloadHeader&) const = default;
};

using Message = std::variant<FrameChunk, CommandMsg, StatusMsg>;

Bytes encode_chunk(const FrameChunk& chunk);
/// Splits a frame payload into ceil(len / max_chunk_payload) encoded chunks.
std::vector<Bytes> encode_frame(std::uint32_t frame_id, std::uint64_t send_ts_us,
                                std::span<const std::uint8_t> payload,
                                std::uint16_t max_chunk_payload = kDefaultMaxChunkPayload);
Bytes encode_command(const CommandMsg& msg);
Bytes encode_status(const StatusMsg& msg);
Message decode_message(std::span<const std::uint8_t> datagram);

Bytes make_frame_payload(std::uint32_t frame_id, std::uint64_t capture_ts_us,
                         std::span<const std::uint8_t> body);
FramePayloadHeader read_frame_payload_header(std::span<const std::uint8_t> payload);

/// Collects chunks per frame id and yields the payload once all are present.
class FrameAssembler {
 public:
  struct Completed {
    std::uint32_t frame_id = 0;
    Bytes payload;
  };

  std::optional<Completed> add(const FrameChunk& chunk);
  std::size_t pending_frames() const { return partial_.size(); }

 private:
  struct Partial {
    std::uint16_t total = 0;
    std::uint16_t filled = 0;
    std::vector<std::optional<Bytes>> chunks;
  };
  std::map<std::uint32_t, Partial> partial_;
};

/// Numeric ids for axis and button names, shared by both agents of a trace.
class ControlMap {
 public:
  ControlMap() = default;
  ControlMap(std::vector<std::string> axes, std::vector<std::string> buttons);

  /// Sorted union of the names used in a command log.
  static ControlMap from_commands(std::span<const CommandRecord> commands);

  std::uint8_t axis_id(const std::string& name) const;
  std::uint8_t button_id(const std::string& name) const;
  const std::string& axis_name(std::uint8_t id) const;
  const std::string& button_name(std::uint8_t id) const;

  /// Command body with captured values; ack fields left at None/0.
  CommandMsg to_message(const CommandRecord& record) const;

 private:
  std::vector<std::string> axes_;
  std::vector<std::string> buttons_;
};

}  // namespace cgreplay
