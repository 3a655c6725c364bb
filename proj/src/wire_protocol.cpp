#include "cgreplay/wire_protocol.hpp"

#include <algorithm>
#include <cstring>
#include <set>

namespace cgreplay {

const char* to_string(WireErrc code) {
  switch (code) {
    case WireErrc::UnknownMessageType: return "UnknownMessageType";
    case WireErrc::TruncatedMessage: return "TruncatedMessage";
    case WireErrc::TrailingBytes: return "TrailingBytes";
    case WireErrc::DomainError: return "DomainError";
    case WireErrc::PayloadTooLarge: return "PayloadTooLarge";
    case WireErrc::InvalidPayload: return "InvalidPayload";
    case WireErrc::BadMagic: return "BadMagic";
    case WireErrc::TruncatedHeader: return "TruncatedHeader";
  }
  return "Unknown";
}

const char* to_string(AckKind kind) {
  switch (kind) {
    case AckKind::None: return "none";
    case AckKind::Ack: return "ack";
    case AckKind::Nack: return "nack";
  }
  return "?";
}

namespace {

constexpr std::uint8_t kMagic[4] = {'C', 'G', 'R', 'F'};

class Writer {
 public:
  explicit Writer(std::size_t reserve) { out_.reserve(reserve); }

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  Bytes take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = n - 1; i >= 0; --i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  Bytes bytes(std::size_t n) {
    need(n);
    Bytes b(in_.begin() + static_cast<std::ptrdiff_t>(pos_), in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return b;
  }
  void finish() const {
    if (pos_ != in_.size()) {
      throw WireError(WireErrc::TrailingBytes, std::to_string(in_.size() - pos_) + " octets after message");
    }
  }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw WireError(WireErrc::TruncatedMessage, "datagram ends early");
  }
  std::uint64_t get(std::size_t n) {
    need(n);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v = (v << 8) | in_[pos_ + i];
    pos_ += n;
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void check_command(const CommandMsg& msg) {
  if (msg.ack_kind != AckKind::None && msg.ack_kind != AckKind::Ack && msg.ack_kind != AckKind::Nack) {
    throw WireError(WireErrc::DomainError, "ack_kind out of range");
  }
  if (msg.ack_kind == AckKind::None && msg.acked_frame_id != 0) {
    throw WireError(WireErrc::DomainError, "acked_frame_id must be 0 without ack metadata");
  }
  if (msg.axes.size() > 255 || msg.buttons.size() > 255) {
    throw WireError(WireErrc::DomainError, "more than 255 axes or buttons");
  }
  for (const auto& a : msg.axes) {
    if (a.value < kAxisMin) throw WireError(WireErrc::DomainError, "axis value -32768 is outside the domain");
  }
  for (const auto& b : msg.buttons) {
    if (b.state > 1) throw WireError(WireErrc::DomainError, "button state must be 0 or 1");
  }
}

void check_status(const StatusMsg& msg) {
  if (msg.kind != AckKind::Ack && msg.kind != AckKind::Nack) {
    throw WireError(WireErrc::DomainError, "status kind must be ack or nack");
  }
  if (msg.next_expected_frame_id == 0) {
    throw WireError(WireErrc::DomainError, "next_expected_frame_id must be >= 1");
  }
}

}  // namespace

Bytes encode_chunk(const FrameChunk& chunk) {
  if (chunk.total_chunks == 0 || chunk.chunk_index >= chunk.total_chunks) {
    throw WireError(WireErrc::DomainError, "chunk_index must be < total_chunks");
  }
  if (chunk.payload.size() > 0xFFFF) throw WireError(WireErrc::PayloadTooLarge, "chunk payload exceeds u16");
  Writer w(kFrameChunkHeaderSize + chunk.payload.size());
  w.u8(kTagFrameChunk);
  w.u32(chunk.frame_id);
  w.u64(chunk.send_ts_us);
  w.u16(chunk.total_chunks);
  w.u16(chunk.chunk_index);
  w.u16(static_cast<std::uint16_t>(chunk.payload.size()));
  w.bytes(chunk.payload);
  return w.take();
}

std::vector<Bytes> encode_frame(std::uint32_t frame_id, std::uint64_t send_ts_us,
                                std::span<const std::uint8_t> payload, std::uint16_t max_chunk_payload) {
  if (max_chunk_payload == 0) throw WireError(WireErrc::InvalidPayload, "max_chunk_payload must be positive");
  if (payload.size() < kFrameHeaderSize || !std::equal(std::begin(kMagic), std::end(kMagic), payload.begin())) {
    throw WireError(WireErrc::InvalidPayload, "frame payload must start with a CGRF header");
  }
  const std::size_t n = (payload.size() + max_chunk_payload - 1) / max_chunk_payload;
  if (n > 0xFFFF) throw WireError(WireErrc::PayloadTooLarge, std::to_string(n) + " chunks exceed u16");

  std::vector<Bytes> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto off = i * max_chunk_payload;
    const auto len = std::min<std::size_t>(max_chunk_payload, payload.size() - off);
    Writer w(kFrameChunkHeaderSize + len);
    w.u8(kTagFrameChunk);
    w.u32(frame_id);
    w.u64(send_ts_us);
    w.u16(static_cast<std::uint16_t>(n));
    w.u16(static_cast<std::uint16_t>(i));
    w.u16(static_cast<std::uint16_t>(len));
    w.bytes(payload.subspan(off, len));
    out.push_back(w.take());
  }
  return out;
}

Bytes encode_command(const CommandMsg& msg) {
  check_command(msg);
  Writer w(20 + 3 * msg.axes.size() + 2 * msg.buttons.size());
  w.u8(kTagCommand);
  w.u32(msg.command_id);
  w.u64(msg.send_ts_us);
  w.u8(static_cast<std::uint8_t>(msg.ack_kind));
  w.u32(msg.acked_frame_id);
  w.u8(static_cast<std::uint8_t>(msg.axes.size()));
  for (const auto& a : msg.axes) {
    w.u8(a.axis_id);
    w.u16(static_cast<std::uint16_t>(a.value));
  }
  w.u8(static_cast<std::uint8_t>(msg.buttons.size()));
  for (const auto& b : msg.buttons) {
    w.u8(b.button_id);
    w.u8(b.state);
  }
  return w.take();
}

Bytes encode_status(const StatusMsg& msg) {
  check_status(msg);
  Writer w(18);
  w.u8(kTagStatus);
  w.u8(static_cast<std::uint8_t>(msg.kind));
  w.u32(msg.window_end_frame_id);
  w.u32(msg.next_expected_frame_id);
  w.u64(msg.send_ts_us);
  return w.take();
}

Message decode_message(std::span<const std::uint8_t> datagram) {
  if (datagram.empty()) throw WireError(WireErrc::TruncatedMessage, "empty datagram");
  Reader r(datagram.subspan(1));
  switch (datagram[0]) {
    case kTagFrameChunk: {
      FrameChunk c;
      c.frame_id = r.u32();
      c.send_ts_us = r.u64();
      c.total_chunks = r.u16();
      c.chunk_index = r.u16();
      const auto len = r.u16();
      c.payload = r.bytes(len);
      r.finish();
      if (c.total_chunks == 0 || c.chunk_index >= c.total_chunks) {
        throw WireError(WireErrc::DomainError, "chunk_index must be < total_chunks");
      }
      return c;
    }
    case kTagCommand: {
      CommandMsg m;
      m.command_id = r.u32();
      m.send_ts_us = r.u64();
      const auto ack = r.u8();
      if (ack > 2) throw WireError(WireErrc::DomainError, "ack_kind out of range");
      m.ack_kind = static_cast<AckKind>(ack);
      m.acked_frame_id = r.u32();
      const auto n_axes = r.u8();
      m.axes.reserve(n_axes);
      for (int i = 0; i < n_axes; ++i) {
        AxisValue a;
        a.axis_id = r.u8();
        a.value = static_cast<std::int16_t>(r.u16());
        m.axes.push_back(a);
      }
      const auto n_buttons = r.u8();
      m.buttons.reserve(n_buttons);
      for (int i = 0; i < n_buttons; ++i) {
        ButtonState b;
        b.button_id = r.u8();
        b.state = r.u8();
        m.buttons.push_back(b);
      }
      r.finish();
      check_command(m);
      return m;
    }
    case kTagStatus: {
      StatusMsg s;
      s.kind = static_cast<AckKind>(r.u8());
      s.window_end_frame_id = r.u32();
      s.next_expected_frame_id = r.u32();
      s.send_ts_us = r.u64();
      r.finish();
      check_status(s);
      return s;
    }
    default:
      throw WireError(WireErrc::UnknownMessageType, "tag " + std::to_string(datagram[0]));
  }
}

Bytes make_frame_payload(std::uint32_t frame_id, std::uint64_t capture_ts_us, std::span<const std::uint8_t> body) {
  Writer w(kFrameHeaderSize + body.size());
  w.bytes(kMagic);
  w.u32(frame_id);
  w.u64(capture_ts_us);
  w.bytes(body);
  return w.take();
}

FramePayloadHeader read_frame_payload_header(std::span<const std::uint8_t> payload) {
  if (payload.size() >= 4 && !std::equal(std::begin(kMagic), std::end(kMagic), payload.begin())) {
    throw WireError(WireErrc::BadMagic, "frame payload does not start with CGRF");
  }
  if (payload.size() < kFrameHeaderSize) throw WireError(WireErrc::TruncatedHeader, "frame payload header");
  Reader r(payload.subspan(4, kFrameHeaderSize - 4));
  FramePayloadHeader h;
  h.frame_id = r.u32();
  h.capture_ts_us = r.u64();
  return h;
}

std::optional<FrameAssembler::Completed> FrameAssembler::add(const FrameChunk& chunk) {
  if (chunk.total_chunks == 0 || chunk.chunk_index >= chunk.total_chunks) return std::nullopt;
  auto& p = partial_[chunk.frame_id];
  if (p.total != chunk.total_chunks) {
    p = Partial{chunk.total_chunks, 0, std::vector<std::optional<Bytes>>(chunk.total_chunks)};
  }
  auto& slot = p.chunks[chunk.chunk_index];
  if (!slot) ++p.filled;
  slot = chunk.payload;
  if (p.filled < p.total) return std::nullopt;

  Completed done{chunk.frame_id, {}};
  for (auto& c : p.chunks) done.payload.insert(done.payload.end(), c->begin(), c->end());
  partial_.erase(chunk.frame_id);
  return done;
}

ControlMap::ControlMap(std::vector<std::string> axes, std::vector<std::string> buttons)
    : axes_(std::move(axes)), buttons_(std::move(buttons)) {
  if (axes_.size() > 256 || buttons_.size() > 256) {
    throw WireError(WireErrc::DomainError, "at most 256 axis and 256 button names");
  }
}

ControlMap ControlMap::from_commands(std::span<const CommandRecord> commands) {
  std::set<std::string> axes;
  std::set<std::string> buttons;
  for (const auto& c : commands) {
    for (const auto& [k, v] : c.axes) axes.insert(k);
    for (const auto& [k, v] : c.buttons) buttons.insert(k);
  }
  return ControlMap({axes.begin(), axes.end()}, {buttons.begin(), buttons.end()});
}

namespace {
std::uint8_t find_id(const std::vector<std::string>& names, const std::string& name, const char* what) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw WireError(WireErrc::DomainError, std::string("unknown ") + what + " " + name);
  return static_cast<std::uint8_t>(it - names.begin());
}
}  // namespace

std::uint8_t ControlMap::axis_id(const std::string& name) const { return find_id(axes_, name, "axis"); }
std::uint8_t ControlMap::button_id(const std::string& name) const { return find_id(buttons_, name, "button"); }

const std::string& ControlMap::axis_name(std::uint8_t id) const {
  if (id >= axes_.size()) throw WireError(WireErrc::DomainError, "unknown axis id " + std::to_string(id));
  return axes_[id];
}

const std::string& ControlMap::button_name(std::uint8_t id) const {
  if (id >= buttons_.size()) throw WireError(WireErrc::DomainError, "unknown button id " + std::to_string(id));
  return buttons_[id];
}

CommandMsg ControlMap::to_message(const CommandRecord& record) const {
  CommandMsg m;
  m.command_id = record.id;
  for (const auto& [name, v] : record.axes) {
    if (v < kAxisMin || v > kAxisMax) throw WireError(WireErrc::DomainError, "axis value out of range");
    m.axes.push_back({axis_id(name), static_cast<std::int16_t>(v)});
  }
  for (const auto& [name, v] : record.buttons) {
    if (v != 0 && v != 1) throw WireError(WireErrc::DomainError, "button value out of range");
    m.buttons.push_back({button_id(name), static_cast<std::uint8_t>(v)});
  }
  return m;
}

}  // namespace cgreplay
