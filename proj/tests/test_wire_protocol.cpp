#include "doctest.h"

#include <algorithm>
#include <random>

#include "cgreplay/wire_protocol.hpp"
#include "wire_samples.hpp"

using namespace cgreplay;
using namespace cgreplay::testing;

namespace {

WireErrc code_of(auto&& fn) {
  try {
    fn();
  } catch (const WireError& e) {
    return e.code();
  }
  FAIL("expected a WireError");
  return WireErrc::DomainError;
}

}  // namespace

TEST_CASE("golden bytes: command") {
  const CommandMsg m{1, 0, AckKind::Nack, 3, {{0, -32767}}, {{2, 1}}};
  const auto expected = hex("02 00000001 0000000000000000 02 00000003 01 00 8001 01 02 01");
  CHECK(expected.size() == 25);
  CHECK(encode_command(m) == expected);
  CHECK(std::get<CommandMsg>(decode_message(expected)) == m);
}

TEST_CASE("golden bytes: status") {
  const StatusMsg s{AckKind::Ack, 3, 4, 0x0102030405060708ULL};
  const auto expected = hex("03 01 00000003 00000004 0102030405060708");
  CHECK(encode_status(s) == expected);
  CHECK(std::get<StatusMsg>(decode_message(expected)) == s);
}

TEST_CASE("golden bytes: frame chunk and payload header") {
  const FrameChunk c{7, 123, 1, 0, {0xAA, 0xBB}};
  const auto expected = hex("01 00000007 000000000000007B 0001 0000 0002 AA BB");
  CHECK(encode_chunk(c) == expected);
  CHECK(std::get<FrameChunk>(decode_message(expected)) == c);

  CHECK(make_frame_payload(7, 123, {}) == hex("43475246 00000007 000000000000007B"));
}

TEST_CASE("decode rejects bad datagrams") {
  CHECK(code_of([] { decode_message(hex("FF")); }) == WireErrc::UnknownMessageType);
  CHECK(code_of([] { decode_message(Bytes{}); }) == WireErrc::TruncatedMessage);
  CHECK(code_of([] { decode_message(hex("03 01 00000003")); }) == WireErrc::TruncatedMessage);
  CHECK(code_of([] { decode_message(hex("03 01 00000003 00000004 0102030405060708 00")); }) ==
        WireErrc::TrailingBytes);
  // axis value 0x8000 = -32768
  CHECK(code_of([] { decode_message(hex("02 00000001 0000000000000000 00 00000000 01 00 8000 00")); }) ==
        WireErrc::DomainError);
  // button state 2
  CHECK(code_of([] { decode_message(hex("02 00000001 0000000000000000 00 00000000 00 01 00 02")); }) ==
        WireErrc::DomainError);
  // chunk_index == total_chunks
  CHECK(code_of([] { decode_message(hex("01 00000007 000000000000007B 0001 0001 0000")); }) ==
        WireErrc::DomainError);
}

TEST_CASE("encoders enforce the message invariants") {
  CHECK(code_of([] { encode_command(CommandMsg{1, 0, AckKind::None, 5, {}, {}}); }) == WireErrc::DomainError);
  CHECK(code_of([] { encode_command(CommandMsg{1, 0, AckKind::None, 0, {{0, -32768}}, {}}); }) ==
        WireErrc::DomainError);
  CHECK(code_of([] { encode_status(StatusMsg{AckKind::Ack, 1, 0, 0}); }) == WireErrc::DomainError);
}

TEST_CASE("round trips: 10000 per message kind") {
  std::mt19937_64 rng(20240611);
  int failures = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto c = random_command(rng);
    if (std::get<CommandMsg>(decode_message(encode_command(c))) != c) ++failures;
    const auto s = random_status(rng);
    if (std::get<StatusMsg>(decode_message(encode_status(s))) != s) ++failures;
    const auto f = random_chunk(rng);
    if (std::get<FrameChunk>(decode_message(encode_chunk(f))) != f) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("encoding is deterministic") {
  std::mt19937_64 a(5), b(5);
  for (int i = 0; i < 100; ++i) CHECK(encode_command(random_command(a)) == encode_command(random_command(b)));
}

TEST_CASE("frame chunking") {
  const auto payload = make_frame_payload(9, 1, Bytes(3000 - kFrameHeaderSize, 0x5A));
  REQUIRE(payload.size() == 3000);
  const auto chunks = encode_frame(9, 42, payload, 1200);
  REQUIRE(chunks.size() == 3);
  std::vector<std::size_t> sizes;
  for (const auto& c : chunks) sizes.push_back(std::get<FrameChunk>(decode_message(c)).payload.size());
  CHECK(sizes == std::vector<std::size_t>{1200, 1200, 600});

  const auto exact = make_frame_payload(1, 0, Bytes(1200 - kFrameHeaderSize, 1));
  const auto one = encode_frame(1, 0, exact, 1200);
  REQUIRE(one.size() == 1);
  CHECK(std::get<FrameChunk>(decode_message(one[0])).total_chunks == 1);

  CHECK(code_of([] { encode_frame(1, 0, Bytes{0x43}, 1200); }) == WireErrc::InvalidPayload);
  const auto big = make_frame_payload(1, 0, Bytes(70000, 0));
  CHECK(code_of([&] { encode_frame(1, 0, big, 1); }) == WireErrc::PayloadTooLarge);
}

TEST_CASE("shuffled chunks reassemble to the original payload") {
  std::mt19937_64 rng(3);
  Bytes body(5000);
  for (auto& b : body) b = static_cast<std::uint8_t>(rng());
  const auto payload = make_frame_payload(4, 77, body);
  for (int round = 0; round < 50; ++round) {
    auto chunks = encode_frame(4, 0, payload, 700);
    std::shuffle(chunks.begin(), chunks.end(), rng);
    FrameAssembler asm_;
    std::optional<FrameAssembler::Completed> done;
    for (const auto& c : chunks) {
      CHECK_FALSE(done.has_value());
      done = asm_.add(std::get<FrameChunk>(decode_message(c)));
    }
    REQUIRE(done.has_value());
    CHECK(done->frame_id == 4);
    CHECK(done->payload == payload);
    CHECK(asm_.pending_frames() == 0);
  }
}

TEST_CASE("payload header") {
  const auto p = make_frame_payload(7, 123, Bytes{1, 2, 3});
  CHECK(read_frame_payload_header(p) == FramePayloadHeader{7, 123});
  CHECK(code_of([] { read_frame_payload_header(Bytes{'X', 'X', 'X', 'X', 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}); }) ==
        WireErrc::BadMagic);
  CHECK(code_of([] { read_frame_payload_header(Bytes{'C', 'G', 'R', 'F', 0}); }) == WireErrc::TruncatedHeader);
}

TEST_CASE("control map numbers names in sorted order") {
  std::vector<CommandRecord> cmds{{1, 0, {{"RY", 5}, {"LX", -1}}, {{"START", 1}}}, {2, 0, {{"LY", 0}}, {{"A", 0}}}};
  const auto map = ControlMap::from_commands(cmds);
  CHECK(map.axis_id("LX") == 0);
  CHECK(map.axis_id("LY") == 1);
  CHECK(map.axis_id("RY") == 2);
  CHECK(map.button_id("A") == 0);
  CHECK(map.button_id("START") == 1);
  const auto m = map.to_message(cmds[0]);
  CHECK(m.command_id == 1);
  CHECK(m.axes == std::vector<AxisValue>{{0, -1}, {2, 5}});
  CHECK(m.buttons == std::vector<ButtonState>{{1, 1}});
}
