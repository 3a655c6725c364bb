#include "doctest.h"

#include <cmath>

#include "cgreplay/channel.hpp"

using namespace cgreplay;

namespace {

const Message kStatus = StatusMsg{AckKind::Ack, 1, 2, 0};

Message frame(std::uint32_t id) { return FrameChunk{id, 0, 1, 0, {}}; }
Message command(std::uint32_t id) { return CommandMsg{id, 0, AckKind::None, 0, {}, {}}; }

double drop_rate(double p, std::uint64_t seed, std::size_t n) {
  ChannelConfig c;
  c.downlink.loss_prob = p;
  c.seed = seed;
  Channel ch(c, {});
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < n; ++i) dropped += ch.transmit(Direction::Downlink, kStatus).dropped;
  return static_cast<double>(dropped) / static_cast<double>(n);
}

}  // namespace

TEST_CASE("loss 0.1 over 1e5 datagrams stays within 0.003") {
  const auto rate = drop_rate(0.1, 1, 100'000);
  CHECK(std::abs(rate - 0.1) <= 0.003);
}

TEST_CASE("empirical loss within three sigma for several p and seeds") {
  const std::size_t n = 20'000;
  for (double p : {0.01, 0.05, 0.2, 0.5}) {
    for (std::uint64_t seed : {1u, 2u, 99u}) {
      const auto bound = 3 * std::sqrt(p * (1 - p) / static_cast<double>(n));
      CHECK(std::abs(drop_rate(p, seed, n) - p) <= bound);
    }
  }
  CHECK(drop_rate(0.0, 1, 1000) == 0.0);
  CHECK(drop_rate(1.0, 1, 1000) == 1.0);
}

TEST_CASE("same seed same fates, different seed different fates") {
  ChannelConfig c;
  c.uplink = {0.3, 1000, 500, 0.1, 20'000};
  c.downlink = c.uplink;
  auto fates = [&](std::uint64_t seed) {
    c.seed = seed;
    Channel ch(c, {});
    std::vector<std::pair<bool, std::uint64_t>> out;
    for (int i = 0; i < 500; ++i) {
      const auto f = ch.transmit(i % 2 ? Direction::Uplink : Direction::Downlink, kStatus);
      out.emplace_back(f.dropped, f.delay_us);
    }
    return out;
  };
  CHECK(fates(5) == fates(5));
  CHECK(fates(5) != fates(6));
}

TEST_CASE("uplink and downlink draw from separate streams") {
  ChannelConfig c;
  c.downlink.loss_prob = 0.5;
  c.uplink.loss_prob = 0.5;
  Channel a(c, {});
  Channel b(c, {});
  std::vector<bool> down_a, down_b;
  for (int i = 0; i < 200; ++i) {
    down_a.push_back(a.transmit(Direction::Downlink, kStatus).dropped);
    // interleaving uplink traffic must not shift downlink fates
    b.transmit(Direction::Uplink, kStatus);
    down_b.push_back(b.transmit(Direction::Downlink, kStatus).dropped);
  }
  CHECK(down_a == down_b);
}

TEST_CASE("delay, jitter and reordering bounds") {
  ChannelConfig c;
  c.downlink = {0.0, 20'000, 5'000, 0.25, 50'000};
  Channel ch(c, {});
  std::size_t reordered = 0;
  for (int i = 0; i < 5000; ++i) {
    const auto f = ch.transmit(Direction::Downlink, kStatus);
    CHECK_FALSE(f.dropped);
    const auto base = f.reordered ? f.delay_us - 50'000 : f.delay_us;
    CHECK(base >= 15'000);
    CHECK(base <= 25'000);
    reordered += f.reordered;
  }
  CHECK(reordered > 1000);
  CHECK(reordered < 1500);
}

TEST_CASE("scripted faults match once unless repeated") {
  ChannelConfig c;
  Channel ch(c, {parse_fault("downlink,frame_id:2,drop"), parse_fault("uplink,command_id:1,drop,2"),
                 parse_fault("downlink,nth:5,delay:7000")});
  CHECK_FALSE(ch.transmit(Direction::Downlink, frame(1)).dropped);
  const auto f2 = ch.transmit(Direction::Downlink, frame(2));
  CHECK(f2.dropped);
  CHECK(f2.by_fault);
  CHECK_FALSE(ch.transmit(Direction::Downlink, frame(2)).dropped);
  CHECK(ch.transmit(Direction::Uplink, command(1)).dropped);
  CHECK(ch.transmit(Direction::Uplink, command(1)).dropped);
  CHECK_FALSE(ch.transmit(Direction::Uplink, command(1)).dropped);
  CHECK_FALSE(ch.transmit(Direction::Downlink, command(1)).dropped);  // 4th downlink datagram
  const auto fifth = ch.transmit(Direction::Downlink, frame(9));
  CHECK_FALSE(fifth.dropped);
  CHECK(fifth.delay_us == 7000);
}

TEST_CASE("fault syntax") {
  const auto f = parse_fault("uplink, command_id:12, delay:500, 3");
  CHECK(f.direction == Direction::Uplink);
  CHECK(f.match == ScriptedFault::Match::CommandId);
  CHECK(f.value == 12);
  CHECK(f.action == ScriptedFault::Action::Delay);
  CHECK(f.extra_us == 500);
  CHECK(f.repeat == 3);
  CHECK_THROWS_AS(parse_fault("sideways,frame_id:1,drop"), FaultSyntaxError);
  CHECK_THROWS_AS(parse_fault("uplink,frame:1,drop"), FaultSyntaxError);
  CHECK_THROWS_AS(parse_fault("uplink,frame_id:x,drop"), FaultSyntaxError);
  CHECK_THROWS_AS(parse_fault("uplink,frame_id:1,explode"), FaultSyntaxError);
  CHECK_THROWS_AS(parse_fault("uplink,frame_id:1"), FaultSyntaxError);
}

TEST_CASE("link config validation") {
  CHECK_THROWS(validate(LinkConfig{1.5, 0, 0, 0, 0}));
  CHECK_THROWS(validate(LinkConfig{0.0, 0, 0, -0.1, 0}));
  CHECK_NOTHROW(validate(LinkConfig{}));
}
