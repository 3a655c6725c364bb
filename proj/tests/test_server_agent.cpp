#include "doctest.h"

#include "cgreplay/server_agent.hpp"
#include "support.hpp"

using namespace cgreplay;

namespace {

struct Sent {
  std::uint64_t at;
  SendFrame frame;
};

// Runs the server alone, jumping through Waits, until `stop_at` or a terminal action.
struct Driver {
  ServerAgent server;
  std::uint64_t now = 0;
  std::vector<Sent> sent;
  std::optional<ServerAction> terminal;

  void run_until(std::uint64_t stop_at, std::size_t max_sends = 1000) {
    while (!terminal && sent.size() < max_sends) {
      auto a = server.next_action(now);
      if (auto* s = std::get_if<SendFrame>(&a)) {
        sent.push_back({now, *s});
      } else if (auto* w = std::get_if<Wait>(&a)) {
        if (w->until_us > stop_at) {
          now = stop_at;
          return;
        }
        now = w->until_us;
      } else {
        terminal = a;
      }
    }
  }

  std::vector<std::uint32_t> ids() const {
    std::vector<std::uint32_t> out;
    for (const auto& s : sent) out.push_back(s.frame.frame_id);
    return out;
  }
};

ServerConfig config(const CaptureTrace& t, std::uint32_t slide) {
  ServerConfig c;
  c.trace = t;
  c.window_w = 3;
  c.slide_frames = slide;
  return c;
}

CommandMsg cmd(std::uint32_t id) { return CommandMsg{id, 0, AckKind::None, 0, {}, {}}; }

}  // namespace

TEST_CASE("rollback arithmetic") {
  CHECK(rollback_target(7, 3) == 4);
  CHECK(rollback_target(3, 3) == 1);
  CHECK(rollback_target(2, 3) == 1);
  CHECK(rollback_target(1, 3) == 1);
  for (std::uint32_t w = 1; w < 10; ++w) {
    for (std::uint32_t n = w + 1; n < 200; ++n) CHECK(rollback_target(n, w) == n - w);
  }
}

TEST_CASE("pacing interval and default timeout") {
  CHECK(frame_interval_us(30.0) == 33334);
  CHECK(frame_interval_us(1.0) == 1'000'000);
  ServerAgent s(config(testing::seven_frame_trace().trace, 0));
  CHECK(s.command_timeout_us() == 2 * 33334);
}

TEST_CASE("config is validated") {
  auto c = config(testing::seven_frame_trace().trace, 0);
  c.window_w = 0;
  c.slide_frames = 0;
  CHECK_THROWS_AS(ServerAgent{c}, std::invalid_argument);
  c.window_w = 2;
  c.slide_frames = 3;
  CHECK_THROWS_AS(ServerAgent{c}, std::invalid_argument);
  c.slide_frames = 0;
  c.fps = 0;
  CHECK_THROWS_AS(ServerAgent{c}, std::invalid_argument);
}

TEST_CASE("waits for C1 and C2 before F4 when sliding is off") {
  Driver d{ServerAgent(config(testing::seven_frame_trace().trace, 0))};
  d.run_until(100'000);
  CHECK(d.ids() == std::vector<std::uint32_t>{1, 2, 3});
  CHECK(d.server.pending_commands() == std::vector<std::uint32_t>{1, 2});

  CHECK(d.server.on_command(cmd(1), d.now).outcome == CommandOutcome::Accepted);
  CHECK(d.server.pending_commands() == std::vector<std::uint32_t>{2});
  CHECK_FALSE(d.server.frame_allowed(4));
  CHECK(d.server.on_command(cmd(2), d.now).outcome == CommandOutcome::Accepted);
  CHECK(d.server.pending_commands().empty());
  d.run_until(d.now + 20'000);
  CHECK(d.ids() == std::vector<std::uint32_t>{1, 2, 3, 4});
  CHECK(d.sent.back().at == 3 * 33'334);
  CHECK_FALSE(d.sent.back().frame.is_retransmission);
}

TEST_CASE("missing commands trigger retransmission of the previous frame") {
  Driver d{ServerAgent(config(testing::seven_frame_trace().trace, 0))};
  d.run_until(66'668 + 2 * 33'334);
  REQUIRE(d.sent.size() == 4);
  CHECK(d.sent[3].frame == SendFrame{3, true, RetransmitReason::Timeout});
  CHECK(d.sent[3].at == 66'668 + 66'668);
  CHECK(d.server.state().retransmit_count == 1);
}

TEST_CASE("duplicate and unknown commands leave the state alone") {
  Driver d{ServerAgent(config(testing::seven_frame_trace().trace, 0))};
  d.run_until(70'000);
  d.server.on_command(cmd(1), d.now);
  const auto before = d.server.state().first_missing_command;
  CHECK(d.server.on_command(cmd(1), d.now).outcome == CommandOutcome::Duplicate);
  CHECK(d.server.on_command(cmd(99), d.now).outcome == CommandOutcome::Unknown);
  CHECK(d.server.state().first_missing_command == before);
}

TEST_CASE("frames-only trace streams every frame then finishes on the final ack") {
  GenSpec g;
  g.n_frames = 5;
  Driver d{ServerAgent(config(generate_trace(g).trace, 3))};
  d.run_until(5 * 33'334);
  CHECK(d.ids() == std::vector<std::uint32_t>{1, 2, 3, 4, 5});
  d.server.on_status(StatusMsg{AckKind::Ack, 5, 6, 0}, d.now);
  d.run_until(d.now + 1);
  REQUIRE(d.terminal.has_value());
  CHECK(std::holds_alternative<Done>(*d.terminal));
  for (const auto& s : d.sent) CHECK_FALSE(s.frame.is_retransmission);
}

TEST_CASE("nack after an ack still rewinds to next_expected - w") {
  // Both readings of the rollback rule: clamping to highest_acked + 1 would
  // resume at 7; rewinding by w from next_expected resumes at 4 and resends
  // frames 4..6 even though 6 was acknowledged.
  GenSpec g;
  g.n_frames = 10;
  Driver d{ServerAgent(config(generate_trace(g).trace, 3))};
  d.run_until(6 * 33'334 + 1);
  REQUIRE(d.ids() == std::vector<std::uint32_t>{1, 2, 3, 4, 5, 6, 7});
  CHECK_FALSE(d.server.on_status(StatusMsg{AckKind::Ack, 6, 7, 0}, d.now).has_value());
  CHECK(d.server.state().highest_acked_frame_id == 6);
  CHECK(d.server.on_status(StatusMsg{AckKind::Nack, 7, 7, 0}, d.now) == 4u);
  d.sent.clear();
  d.run_until(d.now + 5 * 33'334);
  REQUIRE(d.sent.size() >= 5);
  CHECK(d.sent[0].frame == SendFrame{4, true, RetransmitReason::Rollback});
  CHECK(d.sent[1].frame == SendFrame{5, true, RetransmitReason::Rollback});
  CHECK(d.sent[2].frame == SendFrame{6, true, RetransmitReason::Rollback});
  CHECK(d.sent[3].frame == SendFrame{7, true, RetransmitReason::Rollback});
  CHECK(d.sent[4].frame == SendFrame{8, false, RetransmitReason::None});
}

TEST_CASE("nack at or past the cursor does not rewind") {
  GenSpec g;
  g.n_frames = 10;
  Driver d{ServerAgent(config(generate_trace(g).trace, 3))};
  d.run_until(2 * 33'334 + 1);  // sent 1..3, cursor 4
  CHECK_FALSE(d.server.on_status(StatusMsg{AckKind::Nack, 3, 7, 0}, d.now).has_value());
  CHECK(d.server.state().next_frame_id == 4);
  CHECK(d.server.state().rollbacks == 0);
}

TEST_CASE("piggybacked nack on a command rewinds once") {
  Driver d{ServerAgent(config(testing::seven_frame_trace().trace, 0))};
  d.run_until(70'000);
  const auto r1 = d.server.on_command(CommandMsg{1, 0, AckKind::Nack, 1, {}, {}}, d.now);
  const auto r2 = d.server.on_command(CommandMsg{2, 0, AckKind::Nack, 1, {}, {}}, d.now);
  CHECK(r1.rolled_back_to == 1u);
  CHECK_FALSE(r2.rolled_back_to.has_value());
  CHECK(d.server.state().rollbacks == 1);
}

TEST_CASE("received commands stay satisfied across a rollback") {
  Driver d{ServerAgent(config(testing::seven_frame_trace().trace, 0))};
  d.run_until(70'000);
  d.server.on_command(cmd(1), d.now);
  d.server.on_command(cmd(2), d.now);
  d.run_until(d.now + 33'334);
  d.server.on_status(StatusMsg{AckKind::Nack, 4, 4, 0}, d.now);  // back to 1
  CHECK(d.server.pending_commands().empty());
  d.sent.clear();
  d.run_until(d.now + 5 * 33'334);
  CHECK(d.ids() == std::vector<std::uint32_t>{1, 2, 3, 4, 5});
}

TEST_CASE("aborts after max_retransmits") {
  auto c = config(testing::seven_frame_trace().trace, 0);
  c.max_retransmits = 4;
  Driver d{ServerAgent(c)};
  d.run_until(10'000'000);
  REQUIRE(d.terminal.has_value());
  CHECK(std::holds_alternative<Abort>(*d.terminal));
  CHECK(d.sent.size() == 3 + 4);
}

TEST_CASE("never first-sends a frame more than the slide allowance past a missing command") {
  const auto t = testing::fifty_frame_trace().trace;
  for (std::uint32_t slide = 0; slide <= 3; ++slide) {
    Driver d{ServerAgent(config(t, slide))};
    d.run_until(5'000'000);
    std::uint32_t highest_first = 0;
    for (const auto& s : d.sent) {
      if (!s.frame.is_retransmission) highest_first = std::max(highest_first, s.frame.frame_id);
    }
    // First command follows frame 4.
    CHECK(highest_first == 4 + slide);
  }
}

TEST_CASE("first transmissions respect the pacing interval") {
  GenSpec g;
  g.n_frames = 20;
  Driver d{ServerAgent(config(generate_trace(g).trace, 3))};
  d.run_until(2'000'000);
  for (std::size_t i = 1; i < d.sent.size(); ++i) {
    if (!d.sent[i].frame.is_retransmission) CHECK(d.sent[i].at - d.sent[i - 1].at >= 33'334);
  }
}

TEST_CASE("identical inputs give identical actions") {
  auto run = [] {
    Driver d{ServerAgent(config(testing::fifty_frame_trace().trace, 2))};
    d.run_until(200'000);
    d.server.on_command(cmd(1), d.now);
    d.server.on_status(StatusMsg{AckKind::Nack, 5, 3, 0}, d.now);
    d.run_until(900'000);
    std::vector<std::pair<std::uint64_t, std::uint32_t>> out;
    for (const auto& s : d.sent) out.emplace_back(s.at, s.frame.frame_id);
    return out;
  };
  CHECK(run() == run());
}
