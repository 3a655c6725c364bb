#include "doctest.h"

#include <unistd.h>

#include <thread>

#include "cgreplay/metrics.hpp"
#include "cgreplay/udp_agent.hpp"
#include "support.hpp"

using namespace cgreplay;
using namespace cgreplay::testing;

namespace {

std::uint16_t base_port() { return static_cast<std::uint16_t>(42000 + (::getpid() % 4000) * 2); }

std::pair<ServerSetup, PlayerSetup> setups(const TraceBundle& b, std::uint16_t port) {
  const auto a = agents_for(b.trace);
  ServerSetup s;
  s.agent = a.server;
  s.payloads = b.payloads;
  s.frame_port = port;
  s.command_port = static_cast<std::uint16_t>(port + 1);
  s.peer_timeout_us = 3'000'000;
  PlayerSetup p;
  p.agent = a.player;
  p.frame_port = s.frame_port;
  p.command_port = s.command_port;
  p.peer_timeout_us = 3'000'000;
  p.linger_us = 200'000;
  return {s, p};
}

}  // namespace

TEST_CASE("loopback session completes and matches the simulated metrics") {
  const auto b = fifty_frame_trace();
  auto [s, p] = setups(b, base_port());
  UdpResult server_result, player_result;
  std::thread server([&] { server_result = run_udp_server(s); });
  player_result = run_udp_player(p);
  server.join();
  INFO(server_result.message << " / " << player_result.message);
  REQUIRE(server_result.outcome == UdpOutcome::Ok);
  REQUIRE(player_result.outcome == UdpOutcome::Ok);

  const auto m = compute_metrics(merge_event_logs({server_result.log, player_result.log}));
  const auto a = agents_for(b.trace);
  const auto sim = compute_metrics(run(a).log);
  CHECK(m.outcome == "done");
  CHECK(m.frames_stored == sim.frames_stored);
  CHECK(m.commands_sent == sim.commands_sent);
  CHECK(m.response_times.size() == sim.response_times.size());
  // Loopback adds scheduling noise on top of the pacing interval.
  CHECK(m.player_fps == doctest::Approx(sim.player_fps).epsilon(0.1));
  for (const auto& r : m.response_times) CHECK(r.rt_us < 2 * 33'334 + 20'000);
}

TEST_CASE("player without a server times out") {
  const auto b = seven_frame_trace();
  auto [s, p] = setups(b, static_cast<std::uint16_t>(base_port() + 10));
  p.peer_timeout_us = 300'000;
  const auto r = run_udp_player(p);
  CHECK(r.outcome == UdpOutcome::PeerTimeout);
  CHECK_FALSE(select(r.log, Actor::Player, EventKind::StatusEmitted).empty());
}

TEST_CASE("server without a player times out") {
  const auto b = seven_frame_trace();
  auto [s, p] = setups(b, static_cast<std::uint16_t>(base_port() + 20));
  s.peer_timeout_us = 300'000;
  CHECK(run_udp_server(s).outcome == UdpOutcome::PeerTimeout);
}

TEST_CASE("unbindable address is reported") {
  const auto b = seven_frame_trace();
  auto [s, p] = setups(b, static_cast<std::uint16_t>(base_port() + 30));
  s.bind_addr = "203.0.113.7";
  CHECK(run_udp_server(s).outcome == UdpOutcome::BindFailure);
  p.bind_addr = "not-an-address";
  CHECK(run_udp_player(p).outcome == UdpOutcome::BindFailure);
}
