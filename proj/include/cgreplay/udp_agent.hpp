#pragma once

// Real-socket driver for the agents. One UDP socket per side, a poll loop on
// one thread, wall-clock timestamps (system_clock microseconds) in the log.
//
// The player announces itself with a StatusMsg Ack{window_end 0, next_expected 1}
// every 200 ms until the first frame arrives; the server starts streaming on
// the first datagram it receives.

#include <cstdint>
#include <filesystem>
#include <string>

#include "cgreplay/config.hpp"
#include "cgreplay/event_log.hpp"

namespace cgreplay {

enum class UdpRole : std::uint8_t { Server, Player };

enum class UdpOutcome : std::uint8_t { Ok, Aborted, PeerTimeout, BindFailure };

const char* to_string(UdpOutcome outcome);

struct UdpResult {
  UdpOutcome outcome = UdpOutcome::Ok;
  std::string message;
  EventLog log;
};

inline constexpr std::uint64_t kHelloIntervalUs = 200'000;

UdpResult run_udp_server(const ServerSetup& setup);
UdpResult run_udp_player(const PlayerSetup& setup);

/// Loads the role's config, runs it and writes the event log to `log_path`
/// (also on failure). Throws ConfigError for bad configuration.
UdpResult run_udp_agent(UdpRole role, const std::filesystem::path& config_path,
                        const std::filesystem::path& log_path);

}  // namespace cgreplay
