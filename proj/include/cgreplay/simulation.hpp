#pragma once

// Discrete-event run of both agents over the simulated channel. Virtual time
// only; all randomness comes from the channel seed.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cgreplay/channel.hpp"
#include "cgreplay/event_log.hpp"
#include "cgreplay/player_agent.hpp"
#include "cgreplay/server_agent.hpp"

namespace cgreplay {

enum class SimOutcome : std::uint8_t { Done, Aborted, HorizonExceeded };

const char* to_string(SimOutcome outcome);

struct SimOptions {
  // payloads[i] is frame i + 1; empty means header-only payloads.
  std::span<const Bytes> payloads;
  std::uint16_t max_chunk_payload = kDefaultMaxChunkPayload;
  std::function<void(std::uint32_t frame_id, const Bytes& payload)> on_store;
};

struct SimResult {
  EventLog log;
  SimOutcome outcome = SimOutcome::Done;
  std::uint64_t end_time_us = 0;
  std::string diagnosis;  // agent states when the horizon was hit, or the abort reason
  std::vector<std::uint32_t> stored_frames;
};

/// horizon_us = 0 picks 20 * frames * interval + 10 s.
SimResult simulate_session(const ServerConfig& server_cfg, const PlayerConfig& player_cfg,
                           const ChannelConfig& channel, const std::vector<ScriptedFault>& faults,
                           std::uint64_t horizon_us = 0, const SimOptions& options = {});

}  // namespace cgreplay
