#pragma once

// YAML configuration for the server, the player and the simulated channel.
// Unknown keys are rejected; relative paths resolve against the file's folder.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgreplay/channel.hpp"
#include "cgreplay/player_agent.hpp"
#include "cgreplay/server_agent.hpp"

namespace cgreplay {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint16_t kDefaultFramePort = 47000;
inline constexpr std::uint16_t kDefaultCommandPort = 47001;

struct ServerSetup {
  ServerConfig agent;
  std::vector<Bytes> payloads;
  std::filesystem::path trace_dir;
  std::string bind_addr = "127.0.0.1";
  std::string player_addr = "127.0.0.1";
  std::uint16_t frame_port = kDefaultFramePort;
  std::uint16_t command_port = kDefaultCommandPort;
  std::uint64_t peer_timeout_us = 10'000'000;
  std::uint16_t max_chunk_payload = kDefaultMaxChunkPayload;
};

struct PlayerSetup {
  PlayerConfig agent;
  std::string bind_addr = "127.0.0.1";
  std::string server_addr = "127.0.0.1";
  std::uint16_t frame_port = kDefaultFramePort;
  std::uint16_t command_port = kDefaultCommandPort;
  std::filesystem::path frames_out_dir;  // empty: frames are not written
  std::uint64_t peer_timeout_us = 10'000'000;
  std::uint64_t linger_us = 500'000;  // keep answering retransmissions after completion
};

struct SimConfig {
  ChannelConfig channel;
  std::vector<ScriptedFault> faults;
  std::uint64_t horizon_us = 0;
};

ServerSetup load_server_config(const std::filesystem::path& path);
PlayerSetup load_player_config(const std::filesystem::path& path);
SimConfig load_sim_config(const std::filesystem::path& path);

/// Writes server.yaml, player.yaml and channel.yaml into `dir`, pointing at
/// the trace stored there.
void write_default_configs(const std::filesystem::path& dir, double fps);

}  // namespace cgreplay
