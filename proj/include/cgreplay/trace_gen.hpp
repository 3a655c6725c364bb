#pragma once

// Synthetic capture traces: header-stamped pseudo-random frame bodies at exact
// fps spacing and command groups placed right after chosen frames.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cgreplay/trace_model.hpp"

namespace cgreplay {

inline constexpr double kMaxGenFps = 500'000.0;

struct CommandPoint {
  std::uint32_t after_frame_id = 0;
  std::uint32_t n_commands = 1;
};

struct GenSpec {
  std::uint32_t n_frames = 0;
  double fps = 30.0;
  std::vector<CommandPoint> command_points;
  std::size_t frame_body_size = 64;
  std::uint64_t seed = 1;
  std::string game_name = "synthetic";
};

class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// "AFTER:COUNT", e.g. "3:2".
CommandPoint parse_command_point(std::string_view text);

void validate_spec(const GenSpec& spec);
TraceBundle generate_trace(const GenSpec& spec);

/// floor((id - 1) * 1e6 / fps)
std::uint64_t frame_timestamp_us(std::uint32_t frame_id, double fps);

}  // namespace cgreplay
