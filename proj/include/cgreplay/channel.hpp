#pragma once

// Seeded lossy datagram channel: per-direction loss, delay, jitter and
// reordering, plus scripted faults that hit specific datagrams.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cgreplay/wire_protocol.hpp"

namespace cgreplay {

enum class Direction : std::uint8_t { Uplink, Downlink };

const char* to_string(Direction d);

struct LinkConfig {
  double loss_prob = 0.0;
  std::uint64_t base_delay_us = 0;
  std::uint64_t jitter_us = 0;  // uniform in [-jitter, +jitter]
  double reorder_prob = 0.0;
  std::uint64_t reorder_delay_us = 50'000;  // extra delay for a reordered datagram
};

struct ChannelConfig {
  LinkConfig uplink;
  LinkConfig downlink;
  std::uint64_t seed = 1;
};

void validate(const LinkConfig& link);

struct ScriptedFault {
  enum class Match : std::uint8_t { FrameId, CommandId, NthDatagram };
  enum class Action : std::uint8_t { Drop, Delay };

  Direction direction = Direction::Downlink;
  Match match = Match::FrameId;
  std::uint64_t value = 0;
  Action action = Action::Drop;
  std::uint64_t extra_us = 0;
  std::uint32_t repeat = 1;  // number of matching datagrams affected
};

class FaultSyntaxError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parses "<direction>,<match>,<action>[,repeat]" where match is
/// frame_id:N | command_id:N | nth:N and action is drop | delay:US.
ScriptedFault parse_fault(std::string_view text);
ScriptedFault::Match parse_fault_match(std::string_view text, std::uint64_t& value);
ScriptedFault::Action parse_fault_action(std::string_view text, std::uint64_t& extra_us);

struct Fate {
  bool dropped = false;
  std::uint64_t delay_us = 0;
  bool by_fault = false;
  bool reordered = false;
};

/// One direction of the channel. Every datagram consumes exactly three draws
/// from the link's generator, so fates do not depend on earlier outcomes.
class Link {
 public:
  Link(LinkConfig config, std::uint64_t seed);
  Fate next();

 private:
  double uniform01();

  LinkConfig config_;
  std::mt19937_64 rng_;
};

class Channel {
 public:
  Channel(const ChannelConfig& config, std::vector<ScriptedFault> faults);

  /// Decides the fate of the next datagram sent in `direction`.
  Fate transmit(Direction direction, const Message& msg);

 private:
  struct ArmedFault {
    ScriptedFault fault;
    std::uint32_t remaining;
  };

  Link uplink_;
  Link downlink_;
  std::vector<ArmedFault> faults_;
  std::uint64_t sent_up_ = 0;
  std::uint64_t sent_down_ = 0;
};

/// splitmix64 step, used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace cgreplay
