#include "cgreplay/channel.hpp"

#include <charconv>

namespace cgreplay {

const char* to_string(Direction d) { return d == Direction::Uplink ? "uplink" : "downlink"; }

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

void validate(const LinkConfig& link) {
  if (!(link.loss_prob >= 0.0 && link.loss_prob <= 1.0)) throw std::invalid_argument("loss_prob outside [0,1]");
  if (!(link.reorder_prob >= 0.0 && link.reorder_prob <= 1.0)) {
    throw std::invalid_argument("reorder_prob outside [0,1]");
  }
}

namespace {

std::uint64_t parse_u64(std::string_view text, std::string_view what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw FaultSyntaxError("bad " + std::string(what) + ": '" + std::string(text) + "'");
  }
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  return s;
}

}  // namespace

ScriptedFault::Match parse_fault_match(std::string_view text, std::uint64_t& value) {
  text = trim(text);
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw FaultSyntaxError("fault match needs kind:N");
  const auto kind = text.substr(0, colon);
  value = parse_u64(text.substr(colon + 1), "fault match value");
  if (kind == "frame_id") return ScriptedFault::Match::FrameId;
  if (kind == "command_id") return ScriptedFault::Match::CommandId;
  if (kind == "nth") return ScriptedFault::Match::NthDatagram;
  throw FaultSyntaxError("unknown fault match '" + std::string(kind) + "'");
}

ScriptedFault::Action parse_fault_action(std::string_view text, std::uint64_t& extra_us) {
  text = trim(text);
  extra_us = 0;
  if (text == "drop") return ScriptedFault::Action::Drop;
  if (text.starts_with("delay:")) {
    extra_us = parse_u64(text.substr(6), "fault delay");
    return ScriptedFault::Action::Delay;
  }
  throw FaultSyntaxError("unknown fault action '" + std::string(text) + "'");
}

ScriptedFault parse_fault(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    parts.push_back(trim(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (parts.size() < 3 || parts.size() > 4) {
    throw FaultSyntaxError("fault must be <direction>,<match>,<action>[,repeat]");
  }
  ScriptedFault f;
  if (parts[0] == "uplink") {
    f.direction = Direction::Uplink;
  } else if (parts[0] == "downlink") {
    f.direction = Direction::Downlink;
  } else {
    throw FaultSyntaxError("fault direction must be uplink or downlink");
  }
  f.match = parse_fault_match(parts[1], f.value);
  f.action = parse_fault_action(parts[2], f.extra_us);
  if (parts.size() == 4) f.repeat = static_cast<std::uint32_t>(parse_u64(parts[3], "fault repeat"));
  return f;
}

Link::Link(LinkConfig config, std::uint64_t seed) : config_(config), rng_(seed) { validate(config_); }

double Link::uniform01() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

Fate Link::next() {
  const double loss_draw = uniform01();
  const double jitter_draw = uniform01();
  const double reorder_draw = uniform01();

  Fate fate;
  fate.dropped = loss_draw < config_.loss_prob;
  std::int64_t delay = static_cast<std::int64_t>(config_.base_delay_us);
  if (config_.jitter_us > 0) {
    const auto span = 2 * config_.jitter_us + 1;
    delay += static_cast<std::int64_t>(jitter_draw * static_cast<double>(span)) -
             static_cast<std::int64_t>(config_.jitter_us);
  }
  fate.delay_us = delay > 0 ? static_cast<std::uint64_t>(delay) : 0;
  if (reorder_draw < config_.reorder_prob) {
    fate.reordered = true;
    fate.delay_us += config_.reorder_delay_us;
  }
  return fate;
}

Channel::Channel(const ChannelConfig& config, std::vector<ScriptedFault> faults)
    : uplink_(config.uplink, mix_seed(config.seed ^ 0x75706C696E6BULL)),
      downlink_(config.downlink, mix_seed(config.seed ^ 0x646F776E6C6BULL)) {
  for (auto& f : faults) faults_.push_back({f, f.repeat});
}

Fate Channel::transmit(Direction direction, const Message& msg) {
  const bool up = direction == Direction::Uplink;
  const auto nth = up ? ++sent_up_ : ++sent_down_;
  Fate fate = (up ? uplink_ : downlink_).next();

  for (auto& armed : faults_) {
    const auto& f = armed.fault;
    if (armed.remaining == 0 || f.direction != direction) continue;
    bool hit = false;
    switch (f.match) {
      case ScriptedFault::Match::FrameId:
        if (const auto* c = std::get_if<FrameChunk>(&msg)) hit = c->frame_id == f.value;
        break;
      case ScriptedFault::Match::CommandId:
        if (const auto* m = std::get_if<CommandMsg>(&msg)) hit = m->command_id == f.value;
        break;
      case ScriptedFault::Match::NthDatagram:
        hit = nth == f.value;
        break;
    }
    if (!hit) continue;
    --armed.remaining;
    fate.by_fault = true;
    if (f.action == ScriptedFault::Action::Drop) {
      fate.dropped = true;
    } else {
      fate.delay_us += f.extra_us;
    }
  }
  return fate;
}

}  // namespace cgreplay
