#include "cgreplay/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <initializer_list>
#include <limits>
#include <type_traits>

namespace cgreplay {

namespace {

YAML::Node load_map(const std::filesystem::path& path, std::initializer_list<std::string_view> allowed) {
  if (!std::filesystem::exists(path)) throw ConfigError(path.string() + ": no such file");
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (root.IsNull()) return YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) throw ConfigError(path.string() + ": top level must be a mapping");
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(path.string() + ": unknown key '" + key + "'");
    }
  }
  return root;
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where) {
  if (!node[key]) return;
  try {
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      // yaml-cpp happily wraps negatives into unsigned types.
      const auto text = node[key].Scalar();
      if (!text.empty() && text.front() == '-') throw ConfigError(where + ": " + key + " must not be negative");
      const auto v = node[key].as<unsigned long long>();
      if (v > std::numeric_limits<T>::max()) throw ConfigError(where + ": " + key + " out of range");
      out = static_cast<T>(v);
    } else {
      out = node[key].as<T>();
    }
  } catch (const YAML::Exception&) {
    throw ConfigError(where + ": bad value for " + key);
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::filesystem::path read_path(const YAML::Node& node, const char* key, const std::filesystem::path& base,
                                const std::string& where, bool required) {
  if (!node[key]) {
    if (required) throw ConfigError(where + ": missing " + key);
    return {};
  }
  std::string s;
  read(node, key, s, where);
  return resolve(base, s);
}

LinkConfig read_link(const YAML::Node& node, const std::string& where) {
  LinkConfig link;
  if (!node) return link;
  if (!node.IsMap()) throw ConfigError(where + " must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    static const std::vector<std::string> allowed = {"loss_prob", "base_delay_us", "jitter_us", "reorder_prob",
                                                     "reorder_delay_us"};
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
  read(node, "loss_prob", link.loss_prob, where);
  read(node, "base_delay_us", link.base_delay_us, where);
  read(node, "jitter_us", link.jitter_us, where);
  read(node, "reorder_prob", link.reorder_prob, where);
  read(node, "reorder_delay_us", link.reorder_delay_us, where);
  try {
    validate(link);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return link;
}

ScriptedFault read_fault(const YAML::Node& node, const std::string& where) {
  if (!node.IsMap()) throw ConfigError(where + ": fault must be a mapping");
  std::string direction = "downlink", match, action;
  std::uint32_t repeat = 1;
  read(node, "direction", direction, where);
  read(node, "match", match, where);
  read(node, "action", action, where);
  read(node, "repeat", repeat, where);
  try {
    return parse_fault(direction + "," + match + "," + action + "," + std::to_string(repeat));
  } catch (const FaultSyntaxError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

CaptureTrace player_trace(const std::filesystem::path& sync_file, const std::filesystem::path& command_log,
                          double fps, const std::string& where) {
  CaptureTrace t;
  t.fps = fps;
  try {
    t.sync = parse_sync_order(read_file(sync_file));
    t.commands = parse_command_log(read_file(command_log));
  } catch (const TraceError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  // The player only needs frame ids; timestamps stay on the server side.
  for (const auto& tok : t.sync.tokens) {
    if (tok.kind == TokenKind::Frame) t.frames.push_back(FrameRecord{tok.id, 0, ""});
  }
  for (auto& c : t.commands) c.timestamp_us = 0;
  if (const auto v = validate_trace(t); !v.empty()) {
    throw ConfigError(where + ": sync order and command log disagree (" + v.front().invariant + ")");
  }
  return t;
}

}  // namespace

ServerSetup load_server_config(const std::filesystem::path& path) {
  const auto where = path.string();
  const auto node = load_map(path, {"fps", "window_w", "slide_frames", "command_timeout_us", "max_retransmits",
                                    "bind_addr", "player_addr", "frame_port", "command_port", "trace_dir",
                                    "sync_file", "peer_timeout_us", "max_chunk_payload"});
  const auto base = path.parent_path();
  ServerSetup s;
  auto& a = s.agent;
  read(node, "fps", a.fps, where);
  read(node, "window_w", a.window_w, where);
  a.slide_frames = a.window_w;
  read(node, "slide_frames", a.slide_frames, where);
  read(node, "command_timeout_us", a.command_timeout_us, where);
  read(node, "max_retransmits", a.max_retransmits, where);
  read(node, "bind_addr", s.bind_addr, where);
  read(node, "player_addr", s.player_addr, where);
  read(node, "frame_port", s.frame_port, where);
  read(node, "command_port", s.command_port, where);
  read(node, "peer_timeout_us", s.peer_timeout_us, where);
  read(node, "max_chunk_payload", s.max_chunk_payload, where);
  if (!(a.fps > 0.0)) throw ConfigError(where + ": fps must be positive");
  if (a.window_w < 1) throw ConfigError(where + ": window_w must be >= 1");
  if (a.slide_frames > a.window_w) throw ConfigError(where + ": slide_frames must be <= window_w");
  if (s.max_chunk_payload == 0) throw ConfigError(where + ": max_chunk_payload must be >= 1");

  s.trace_dir = read_path(node, "trace_dir", base, where, true);
  const auto sync = read_path(node, "sync_file", base, where, false);
  try {
    auto bundle = load_trace_dir(s.trace_dir, sync.empty() ? std::nullopt : std::optional(sync));
    a.trace = std::move(bundle.trace);
    if (!node["fps"]) a.fps = a.trace.fps;
    s.payloads = std::move(bundle.payloads);
  } catch (const TraceError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return s;
}

PlayerSetup load_player_config(const std::filesystem::path& path) {
  const auto where = path.string();
  const auto node =
      load_map(path, {"fps", "window_w", "stall_timeout_us", "bind_addr", "server_addr", "frame_port", "command_port",
                      "sync_file", "command_log", "frames_out_dir", "peer_timeout_us", "linger_us",
                      "status_piggyback"});
  const auto base = path.parent_path();
  PlayerSetup s;
  auto& a = s.agent;
  double fps = 30.0;
  read(node, "fps", fps, where);
  read(node, "window_w", a.window_w, where);
  read(node, "stall_timeout_us", a.stall_timeout_us, where);
  read(node, "status_piggyback", a.status_piggyback, where);
  read(node, "bind_addr", s.bind_addr, where);
  read(node, "server_addr", s.server_addr, where);
  read(node, "frame_port", s.frame_port, where);
  read(node, "command_port", s.command_port, where);
  read(node, "peer_timeout_us", s.peer_timeout_us, where);
  read(node, "linger_us", s.linger_us, where);
  if (!(fps > 0.0)) throw ConfigError(where + ": fps must be positive");
  if (a.window_w < 1) throw ConfigError(where + ": window_w must be >= 1");
  s.frames_out_dir = read_path(node, "frames_out_dir", base, where, false);
  a.trace = player_trace(read_path(node, "sync_file", base, where, true),
                         read_path(node, "command_log", base, where, true), fps, where);
  return s;
}

SimConfig load_sim_config(const std::filesystem::path& path) {
  const auto where = path.string();
  const auto node = load_map(path, {"seed", "horizon_us", "uplink", "downlink", "faults"});
  SimConfig s;
  read(node, "seed", s.channel.seed, where);
  read(node, "horizon_us", s.horizon_us, where);
  s.channel.uplink = read_link(node["uplink"], where + ": uplink");
  s.channel.downlink = read_link(node["downlink"], where + ": downlink");
  if (const auto faults = node["faults"]) {
    if (!faults.IsSequence()) throw ConfigError(where + ": faults must be a list");
    for (const auto& f : faults) s.faults.push_back(read_fault(f, where));
  }
  return s;
}

void write_default_configs(const std::filesystem::path& dir, double fps) {
  std::filesystem::create_directories(dir);
  YAML::Emitter server;
  server << YAML::BeginMap << YAML::Key << "fps" << YAML::Value << fps << YAML::Key << "window_w" << YAML::Value << 3
         << YAML::Key << "trace_dir" << YAML::Value << "." << YAML::Key << "bind_addr" << YAML::Value << "127.0.0.1"
         << YAML::Key << "player_addr" << YAML::Value << "127.0.0.1" << YAML::Key << "frame_port" << YAML::Value
         << kDefaultFramePort << YAML::Key << "command_port" << YAML::Value << kDefaultCommandPort << YAML::EndMap;
  write_file(dir / "server.yaml", std::string(server.c_str()) + "\n");

  YAML::Emitter player;
  player << YAML::BeginMap << YAML::Key << "fps" << YAML::Value << fps << YAML::Key << "window_w" << YAML::Value << 3
         << YAML::Key << "sync_file" << YAML::Value << std::string(kSyncFile) << YAML::Key << "command_log"
         << YAML::Value << std::string(kCommandLogFile) << YAML::Key << "bind_addr" << YAML::Value << "127.0.0.1"
         << YAML::Key << "server_addr" << YAML::Value << "127.0.0.1" << YAML::Key << "frame_port" << YAML::Value
         << kDefaultFramePort << YAML::Key << "command_port" << YAML::Value << kDefaultCommandPort << YAML::EndMap;
  write_file(dir / "player.yaml", std::string(player.c_str()) + "\n");

  write_file(dir / "channel.yaml",
             "seed: 1\n"
             "uplink: {loss_prob: 0, base_delay_us: 0, jitter_us: 0, reorder_prob: 0}\n"
             "downlink: {loss_prob: 0, base_delay_us: 0, jitter_us: 0, reorder_prob: 0}\n"
             "faults: []\n");
}

}  // namespace cgreplay
