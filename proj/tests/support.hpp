#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cgreplay/event_log.hpp"
#include "cgreplay/simulation.hpp"
#include "cgreplay/trace_gen.hpp"

namespace cgreplay::testing {

// Sync {F1,F2,F3,C1,C2,F4,F5,C3,F6,F7}.
inline TraceBundle seven_frame_trace() {
  GenSpec g;
  g.n_frames = 7;
  g.command_points = {{3, 2}, {5, 1}};
  return generate_trace(g);
}

// 50 frames, 10 commands in 8 groups.
inline TraceBundle fifty_frame_trace() {
  GenSpec g;
  g.n_frames = 50;
  g.command_points = {{4, 2}, {9, 1}, {14, 1}, {19, 2}, {27, 1}, {33, 1}, {40, 1}, {46, 1}};
  return generate_trace(g);
}

struct Agents {
  ServerConfig server;
  PlayerConfig player;
};

inline Agents agents_for(const CaptureTrace& trace, std::uint32_t w = 3, std::uint32_t slide = 3) {
  Agents a;
  a.server.trace = trace;
  a.server.fps = trace.fps;
  a.server.window_w = w;
  a.server.slide_frames = slide;
  a.player.trace = trace;
  a.player.window_w = w;
  return a;
}

inline SimResult run(const Agents& a, const std::vector<ScriptedFault>& faults = {}, ChannelConfig ch = {},
                     std::uint64_t horizon = 0) {
  return simulate_session(a.server, a.player, ch, faults, horizon);
}

inline std::vector<SimEvent> select(const EventLog& log, Actor actor, EventKind kind) {
  std::vector<SimEvent> out;
  for (const auto& e : log) {
    if (e.actor == actor && e.kind == kind) out.push_back(e);
  }
  return out;
}

inline std::string field(const SimEvent& e, const std::string& key) {
  const auto f = parse_subject(e.subject);
  const auto it = f.find(key);
  return it == f.end() ? std::string() : it->second;
}

inline std::vector<std::uint32_t> stored_ids(const EventLog& log) {
  std::vector<std::uint32_t> ids;
  for (const auto& e : select(log, Actor::Player, EventKind::FrameStored)) {
    ids.push_back(static_cast<std::uint32_t>(std::stoul(field(e, "frame_id"))));
  }
  return ids;
}

// "actor,kind,subject" per line: the log with timestamps removed.
inline std::string without_times(const EventLog& log) {
  std::string out;
  for (const auto& e : log) {
    out += std::string(to_string(e.actor)) + ',' + to_string(e.kind) + ',' + e.subject + '\n';
  }
  return out;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("cgreplay_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace cgreplay::testing
