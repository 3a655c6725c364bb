#include "cgreplay/trace_gen.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <random>

#include "cgreplay/channel.hpp"
#include "cgreplay/wire_protocol.hpp"

namespace cgreplay {

namespace {

constexpr std::array<const char*, 6> kAxes = {"LX", "LY", "RX", "RY", "LT", "RT"};
constexpr std::array<const char*, 8> kButtons = {"A", "B", "X", "Y", "LB", "RB", "BACK", "START"};

std::uint32_t parse_u32(std::string_view text) {
  std::uint32_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw SpecError("bad command point number '" + std::string(text) + "'");
  }
  return v;
}

// Library distributions differ between standard libraries; these do not.
std::uint64_t draw(std::mt19937_64& rng, std::uint64_t lo, std::uint64_t hi) { return lo + rng() % (hi - lo + 1); }

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[draw(rng, 0, i - 1)]);
}

}  // namespace

CommandPoint parse_command_point(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw SpecError("command point must be AFTER:COUNT");
  return CommandPoint{parse_u32(text.substr(0, colon)), parse_u32(text.substr(colon + 1))};
}

std::uint64_t frame_timestamp_us(std::uint32_t frame_id, double fps) {
  return static_cast<std::uint64_t>(std::floor(static_cast<double>(frame_id - 1) * 1e6 / fps));
}

void validate_spec(const GenSpec& spec) {
  if (spec.n_frames == 0) throw SpecError("n_frames must be >= 1");
  if (!(spec.fps > 0.0) || spec.fps > kMaxGenFps) throw SpecError("fps must be in (0, 500000]");
  std::vector<std::uint32_t> seen;
  for (const auto& p : spec.command_points) {
    if (p.after_frame_id < 1 || p.after_frame_id > spec.n_frames) {
      throw SpecError("command point after frame " + std::to_string(p.after_frame_id) + " is outside 1.." +
                      std::to_string(spec.n_frames));
    }
    if (p.n_commands < 1) throw SpecError("command point needs n_commands >= 1");
    if (std::find(seen.begin(), seen.end(), p.after_frame_id) != seen.end()) {
      throw SpecError("two command points after frame " + std::to_string(p.after_frame_id));
    }
    seen.push_back(p.after_frame_id);
  }
}

TraceBundle generate_trace(const GenSpec& spec) {
  validate_spec(spec);
  TraceBundle bundle;
  auto& t = bundle.trace;
  t.game_name = spec.game_name;
  t.fps = spec.fps;

  for (std::uint32_t id = 1; id <= spec.n_frames; ++id) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%06u.bin", id);
    const auto ts = frame_timestamp_us(id, spec.fps);
    t.frames.push_back(FrameRecord{id, ts, name});

    std::mt19937_64 body_rng(spec.seed ^ id);
    Bytes body(spec.frame_body_size);
    for (auto& b : body) b = static_cast<std::uint8_t>(body_rng() >> 56);
    bundle.payloads.push_back(make_frame_payload(id, ts, body));
  }

  auto points = spec.command_points;
  std::sort(points.begin(), points.end(),
            [](const CommandPoint& a, const CommandPoint& b) { return a.after_frame_id < b.after_frame_id; });
  std::mt19937_64 rng(mix_seed(spec.seed));
  std::uint32_t next_id = 1;
  for (const auto& p : points) {
    for (std::uint32_t k = 0; k < p.n_commands; ++k) {
      CommandRecord c;
      c.id = next_id++;
      c.timestamp_us = frame_timestamp_us(p.after_frame_id, spec.fps) + 1;
      std::vector<const char*> axes(kAxes.begin(), kAxes.end());
      shuffle(axes, rng);
      for (std::size_t i = 0, n = draw(rng, 1, 3); i < n; ++i) {
        c.axes[axes[i]] = static_cast<int>(draw(rng, 0, 2 * kAxisMax)) - kAxisMax;
      }
      std::vector<const char*> buttons(kButtons.begin(), kButtons.end());
      shuffle(buttons, rng);
      for (std::size_t i = 0, n = draw(rng, 0, 2); i < n; ++i) c.buttons[buttons[i]] = static_cast<int>(draw(rng, 0, 1));
      t.commands.push_back(std::move(c));
    }
  }
  t.sync = extract_sync_order(t.frames, t.commands);
  return bundle;
}

}  // namespace cgreplay
