#include "cgreplay/trace_model.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace cgreplay {

const char* to_string(TraceErrc code) {
  switch (code) {
    case TraceErrc::MalformedLog: return "MalformedLog";
    case TraceErrc::MalformedManifest: return "MalformedManifest";
    case TraceErrc::MalformedSyncFile: return "MalformedSyncFile";
    case TraceErrc::DomainError: return "DomainError";
    case TraceErrc::SequenceError: return "SequenceError";
    case TraceErrc::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case TraceErrc::EmptyTrace: return "EmptyTrace";
    case TraceErrc::OrphanCommand: return "OrphanCommand";
    case TraceErrc::Io: return "Io";
  }
  return "Unknown";
}

namespace {

template <typename T>
std::optional<T> parse_decimal(std::string_view text) {
  T value{};
  if (text.empty()) return std::nullopt;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, 10);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

void check_control_value(const std::string& name, int value, bool is_button, std::uint32_t id) {
  if (is_button) {
    if (value != 0 && value != 1) {
      throw TraceError(TraceErrc::DomainError, "command " + std::to_string(id) + " button " + name +
                                                   " = " + std::to_string(value) + " (expected 0 or 1)");
    }
  } else if (value < kAxisMin || value > kAxisMax) {
    throw TraceError(TraceErrc::DomainError, "command " + std::to_string(id) + " axis " + name + " = " +
                                                 std::to_string(value) + " outside [-32767, 32767]");
  }
}

std::map<std::string, int> parse_controls(const nlohmann::json& obj, bool is_button, std::uint32_t id) {
  std::map<std::string, int> out;
  if (!obj.is_object()) {
    throw TraceError(TraceErrc::MalformedLog, "command " + std::to_string(id) + ": controls must be an object");
  }
  for (const auto& [name, value] : obj.items()) {
    if (!value.is_number_integer()) {
      throw TraceError(TraceErrc::MalformedLog,
                       "command " + std::to_string(id) + ": control " + name + " is not an integer");
    }
    const auto wide = value.get<std::int64_t>();
    if (wide < std::numeric_limits<int>::min() || wide > std::numeric_limits<int>::max()) {
      throw TraceError(TraceErrc::DomainError, "command " + std::to_string(id) + ": control " + name +
                                                   " out of range");
    }
    const int v = static_cast<int>(wide);
    check_control_value(name, v, is_button, id);
    out.emplace(name, v);
  }
  return out;
}

void check_id_sequence(std::uint32_t id, std::uint32_t expected, const char* what) {
  if (id != expected) {
    throw TraceError(TraceErrc::SequenceError, std::string(what) + " id " + std::to_string(id) +
                                                   " where " + std::to_string(expected) + " was expected");
  }
}

}  // namespace

std::vector<CommandRecord> parse_command_log(std::string_view bytes) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw TraceError(TraceErrc::MalformedLog, e.what());
  }
  if (!doc.is_array()) throw TraceError(TraceErrc::MalformedLog, "command log must be a JSON array");

  std::vector<CommandRecord> out;
  out.reserve(doc.size());
  for (const auto& item : doc) {
    if (!item.is_object()) throw TraceError(TraceErrc::MalformedLog, "command entry is not an object");
    const auto id_it = item.find("id");
    const auto ts_it = item.find("ts_us");
    if (id_it == item.end() || !id_it->is_number_unsigned() || ts_it == item.end() ||
        !ts_it->is_number_unsigned()) {
      throw TraceError(TraceErrc::MalformedLog, "command entry needs unsigned \"id\" and \"ts_us\"");
    }
    const auto id64 = id_it->get<std::uint64_t>();
    if (id64 > std::numeric_limits<std::uint32_t>::max()) {
      throw TraceError(TraceErrc::MalformedLog, "command id exceeds u32");
    }
    CommandRecord rec;
    rec.id = static_cast<std::uint32_t>(id64);
    rec.timestamp_us = ts_it->get<std::uint64_t>();
    check_id_sequence(rec.id, static_cast<std::uint32_t>(out.size() + 1), "command");
    if (auto it = item.find("axes"); it != item.end()) rec.axes = parse_controls(*it, false, rec.id);
    if (auto it = item.find("buttons"); it != item.end()) rec.buttons = parse_controls(*it, true, rec.id);
    out.push_back(std::move(rec));
  }
  return out;
}

std::string serialize_command_log(std::span<const CommandRecord> commands) {
  auto doc = nlohmann::ordered_json::array();
  for (const auto& c : commands) {
    nlohmann::ordered_json item;
    item["id"] = c.id;
    item["ts_us"] = c.timestamp_us;
    item["axes"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : c.axes) item["axes"][k] = v;
    item["buttons"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : c.buttons) item["buttons"][k] = v;
    doc.push_back(std::move(item));
  }
  return doc.dump() + "\n";
}

std::vector<FrameRecord> parse_frame_manifest(std::string_view bytes) {
  std::vector<FrameRecord> out;
  auto lines = split_lines(bytes);
  std::size_t first = 0;
  if (!lines.empty() && lines.front() == "id,ts_us,file") first = 1;
  for (std::size_t i = first; i < lines.size(); ++i) {
    const auto line = lines[i];
    if (line.empty()) {
      if (i + 1 == lines.size()) break;
      throw TraceError(TraceErrc::MalformedManifest, "empty row at line " + std::to_string(i + 1));
    }
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string_view::npos) {
      throw TraceError(TraceErrc::MalformedManifest, "expected 3 fields at line " + std::to_string(i + 1));
    }
    const auto id = parse_decimal<std::uint32_t>(line.substr(0, c1));
    const auto ts = parse_decimal<std::uint64_t>(line.substr(c1 + 1, c2 - c1 - 1));
    const auto file = line.substr(c2 + 1);
    if (!id || !ts || file.empty() || file.find(',') != std::string_view::npos) {
      throw TraceError(TraceErrc::MalformedManifest, "bad row at line " + std::to_string(i + 1));
    }
    check_id_sequence(*id, static_cast<std::uint32_t>(out.size() + 1), "frame");
    if (!out.empty() && *ts < out.back().timestamp_us) {
      throw TraceError(TraceErrc::NonMonotonicTimestamp,
                       "frame " + std::to_string(*id) + " timestamp precedes frame " + std::to_string(*id - 1));
    }
    out.push_back(FrameRecord{*id, *ts, std::string(file)});
  }
  return out;
}

std::string serialize_frame_manifest(std::span<const FrameRecord> frames) {
  std::string out = "id,ts_us,file\n";
  for (const auto& f : frames) {
    out += std::to_string(f.id) + "," + std::to_string(f.timestamp_us) + "," + f.payload_ref + "\n";
  }
  return out;
}

SyncOrder extract_sync_order(std::span<const FrameRecord> frames, std::span<const CommandRecord> commands) {
  if (frames.empty()) throw TraceError(TraceErrc::EmptyTrace, "trace has no frames");
  if (!commands.empty() && commands.front().timestamp_us < frames.front().timestamp_us) {
    throw TraceError(TraceErrc::OrphanCommand, "command " + std::to_string(commands.front().id) +
                                                   " is timestamped before the first frame");
  }
  SyncOrder sync;
  sync.tokens.reserve(frames.size() + commands.size());
  std::size_t fi = 0;
  std::size_t ci = 0;
  // Stable merge; a frame wins ties so a command always follows the frame it reacts to.
  while (fi < frames.size() || ci < commands.size()) {
    const bool take_frame =
        ci == commands.size() ||
        (fi < frames.size() && frames[fi].timestamp_us <= commands[ci].timestamp_us);
    if (take_frame) {
      sync.tokens.push_back({TokenKind::Frame, frames[fi++].id});
    } else {
      sync.tokens.push_back({TokenKind::Command, commands[ci++].id});
    }
  }
  return sync;
}

std::string serialize_sync_order(const SyncOrder& sync) {
  std::string out;
  for (const auto& t : sync.tokens) {
    out += t.kind == TokenKind::Frame ? 'F' : 'C';
    out += std::to_string(t.id);
    out += '\n';
  }
  return out;
}

void check_sync_order(const SyncOrder& sync) {
  std::uint32_t next_frame = 1;
  std::uint32_t next_command = 1;
  for (std::size_t i = 0; i < sync.tokens.size(); ++i) {
    const auto& t = sync.tokens[i];
    if (i == 0 && t.kind != TokenKind::Frame) {
      throw TraceError(TraceErrc::SequenceError, "sync order must start with a frame");
    }
    if (t.kind == TokenKind::Frame) {
      check_id_sequence(t.id, next_frame++, "sync frame");
    } else {
      check_id_sequence(t.id, next_command++, "sync command");
    }
  }
}

SyncOrder parse_sync_order(std::string_view bytes) {
  SyncOrder sync;
  auto lines = split_lines(bytes);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = lines[i];
    if (line.size() < 2 || (line[0] != 'F' && line[0] != 'C')) {
      throw TraceError(TraceErrc::MalformedSyncFile, "bad token at line " + std::to_string(i + 1));
    }
    const auto id = parse_decimal<std::uint32_t>(line.substr(1));
    if (!id || *id == 0) {
      throw TraceError(TraceErrc::MalformedSyncFile, "bad id at line " + std::to_string(i + 1));
    }
    sync.tokens.push_back({line[0] == 'F' ? TokenKind::Frame : TokenKind::Command, *id});
  }
  check_sync_order(sync);
  return sync;
}

std::vector<Violation> validate_trace(const CaptureTrace& trace) {
  std::vector<Violation> out;
  if (!(trace.fps > 0.0)) out.push_back({"fps must be positive", 0});
  if (trace.frames.empty()) out.push_back({"trace has no frames", 0});

  for (std::size_t i = 0; i < trace.frames.size(); ++i) {
    const auto& f = trace.frames[i];
    if (f.id != i + 1) out.push_back({"frame ids gap-free from 1", f.id});
    if (i > 0 && f.timestamp_us < trace.frames[i - 1].timestamp_us) {
      out.push_back({"frame timestamps non-decreasing", f.id});
    }
  }
  for (std::size_t i = 0; i < trace.commands.size(); ++i) {
    const auto& c = trace.commands[i];
    if (c.id != i + 1) out.push_back({"command ids gap-free from 1", c.id});
    for (const auto& [name, v] : c.axes) {
      if (v < kAxisMin || v > kAxisMax) out.push_back({"axis value in [-32767, 32767] (" + name + ")", c.id});
    }
    for (const auto& [name, v] : c.buttons) {
      if (v != 0 && v != 1) out.push_back({"button value in {0, 1} (" + name + ")", c.id});
    }
  }

  const auto& tokens = trace.sync.tokens;
  if (!tokens.empty() && tokens.front().kind != TokenKind::Frame) {
    out.push_back({"sync order starts with a frame", tokens.front().id});
  }
  std::uint32_t expect_f = 1;
  std::uint32_t expect_c = 1;
  for (const auto& t : tokens) {
    auto& expect = t.kind == TokenKind::Frame ? expect_f : expect_c;
    if (t.id != expect) {
      out.push_back({t.kind == TokenKind::Frame ? "sync frame ids in order, each once"
                                                : "sync command ids in order, each once",
                     t.id});
    }
    expect = t.id + 1;
  }
  if (expect_f - 1 != trace.frames.size()) {
    out.push_back({"sync frame set equals manifest frame set", static_cast<std::uint32_t>(trace.frames.size())});
  }
  if (expect_c - 1 != trace.commands.size()) {
    out.push_back({"sync command set equals command log", static_cast<std::uint32_t>(trace.commands.size())});
  }
  return out;
}

SyncSchedule::SyncSchedule(const SyncOrder& sync) {
  check_sync_order(sync);
  for (const auto& t : sync.tokens) {
    (t.kind == TokenKind::Frame ? frame_count_ : command_count_)++;
  }
  commands_before_.assign(frame_count_ + 1, 0);
  trigger_frame_.assign(command_count_ + 1, 0);
  group_of_command_.assign(command_count_ + 1, 0);
  group_after_.assign(frame_count_ + 1, std::nullopt);

  std::uint32_t last_frame = 0;
  std::uint32_t seen_commands = 0;
  bool in_group = false;
  for (const auto& t : sync.tokens) {
    if (t.kind == TokenKind::Frame) {
      if (in_group) groups_.back().gated_frame = t.id;
      in_group = false;
      last_frame = t.id;
      commands_before_[t.id] = seen_commands;
    } else {
      ++seen_commands;
      trigger_frame_[t.id] = last_frame;
      if (!in_group) {
        groups_.push_back(CommandGroup{last_frame, t.id, t.id, 0});
        group_after_[last_frame] = groups_.size() - 1;
        in_group = true;
      }
      groups_.back().last_command = t.id;
      group_of_command_[t.id] = groups_.size() - 1;
    }
  }
}

std::uint32_t SyncSchedule::commands_before_frame(std::uint32_t frame_id) const {
  if (frame_id == 0 || frame_id > frame_count_) throw std::out_of_range("frame id outside sync order");
  return commands_before_[frame_id];
}

std::uint32_t SyncSchedule::trigger_frame(std::uint32_t command_id) const {
  if (command_id == 0 || command_id > command_count_) throw std::out_of_range("command id outside sync order");
  return trigger_frame_[command_id];
}

std::optional<std::size_t> SyncSchedule::group_after_frame(std::uint32_t frame_id) const {
  if (frame_id == 0 || frame_id > frame_count_) return std::nullopt;
  return group_after_[frame_id];
}

std::size_t SyncSchedule::group_of_command(std::uint32_t command_id) const {
  if (command_id == 0 || command_id > command_count_) throw std::out_of_range("command id outside sync order");
  return group_of_command_[command_id];
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError(TraceErrc::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TraceError(TraceErrc::Io, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw TraceError(TraceErrc::Io, "short write to " + path.string());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> contents) {
  write_file(path, std::string_view(reinterpret_cast<const char*>(contents.data()), contents.size()));
}

void write_trace_dir(const std::filesystem::path& dir, const TraceBundle& bundle) {
  std::filesystem::create_directories(dir);
  const auto& t = bundle.trace;
  write_file(dir / kCommandLogFile, serialize_command_log(t.commands));
  write_file(dir / kManifestFile, serialize_frame_manifest(t.frames));
  write_file(dir / kSyncFile, serialize_sync_order(t.sync));

  YAML::Emitter meta;
  meta << YAML::BeginMap << YAML::Key << "game_name" << YAML::Value << t.game_name << YAML::Key << "fps"
       << YAML::Value << t.fps << YAML::EndMap;
  write_file(dir / kTraceMetaFile, std::string(meta.c_str()) + "\n");

  for (std::size_t i = 0; i < t.frames.size() && i < bundle.payloads.size(); ++i) {
    write_file(dir / t.frames[i].payload_ref, bundle.payloads[i]);
  }
}

TraceBundle load_trace_dir(const std::filesystem::path& dir, const std::optional<std::filesystem::path>& sync_file) {
  TraceBundle bundle;
  auto& t = bundle.trace;
  t.game_name = dir.filename().string();
  if (std::filesystem::exists(dir / kTraceMetaFile)) {
    try {
      const auto meta = YAML::LoadFile((dir / kTraceMetaFile).string());
      if (meta["game_name"]) t.game_name = meta["game_name"].as<std::string>();
      if (meta["fps"]) t.fps = meta["fps"].as<double>();
    } catch (const YAML::Exception& e) {
      throw TraceError(TraceErrc::Io, "bad trace metadata: " + std::string(e.what()));
    }
  }
  t.commands = parse_command_log(read_file(dir / kCommandLogFile));
  t.frames = parse_frame_manifest(read_file(dir / kManifestFile));
  t.sync = parse_sync_order(read_file(sync_file ? *sync_file : dir / kSyncFile));

  const auto violations = validate_trace(t);
  if (!violations.empty()) {
    throw TraceError(TraceErrc::SequenceError,
                     "trace " + dir.string() + ": " + violations.front().invariant + " (id " +
                         std::to_string(violations.front().id) + ")");
  }
  bundle.payloads.reserve(t.frames.size());
  for (const auto& f : t.frames) {
    const auto raw = read_file(dir / f.payload_ref);
    bundle.payloads.emplace_back(raw.begin(), raw.end());
  }
  return bundle;
}

}  // namespace cgreplay
