#pragma once

// Capture-trace artifacts: command log, frame manifest, sync order.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cgreplay {

using Bytes = std::vector<std::uint8_t>;

inline constexpr int kAxisMin = -32767;
inline constexpr int kAxisMax = 32767;

enum class TraceErrc {
  MalformedLog,
  MalformedManifest,
  MalformedSyncFile,
  DomainError,
  SequenceError,
  NonMonotonicTimestamp,
  EmptyTrace,
  OrphanCommand,
  Io,
};

const char* to_string(TraceErrc code);

class TraceError : public std::runtime_error {
 public:
  TraceError(TraceErrc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  TraceErrc code() const noexcept { return code_; }

 private:
  TraceErrc code_;
};

struct CommandRecord {
  std::uint32_t id = 0;
  std::uint64_t timestamp_us = 0;
  std::map<std::string, int> axes;
  std::map<std::string, int> buttons;

  bool operator==(const CommandRecord&) const = default;
};

struct FrameRecord {
  std::uint32_t id = 0;
  std::uint64_t timestamp_us = 0;
  std::string payload_ref;

  bool operator==(const FrameRecord&) const = default;
};

enum class TokenKind : std::uint8_t { Frame, Command };

struct SyncToken {
  TokenKind kind = TokenKind::Frame;
  std::uint32_t id = 0;

  bool operator==(const SyncToken&) const = default;
};

struct SyncOrder {
  std::vector<SyncToken> tokens;

  bool operator==(const SyncOrder&) const = default;
};

struct CaptureTrace {
  std::string game_name;
  double fps = 30.0;
  std::vector<FrameRecord> frames;
  std::vector<CommandRecord> commands;
  SyncOrder sync;
};

struct Violation {
  std::string invariant;
  std::uint32_t id = 0;
};

std::vector<CommandRecord> parse_command_log(std::string_view bytes);
std::string serialize_command_log(std::span<const CommandRecord> commands);

std::vector<FrameRecord> parse_frame_manifest(std::string_view bytes);
std::string serialize_frame_manifest(std::span<const FrameRecord> frames);

SyncOrder extract_sync_order(std::span<const FrameRecord> frames,
                             std::span<const CommandRecord> commands);

std::string serialize_sync_order(const SyncOrder& sync);
SyncOrder parse_sync_order(std::string_view bytes);

/// Checks every SyncOrder invariant; throws TraceError(SequenceError) on the
/// first violation.
void check_sync_order(const SyncOrder& sync);

/// Empty result iff every CaptureTrace invariant holds.
std::vector<Violation> validate_trace(const CaptureTrace& trace);

/// A run of consecutive Command tokens and the frames around it.
struct CommandGroup {
  std::uint32_t trigger_frame = 0;  // frame token just before the run
  std::uint32_t first_command = 0;
  std::uint32_t last_command = 0;
  std::uint32_t gated_frame = 0;  // frame token just after the run, 0 if none

  std::uint32_t size() const { return last_command - first_command + 1; }
};

/// Index over a validated sync order, shared by both agents.
class SyncSchedule {
 public:
  explicit SyncSchedule(const SyncOrder& sync);

  std::uint32_t frame_count() const { return frame_count_; }
  std::uint32_t command_count() const { return command_count_; }

  // Number of commands placed before frame `frame_id` in sync order.
  std::uint32_t commands_before_frame(std::uint32_t frame_id) const;
  // Frame whose receipt triggers command `command_id`.
  std::uint32_t trigger_frame(std::uint32_t command_id) const;

  std::span<const CommandGroup> groups() const { return groups_; }
  // Index into groups() of the group following `frame_id`, if any.
  std::optional<std::size_t> group_after_frame(std::uint32_t frame_id) const;
  std::size_t group_of_command(std::uint32_t command_id) const;

 private:
  std::uint32_t frame_count_ = 0;
  std::uint32_t command_count_ = 0;
  std::vector<std::uint32_t> commands_before_;  // indexed by frame id
  std::vector<std::uint32_t> trigger_frame_;    // indexed by command id
  std::vector<std::size_t> group_of_command_;   // indexed by command id
  std::vector<std::optional<std::size_t>> group_after_;  // indexed by frame id
  std::vector<CommandGroup> groups_;
};

// On-disk trace directory: commands.json, frames.csv, sync_order.txt,
// trace.yaml and one payload file per frame.
inline constexpr std::string_view kCommandLogFile = "commands.json";
inline constexpr std::string_view kManifestFile = "frames.csv";
inline constexpr std::string_view kSyncFile = "sync_order.txt";
inline constexpr std::string_view kTraceMetaFile = "trace.yaml";

struct TraceBundle {
  CaptureTrace trace;
  std::vector<Bytes> payloads;  // payloads[i] belongs to frame id i + 1
};

void write_trace_dir(const std::filesystem::path& dir, const TraceBundle& bundle);
/// Loads a trace directory. `sync_file` overrides the directory's sync order.
TraceBundle load_trace_dir(const std::filesystem::path& dir,
                           const std::optional<std::filesystem::path>& sync_file = std::nullopt);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> contents);

}  // namespace cgreplay
