#pragma once

// Session metrics derived from an event log alone.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cgreplay/event_log.hpp"

namespace cgreplay {

struct ResponseSample {
  std::uint32_t group_id = 0;  // 1-based, sync order
  std::uint64_t send_ts_us = 0;
  std::uint64_t react_ts_us = 0;
  std::uint64_t rt_us = 0;

  bool operator==(const ResponseSample&) const = default;
};

struct ResponseSummary {
  std::size_t count = 0;
  std::uint64_t min_us = 0;
  double mean_us = 0.0;
  std::uint64_t p95_us = 0;  // nearest rank
  std::uint64_t max_us = 0;

  bool operator==(const ResponseSummary&) const = default;
};

struct SessionMetrics {
  std::string outcome = "incomplete";  // done | aborted | incomplete
  bool partial = true;                 // no Done event in the log
  double server_fps = 0.0;
  double player_fps = 0.0;
  double fps_ratio = 0.0;
  std::uint64_t frames_first_sent = 0;
  std::uint64_t frames_stored = 0;
  std::uint64_t commands_sent = 0;
  std::uint64_t commands_received_at_server = 0;
  double command_ratio = 0.0;
  std::uint64_t frame_retransmissions = 0;
  std::uint64_t command_resends = 0;  // re-sent groups
  std::uint64_t frames_lost_then_recovered = 0;
  std::uint64_t rollbacks = 0;
  std::uint64_t frame_datagrams_dropped = 0;
  std::uint64_t command_datagrams_dropped = 0;
  std::uint64_t status_datagrams_dropped = 0;
  std::vector<ResponseSample> response_times;
  ResponseSummary summary;

  bool operator==(const SessionMetrics&) const = default;
};

/// Throws LogError when an event lacks the keys its kind requires.
SessionMetrics compute_metrics(const EventLog& log);

ResponseSummary summarize(const std::vector<ResponseSample>& samples);

inline constexpr const char* kReportFile = "report.csv";
inline constexpr const char* kResponseTimesFile = "response_times.csv";

std::string format_report(const SessionMetrics& m);
std::string format_response_times(const SessionMetrics& m);

/// Writes report.csv and response_times.csv into `dir`. An empty session
/// (no events) gets header-only files.
void write_report(const SessionMetrics& m, const std::filesystem::path& dir, bool empty_session = false);
SessionMetrics parse_report(const std::filesystem::path& dir);

}  // namespace cgreplay
