#pragma once

// Session event log shared by simulation and UDP modes.
// CSV header: time_us,actor,kind,subject. The subject is a list of k=v pairs
// joined by ';' (e.g. "frame_id=4;retx=1").

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "cgreplay/wire_protocol.hpp"

namespace cgreplay {

enum class Actor : std::uint8_t { Server, Player, Channel };

enum class EventKind : std::uint8_t {
  Sent,
  Delivered,
  Dropped,
  Retransmitted,
  StatusEmitted,
  CommandEmitted,
  FrameStored,
  Aborted,
  Done,
};

const char* to_string(Actor actor);
const char* to_string(EventKind kind);

struct SimEvent {
  std::uint64_t time_us = 0;
  Actor actor = Actor::Server;
  EventKind kind = EventKind::Sent;
  std::string subject;

  bool operator==(const SimEvent&) const = default;
};

using EventLog = std::vector<SimEvent>;

class LogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Builds a subject string; keys keep insertion order.
class Subject {
 public:
  template <typename T>
  Subject& add(std::string_view key, const T& value) {
    if (!text_.empty()) text_ += ';';
    text_ += key;
    text_ += '=';
    if constexpr (std::is_convertible_v<T, std::string_view>) {
      text_ += std::string_view(value);
    } else if constexpr (std::is_same_v<T, bool>) {
      text_ += value ? '1' : '0';
    } else {
      text_ += std::to_string(value);
    }
    return *this;
  }
  Subject& append(std::string_view pairs) {
    if (pairs.empty()) return *this;
    if (!text_.empty()) text_ += ';';
    text_ += pairs;
    return *this;
  }
  const std::string& str() const { return text_; }
  operator std::string() const { return text_; }

 private:
  std::string text_;
};

std::map<std::string, std::string, std::less<>> parse_subject(std::string_view subject);

/// Compact k=v summary of a decoded message, e.g. "msg=frame;frame_id=3;chunk=0;chunks=1".
std::string describe_message(const Message& msg);

std::string format_event_log(const EventLog& log);
EventLog parse_event_log(std::string_view csv);
void write_event_log(const std::filesystem::path& path, const EventLog& log);
EventLog read_event_log(const std::filesystem::path& path);
/// Stable merge of several logs by time_us.
EventLog merge_event_logs(const std::vector<EventLog>& logs);

}  // namespace cgreplay
