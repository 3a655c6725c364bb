#include "cgreplay/event_log.hpp"

#include <algorithm>
#include <charconv>
#include <array>

namespace cgreplay {

namespace {

constexpr std::array<const char*, 3> kActorNames = {"Server", "Player", "Channel"};
constexpr std::array<const char*, 9> kKindNames = {"Sent",          "Delivered",      "Dropped",
                                                   "Retransmitted", "StatusEmitted",  "CommandEmitted",
                                                   "FrameStored",   "Aborted",        "Done"};

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<const char*, N>& names, std::string_view text) {
  for (std::size_t i = 0; i < N; ++i) {
    if (text == names[i]) return static_cast<Enum>(i);
  }
  return std::nullopt;
}

}  // namespace

const char* to_string(Actor actor) { return kActorNames.at(static_cast<std::size_t>(actor)); }
const char* to_string(EventKind kind) { return kKindNames.at(static_cast<std::size_t>(kind)); }

std::map<std::string, std::string, std::less<>> parse_subject(std::string_view subject) {
  std::map<std::string, std::string, std::less<>> out;
  std::size_t start = 0;
  while (start < subject.size()) {
    auto end = subject.find(';', start);
    if (end == std::string_view::npos) end = subject.size();
    const auto pair = subject.substr(start, end - start);
    const auto eq = pair.find('=');
    if (eq == std::string_view::npos) {
      out.emplace(std::string(pair), "");
    } else {
      out.insert_or_assign(std::string(pair.substr(0, eq)), std::string(pair.substr(eq + 1)));
    }
    start = end + 1;
  }
  return out;
}

std::string describe_message(const Message& msg) {
  Subject s;
  if (const auto* c = std::get_if<FrameChunk>(&msg)) {
    s.add("msg", "frame").add("frame_id", c->frame_id).add("chunk", c->chunk_index).add("chunks", c->total_chunks);
  } else if (const auto* m = std::get_if<CommandMsg>(&msg)) {
    s.add("msg", "command").add("cmd_id", m->command_id).add("ack", to_string(m->ack_kind));
    s.add("acked", m->acked_frame_id);
  } else if (const auto* st = std::get_if<StatusMsg>(&msg)) {
    s.add("msg", "status").add("kind", to_string(st->kind)).add("window_end", st->window_end_frame_id);
    s.add("next_expected", st->next_expected_frame_id);
  }
  return s;
}

std::string format_event_log(const EventLog& log) {
  std::string out = "time_us,actor,kind,subject\n";
  for (const auto& e : log) {
    out += std::to_string(e.time_us);
    out += ',';
    out += to_string(e.actor);
    out += ',';
    out += to_string(e.kind);
    out += ',';
    out += e.subject;
    out += '\n';
  }
  return out;
}

EventLog parse_event_log(std::string_view csv) {
  EventLog log;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < csv.size()) {
    auto end = csv.find('\n', start);
    if (end == std::string_view::npos) end = csv.size();
    auto line = csv.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1) {
      if (line != "time_us,actor,kind,subject") throw LogError("event log: missing CSV header");
      continue;
    }
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
    const auto c3 = c2 == std::string_view::npos ? c2 : line.find(',', c2 + 1);
    if (c3 == std::string_view::npos) throw LogError("event log line " + std::to_string(line_no) + ": 4 fields");
    SimEvent e;
    const auto t = line.substr(0, c1);
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), e.time_us);
    if (ec != std::errc{} || ptr != t.data() + t.size()) {
      throw LogError("event log line " + std::to_string(line_no) + ": bad time_us");
    }
    const auto actor = lookup<Actor>(kActorNames, line.substr(c1 + 1, c2 - c1 - 1));
    const auto kind = lookup<EventKind>(kKindNames, line.substr(c2 + 1, c3 - c2 - 1));
    if (!actor || !kind) throw LogError("event log line " + std::to_string(line_no) + ": unknown actor or kind");
    e.actor = *actor;
    e.kind = *kind;
    e.subject = std::string(line.substr(c3 + 1));
    if (!log.empty() && e.time_us < log.back().time_us) {
      throw LogError("event log line " + std::to_string(line_no) + ": time goes backwards");
    }
    log.push_back(std::move(e));
  }
  if (line_no == 0) throw LogError("event log: empty file");
  return log;
}

void write_event_log(const std::filesystem::path& path, const EventLog& log) {
  write_file(path, format_event_log(log));
}

EventLog read_event_log(const std::filesystem::path& path) {
  try {
    return parse_event_log(read_file(path));
  } catch (const TraceError& e) {
    throw LogError(e.what());
  }
}

EventLog merge_event_logs(const std::vector<EventLog>& logs) {
  EventLog out;
  for (const auto& l : logs) out.insert(out.end(), l.begin(), l.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const SimEvent& a, const SimEvent& b) { return a.time_us < b.time_us; });
  return out;
}

}  // namespace cgreplay
