#include "cgreplay/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>
#include <sstream>

#include "cgreplay/trace_model.hpp"

namespace cgreplay {

namespace {

using Fields = std::map<std::string, std::string, std::less<>>;

const std::string& need(const Fields& f, std::string_view key, const SimEvent& e) {
  const auto it = f.find(key);
  if (it == f.end()) {
    throw LogError("event at " + std::to_string(e.time_us) + " (" + to_string(e.kind) + ") lacks '" +
                   std::string(key) + "'");
  }
  return it->second;
}

template <typename T>
T to_num(std::string_view s, std::string_view what) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw LogError("bad number for " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t num(const Fields& f, std::string_view key, const SimEvent& e) {
  return to_num<std::uint64_t>(need(f, key, e), key);
}

double rate(const std::vector<std::uint64_t>& times) {
  if (times.size() < 2 || times.back() == times.front()) return 0.0;
  return static_cast<double>(times.size() - 1) * 1e6 / static_cast<double>(times.back() - times.front());
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

const char* kReportHeader =
    "outcome,partial,server_fps,player_fps,fps_ratio,frames_first_sent,frames_stored,commands_sent,"
    "commands_received_at_server,command_ratio,frame_retransmissions,command_resends,"
    "frames_lost_then_recovered,rollbacks,frame_datagrams_dropped,command_datagrams_dropped,"
    "status_datagrams_dropped,rt_count,rt_min_us,rt_mean_us,rt_p95_us,rt_max_us";
const char* kResponseHeader = "group_id,send_ts_us,react_ts_us,rt_us";

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

std::vector<std::string_view> lines(std::string_view text) {
  auto out = split(text, '\n');
  if (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

}  // namespace

ResponseSummary summarize(const std::vector<ResponseSample>& samples) {
  ResponseSummary s;
  s.count = samples.size();
  if (samples.empty()) return s;
  std::vector<std::uint64_t> rt;
  for (const auto& x : samples) rt.push_back(x.rt_us);
  std::sort(rt.begin(), rt.end());
  s.min_us = rt.front();
  s.max_us = rt.back();
  double sum = 0.0;
  for (auto v : rt) sum += static_cast<double>(v);
  s.mean_us = sum / static_cast<double>(rt.size());
  const auto rank = (95 * rt.size() + 99) / 100;  // ceil(0.95 n)
  s.p95_us = rt[std::max<std::size_t>(rank, 1) - 1];
  return s;
}

SessionMetrics compute_metrics(const EventLog& log) {
  SessionMetrics m;
  std::vector<std::uint64_t> first_sends;
  std::vector<std::uint64_t> stores;
  std::set<std::uint64_t> dropped_frames;
  std::set<std::uint64_t> stored_ids;
  std::map<std::uint64_t, std::uint64_t> stored_at;  // frame id -> time
  struct Pending {
    std::uint64_t send_ts;
    std::uint64_t gated_frame;
  };
  std::map<std::uint64_t, Pending> groups;  // group id -> last command first emission

  for (const auto& e : log) {
    const auto f = parse_subject(e.subject);
    switch (e.kind) {
      case EventKind::Sent:
        if (e.actor == Actor::Server && need(f, "msg", e) == "frame" && num(f, "chunk", e) == 0 &&
            num(f, "retx", e) == 0) {
          first_sends.push_back(e.time_us);
        }
        break;
      case EventKind::Delivered:
        if (e.actor == Actor::Server) {
          if (need(f, "msg", e) == "command") ++m.commands_received_at_server;
          if (f.count("rollback")) ++m.rollbacks;
        }
        break;
      case EventKind::Dropped: {
        const auto& msg = need(f, "msg", e);
        if (msg == "frame") {
          ++m.frame_datagrams_dropped;
          dropped_frames.insert(num(f, "frame_id", e));
        } else if (msg == "command") {
          ++m.command_datagrams_dropped;
        } else {
          ++m.status_datagrams_dropped;
        }
        break;
      }
      case EventKind::Retransmitted:
        ++m.frame_retransmissions;
        break;
      case EventKind::CommandEmitted: {
        ++m.commands_sent;
        const auto pos = num(f, "pos", e);
        const bool resend = num(f, "resend", e) != 0;
        if (resend && pos == 1) ++m.command_resends;
        if (!resend && pos == num(f, "of", e)) {
          groups.try_emplace(num(f, "group", e), Pending{e.time_us, num(f, "gated_frame", e)});
        }
        break;
      }
      case EventKind::FrameStored: {
        const auto id = num(f, "frame_id", e);
        stores.push_back(e.time_us);
        stored_ids.insert(id);
        stored_at.try_emplace(id, e.time_us);
        break;
      }
      case EventKind::Done:
        m.outcome = "done";
        m.partial = false;
        break;
      case EventKind::Aborted:
        m.outcome = "aborted";
        break;
      case EventKind::StatusEmitted:
        break;
    }
  }

  m.frames_first_sent = first_sends.size();
  m.frames_stored = stores.size();
  m.server_fps = rate(first_sends);
  m.player_fps = rate(stores);
  m.fps_ratio = m.player_fps > 0.0 ? m.server_fps / m.player_fps : 0.0;
  m.command_ratio = m.commands_sent ? static_cast<double>(m.commands_received_at_server) /
                                          static_cast<double>(m.commands_sent)
                                    : 0.0;
  for (auto id : dropped_frames) m.frames_lost_then_recovered += stored_ids.count(id);
  for (const auto& [group, p] : groups) {
    if (p.gated_frame == 0) continue;
    const auto it = stored_at.find(p.gated_frame);
    if (it == stored_at.end() || it->second < p.send_ts) continue;
    m.response_times.push_back(
        ResponseSample{static_cast<std::uint32_t>(group), p.send_ts, it->second, it->second - p.send_ts});
  }
  m.summary = summarize(m.response_times);
  return m;
}

std::string format_report(const SessionMetrics& m) {
  std::ostringstream out;
  out << kReportHeader << '\n'
      << m.outcome << ',' << (m.partial ? 1 : 0) << ',' << fmt(m.server_fps) << ',' << fmt(m.player_fps) << ','
      << fmt(m.fps_ratio) << ',' << m.frames_first_sent << ',' << m.frames_stored << ',' << m.commands_sent << ','
      << m.commands_received_at_server << ',' << fmt(m.command_ratio) << ',' << m.frame_retransmissions << ','
      << m.command_resends << ',' << m.frames_lost_then_recovered << ',' << m.rollbacks << ','
      << m.frame_datagrams_dropped << ',' << m.command_datagrams_dropped << ',' << m.status_datagrams_dropped << ','
      << m.summary.count << ',' << m.summary.min_us << ',' << fmt(m.summary.mean_us) << ',' << m.summary.p95_us
      << ',' << m.summary.max_us << '\n';
  return out.str();
}

std::string format_response_times(const SessionMetrics& m) {
  std::string out = std::string(kResponseHeader) + "\n";
  for (const auto& s : m.response_times) {
    out += std::to_string(s.group_id) + ',' + std::to_string(s.send_ts_us) + ',' + std::to_string(s.react_ts_us) +
           ',' + std::to_string(s.rt_us) + '\n';
  }
  return out;
}

void write_report(const SessionMetrics& m, const std::filesystem::path& dir, bool empty_session) {
  std::filesystem::create_directories(dir);
  if (empty_session) {
    write_file(dir / kReportFile, std::string(kReportHeader) + "\n");
    write_file(dir / kResponseTimesFile, std::string(kResponseHeader) + "\n");
    return;
  }
  write_file(dir / kReportFile, format_report(m));
  write_file(dir / kResponseTimesFile, format_response_times(m));
}

SessionMetrics parse_report(const std::filesystem::path& dir) {
  SessionMetrics m;
  const auto report = read_file(dir / kReportFile);
  const auto rows = lines(report);
  if (rows.empty() || rows[0] != kReportHeader) throw LogError("report.csv: bad header");
  if (rows.size() > 2) throw LogError("report.csv: expected one data row");
  if (rows.size() == 2) {
    const auto c = split(rows[1], ',');
    if (c.size() != 22) throw LogError("report.csv: expected 22 columns");
    std::size_t i = 0;
    auto u = [&] { return to_num<std::uint64_t>(c[i++], "report"); };
    auto d = [&] { return to_num<double>(c[i++], "report"); };
    m.outcome = std::string(c[i++]);
    m.partial = u() != 0;
    m.server_fps = d();
    m.player_fps = d();
    m.fps_ratio = d();
    m.frames_first_sent = u();
    m.frames_stored = u();
    m.commands_sent = u();
    m.commands_received_at_server = u();
    m.command_ratio = d();
    m.frame_retransmissions = u();
    m.command_resends = u();
    m.frames_lost_then_recovered = u();
    m.rollbacks = u();
    m.frame_datagrams_dropped = u();
    m.command_datagrams_dropped = u();
    m.status_datagrams_dropped = u();
    m.summary.count = u();
    m.summary.min_us = u();
    m.summary.mean_us = d();
    m.summary.p95_us = u();
    m.summary.max_us = u();
  }

  const auto samples = read_file(dir / kResponseTimesFile);
  const auto srows = lines(samples);
  if (srows.empty() || srows[0] != kResponseHeader) throw LogError("response_times.csv: bad header");
  for (std::size_t r = 1; r < srows.size(); ++r) {
    const auto c = split(srows[r], ',');
    if (c.size() != 4) throw LogError("response_times.csv: expected 4 columns");
    m.response_times.push_back(ResponseSample{to_num<std::uint32_t>(c[0], "group_id"),
                                              to_num<std::uint64_t>(c[1], "send_ts_us"),
                                              to_num<std::uint64_t>(c[2], "react_ts_us"),
                                              to_num<std::uint64_t>(c[3], "rt_us")});
  }
  return m;
}

}  // namespace cgreplay
