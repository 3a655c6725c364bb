// cgreplay: trace generation, sync extraction, simulation, UDP agents, reports.
//
// Exit codes: 0 ok, 1 usage, 2 config or input error, 3 runtime failure.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cgreplay/config.hpp"
#include "cgreplay/metrics.hpp"
#include "cgreplay/simulation.hpp"
#include "cgreplay/trace_gen.hpp"
#include "cgreplay/udp_agent.hpp"

namespace fs = std::filesystem;
using namespace cgreplay;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

int fail(int code, const std::string& what) {
  std::cerr << "cgreplay: " << what << '\n';
  return code;
}

int gen_trace(std::uint32_t frames, double fps, const std::vector<std::string>& points, std::uint64_t seed,
              std::size_t body, const fs::path& out) {
  GenSpec spec;
  spec.n_frames = frames;
  spec.fps = fps;
  spec.seed = seed;
  spec.frame_body_size = body;
  for (const auto& p : points) spec.command_points.push_back(parse_command_point(p));
  const auto bundle = generate_trace(spec);
  write_trace_dir(out, bundle);
  write_default_configs(out, fps);
  std::cout << "wrote " << bundle.trace.frames.size() << " frames, " << bundle.trace.commands.size()
            << " commands to " << out.string() << '\n';
  return 0;
}

int extract_sync(const fs::path& commands, const fs::path& manifest, const fs::path& out) {
  const auto c = parse_command_log(read_file(commands));
  const auto f = parse_frame_manifest(read_file(manifest));
  write_file(out, serialize_sync_order(extract_sync_order(f, c)));
  return 0;
}

int sim(const fs::path& server_cfg, const fs::path& player_cfg, const fs::path& channel_cfg,
        const std::vector<std::string>& fault_args, std::optional<std::uint64_t> seed,
        std::optional<std::uint64_t> horizon, const fs::path& log_path) {
  const auto server = load_server_config(server_cfg);
  const auto player = load_player_config(player_cfg);
  auto chan = load_sim_config(channel_cfg);
  for (const auto& f : fault_args) {
    try {
      chan.faults.push_back(parse_fault(f));
    } catch (const FaultSyntaxError& e) {
      throw ConfigError(std::string("--fault: ") + e.what());
    }
  }
  if (seed) chan.channel.seed = *seed;
  if (horizon) chan.horizon_us = *horizon;

  SimOptions options;
  options.payloads = server.payloads;
  options.max_chunk_payload = server.max_chunk_payload;
  if (!player.frames_out_dir.empty()) {
    fs::create_directories(player.frames_out_dir);
    options.on_store = [&](std::uint32_t id, const Bytes& payload) {
      write_file(player.frames_out_dir / ("f_" + std::to_string(id) + ".bin"), payload);
    };
  }
  SimResult result;
  try {
    result = simulate_session(server.agent, player.agent, chan.channel, chan.faults, chan.horizon_us, options);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  write_event_log(log_path, result.log);
  std::cout << "outcome " << to_string(result.outcome) << " at " << result.end_time_us << " us, "
            << result.stored_frames.size() << " frames stored\n";
  if (result.outcome != SimOutcome::Done) return fail(kExitRuntime, to_string(result.outcome) + std::string(": ") + result.diagnosis);
  return 0;
}

int udp(UdpRole role, const fs::path& config, const fs::path& log_path) {
  const auto result = run_udp_agent(role, config, log_path);
  if (result.outcome != UdpOutcome::Ok) {
    return fail(kExitRuntime, std::string(to_string(result.outcome)) + ": " + result.message);
  }
  return 0;
}

int report(const std::vector<fs::path>& logs, const fs::path& out) {
  std::vector<EventLog> parsed;
  for (const auto& l : logs) parsed.push_back(read_event_log(l));
  const auto log = merge_event_logs(parsed);
  const auto m = compute_metrics(log);
  write_report(m, out, log.empty());
  std::cout << "outcome " << m.outcome << ", fps_ratio " << m.fps_ratio << ", command_resends " << m.command_resends
            << ", rollbacks " << m.rollbacks << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cloud-gaming session replay engine"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-trace", "Generate a synthetic capture trace");
  std::uint32_t frames = 0;
  double fps = 30.0;
  std::vector<std::string> points;
  std::uint64_t gen_seed = 1;
  std::size_t body = 64;
  fs::path gen_out;
  gen->add_option("--frames", frames, "Number of frames")->required();
  gen->add_option("--fps", fps, "Frame rate");
  gen->add_option("--cmd-point", points, "AFTER:COUNT command group after a frame");
  gen->add_option("--seed", gen_seed, "Seed");
  gen->add_option("--body-size", body, "Frame body octets");
  gen->add_option("--out", gen_out, "Output directory")->required();

  auto* ext = app.add_subcommand("extract-sync", "Derive the sync order from a command log and manifest");
  fs::path ext_cmds, ext_manifest, ext_out;
  ext->add_option("--commands", ext_cmds)->required();
  ext->add_option("--manifest", ext_manifest)->required();
  ext->add_option("--out", ext_out)->required();

  auto* simc = app.add_subcommand("sim", "Run both agents over the simulated channel");
  fs::path server_cfg, player_cfg, channel_cfg, sim_log;
  std::vector<std::string> faults;
  std::optional<std::uint64_t> sim_seed, horizon;
  simc->add_option("--server-config", server_cfg)->required();
  simc->add_option("--player-config", player_cfg)->required();
  simc->add_option("--channel-config", channel_cfg)->required();
  simc->add_option("--fault", faults, "direction,match,action[,repeat]");
  simc->add_option("--seed", sim_seed, "Override the channel seed");
  simc->add_option("--horizon-us", horizon, "Virtual-time limit");
  simc->add_option("--log", sim_log)->required();

  auto* srv = app.add_subcommand("server", "Run the server over UDP");
  fs::path srv_cfg, srv_log;
  srv->add_option("--config", srv_cfg)->required();
  srv->add_option("--log", srv_log)->required();

  auto* ply = app.add_subcommand("player", "Run the player over UDP");
  fs::path ply_cfg, ply_log;
  ply->add_option("--config", ply_cfg)->required();
  ply->add_option("--log", ply_log)->required();

  auto* rep = app.add_subcommand("report", "Compute metrics from one or more event logs");
  std::vector<fs::path> rep_logs;
  fs::path rep_out;
  rep->add_option("--log", rep_logs)->required();
  rep->add_option("--out", rep_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen) return gen_trace(frames, fps, points, gen_seed, body, gen_out);
    if (*ext) return extract_sync(ext_cmds, ext_manifest, ext_out);
    if (*simc) return sim(server_cfg, player_cfg, channel_cfg, faults, sim_seed, horizon, sim_log);
    if (*srv) return udp(UdpRole::Server, srv_cfg, srv_log);
    if (*ply) return udp(UdpRole::Player, ply_cfg, ply_log);
    if (*rep) return report(rep_logs, rep_out);
  } catch (const ConfigError& e) {
    return fail(kExitConfig, e.what());
  } catch (const SpecError& e) {
    return fail(kExitConfig, e.what());
  } catch (const TraceError& e) {
    return fail(kExitConfig, e.what());
  } catch (const LogError& e) {
    return fail(kExitConfig, e.what());
  } catch (const std::exception& e) {
    return fail(kExitRuntime, e.what());
  }
  return kExitUsage;
}
