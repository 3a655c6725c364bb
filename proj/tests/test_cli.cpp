#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>

#include "cgreplay/metrics.hpp"
#include "support.hpp"

using namespace cgreplay;

namespace {

int cli(const std::string& args) {
  const auto cmd = std::string(CGREPLAY_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string sim_args(const std::filesystem::path& dir, const std::string& extra) {
  return "sim --server-config " + (dir / "server.yaml").string() + " --player-config " +
         (dir / "player.yaml").string() + " --channel-config " + (dir / "channel.yaml").string() + " " + extra;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(cli("") == 1);
  CHECK(cli("bogus") == 1);
  CHECK(cli("gen-trace --frames 3") == 1);
  CHECK(cli("gen-trace --frames x --out /tmp/x") == 1);
}

TEST_CASE("gen-trace, sim, report on defaults") {
  const auto dir = testing::scratch_dir("cli_pipeline");
  REQUIRE(cli("gen-trace --frames 7 --cmd-point 3:2 --cmd-point 5:1 --out " + dir.string()) == 0);
  CHECK(std::filesystem::exists(dir / "sync_order.txt"));
  REQUIRE(cli(sim_args(dir, "--log " + (dir / "events.csv").string())) == 0);
  REQUIRE(cli("report --log " + (dir / "events.csv").string() + " --out " + (dir / "rep").string()) == 0);
  const auto m = parse_report(dir / "rep");
  CHECK(m.outcome == "done");
  CHECK(m.frames_stored == 7);
  CHECK(m.response_times.size() == 2);
}

TEST_CASE("scripted command loss shows up in the report") {
  const auto dir = testing::scratch_dir("cli_loss");
  REQUIRE(cli("gen-trace --frames 7 --cmd-point 3:2 --cmd-point 5:1 --out " + dir.string()) == 0);
  write_file(dir / "server.yaml", "trace_dir: .\nwindow_w: 3\nslide_frames: 0\n");
  REQUIRE(cli(sim_args(dir, "--fault uplink,command_id:1,drop --fault uplink,command_id:2,drop --log " +
                                (dir / "events.csv").string())) == 0);
  REQUIRE(cli("report --log " + (dir / "events.csv").string() + " --out " + (dir / "rep").string()) == 0);
  CHECK(parse_report(dir / "rep").command_resends >= 1);
}

TEST_CASE("sim seeds: same seed same log, other seed other log") {
  const auto dir = testing::scratch_dir("cli_seed");
  REQUIRE(cli("gen-trace --frames 50 --cmd-point 4:2 --cmd-point 20:1 --out " + dir.string()) == 0);
  write_file(dir / "channel.yaml",
             "downlink: {loss_prob: 0.1, base_delay_us: 5000, jitter_us: 2000}\n"
             "uplink: {loss_prob: 0.1, base_delay_us: 5000, jitter_us: 2000}\n");
  const auto a = dir / "a.csv", b = dir / "b.csv", c = dir / "c.csv";
  REQUIRE(cli(sim_args(dir, "--seed 7 --log " + a.string())) == 0);
  REQUIRE(cli(sim_args(dir, "--seed 7 --log " + b.string())) == 0);
  REQUIRE(cli(sim_args(dir, "--seed 8 --log " + c.string())) == 0);
  CHECK(read_file(a) == read_file(b));
  CHECK(read_file(a) != read_file(c));
}

TEST_CASE("config and input errors exit 2") {
  const auto dir = testing::scratch_dir("cli_bad");
  CHECK(cli(sim_args(dir, "--log " + (dir / "e.csv").string())) == 2);
  CHECK(cli("gen-trace --frames 3 --cmd-point 9:1 --out " + dir.string()) == 2);
  CHECK(cli("report --log " + (dir / "missing.csv").string() + " --out " + dir.string()) == 2);
  REQUIRE(cli("gen-trace --frames 3 --out " + dir.string()) == 0);
  CHECK(cli(sim_args(dir, "--fault sideways,frame_id:1,drop --log " + (dir / "e.csv").string())) == 2);
}

TEST_CASE("an impossible horizon is a runtime failure") {
  const auto dir = testing::scratch_dir("cli_horizon");
  REQUIRE(cli("gen-trace --frames 7 --out " + dir.string()) == 0);
  CHECK(cli(sim_args(dir, "--horizon-us 1000 --log " + (dir / "e.csv").string())) == 3);
  CHECK(std::filesystem::exists(dir / "e.csv"));
}
