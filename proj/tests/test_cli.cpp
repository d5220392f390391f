#include <catch2/catch.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

// Drives the installed binary end to end: exit codes, file outputs, and the
// metrics round trip.

namespace {

namespace fs = std::filesystem;

int run_command(const std::string& args) {
  const std::string cmd =
      std::string(LQRRL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string capture_command(const std::string& args) {
  const fs::path tmp = fs::temp_directory_path() / "lqrrl_cli_capture.txt";
  const std::string cmd = std::string(LQRRL_CLI_PATH) + " " + args + " > " +
                          tmp.string() + " 2>/dev/null";
  std::system(cmd.c_str());
  std::ifstream in(tmp);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

fs::path write_config(const std::string& text) {
  const fs::path path = fs::temp_directory_path() / "lqrrl_cli_test.conf";
  std::ofstream out(path);
  out << text;
  return path;
}

}  // namespace

TEST_CASE("cli: happy path writes all outputs", "[cli]") {
  const fs::path out_dir = fs::temp_directory_path() / "lqrrl_cli_out";
  fs::remove_all(out_dir);
  const fs::path conf = write_config(
      "run.env = pendulum\n"
      "run.agent = dqn\n"
      "run.episodes = 2\n"
      "run.runs = 1\n"
      "agent.hidden = 4\n"
      "agent.warmup = 50\n"
      "agent.batch = 4\n");
  const int code = run_command("run --config " + conf.string() + " --out " +
                               out_dir.string() + " --seed 3");
  REQUIRE(code == 0);
  REQUIRE(fs::exists(out_dir / "curves.csv"));
  REQUIRE(fs::exists(out_dir / "summary.csv"));
  REQUIRE(fs::exists(out_dir / "curve_smoothed.csv"));

  // The metrics subcommand must reproduce summary.csv from curves.csv.
  std::ifstream summary_in(out_dir / "summary.csv");
  std::stringstream expected;
  expected << summary_in.rdbuf();
  const std::string recomputed =
      capture_command("metrics --curves " + (out_dir / "curves.csv").string() +
                      " --threshold -900 --agent dqn --env pendulum");
  REQUIRE(recomputed == expected.str());
  fs::remove_all(out_dir);
}

TEST_CASE("cli: configuration errors exit 1", "[cli]") {
  const fs::path conf = write_config("run.agent = nonsense\n");
  REQUIRE(run_command("run --config " + conf.string()) == 1);

  const fs::path typo = write_config("run.agnet = dqn\n");
  REQUIRE(run_command("run --config " + typo.string()) == 1);

  REQUIRE(run_command("run") == 1);             // missing --config
  REQUIRE(run_command("bogus-subcommand") == 1);
  REQUIRE(run_command("run --config /nonexistent/path.conf") == 1);
}

TEST_CASE("cli: runtime failures exit 2", "[cli]") {
  REQUIRE(run_command("metrics --curves /nonexistent/curves.csv "
                      "--threshold -5") == 2);
}

TEST_CASE("cli: dump-lqr writes controller diagnostics", "[cli]") {
  const fs::path out_dir = fs::temp_directory_path() / "lqrrl_cli_dump";
  fs::remove_all(out_dir);
  const fs::path conf = write_config(
      "run.env = pendulum\n"
      "run.agent = dqn-lqr-ia\n"
      "run.episodes = 1\n"
      "run.runs = 1\n"
      "agent.hidden = 4\n"
      "agent.warmup = 200\n");
  const int code = run_command("run --config " + conf.string() + " --out " +
                               out_dir.string() + " --dump-lqr");
  REQUIRE(code == 0);
  REQUIRE(fs::exists(out_dir / "lqr_run0.csv"));
  std::ifstream dump(out_dir / "lqr_run0.csv");
  std::string text((std::istreambuf_iterator<char>(dump)),
                   std::istreambuf_iterator<char>());
  REQUIRE(text.find(",F,") != std::string::npos);
  REQUIRE(text.find(",a_ff,") != std::string::npos);
  fs::remove_all(out_dir);
}
