#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <catch2/catch_amalgamated.hpp>

namespace fs = std::filesystem;

namespace {

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

CommandResult run_cli(const std::string& args) {
  const fs::path capture =
      fs::temp_directory_path() /
      ("qdet_cli_capture_" + std::to_string(::getpid()) + ".txt");
  const std::string cmd =
      std::string(QDET_CLI_PATH) + " " + args + " > " + capture.string() +
      " 2>&1";
  const int raw = std::system(cmd.c_str());
  CommandResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(capture);
  r.output.assign(std::istreambuf_iterator<char>(in),
                  std::istreambuf_iterator<char>());
  fs::remove(capture);
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const std::string kConfigDir = QDET_CONFIG_DIR;

}  // namespace

TEST_CASE("run writes the full output set and reports statistics") {
  const fs::path out = fs::temp_directory_path() / "qdet_cli_run";
  fs::remove_all(out);
  const CommandResult r =
      run_cli("run --config " + kConfigDir + "/epr_bell.cfg --trials 2000" +
              " --seed 42 --out " + out.string());
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  CHECK(fs::exists(out / "events.jsonl"));
  CHECK(fs::exists(out / "statistics.csv"));
  CHECK(fs::exists(out / "graph.dot"));
  CHECK(fs::exists(out / "differentiation.csv"));
  CHECK(r.output.find("chsh") != std::string::npos);
  // no temporary litter survives a successful run
  for (const auto& entry : fs::directory_iterator(out))
    CHECK(entry.path().extension() != ".tmp");
  fs::remove_all(out);
}

TEST_CASE("seeds fully determine the event log") {
  const fs::path out1 = fs::temp_directory_path() / "qdet_cli_seed1";
  const fs::path out2 = fs::temp_directory_path() / "qdet_cli_seed2";
  fs::remove_all(out1);
  fs::remove_all(out2);
  const std::string base = "run --config " + kConfigDir +
                           "/stern_gerlach.cfg --trials 500 --seed 9 --out ";
  REQUIRE(run_cli(base + out1.string()).exit_code == 0);
  REQUIRE(run_cli(base + out2.string()).exit_code == 0);
  CHECK(slurp(out1 / "events.jsonl") == slurp(out2 / "events.jsonl"));
  fs::remove_all(out1);
  fs::remove_all(out2);
}

TEST_CASE("a missing config file fails with exit 1 naming the path") {
  const CommandResult r = run_cli("run --config /nowhere/missing.cfg");
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("/nowhere/missing.cfg") != std::string::npos);
}

TEST_CASE("config validation failures name every path") {
  const fs::path bad = fs::temp_directory_path() / "qdet_bad.cfg";
  std::ofstream(bad) << "[scenario]\nname = stern_gerlach\n"
                        "[engine]\nkind = grw\ngrw.lambda = -1\n";
  const CommandResult r = run_cli("run --config " + bad.string());
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("grw.lambda must be > 0") != std::string::npos);
  fs::remove(bad);
}

TEST_CASE("bell prints the canonical violation") {
  const CommandResult r =
      run_cli("bell --engine endqt --angles 0,90,45,135 --trials 20000");
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("2.828") != std::string::npos);
  CHECK(r.output.find("analytic") != std::string::npos);
}

TEST_CASE("export-graph rebuilds a DOT file from an event log") {
  const fs::path out = fs::temp_directory_path() / "qdet_cli_export";
  fs::remove_all(out);
  REQUIRE(run_cli("run --config " + kConfigDir +
                  "/epr_bell.cfg --trials 100 --seed 4 --out " + out.string())
              .exit_code == 0);
  const fs::path dag = out / "rebuilt.dot";
  const CommandResult r = run_cli("export-graph --log " +
                                  (out / "events.jsonl").string() + " --out " +
                                  dag.string());
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  const std::string dot = slurp(dag);
  CHECK(dot.find("digraph") != std::string::npos);
  CHECK(dot.find("\"source\"") != std::string::npos);
  fs::remove_all(out);
}

TEST_CASE("export-graph rejects a malformed log with exit 1") {
  const fs::path bad = fs::temp_directory_path() / "qdet_bad_log.jsonl";
  std::ofstream(bad) << "this is not json\n";
  const CommandResult r =
      run_cli("export-graph --log " + bad.string() + " --out /tmp/x.dot");
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("line 1") != std::string::npos);
  fs::remove(bad);
}

TEST_CASE("verify self-checks pass") {
  const CommandResult r = run_cli("verify --suite all");
  INFO(r.output);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("[PASS] bell") != std::string::npos);
  CHECK(r.output.find("[PASS] sweep") != std::string::npos);
  CHECK(r.output.find("[PASS] determinism") != std::string::npos);
  CHECK(r.output.find("[PASS] structures") != std::string::npos);
  CHECK(r.output.find("[FAIL]") == std::string::npos);
}

TEST_CASE("unknown flags and subcommands exit nonzero") {
  CHECK(run_cli("frobnicate").exit_code != 0);
  CHECK(run_cli("run --config x --frob 3").exit_code != 0);
}

TEST_CASE("sweep collects one row per grid value") {
  const fs::path out = fs::temp_directory_path() / "qdet_cli_sweep";
  fs::remove_all(out);
  const CommandResult r = run_cli(
      "sweep --config " + kConfigDir + "/sdc_chain.cfg --param " +
      "scenario.permuted --values false,true --seed 3 --out " + out.string());
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  const std::string table = slurp(out / "sweep_runs.csv");
  CHECK(table.find("scenario.permuted") == 0);
  CHECK(table.find("\nfalse,") != std::string::npos);
  CHECK(table.find("\ntrue,") != std::string::npos);
  fs::remove_all(out);
}
