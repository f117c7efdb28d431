#include <doctest.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Result {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

Result run_cli(const std::string& args) {
  const std::string cmd = std::string(SPAIS_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("spais_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("estimate writes a result file and prints the estimate") {
  const auto dir = fresh_dir("estimate");
  const auto r = run_cli("estimate --env toy --method mc --n 20000 --seed 1 --out " + dir.string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("mu_hat") != std::string::npos);
  CHECK(fs::exists(dir / "toy_mc_seed1.json"));
  CHECK(fs::exists(dir / "toy_mc_seed1_metrics.csv"));
}

TEST_CASE("unknown environments fail with a message") {
  const auto r = run_cli("estimate --env nosuch --method mc --n 10 --seed 1 --out " + fresh_dir("bad").string());
  CHECK(r.exit_code != 0);
  CHECK(r.output.find("unknown environment 'nosuch'") != std::string::npos);
}

TEST_CASE("estimation commands require --seed") {
  const auto r = run_cli("estimate --env toy --method mc --n 10");
  CHECK(r.exit_code != 0);
  CHECK(r.output.find("--seed") != std::string::npos);
}

TEST_CASE("bad parameter overrides are rejected") {
  CHECK(run_cli("estimate --env pendulum --param nope=1 --n 10 --seed 1 --out " + fresh_dir("p1").string()).exit_code != 0);
  CHECK(run_cli("estimate --env pendulum --param disturbance_std --n 10 --seed 1 --out " + fresh_dir("p2").string()).exit_code != 0);
}

TEST_CASE("trials refuse to run without a ground truth unless asked to compute it") {
  const auto dir = fresh_dir("trials");
  const std::string common = "trials --env toy --method mc --budget 1000 --trials 2 --seed 3 --gt-samples 100000 --out " +
                             dir.string() + " --gt-cache " + (dir / "gt").string();
  const auto missing = run_cli(common);
  CHECK(missing.exit_code != 0);
  CHECK(missing.output.find("ground truth") != std::string::npos);
  const auto computed = run_cli(common + " --compute-gt");
  CHECK(computed.exit_code == 0);
  CHECK(fs::exists(dir / "trials_toy_mc_seed3" / "summary.csv"));
  CHECK(run_cli(common).exit_code == 0);
}

TEST_CASE("ground-truth command caches its result") {
  const auto dir = fresh_dir("gt");
  const std::string cmd = "ground-truth --env toy --n 50000 --seed 2 --gt-cache " + dir.string();
  const auto first = run_cli(cmd);
  CHECK(first.exit_code == 0);
  CHECK(first.output.find("cached no") != std::string::npos);
  const auto second = run_cli(cmd);
  CHECK(second.exit_code == 0);
  CHECK(second.output.find("cached yes") != std::string::npos);
}

TEST_CASE("export-traj dumps a CSV with one row per timestep") {
  const auto dir = fresh_dir("export");
  const auto out = dir / "traj.csv";
  const auto r = run_cli("export-traj --env pendulum --method mc --count 5 --seed 4 --output " + out.string());
  CHECK(r.exit_code == 0);
  const auto csv = slurp(out);
  CHECK(csv.rfind("trajectory_id,t,state_0,state_1,x_0,log_nominal,log_proposal,f_value,next_state_0,next_state_1\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 5 * 20);
}

TEST_CASE("config files and flag overrides") {
  const auto dir = fresh_dir("config");
  std::ofstream(dir / "c.json") << R"({"environment": {"name": "toy", "params": {"gamma": 1.0}}, "method": "mc", "sample_budget": 5000})";
  const auto r = run_cli("estimate --config " + (dir / "c.json").string() + " --seed 9 --out " + dir.string());
  CHECK(r.exit_code == 0);
  const auto j = slurp(dir / "toy_mc_seed9.json");
  CHECK(j.find("\"n_samples\": 5000") != std::string::npos);
  CHECK(j.find("\"gamma\": 1.0") != std::string::npos);

  std::ofstream(dir / "broken.json") << "{";
  const auto bad = run_cli("estimate --config " + (dir / "broken.json").string() + " --seed 9");
  CHECK(bad.exit_code != 0);
  CHECK(bad.output.find("malformed config") != std::string::npos);
}
