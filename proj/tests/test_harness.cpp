#include "subt_beacon/harness.hpp"

#include "subt_beacon/csv.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace subt_beacon;

namespace {

const std::filesystem::path kScenarioDir = BEACON_SCENARIO_DIR;

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "beacon_harness" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int run_cli(std::vector<std::string> args) {
  std::vector<const char*> argv{"subt_beacon"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return harness::run_cli(static_cast<int>(argv.size()), argv.data());
}

/// A short scenario written into `dir` so runs stay fast.
std::filesystem::path short_scenario(const std::filesystem::path& dir,
                                     double duration_s = 4.0) {
  std::filesystem::copy_file(kScenarioDir / "defaults.toml",
                             dir / "defaults.toml",
                             std::filesystem::copy_options::overwrite_existing);
  const auto path = dir / "short.toml";
  std::ofstream out(path);
  out << "name = \"short\"\nduration_s = " << duration_s << "\n"
      << "[world]\nwalls = [[-5.0, -3.0, 20.0, -3.0], [-5.0, 3.0, 20.0, 3.0]]\n"
      << "[[world.marker]]\ncenter = [-2.0, 2.9, 1.2]\nwidth = 0.5\n"
      << "height = 0.5\nnormal_yaw = -1.5707963267948966\n"
      << "[target]\nwaypoints = [[4.0, 0.0]]\nspeed = 0.0\n";
  out.close();
  return path;
}

}  // namespace

TEST_CASE("sim run writes one metrics row per seed and the full log bundle") {
  const auto dir = fresh_dir("sim_run");
  const auto scenario = short_scenario(dir);
  const auto out = dir / "out";
  const int rc = harness::cli_sim_run(scenario, out,
                                      std::vector<std::uint64_t>{1, 2, 3});
  CHECK(rc == harness::kExitOk);
  csv::Reader metrics((out / "metrics.csv").string(), episode::kMetricsHeader);
  std::vector<std::string> fields;
  int rows = 0;
  while (metrics.next(fields)) ++rows;
  CHECK(rows == 3);
  for (const char* file :
       {"events.csv", "cloud.csv", "pose.csv", "detections.csv", "control.csv"}) {
    CHECK(std::filesystem::exists(out / "seed_2" / file));
  }
}

TEST_CASE("missing scenario file exits with the parse code") {
  CHECK(run_cli({"sim", "run", "/nonexistent/nope.toml"}) == harness::kExitParse);
}

TEST_CASE("a scenario referencing a missing world exits with the parse code") {
  const auto dir = fresh_dir("missing_world");
  const auto path = dir / "bad.toml";
  {
    std::ofstream out(path);
    out << "name = \"bad\"\n[world]\nfile = \"gone.toml\"\n";
  }
  CHECK(run_cli({"sim", "run", path.string(), "--out", (dir / "out").string()}) ==
        harness::kExitParse);
}

TEST_CASE("identical seeds produce byte-identical logs") {
  const auto dir = fresh_dir("determinism");
  const auto scenario = short_scenario(dir);
  REQUIRE(harness::cli_sim_run(scenario, dir / "a",
                               std::vector<std::uint64_t>{5}) == 0);
  REQUIRE(harness::cli_sim_run(scenario, dir / "b",
                               std::vector<std::uint64_t>{5}) == 0);
  for (const char* file :
       {"events.csv", "cloud.csv", "pose.csv", "detections.csv", "control.csv"}) {
    CAPTURE(file);
    CHECK(slurp(dir / "a" / "seed_5" / file) == slurp(dir / "b" / "seed_5" / file));
  }
  CHECK(slurp(dir / "a" / "metrics.csv") == slurp(dir / "b" / "metrics.csv"));
}

TEST_CASE("replay reproduces the live detections byte for byte") {
  const auto dir = fresh_dir("replay");
  const auto scenario = short_scenario(dir);
  REQUIRE(harness::cli_sim_run(scenario, dir / "live",
                               std::vector<std::uint64_t>{7}) == 0);
  const auto seed_dir = dir / "live" / "seed_7";
  const auto replayed = dir / "replayed.csv";
  const int rc = harness::cli_replay(seed_dir / "events.csv",
                                     seed_dir / "cloud.csv",
                                     seed_dir / "pose.csv", scenario, replayed);
  CHECK(rc == harness::kExitOk);
  CHECK(slurp(replayed) == slurp(seed_dir / "detections.csv"));
}

TEST_CASE("replay with header-only inputs yields an empty detections file") {
  const auto dir = fresh_dir("replay_empty");
  {
    std::ofstream(dir / "events.csv") << "t_us,x,y,p\n";
    std::ofstream(dir / "cloud.csv") << "scan_id,t_us,x,y,z,intensity\n";
    std::ofstream(dir / "pose.csv") << "t_us,x,y,yaw\n";
  }
  const auto out = dir / "detections.csv";
  const int rc = harness::cli_replay(dir / "events.csv", dir / "cloud.csv",
                                     dir / "pose.csv", std::nullopt, out);
  CHECK(rc == harness::kExitOk);
  CHECK(slurp(out) == std::string(pipeline::kDetectionsHeader) + "\n");
}

TEST_CASE("replay without events classifies frames lidar-only or none") {
  const auto dir = fresh_dir("replay_lidar_only");
  const auto scenario = short_scenario(dir);
  REQUIRE(harness::cli_sim_run(scenario, dir / "live",
                               std::vector<std::uint64_t>{3}) == 0);
  const auto seed_dir = dir / "live" / "seed_3";
  {
    std::ofstream(dir / "no_events.csv") << "t_us,x,y,p\n";
  }
  const auto out = dir / "det.csv";
  REQUIRE(harness::cli_replay(dir / "no_events.csv", seed_dir / "cloud.csv",
                              seed_dir / "pose.csv", scenario, out) == 0);
  csv::Reader in(out.string(), pipeline::kDetectionsHeader);
  std::vector<std::string> fields;
  int rows = 0;
  while (in.next(fields)) {
    CHECK((fields[1] == "lidar_only" || fields[1] == "none_detect"));
    ++rows;
  }
  CHECK(rows > 0);
}

TEST_CASE("replay rejects malformed rows naming the line") {
  const auto dir = fresh_dir("replay_bad");
  {
    std::ofstream(dir / "events.csv") << "t_us,x,y,p\n100,5,5,1\n90,5,5,banana\n";
    std::ofstream(dir / "cloud.csv")
        << "scan_id,t_us,x,y,z,intensity\n0,100000,1,0,0,80\n";
    std::ofstream(dir / "pose.csv") << "t_us,x,y,yaw\n";
  }
  CHECK(run_cli({"replay", "--events", (dir / "events.csv").string(), "--cloud",
                 (dir / "cloud.csv").string(), "--pose",
                 (dir / "pose.csv").string(), "--out",
                 (dir / "out.csv").string()}) == harness::kExitParse);
}

TEST_CASE("replay rejects non-monotone event timestamps") {
  const auto dir = fresh_dir("replay_nonmono");
  {
    std::ofstream(dir / "events.csv")
        << "t_us,x,y,p\n100,5,5,1\n90,5,5,1\n";
    std::ofstream(dir / "cloud.csv")
        << "scan_id,t_us,x,y,z,intensity\n0,100000,1,0,0,80\n";
    std::ofstream(dir / "pose.csv") << "t_us,x,y,yaw\n";
  }
  CHECK(run_cli({"replay", "--events", (dir / "events.csv").string(), "--cloud",
                 (dir / "cloud.csv").string(), "--pose",
                 (dir / "pose.csv").string(), "--out",
                 (dir / "out.csv").string()}) == harness::kExitParse);
}

TEST_CASE("metrics aggregates one row per directory and gates on thresholds") {
  const auto dir = fresh_dir("metrics");
  std::filesystem::create_directories(dir / "run1");
  {
    std::ofstream m(dir / "run1" / "metrics.csv");
    m << episode::kMetricsHeader << "\n";
    m << "1,0.01,0.02,1.5,0.95,0.3,0\n";
    m << "2,0.03,0.04,1.6,0.85,0.5,0\n";
  }
  CHECK(harness::cli_metrics({dir / "run1"}, {}) == harness::kExitOk);

  harness::MetricsThresholds gate;
  gate.min_detect_rate = 0.95;  // mean is 0.90, must fail
  CHECK(harness::cli_metrics({dir / "run1"}, gate) == harness::kExitThreshold);

  gate.min_detect_rate = 0.85;
  gate.max_p95_err = 0.01;  // mean p95 is 0.03, must fail
  CHECK(harness::cli_metrics({dir / "run1"}, gate) == harness::kExitThreshold);

  gate.max_p95_err = 0.5;
  CHECK(harness::cli_metrics({dir / "run1"}, gate) == harness::kExitOk);

  // Several directories aggregate to one row each.
  std::filesystem::create_directories(dir / "run2");
  {
    std::ofstream m(dir / "run2" / "metrics.csv");
    m << episode::kMetricsHeader << "\n";
    m << "1,0.02,0.05,1.4,0.99,0.2,0\n";
  }
  CHECK(harness::cli_metrics({dir / "run1", dir / "run2"}, {}) == harness::kExitOk);
  harness::MetricsThresholds strict;
  strict.min_detect_rate = 0.95;  // run1 mean 0.90 fails, run2 passes
  CHECK(harness::cli_metrics({dir / "run1", dir / "run2"}, strict) ==
        harness::kExitThreshold);
}

TEST_CASE("metrics with no inputs or missing files exits with the parse code") {
  CHECK(run_cli({"metrics"}) != harness::kExitOk);
  const auto dir = fresh_dir("metrics_missing");
  CHECK(run_cli({"metrics", dir.string()}) == harness::kExitParse);
}

TEST_CASE("a collision ends the episode and the run exits with code 3") {
  const auto dir = fresh_dir("collision");
  std::filesystem::copy_file(kScenarioDir / "defaults.toml",
                             dir / "defaults.toml",
                             std::filesystem::copy_options::overwrite_existing);
  const auto path = dir / "collide.toml";
  {
    // Knee-high wall across the corridor: visible over it, not driveable.
    std::ofstream out(path);
    out << "name = \"collide\"\nduration_s = 20.0\n"
        << "[world]\nwall_height = 0.6\n"
        << "walls = [[-5.0, -3.0, 20.0, -3.0], [-5.0, 3.0, 20.0, 3.0], "
           "[1.2, -3.0, 1.2, 3.0]]\n"
        << "[target]\nwaypoints = [[5.0, 0.0]]\nspeed = 0.0\n";
  }
  CHECK(run_cli({"sim", "run", path.string(), "--out",
                 (dir / "out").string()}) == harness::kExitCollision);
  csv::Reader metrics((dir / "out" / "metrics.csv").string(),
                      episode::kMetricsHeader);
  std::vector<std::string> fields;
  REQUIRE(metrics.next(fields));
  CHECK(fields[6] == "1");
}

TEST_CASE("seed override list is honored end to end") {
  const auto dir = fresh_dir("seed_override");
  const auto scenario = short_scenario(dir, 2.0);
  CHECK(run_cli({"sim", "run", scenario.string(), "--out",
                 (dir / "out").string(), "--seed", "11,12"}) == 0);
  csv::Reader metrics((dir / "out" / "metrics.csv").string(),
                      episode::kMetricsHeader);
  std::vector<std::string> fields;
  std::vector<std::string> episodes;
  while (metrics.next(fields)) episodes.push_back(fields[0]);
  CHECK(episodes == std::vector<std::string>{"11", "12"});
}
