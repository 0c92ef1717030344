#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "theas/errors.hpp"
#include "theas/experiment.hpp"

using namespace theas::experiment;
namespace fs = std::filesystem;
using theas::config::default_config;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / "theas_experiment_tests" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> read_kv(const fs::path& p) {
  std::map<std::string, std::string> out;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

const std::string kFixture =
    std::string(THEAS_SOURCE_DIR) + "/tests/fixtures/stats_3dumps_2cores.txt";

}  // namespace

TEST_CASE("simulate writes the CSV, summary and config") {
  auto cfg = default_config();
  cfg.workload = theas::config::preset_workload("fmm");
  cfg.output_dir = fresh_dir("simulate").string();
  std::ostringstream out, err;
  REQUIRE(guarded([&] { return cmd_simulate(cfg, out, err); }, err) == kOk);

  const auto csv = read_csv(fs::path(cfg.output_dir) / "timeseries.csv");
  REQUIRE(csv.size() > 1);
  CHECK(slurp(fs::path(cfg.output_dir) / "timeseries.csv").starts_with(std::string(kCsvHeader)));
  CHECK(csv[1].size() == 10);
  CHECK(fs::exists(fs::path(cfg.output_dir) / "transitions.csv"));
  CHECK(fs::exists(fs::path(cfg.output_dir) / "config.json"));
  CHECK(out.str().find("average_cpu_power_w=") != std::string::npos);

  SUBCASE("summary figures follow from the CSV") {
    const auto summary = read_kv(fs::path(cfg.output_dir) / "summary.txt");
    const double window = std::stod(summary.at("window_s"));
    double energy = 0.0, l2 = 0.0;
    for (std::size_t i = 1; i < csv.size(); ++i) {
      energy += std::stod(csv[i][8]) * window;
      l2 += std::stod(csv[i][9]) * window;
      CHECK(std::stod(csv[i][8]) >= 0.0);
      CHECK(std::stod(csv[i][6]) <= 1.0);  // miss rate
    }
    const double elapsed = std::stod(summary.at("elapsed_s"));
    CHECK(energy == doctest::Approx(std::stod(summary.at("cpu_energy_j"))).epsilon(1e-9));
    CHECK(l2 == doctest::Approx(std::stod(summary.at("l2_energy_j"))).epsilon(1e-9));
    CHECK(energy / elapsed ==
          doctest::Approx(std::stod(summary.at("average_cpu_power_w"))).epsilon(1e-9));
    CHECK(summary.at("replayed") == "false");
  }
}

TEST_CASE("same seed gives byte-identical CSV") {
  auto cfg = default_config();
  const auto a = fresh_dir("det_a"), b = fresh_dir("det_b");
  std::ostringstream out, err;
  cfg.output_dir = a.string();
  REQUIRE(cmd_simulate(cfg, out, err) == kOk);
  cfg.output_dir = b.string();
  REQUIRE(cmd_simulate(cfg, out, err) == kOk);
  const auto csv = slurp(a / "timeseries.csv");
  CHECK(csv.size() > std::string(kCsvHeader).size());
  CHECK(csv == slurp(b / "timeseries.csv"));
}

TEST_CASE("duration 0 is rejected before any run") {
  auto cfg = default_config();
  cfg.sim.duration = 0;
  cfg.output_dir = fresh_dir("zero").string();
  std::ostringstream out, err;
  CHECK(guarded([&] { return cmd_simulate(cfg, out, err); }, err) == kConfigError);
  CHECK_FALSE(fs::exists(cfg.output_dir));
}

TEST_CASE("unwritable output is an I/O error") {
  const auto blocker = fresh_dir("blocker");
  fs::create_directories(blocker.parent_path());
  std::ofstream(blocker) << "file, not a directory";
  auto cfg = default_config();
  cfg.workload = theas::config::preset_workload("fmm");
  cfg.output_dir = (blocker / "out").string();
  std::ostringstream out, err;
  CHECK(guarded([&] { return cmd_simulate(cfg, out, err); }, err) == kIoError);
  fs::remove(blocker);
}

TEST_CASE("compare") {
  std::ostringstream out, err;
  SUBCASE("defaults report a positive improvement") {
    auto cfg = default_config();
    cfg.output_dir = fresh_dir("compare").string();
    REQUIRE(cmd_compare(cfg, out, err) == kOk);
    const auto report = read_kv(fs::path(cfg.output_dir) / "comparison.txt");
    CHECK(std::stod(report.at("improvement_percent")) > 0.0);
    CHECK(report.at("warnings") == "0");
    CHECK(fs::exists(fs::path(cfg.output_dir) / "theas" / "timeseries.csv"));
    CHECK(fs::exists(fs::path(cfg.output_dir) / "baseline" / "summary.txt"));
  }
  SUBCASE("a run against itself is 0%") {
    auto cfg = default_config();
    cfg.compare_runs = {{"a", true, {}}, {"b", true, {}}};
    cfg.output_dir = fresh_dir("compare_self").string();
    REQUIRE(cmd_compare(cfg, out, err) == kOk);
    CHECK(std::stod(read_kv(fs::path(cfg.output_dir) / "comparison.txt")
                        .at("improvement_percent")) == 0.0);
  }
  SUBCASE("two fixed levels compare fine") {
    auto cfg = default_config();
    cfg.compare_runs = {{"medium", false, {theas::sched::ResourceLevel::kMedium}},
                        {"high", false, {theas::sched::ResourceLevel::kHigh}}};
    cfg.output_dir = fresh_dir("compare_fixed").string();
    CHECK(cmd_compare(cfg, out, err) == kOk);
    CHECK(fs::exists(fs::path(cfg.output_dir) / "comparison.txt"));
  }
  SUBCASE("labels must differ") {
    auto cfg = default_config();
    cfg.compare_runs = {{"x", true, {}}, {"x", false, {}}};
    CHECK(guarded([&] { return cmd_compare(cfg, out, err); }, err) == kConfigError);
  }
}

TEST_CASE("replay") {
  std::ostringstream out, err;
  auto cfg = default_config();
  SUBCASE("fixture gives one row per dump per core") {
    cfg.replay.stats_path = kFixture;
    cfg.output_dir = fresh_dir("replay").string();
    REQUIRE(cmd_replay(cfg, out, err) == kOk);
    const auto csv = read_csv(fs::path(cfg.output_dir) / "timeseries.csv");
    REQUIRE(csv.size() == 7);
    CHECK(csv[1][0] == "0.1");
    CHECK(csv[1][1] == "0");
    CHECK(csv[2][1] == "1");
    CHECK(csv[6][0] == "0.3");
    const auto summary = read_kv(fs::path(cfg.output_dir) / "summary.txt");
    CHECK(summary.at("replayed") == "true");
    CHECK(summary.at("core_count") == "2");

    double energy = 0.0, previous = 0.0;
    for (std::size_t i = 1; i < csv.size(); i += 2) {
      const double t = std::stod(csv[i][0]);
      energy += (std::stod(csv[i][8]) + std::stod(csv[i + 1][8])) * (t - previous);
      previous = t;
    }
    CHECK(energy == doctest::Approx(std::stod(summary.at("cpu_energy_j"))).epsilon(1e-9));
  }
  SUBCASE("windowed values come from differenced counters") {
    const auto parsed = theas::stats::parse_stats_text(slurp(kFixture));
    const auto r = replay(parsed, cfg);
    REQUIRE(r.rows.size() == 6);
    // Core 0 accesses grow by 3e7 per dump, 1% of them miss.
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(r.rows[2 * k].metrics.cache_miss_rate == doctest::Approx(0.01));
    CHECK(r.elapsed_s == doctest::Approx(0.3));
  }
  SUBCASE("zero blocks give a header-only CSV") {
    const auto empty = fresh_dir("replay_empty_input");
    fs::create_directories(empty);
    std::ofstream(empty / "stats.txt") << "";
    cfg.replay.stats_path = (empty / "stats.txt").string();
    cfg.output_dir = fresh_dir("replay_empty").string();
    REQUIRE(cmd_replay(cfg, out, err) == kOk);
    CHECK(slurp(fs::path(cfg.output_dir) / "timeseries.csv") == std::string(kCsvHeader) + "\n");
    CHECK(err.str().find("warning") != std::string::npos);
  }
  SUBCASE("missing simSeconds is a data error") {
    const auto dir = fresh_dir("replay_nosim_input");
    fs::create_directories(dir);
    std::ofstream(dir / "stats.txt") << std::string(theas::stats::kBeginMarker)
                                     << "\nsystem.cpu0.ipc 1\n"
                                     << std::string(theas::stats::kEndMarker) << "\n";
    cfg.replay.stats_path = (dir / "stats.txt").string();
    cfg.output_dir = fresh_dir("replay_nosim").string();
    CHECK(guarded([&] { return cmd_replay(cfg, out, err); }, err) == kDataError);
  }
  SUBCASE("diagnostics go to the error stream") {
    const auto dir = fresh_dir("replay_diag_input");
    fs::create_directories(dir);
    std::ofstream(dir / "stats.txt") << "junk before\n" << slurp(kFixture);
    cfg.replay.stats_path = (dir / "stats.txt").string();
    cfg.output_dir = fresh_dir("replay_diag").string();
    REQUIRE(cmd_replay(cfg, out, err) == kOk);
    CHECK(err.str().find("line:1 ") != std::string::npos);
  }
}

TEST_CASE("validate") {
  theas::config::ValidateSettings s;
  s.trials_path = std::string(THEAS_SOURCE_DIR) + "/data/meter_trials.csv";
  s.simulated_power_w = 1.71613;
  auto r = validate_measurement(s);
  CHECK(*r.mean_current_delta_a == doctest::Approx(0.374).epsilon(1e-9));
  CHECK(r.measured_power_w == doctest::Approx(1.947418).epsilon(1e-9));
  CHECK_FALSE(r.measured_from_override);

  s.measured_power_override_w = 1.62;
  r = validate_measurement(s);
  CHECK(r.measured_from_override);
  CHECK(*r.relative_error * 100 == doctest::Approx(5.60).epsilon(1e-3));

  s.simulated_power_w = 1.80737;
  CHECK(*validate_measurement(s).relative_error * 100 == doctest::Approx(10.37).epsilon(1e-3));

  s.simulated_power_w = 1.62;
  CHECK(*validate_measurement(s).relative_error == 0.0);

  theas::config::ValidateSettings empty;
  CHECK_THROWS_AS(validate_measurement(empty), theas::ConfigError);

  auto cfg = default_config();
  cfg.validate = s;
  cfg.output_dir = fresh_dir("validate").string();
  std::ostringstream out, err;
  REQUIRE(cmd_validate(cfg, out, err) == kOk);
  const auto text = read_kv(fs::path(cfg.output_dir) / "validation.txt");
  CHECK(text.at("measured_power_source") == "override");
  CHECK(out.str().find("mean_current_delta_a=") != std::string::npos);
}

TEST_CASE("exception mapping") {
  std::ostringstream err;
  CHECK(guarded([]() -> int { throw theas::ConfigError("c"); }, err) == kConfigError);
  CHECK(guarded([]() -> int { throw theas::IoError("i"); }, err) == kIoError);
  CHECK(guarded([]() -> int { throw theas::DataError("d"); }, err) == kDataError);
  CHECK(guarded([]() -> int { throw std::runtime_error("r"); }, err) == kRuntimeError);
  CHECK(guarded([] { return 0; }, err) == kOk);
}

TEST_CASE("number formatting is shortest round-trip") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1800) == "1800");
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
}
