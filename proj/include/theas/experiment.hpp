#pragma once

// Experiment pipelines behind the command-line tool. Each cmd_* function
// writes its artifacts under the configured output directory, reports on
// `out`/`err`, and returns a process exit status.
//
// timeseries.csv columns (one row per window per core, time-major):
//   time_s,core_id,level,freq_mhz,voltage_v,ipc,miss_rate,fetch_rate,cpu_power_w,l2_power_w
// time_s is the end of the window. Summaries are flat key=value files whose
// energy and average-power figures are sums over the CSV rows.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "theas/config.hpp"
#include "theas/stats_ingest.hpp"
#include "theas/workload_sim.hpp"

namespace theas::experiment {

enum ExitCode : int {
  kOk = 0,
  kRuntimeError = 1,
  kConfigError = 2,  // also bad command-line usage
  kIoError = 3,
  kDataError = 4,  // unusable statistics or measurement data
};

inline constexpr std::string_view kCsvHeader =
    "time_s,core_id,level,freq_mhz,voltage_v,ipc,miss_rate,fetch_rate,cpu_power_w,l2_power_w";

/// Shortest round-trip decimal form.
std::string format_number(double v);

struct CsvRow {
  double time_s = 0.0;
  std::size_t core_id = 0;
  sched::ResourceLevel level = sched::ResourceLevel::kHigh;
  sched::OperatingPoint operating_point;
  sched::CoreMetrics metrics;
  double cpu_power_w = 0.0;
  double l2_power_w = 0.0;
};

std::string to_csv(const std::vector<CsvRow>& rows);
std::vector<CsvRow> rows_of(const sim::ExperimentResult& result);
std::string transitions_csv(const std::vector<sched::TransitionEvent>& events);

/// Applies a run spec on top of the configured simulation settings.
sim::SimConfig run_config(const config::ExperimentConfig& cfg, const config::RunSpec& spec);
/// Generates the configured workload and runs it to the stop rule.
sim::ExperimentResult simulate(const config::ExperimentConfig& cfg, const sim::SimConfig& run);

std::string summary_text(const sim::ExperimentResult& result, const std::string& label,
                         const std::string& workload);
std::string comparison_text(const sim::ComparisonReport& report, const std::string& theas_label,
                            const std::string& baseline_label);

struct ReplayResult {
  std::vector<CsvRow> rows;
  std::vector<sched::TransitionEvent> advisory_transitions;
  std::vector<std::string> warnings;
  std::size_t snapshots_used = 0;
  std::size_t core_count = 0;
  double elapsed_s = 0.0;
  double cpu_energy_j = 0.0;
  double l2_energy_j = 0.0;
};

/// Turns parsed dumps into per-core windows, evaluates power at the recorded
/// operating point, and runs the level decision on each window. Decisions
/// are advisory: they are reported but never change the recorded data.
/// Throws DataError for a dump without simSeconds or a non-advancing clock.
ReplayResult replay(const stats::ParseResult& parsed, const config::ExperimentConfig& cfg);

std::string replay_summary_text(const ReplayResult& result, const std::string& stats_path);

struct ValidationReport {
  std::string label;
  double supply_voltage_v = 0.0;
  std::size_t trial_count = 0;
  std::size_t negative_deltas = 0;
  std::optional<double> mean_current_delta_a;
  std::optional<double> trials_power_w;  // V * mean delta
  double measured_power_w = 0.0;         // the override when given, else trials_power_w
  bool measured_from_override = false;
  std::optional<double> simulated_power_w;
  std::optional<double> relative_error;  // fraction, not percent
};

/// Throws ConfigError when there is nothing to measure.
ValidationReport validate_measurement(const config::ValidateSettings& settings);
std::string validation_text(const ValidationReport& report);

int cmd_simulate(const config::ExperimentConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_compare(const config::ExperimentConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_replay(const config::ExperimentConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_validate(const config::ExperimentConfig& cfg, std::ostream& out, std::ostream& err);

/// Maps the exception currently being handled to an exit code and prints it.
int report_current_exception(std::ostream& err);

/// Runs `fn`, mapping escaped exceptions to exit codes with a message on `err`.
template <typename Fn>
int guarded(Fn&& fn, std::ostream& err) {
  try {
    return fn();
  } catch (...) {
    return report_current_exception(err);
  }
}

/// Writes `content` to `path`, creating parent directories. Throws IoError.
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace theas::experiment
