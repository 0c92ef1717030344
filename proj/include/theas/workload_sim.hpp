#pragma once

// Discrete-time multicore simulator. Time advances in fixed windows; in each
// window every core runs its tasks round-robin at its current operating
// point, a PMC sample is synthesized from the workload profiles, and core
// power is evaluated from that sample. Every scheduling period the level
// controller sees counters that are `stats_latency` seconds old.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "theas/power_model.hpp"
#include "theas/scheduler.hpp"

namespace theas::sim {

using sched::CoreMetrics;
using sched::CoreState;
using sched::LevelTable;
using sched::OperatingPoint;
using sched::ResourceLevel;
using sched::TaskId;
using sched::Thresholds;
using sched::TransitionEvent;
using sched::WorkloadClass;

struct WorkloadProfile {
  std::string name;
  WorkloadClass workload_class = WorkloadClass::kCpuBound;
  double nominal_ipc = 1.0;  // at the reference frequency
  double miss_rate = 0.0;    // dcache misses per access
  std::uint64_t instruction_count = 1;
  // 0: IPC independent of frequency. 1: instruction throughput pinned at the
  // reference rate (IPC falls as 1/f). Ignored for cpu_bound profiles.
  double memory_sensitivity = 0.0;

  void validate() const;
  bool operator==(const WorkloadProfile&) const = default;
};

struct MixEntry {
  WorkloadProfile profile;
  std::size_t process_count = 0;
};

/// A runnable process. Core placement is scheduler state, not part of the task.
struct TaskSpec {
  TaskId task_id = 0;
  WorkloadProfile profile;
  double arrival_time = 0.0;
  std::uint64_t remaining_instructions = 0;

  bool operator==(const TaskSpec&) const = default;
};

/// Deterministic 64-bit generator (mt19937_64) with a portable uniform draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  /// Uniform in [0, 1), 53 bits.
  double uniform();

 private:
  std::mt19937_64 engine_;
};

/// `process_count` tasks per mix entry, ids assigned in mix order. Arrival
/// times are 0 (batch launch) when `arrival_spread` is 0, otherwise uniform
/// in [0, arrival_spread). Throws std::invalid_argument on an empty mix.
std::vector<TaskSpec> generate_workload(std::span<const MixEntry> mix,
                                        std::uint64_t seed,
                                        double arrival_spread = 0.0);

struct PmcSynthesis {
  double reference_frequency_mhz = 800.0;
  double accesses_per_instruction = 0.3;
  double fetch_inflation = 1.1;
  double noise_amplitude = 0.02;  // IPC multiplied by 1 + U(-a, a)

  void validate() const;
  bool operator==(const PmcSynthesis&) const = default;
};

/// Frequency-scaled IPC without noise.
double effective_ipc(const WorkloadProfile& p, double frequency_mhz,
                     double reference_frequency_mhz);

struct WindowExecution {
  power::PmcSample sample;
  std::vector<std::uint64_t> executed;  // per task, same order as the input
  std::vector<double> finish_offset;    // seconds into the window; <0 if unfinished
};

/// Runs `tasks` back to back within one window, in the given order, each
/// until it finishes or the window is used up.
WindowExecution synthesize_pmc(std::span<const TaskSpec> tasks, const OperatingPoint& op,
                               const PmcSynthesis& params, double window, Rng& rng);

enum class StopRule : std::uint8_t {
  kCompletion,  // until every task finished
  kDuration,    // exactly `duration` seconds
  kEarlier,     // whichever of the two comes first
  kLater,       // whichever of the two comes last
};

std::string_view to_string(StopRule r);
StopRule parse_stop_rule(std::string_view text);

struct SimConfig {
  std::size_t core_count = 4;
  LevelTable levels = LevelTable::defaults();
  Thresholds thresholds{};
  sched::DecisionPolarity polarity = sched::DecisionPolarity::kPseudocode;
  double scheduling_period = 0.5;
  double stats_latency = 1.0;
  double window = 0.1;
  double duration = 60.0;
  std::uint64_t seed = 1;
  bool theas_enabled = true;
  /// Starting level per core. Empty means all HIGH; a single entry applies to
  /// every core. With THEAS disabled these levels are held for the whole run.
  std::vector<ResourceLevel> initial_levels;
  StopRule stop_rule = StopRule::kCompletion;
  std::uint64_t max_steps = 200'000;
  PmcSynthesis pmc{};

  /// Throws ConfigError.
  void validate() const;
  ResourceLevel initial_level(std::size_t core) const;
  std::uint64_t period_windows() const;
  std::uint64_t latency_windows() const;
};

struct SeriesPoint {
  double timestamp = 0.0;  // end of the window
  power::PowerSample power;
  power::PmcSample pmc;
  CoreMetrics metrics;
  ResourceLevel level = ResourceLevel::kHigh;
  OperatingPoint operating_point;
};

struct TaskOutcome {
  TaskId task_id = 0;
  std::optional<std::size_t> core_id;
  std::optional<double> completion_time;
  std::uint64_t remaining_instructions = 0;
  std::uint64_t instruction_count = 0;
};

struct Aggregate {
  double average_cpu_power_w = 0.0;  // cpu_energy_j / elapsed_s, summed over cores
  double cpu_energy_j = 0.0;
  double average_l2_power_w = 0.0;
  double l2_energy_j = 0.0;
  double makespan_s = 0.0;  // completion time of the last task
  double elapsed_s = 0.0;   // simulated time covered by the series
  std::uint64_t windows = 0;
  std::uint64_t instructions_executed = 0;
  bool all_completed = false;
  bool hit_step_cap = false;
};

struct ExperimentResult {
  SimConfig config;
  std::vector<std::vector<SeriesPoint>> series;  // [core][window]
  std::vector<TransitionEvent> transitions;
  std::vector<TaskOutcome> tasks;
  Aggregate aggregate;
  std::vector<std::string> diagnostics;

  double core_energy(std::size_t core) const;
};

/// Step-wise driver. run() is a loop over step() plus the stop rule.
class Simulator {
 public:
  Simulator(SimConfig config, std::vector<TaskSpec> tasks);

  /// Advances one window: places arrived tasks, executes every core, records
  /// power, retires finished tasks, and runs a scheduling cycle at period
  /// boundaries when THEAS is enabled.
  void step();

  bool all_tasks_done() const;
  double now() const;  // start of the next window
  std::uint64_t steps_taken() const { return steps_; }
  const std::vector<CoreState>& cores() const { return cores_; }
  std::size_t live_task_count() const;
  const ExperimentResult& result() const { return result_; }

  /// Consumes the simulator; fills in aggregates.
  ExperimentResult finish() &&;

 private:
  struct WindowCounters {
    std::uint64_t instructions = 0;
    std::uint64_t accesses = 0;
    std::uint64_t misses = 0;
    double cycles = 0.0;
    double fetched = 0.0;
    double seconds = 0.0;
  };

  void place_arrivals();
  void schedule(double timestamp);
  CoreMetrics lagged_metrics(std::size_t core) const;

  SimConfig config_;
  std::vector<TaskSpec> tasks_;
  std::map<TaskId, std::size_t> position_;  // task_id -> index into tasks_
  std::vector<bool> placed_;
  std::vector<CoreState> cores_;
  std::vector<std::size_t> rotation_;
  std::vector<std::vector<WindowCounters>> history_;
  Rng rng_;
  std::uint64_t steps_ = 0;
  std::size_t live_ = 0;
  ExperimentResult result_;
};

/// Throws ConfigError for an invalid configuration.
ExperimentResult run(const SimConfig& config, std::vector<TaskSpec> tasks);

struct CoreComparison {
  std::size_t core_id = 0;
  double theas_avg_w = 0.0;
  double baseline_avg_w = 0.0;
};

struct ComparisonReport {
  double theas_avg_w = 0.0;
  double baseline_avg_w = 0.0;
  double improvement_percent = 0.0;  // (baseline - theas) / baseline * 100
  double theas_makespan_s = 0.0;
  double baseline_makespan_s = 0.0;
  double makespan_ratio = 1.0;  // theas / baseline
  std::vector<CoreComparison> per_core;
  std::vector<std::string> warnings;
};

/// Headline arithmetic only, from two average powers.
ComparisonReport compare_averages(double theas_avg_w, double baseline_avg_w);

/// Mismatched configurations produce warnings, never exceptions.
ComparisonReport compare_runs(const ExperimentResult& theas,
                              const ExperimentResult& baseline);

}  // namespace theas::sim
