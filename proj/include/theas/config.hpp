#pragma once

// Experiment configuration: a single JSON document with nested sections
// (sim, levels, thresholds, pmc, workload, compare, replay, validate, output).
// Every field is optional; omitted fields keep the defaults shown by
// `theas reference-config`.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "theas/power_model.hpp"
#include "theas/stats_ingest.hpp"
#include "theas/workload_sim.hpp"

namespace theas::config {

enum class Mode { kSimulate, kCompare, kReplay, kValidate };

std::string_view to_string(Mode m);

struct RunSpec {
  std::string label;
  bool theas_enabled = true;
  std::vector<sched::ResourceLevel> initial_levels;  // empty: keep sim default
};

struct Workload {
  std::string name = "mixed";
  std::vector<sim::MixEntry> mix;
  double arrival_spread_s = 0.0;
};

struct ReplaySettings {
  std::string stats_path;
  std::size_t core_count = 0;  // 0: detect from the first snapshot
  bool cumulative = true;      // dumps accumulate (no stats reset between dumps)
  double voltage_v = 1.10;     // operating point the trace was recorded at
  double frequency_mhz = 1800.0;
  sched::ResourceLevel initial_level = sched::ResourceLevel::kHigh;
  stats::CoreKeyMap keys;
};

struct ValidateSettings {
  std::string label = "hardware";
  double supply_voltage_v = 5.207;
  std::string trials_path;
  std::vector<power::CurrentTrial> trials;
  std::optional<double> simulated_power_w;
  std::optional<double> measured_power_override_w;
};

struct ExperimentConfig {
  sim::SimConfig sim;
  Workload workload;
  std::vector<RunSpec> compare_runs;
  ReplaySettings replay;
  ValidateSettings validate;
  std::string output_dir = "out";

  /// Throws ConfigError when a field required by `mode` is missing or invalid.
  void check(Mode mode) const;
};

/// Built-in workload profiles and mixes: "barnes", "fmm", "mixed", "joint".
sim::WorkloadProfile barnes_profile();
sim::WorkloadProfile fmm_profile();
sim::WorkloadProfile blend_profile();
/// Throws ConfigError for an unknown name.
Workload preset_workload(const std::string& name);

ExperimentConfig default_config();

/// Unknown keys and wrong types are ConfigErrors.
ExperimentConfig from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ExperimentConfig& cfg);

/// Throws IoError if the file cannot be read, ConfigError if it is invalid.
ExperimentConfig load_config(const std::filesystem::path& path);

/// CSV with `initial_amps` and `final_amps` columns (others ignored).
std::vector<power::CurrentTrial> load_trials(const std::filesystem::path& path);

}  // namespace theas::config
