// theas: run THEAS / fixed-level experiments, replay gem5 stats dumps, and
// check the power model against hardware current readings.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "theas/config.hpp"
#include "theas/errors.hpp"
#include "theas/experiment.hpp"

namespace {

using theas::config::ExperimentConfig;
namespace ex = theas::experiment;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> theas;
  std::optional<std::string> out_dir;
  std::optional<std::string> workload;
  std::optional<double> duration;
  std::optional<std::string> stats;
  std::optional<double> voltage;
  std::optional<double> frequency;
  std::optional<std::size_t> cores;
  std::optional<std::string> trials;
  std::optional<double> measured_override;
  std::optional<double> simulated_power;
};

ExperimentConfig load(const Options& o) {
  auto cfg = o.config_path.empty() ? theas::config::default_config()
                                   : theas::config::load_config(o.config_path);
  if (o.seed) cfg.sim.seed = *o.seed;
  if (o.theas) cfg.sim.theas_enabled = *o.theas == "on";
  if (o.out_dir) cfg.output_dir = *o.out_dir;
  if (o.workload) {
    const auto spread = cfg.workload.arrival_spread_s;
    cfg.workload = theas::config::preset_workload(*o.workload);
    cfg.workload.arrival_spread_s = spread;
  }
  if (o.duration) cfg.sim.duration = *o.duration;
  if (o.stats) cfg.replay.stats_path = *o.stats;
  if (o.frequency) cfg.replay.frequency_mhz = *o.frequency;
  if (o.cores) cfg.replay.core_count = *o.cores;
  if (o.trials) cfg.validate.trials_path = *o.trials;
  if (o.measured_override) cfg.validate.measured_power_override_w = *o.measured_override;
  if (o.simulated_power) cfg.validate.simulated_power_w = *o.simulated_power;
  return cfg;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out_dir, "Output directory");
}

void add_sim(CLI::App* cmd, Options& o) {
  cmd->add_option("--seed", o.seed, "Workload and noise seed");
  cmd->add_option("--workload", o.workload, "Preset workload: mixed, barnes, fmm, joint");
  cmd->add_option("--duration", o.duration, "Run length in seconds (duration stop rules)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Threshold-driven DVFS scheduling experiments"};
  app.require_subcommand(1);
  Options o;

  auto* simulate = app.add_subcommand("simulate", "Run one simulation");
  add_common(simulate, o);
  add_sim(simulate, o);
  simulate->add_option("--theas", o.theas, "Enable level adjustment")
      ->check(CLI::IsMember({"on", "off"}));

  auto* compare = app.add_subcommand("compare", "Run the two configured runs and compare them");
  add_common(compare, o);
  add_sim(compare, o);

  auto* replay = app.add_subcommand("replay", "Evaluate a gem5 stats.txt trace");
  add_common(replay, o);
  replay->add_option("--stats", o.stats, "stats.txt to replay");
  replay->add_option("--voltage", o.voltage, "Core voltage the trace was recorded at");
  replay->add_option("--frequency", o.frequency, "Core frequency (MHz) of the trace");
  replay->add_option("--cores", o.cores, "Core count (default: detect)");

  auto* validate = app.add_subcommand("validate", "Compare simulated power with hardware");
  add_common(validate, o);
  validate->add_option("--trials", o.trials, "CSV with initial_amps and final_amps columns");
  validate->add_option("--voltage", o.voltage, "Measured supply voltage");
  validate->add_option("--measured-power-override", o.measured_override,
                       "Measured power in watts, used instead of the trials");
  validate->add_option("--simulated-power", o.simulated_power, "Simulated average power (W)");

  auto* reference = app.add_subcommand("reference-config", "Print the default configuration");
  std::optional<std::string> reference_path;
  reference->add_option("--out", reference_path, "Write to this file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ex::kConfigError;
  }

  return ex::guarded(
      [&]() -> int {
        if (reference->parsed()) {
          const auto text = theas::config::to_json(theas::config::default_config()).dump(2) + "\n";
          if (reference_path)
            ex::write_file(*reference_path, text);
          else
            std::cout << text;
          return ex::kOk;
        }
        auto cfg = load(o);
        if (simulate->parsed()) return ex::cmd_simulate(cfg, std::cout, std::cerr);
        if (compare->parsed()) return ex::cmd_compare(cfg, std::cout, std::cerr);
        if (replay->parsed()) {
          if (o.voltage) cfg.replay.voltage_v = *o.voltage;
          return ex::cmd_replay(cfg, std::cout, std::cerr);
        }
        if (o.voltage) cfg.validate.supply_voltage_v = *o.voltage;
        return ex::cmd_validate(cfg, std::cout, std::cerr);
      },
      std::cerr);
}
