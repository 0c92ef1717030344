#include "theas/experiment.hpp"

#include <charconv>
#include <fstream>
#include <future>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "theas/errors.hpp"
#include "theas/power_model.hpp"

namespace theas::experiment {

namespace fs = std::filesystem;

namespace {

std::string bool_text(bool b) { return b ? "true" : "false"; }

void kv(std::string& out, std::string_view key, std::string_view value) {
  out += key;
  out += '=';
  out += value;
  out += '\n';
}

void kv(std::string& out, std::string_view key, double value) {
  kv(out, key, format_number(value));
}

template <typename Int>
  requires std::is_integral_v<Int>
void kv(std::string& out, std::string_view key, Int value) {
  kv(out, key, std::to_string(value));
}

// Largest core index named by any per-core key, plus one.
std::size_t detect_cores(const stats::StatsSnapshot& snap, const stats::CoreKeyMap& keys) {
  std::size_t cores = 0;
  for (const auto* t : keys.all()) {
    const auto pos = t->pattern.find("{N}");
    if (pos == std::string::npos) continue;
    for (const auto& [key, value] : snap.entries) {
      if (!t->matches(key)) continue;
      const auto digits = key.substr(pos, key.size() - (t->pattern.size() - 3));
      cores = std::max<std::size_t>(cores, std::stoull(digits) + 1);
    }
  }
  return cores;
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string to_csv(const std::vector<CsvRow>& rows) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += format_number(r.time_s);
    out += ',';
    out += std::to_string(r.core_id);
    out += ',';
    out += sched::to_string(r.level);
    for (double v : {r.operating_point.frequency_mhz, r.operating_point.voltage_v, r.metrics.ipc,
                     r.metrics.cache_miss_rate, r.metrics.fetch_rate, r.cpu_power_w,
                     r.l2_power_w}) {
      out += ',';
      out += format_number(v);
    }
    out += '\n';
  }
  return out;
}

std::vector<CsvRow> rows_of(const sim::ExperimentResult& result) {
  std::vector<CsvRow> rows;
  const auto windows = result.series.empty() ? 0 : result.series.front().size();
  rows.reserve(windows * result.series.size());
  for (std::size_t w = 0; w < windows; ++w) {
    for (std::size_t c = 0; c < result.series.size(); ++c) {
      const auto& p = result.series[c][w];
      rows.push_back({p.timestamp, c, p.level, p.operating_point, p.metrics,
                      p.power.cpu_dynamic_watts, p.power.l2_dynamic_watts});
    }
  }
  return rows;
}

std::string transitions_csv(const std::vector<sched::TransitionEvent>& events) {
  std::string out = "time_s,core_id,from,to\n";
  for (const auto& e : events) {
    out += format_number(e.timestamp) + ',' + std::to_string(e.core_id) + ',';
    out += sched::to_string(e.from);
    out += ',';
    out += sched::to_string(e.to);
    out += '\n';
  }
  return out;
}

sim::SimConfig run_config(const config::ExperimentConfig& cfg, const config::RunSpec& spec) {
  auto run = cfg.sim;
  run.theas_enabled = spec.theas_enabled;
  if (!spec.initial_levels.empty()) run.initial_levels = spec.initial_levels;
  return run;
}

sim::ExperimentResult simulate(const config::ExperimentConfig& cfg, const sim::SimConfig& run) {
  auto tasks = sim::generate_workload(cfg.workload.mix, run.seed, cfg.workload.arrival_spread_s);
  return sim::run(run, std::move(tasks));
}

std::string summary_text(const sim::ExperimentResult& result, const std::string& label,
                         const std::string& workload) {
  const auto& a = result.aggregate;
  const auto& c = result.config;
  std::string out;
  kv(out, "label", label);
  kv(out, "workload", workload);
  kv(out, "replayed", "false");
  kv(out, "theas_enabled", bool_text(c.theas_enabled));
  kv(out, "seed", c.seed);
  kv(out, "core_count", c.core_count);
  kv(out, "window_s", c.window);
  kv(out, "windows", a.windows);
  kv(out, "elapsed_s", a.elapsed_s);
  kv(out, "makespan_s", a.makespan_s);
  kv(out, "all_completed", bool_text(a.all_completed));
  kv(out, "hit_step_cap", bool_text(a.hit_step_cap));
  kv(out, "tasks", result.tasks.size());
  kv(out, "instructions_executed", a.instructions_executed);
  kv(out, "transitions", result.transitions.size());
  kv(out, "cpu_energy_j", a.cpu_energy_j);
  kv(out, "average_cpu_power_w", a.average_cpu_power_w);
  kv(out, "l2_energy_j", a.l2_energy_j);
  kv(out, "average_l2_power_w", a.average_l2_power_w);
  for (std::size_t core = 0; core < result.series.size(); ++core)
    kv(out, "core" + std::to_string(core) + "_energy_j", result.core_energy(core));
  return out;
}

std::string comparison_text(const sim::ComparisonReport& r, const std::string& theas_label,
                            const std::string& baseline_label) {
  std::string out;
  kv(out, "theas_label", theas_label);
  kv(out, "baseline_label", baseline_label);
  kv(out, "theas_average_cpu_power_w", r.theas_avg_w);
  kv(out, "baseline_average_cpu_power_w", r.baseline_avg_w);
  kv(out, "improvement_percent", r.improvement_percent);
  kv(out, "theas_makespan_s", r.theas_makespan_s);
  kv(out, "baseline_makespan_s", r.baseline_makespan_s);
  kv(out, "makespan_ratio", r.makespan_ratio);
  for (const auto& c : r.per_core) {
    const auto prefix = "core" + std::to_string(c.core_id);
    kv(out, prefix + "_theas_average_w", c.theas_avg_w);
    kv(out, prefix + "_baseline_average_w", c.baseline_avg_w);
  }
  kv(out, "warnings", r.warnings.size());
  for (std::size_t i = 0; i < r.warnings.size(); ++i)
    kv(out, "warning" + std::to_string(i), r.warnings[i]);
  return out;
}

ReplayResult replay(const stats::ParseResult& parsed, const config::ExperimentConfig& cfg) {
  const auto& settings = cfg.replay;
  ReplayResult out;

  std::vector<const stats::StatsSnapshot*> usable;
  for (const auto& snap : parsed.snapshots) {
    if (!snap.complete) {
      out.warnings.push_back("snapshot " + std::to_string(snap.index) +
                             " is incomplete and was skipped");
      continue;
    }
    if (!snap.has_sim_seconds)
      throw DataError("snapshot " + std::to_string(snap.index) + " has no simSeconds");
    usable.push_back(&snap);
  }
  if (usable.empty()) {
    out.warnings.push_back("no complete statistics blocks found");
    return out;
  }

  out.core_count = settings.core_count;
  if (out.core_count == 0) out.core_count = detect_cores(*usable.front(), settings.keys);
  if (out.core_count == 0) throw DataError("no per-core statistics found in the first dump");

  const bool shared_l2 = settings.keys.l2_accesses.pattern.find("{N}") == std::string::npos;
  const sched::OperatingPoint recorded{settings.frequency_mhz, settings.voltage_v};
  std::vector<sched::ResourceLevel> levels(out.core_count, settings.initial_level);

  double clock = 0.0;
  for (std::size_t k = 0; k < usable.size(); ++k) {
    stats::StatsSnapshot window;
    if (settings.cumulative) {
      window = k == 0 ? *usable[0] : stats::delta_snapshots(*usable[k - 1], *usable[k],
                                                           settings.keys);
      clock = usable[k]->sim_seconds;
    } else {
      window = *usable[k];
      clock += window.sim_seconds;
    }

    std::vector<power::PmcSample> samples;
    std::vector<sched::CoreMetrics> metrics;
    std::uint64_t l2_total = 0;
    for (std::size_t c = 0; c < out.core_count; ++c) {
      auto ex = stats::extract_core_metrics(window, c, settings.keys);
      for (const auto& d : ex.diagnostics) out.warnings.push_back(d.reason);
      if (!shared_l2 || c == 0) l2_total += ex.sample.l2_overall_accesses;
      samples.push_back(ex.sample);
      metrics.push_back(ex.metrics);
    }
    const std::uint64_t l2_counts[] = {l2_total};
    const double l2_watts = power::l2_power(l2_counts, window.sim_seconds);

    for (std::size_t c = 0; c < out.core_count; ++c) {
      const auto next = sched::decide_level(metrics[c], levels[c], cfg.sim.thresholds,
                                            cfg.sim.polarity);
      if (next != levels[c]) out.advisory_transitions.push_back({c, levels[c], next, clock});
      levels[c] = next;

      CsvRow row;
      row.time_s = clock;
      row.core_id = c;
      row.level = next;
      row.operating_point = recorded;
      row.metrics = metrics[c];
      row.cpu_power_w = power::cpu_power_full(recorded.voltage_v, samples[c]);
      // A shared L2 is split evenly so that rows still sum to the total.
      row.l2_power_w = shared_l2 ? l2_watts / static_cast<double>(out.core_count)
                                 : power::l2_power(std::span(&samples[c].l2_overall_accesses, 1),
                                                   window.sim_seconds);
      out.cpu_energy_j += row.cpu_power_w * window.sim_seconds;
      out.l2_energy_j += row.l2_power_w * window.sim_seconds;
      out.rows.push_back(row);
    }
  }
  out.snapshots_used = usable.size();
  out.elapsed_s = clock;
  return out;
}

std::string replay_summary_text(const ReplayResult& r, const std::string& stats_path) {
  std::string out;
  kv(out, "replayed", "true");
  kv(out, "stats_path", stats_path);
  kv(out, "snapshots", r.snapshots_used);
  kv(out, "core_count", r.core_count);
  kv(out, "rows", r.rows.size());
  kv(out, "elapsed_s", r.elapsed_s);
  kv(out, "advisory_transitions", r.advisory_transitions.size());
  kv(out, "cpu_energy_j", r.cpu_energy_j);
  kv(out, "average_cpu_power_w", r.elapsed_s > 0.0 ? r.cpu_energy_j / r.elapsed_s : 0.0);
  kv(out, "l2_energy_j", r.l2_energy_j);
  kv(out, "average_l2_power_w", r.elapsed_s > 0.0 ? r.l2_energy_j / r.elapsed_s : 0.0);
  kv(out, "warnings", r.warnings.size());
  return out;
}

ValidationReport validate_measurement(const config::ValidateSettings& settings) {
  auto trials = settings.trials;
  if (!settings.trials_path.empty()) {
    auto loaded = config::load_trials(settings.trials_path);
    if (loaded.empty()) throw DataError("no trials in " + settings.trials_path);
    trials.insert(trials.end(), loaded.begin(), loaded.end());
  }
  if (trials.empty() && !settings.measured_power_override_w)
    throw ConfigError("no current trials and no measured power to validate against");

  ValidationReport r;
  r.label = settings.label;
  r.supply_voltage_v = settings.supply_voltage_v;
  r.trial_count = trials.size();
  if (!trials.empty()) {
    r.negative_deltas = power::count_negative_deltas(trials);
    r.mean_current_delta_a = power::mean_current_delta(trials);
    r.trials_power_w = power::measured_power(settings.supply_voltage_v, *r.mean_current_delta_a);
  }
  r.measured_from_override = settings.measured_power_override_w.has_value();
  r.measured_power_w =
      r.measured_from_override ? *settings.measured_power_override_w : *r.trials_power_w;
  r.simulated_power_w = settings.simulated_power_w;
  if (r.simulated_power_w)
    r.relative_error = power::relative_error(*r.simulated_power_w, r.measured_power_w);
  return r;
}

std::string validation_text(const ValidationReport& r) {
  std::string out;
  kv(out, "label", r.label);
  kv(out, "supply_voltage_v", r.supply_voltage_v);
  kv(out, "trials", r.trial_count);
  if (r.mean_current_delta_a) {
    kv(out, "negative_deltas", r.negative_deltas);
    kv(out, "mean_current_delta_a", *r.mean_current_delta_a);
    kv(out, "trials_power_w", *r.trials_power_w);
  }
  kv(out, "measured_power_source", r.measured_from_override ? "override" : "trials");
  kv(out, "measured_power_w", r.measured_power_w);
  if (r.simulated_power_w) {
    kv(out, "simulated_power_w", *r.simulated_power_w);
    kv(out, "relative_error", *r.relative_error);
    kv(out, "relative_error_percent", *r.relative_error * 100.0);
  }
  return out;
}

void write_file(const fs::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  f.close();
  if (!f) throw IoError("error while writing " + path.string());
}

namespace {

void write_run(const fs::path& dir, const sim::ExperimentResult& result, const std::string& label,
               const std::string& workload) {
  write_file(dir / "timeseries.csv", to_csv(rows_of(result)));
  write_file(dir / "transitions.csv", transitions_csv(result.transitions));
  write_file(dir / "summary.txt", summary_text(result, label, workload));
}

void print_diagnostics(const sim::ExperimentResult& r, std::ostream& err) {
  for (const auto& d : r.diagnostics) err << "warning: " << d << '\n';
}

}  // namespace

int cmd_simulate(const config::ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  cfg.check(config::Mode::kSimulate);
  const auto result = simulate(cfg, cfg.sim);
  print_diagnostics(result, err);
  const fs::path dir = cfg.output_dir;
  const auto label = cfg.sim.theas_enabled ? "theas" : "fixed";
  write_run(dir, result, label, cfg.workload.name);
  write_file(dir / "config.json", config::to_json(cfg).dump(2) + "\n");
  const auto& a = result.aggregate;
  out << "average_cpu_power_w=" << format_number(a.average_cpu_power_w) << '\n'
      << "makespan_s=" << format_number(a.makespan_s) << '\n'
      << "transitions=" << result.transitions.size() << '\n'
      << "output=" << dir.string() << '\n';
  return kOk;
}

int cmd_compare(const config::ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  cfg.check(config::Mode::kCompare);
  const auto& a = cfg.compare_runs[0];
  const auto& b = cfg.compare_runs[1];
  if (a.label.empty() || b.label.empty() || a.label == b.label)
    throw ConfigError("compare run labels must be non-empty and distinct");
  const auto run_a = run_config(cfg, a);
  const auto run_b = run_config(cfg, b);
  run_a.validate();
  run_b.validate();

  // The two runs share nothing, so they can proceed side by side.
  auto fa = std::async(std::launch::async, [&] { return simulate(cfg, run_a); });
  auto fb = std::async(std::launch::async, [&] { return simulate(cfg, run_b); });
  const auto ra = fa.get();
  const auto rb = fb.get();
  print_diagnostics(ra, err);
  print_diagnostics(rb, err);

  const auto report = sim::compare_runs(ra, rb);
  for (const auto& w : report.warnings) err << "warning: " << w << '\n';

  const fs::path dir = cfg.output_dir;
  write_run(dir / a.label, ra, a.label, cfg.workload.name);
  write_run(dir / b.label, rb, b.label, cfg.workload.name);
  write_file(dir / "comparison.txt", comparison_text(report, a.label, b.label));
  write_file(dir / "config.json", config::to_json(cfg).dump(2) + "\n");

  out << a.label << " average_cpu_power_w=" << format_number(report.theas_avg_w) << '\n'
      << b.label << " average_cpu_power_w=" << format_number(report.baseline_avg_w) << '\n'
      << "improvement_percent=" << format_number(report.improvement_percent) << '\n'
      << "makespan_ratio=" << format_number(report.makespan_ratio) << '\n'
      << "output=" << dir.string() << '\n';
  return kOk;
}

int cmd_replay(const config::ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  cfg.check(config::Mode::kReplay);
  std::ifstream in(cfg.replay.stats_path, std::ios::binary);
  if (!in) throw IoError("cannot read " + cfg.replay.stats_path);
  const auto parsed = stats::parse_stats_stream(in);
  for (const auto& d : parsed.diagnostics) err << stats::format(d) << '\n';

  const auto result = replay(parsed, cfg);
  for (const auto& w : result.warnings) err << "warning: " << w << '\n';

  const fs::path dir = cfg.output_dir;
  write_file(dir / "timeseries.csv", to_csv(result.rows));
  write_file(dir / "transitions.csv", transitions_csv(result.advisory_transitions));
  write_file(dir / "summary.txt", replay_summary_text(result, cfg.replay.stats_path));
  out << "snapshots=" << result.snapshots_used << '\n'
      << "rows=" << result.rows.size() << '\n'
      << "output=" << dir.string() << '\n';
  return kOk;
}

int cmd_validate(const config::ExperimentConfig& cfg, std::ostream& out, std::ostream&) {
  cfg.check(config::Mode::kValidate);
  const auto report = validate_measurement(cfg.validate);
  const auto text = validation_text(report);
  write_file(fs::path(cfg.output_dir) / "validation.txt", text);
  out << text;
  return kOk;
}

int report_current_exception(std::ostream& err) {
  try {
    throw;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIoError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  } catch (...) {
    err << "error: unknown failure\n";
    return kRuntimeError;
  }
}

}  // namespace theas::experiment
