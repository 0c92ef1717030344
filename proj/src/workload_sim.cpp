#include "theas/workload_sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "theas/errors.hpp"

namespace theas::sim {

namespace {

constexpr double kMhz = 1e6;  // Hz per MHz

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

// n such that n * step == span, within rounding.
std::uint64_t whole_windows(double span, double step, const char* what) {
  const double ratio = span / step;
  const double n = std::round(ratio);
  if (std::fabs(ratio - n) > 1e-6)
    throw ConfigError(std::string(what) + " must be a whole number of windows");
  return static_cast<std::uint64_t>(n);
}

}  // namespace

void WorkloadProfile::validate() const {
  if (!finite_positive(nominal_ipc))
    throw ConfigError("profile '" + name + "': nominal_ipc must be > 0");
  if (!(miss_rate >= 0.0 && miss_rate <= 1.0))
    throw ConfigError("profile '" + name + "': miss_rate must lie in [0, 1]");
  if (instruction_count == 0)
    throw ConfigError("profile '" + name + "': instruction_count must be > 0");
  if (!(memory_sensitivity >= 0.0 && memory_sensitivity <= 1.0))
    throw ConfigError("profile '" + name + "': memory_sensitivity must lie in [0, 1]");
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::vector<TaskSpec> generate_workload(std::span<const MixEntry> mix, std::uint64_t seed,
                                        double arrival_spread) {
  std::size_t total = 0;
  for (const auto& e : mix) total += e.process_count;
  if (mix.empty() || total == 0)
    throw std::invalid_argument("generate_workload: workload mix has no processes");
  if (!std::isfinite(arrival_spread) || arrival_spread < 0.0)
    throw std::invalid_argument("generate_workload: arrival spread must be >= 0");

  Rng rng(seed);
  std::vector<TaskSpec> tasks;
  tasks.reserve(total);
  for (const auto& e : mix) {
    e.profile.validate();
    for (std::size_t i = 0; i < e.process_count; ++i) {
      TaskSpec t;
      t.task_id = static_cast<TaskId>(tasks.size());
      t.profile = e.profile;
      t.arrival_time = arrival_spread > 0.0 ? rng.uniform() * arrival_spread : 0.0;
      t.remaining_instructions = e.profile.instruction_count;
      tasks.push_back(std::move(t));
    }
  }
  return tasks;
}

void PmcSynthesis::validate() const {
  if (!finite_positive(reference_frequency_mhz))
    throw ConfigError("reference_frequency_mhz must be > 0");
  if (!std::isfinite(accesses_per_instruction) || accesses_per_instruction < 0.0)
    throw ConfigError("accesses_per_instruction must be >= 0");
  if (!std::isfinite(fetch_inflation) || fetch_inflation < 0.0)
    throw ConfigError("fetch_inflation must be >= 0");
  if (!(noise_amplitude >= 0.0 && noise_amplitude < 1.0))
    throw ConfigError("noise_amplitude must lie in [0, 1)");
}

double effective_ipc(const WorkloadProfile& p, double frequency_mhz,
                     double reference_frequency_mhz) {
  if (p.workload_class == WorkloadClass::kCpuBound) return p.nominal_ipc;
  const double f = frequency_mhz;
  const double ref = reference_frequency_mhz;
  return p.nominal_ipc * ref / (ref + p.memory_sensitivity * (f - ref));
}

WindowExecution synthesize_pmc(std::span<const TaskSpec> tasks, const OperatingPoint& op,
                               const PmcSynthesis& params, double window, Rng& rng) {
  if (!finite_positive(window))
    throw std::invalid_argument("synthesize_pmc: window must be > 0");

  WindowExecution out;
  out.executed.assign(tasks.size(), 0);
  out.finish_offset.assign(tasks.size(), -1.0);
  out.sample.sim_seconds = window;

  const double hz = op.frequency_mhz * kMhz;
  double time_left = window;
  std::uint64_t instructions = 0;
  std::uint64_t accesses = 0;
  std::uint64_t misses = 0;

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& task = tasks[i];
    const double noise =
        1.0 + params.noise_amplitude * (2.0 * rng.uniform() - 1.0);
    if (time_left <= 0.0 || task.remaining_instructions == 0) continue;

    const double rate =
        effective_ipc(task.profile, op.frequency_mhz, params.reference_frequency_mhz) *
        noise * hz;
    const auto capacity = static_cast<std::uint64_t>(std::llround(rate * time_left));
    std::uint64_t done = 0;
    if (task.remaining_instructions <= capacity) {
      done = task.remaining_instructions;
      time_left = std::max(0.0, time_left - static_cast<double>(done) / rate);
      out.finish_offset[i] = window - time_left;
    } else {
      done = capacity;
      time_left = 0.0;
    }
    out.executed[i] = done;

    const auto acc = static_cast<std::uint64_t>(
        std::llround(params.accesses_per_instruction * static_cast<double>(done)));
    const auto miss = std::min<std::uint64_t>(
        acc, static_cast<std::uint64_t>(
                 std::llround(task.profile.miss_rate * static_cast<double>(acc))));
    instructions += done;
    accesses += acc;
    misses += miss;
  }

  auto& s = out.sample;
  s.ipc = static_cast<double>(instructions) / (hz * window);
  s.dcache_overall_accesses = accesses;
  s.dcache_overall_misses = misses;
  s.l2_overall_accesses = misses;  // L1 misses are the L2 request stream
  s.fetch_rate = static_cast<double>(instructions) * params.fetch_inflation / window;
  return out;
}

std::string_view to_string(StopRule r) {
  switch (r) {
    case StopRule::kCompletion: return "completion";
    case StopRule::kDuration: return "duration";
    case StopRule::kEarlier: return "earlier";
    case StopRule::kLater: return "later";
  }
  return "?";
}

StopRule parse_stop_rule(std::string_view text) {
  if (text == "completion") return StopRule::kCompletion;
  if (text == "duration") return StopRule::kDuration;
  if (text == "earlier") return StopRule::kEarlier;
  if (text == "later") return StopRule::kLater;
  throw ConfigError("unknown stop_rule '" + std::string(text) + "'");
}

void SimConfig::validate() const {
  if (core_count == 0) throw ConfigError("core_count must be >= 1");
  levels.validate();
  thresholds.validate();
  pmc.validate();
  if (!finite_positive(window)) throw ConfigError("window must be > 0");
  if (!finite_positive(scheduling_period)) throw ConfigError("scheduling_period must be > 0");
  if (!finite_positive(duration)) throw ConfigError("duration must be > 0");
  if (!std::isfinite(stats_latency) || stats_latency < 0.0)
    throw ConfigError("stats_latency must be >= 0");
  if (window > scheduling_period * (1.0 + 1e-9))
    throw ConfigError("window must not exceed scheduling_period");
  period_windows();
  latency_windows();
  if (initial_levels.size() > 1 && initial_levels.size() != core_count)
    throw ConfigError("initial_levels needs 1 or core_count entries");
  if (max_steps == 0) throw ConfigError("max_steps must be >= 1");
}

ResourceLevel SimConfig::initial_level(std::size_t core) const {
  if (initial_levels.empty()) return ResourceLevel::kHigh;
  if (initial_levels.size() == 1) return initial_levels.front();
  return initial_levels.at(core);
}

std::uint64_t SimConfig::period_windows() const {
  return whole_windows(scheduling_period, window, "scheduling_period");
}

std::uint64_t SimConfig::latency_windows() const {
  return whole_windows(stats_latency, window, "stats_latency");
}

double ExperimentResult::core_energy(std::size_t core) const {
  double e = 0.0;
  for (const auto& p : series.at(core)) e += p.power.cpu_dynamic_watts * config.window;
  return e;
}

Simulator::Simulator(SimConfig config, std::vector<TaskSpec> tasks)
    : config_(std::move(config)), tasks_(std::move(tasks)), rng_(config_.seed) {
  config_.validate();
  std::map<TaskId, bool> seen;
  for (const auto& t : tasks_) {
    t.profile.validate();
    if (!seen.emplace(t.task_id, true).second)
      throw ConfigError("duplicate task id " + std::to_string(t.task_id));
    if (!std::isfinite(t.arrival_time) || t.arrival_time < 0.0)
      throw ConfigError("task arrival time must be >= 0");
    if (t.remaining_instructions > t.profile.instruction_count)
      throw ConfigError("task remaining work exceeds its instruction count");
  }
  for (std::size_t i = 0; i < tasks_.size(); ++i) position_[tasks_[i].task_id] = i;
  placed_.assign(tasks_.size(), false);
  for (std::size_t c = 0; c < config_.core_count; ++c)
    cores_.push_back(sched::make_core(c, config_.initial_level(c), config_.levels));
  rotation_.assign(config_.core_count, 0);
  history_.resize(config_.core_count);

  result_.config = config_;
  result_.series.resize(config_.core_count);
  for (const auto& t : tasks_) {
    TaskOutcome o;
    o.task_id = t.task_id;
    o.remaining_instructions = t.remaining_instructions;
    o.instruction_count = t.profile.instruction_count;
    if (t.remaining_instructions == 0) o.completion_time = t.arrival_time;
    result_.tasks.push_back(o);
    if (t.remaining_instructions > 0) ++live_;
  }
}

double Simulator::now() const { return static_cast<double>(steps_) * config_.window; }

std::size_t Simulator::live_task_count() const { return live_; }

bool Simulator::all_tasks_done() const { return live_ == 0; }

void Simulator::place_arrivals() {
  const double t = now();
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    if (placed_[i] || tasks_[i].remaining_instructions == 0) continue;
    if (tasks_[i].arrival_time > t + 1e-12) continue;
    const auto core =
        sched::assign_task(tasks_[i].profile.workload_class, cores_);
    cores_[core].assigned_tasks.push_back(tasks_[i].task_id);
    result_.tasks[i].core_id = core;
    placed_[i] = true;
  }
}

void Simulator::step() {
  place_arrivals();
  const double start = now();
  const double end = static_cast<double>(steps_ + 1) * config_.window;
  const auto keep = config_.period_windows() + config_.latency_windows();

  for (std::size_t c = 0; c < cores_.size(); ++c) {
    auto& core = cores_[c];
    // Round-robin: rotate so a different task leads each window.
    std::vector<std::size_t> order;
    const auto n = core.assigned_tasks.size();
    for (std::size_t k = 0; k < n; ++k)
      order.push_back(position_.at(core.assigned_tasks[(rotation_[c] + k) % n]));
    std::vector<TaskSpec> batch;
    batch.reserve(n);
    for (auto idx : order) batch.push_back(tasks_[idx]);

    const auto exec =
        synthesize_pmc(batch, core.operating_point, config_.pmc, config_.window, rng_);

    std::vector<TaskId> still_running;
    std::uint64_t window_instructions = 0;
    for (std::size_t k = 0; k < n; ++k) {
      window_instructions += exec.executed[k];
      auto& task = tasks_[order[k]];
      task.remaining_instructions -= exec.executed[k];
      result_.tasks[order[k]].remaining_instructions = task.remaining_instructions;
      result_.aggregate.instructions_executed += exec.executed[k];
      if (task.remaining_instructions == 0) {
        result_.tasks[order[k]].completion_time = start + exec.finish_offset[k];
        --live_;
      }
    }
    for (auto id : core.assigned_tasks)
      if (tasks_[position_.at(id)].remaining_instructions > 0) still_running.push_back(id);
    core.assigned_tasks = std::move(still_running);
    if (n > 0) rotation_[c] = (rotation_[c] + 1) % std::max<std::size_t>(1, n);

    const auto& s = exec.sample;
    SeriesPoint point;
    point.timestamp = end;
    point.pmc = s;
    point.level = core.current_level;
    point.operating_point = core.operating_point;
    point.metrics = {s.ipc,
                     sched::miss_rate(s.dcache_overall_misses, s.dcache_overall_accesses),
                     s.fetch_rate};
    point.power.timestamp = end;
    point.power.cpu_dynamic_watts = power::cpu_power_full(core.operating_point.voltage_v, s);
    const std::uint64_t l2[] = {s.l2_overall_accesses};
    point.power.l2_dynamic_watts = power::l2_power(l2, config_.window);
    result_.series[c].push_back(point);

    auto& h = history_[c];
    WindowCounters w;
    w.instructions = window_instructions;
    w.accesses = s.dcache_overall_accesses;
    w.misses = s.dcache_overall_misses;
    w.cycles = core.operating_point.frequency_mhz * kMhz * config_.window;
    w.fetched = s.fetch_rate * config_.window;
    w.seconds = config_.window;
    h.push_back(w);
    while (h.size() > keep) h.erase(h.begin());
  }

  ++steps_;
  if (config_.theas_enabled && steps_ % config_.period_windows() == 0) schedule(end);
}

CoreMetrics Simulator::lagged_metrics(std::size_t core) const {
  // The controller sees the period that ended `stats_latency` ago.
  const auto& h = history_[core];
  const auto lat = config_.latency_windows();
  const auto per = config_.period_windows();
  if (h.size() <= lat) return {};
  const auto last = h.size() - lat;  // exclusive
  const auto first = last > per ? last - per : 0;
  WindowCounters sum;
  for (auto i = first; i < last; ++i) {
    sum.instructions += h[i].instructions;
    sum.accesses += h[i].accesses;
    sum.misses += h[i].misses;
    sum.cycles += h[i].cycles;
    sum.fetched += h[i].fetched;
    sum.seconds += h[i].seconds;
  }
  CoreMetrics m;
  m.ipc = sum.cycles > 0.0 ? static_cast<double>(sum.instructions) / sum.cycles : 0.0;
  m.cache_miss_rate = sched::miss_rate(sum.misses, sum.accesses);
  m.fetch_rate = sum.seconds > 0.0 ? sum.fetched / sum.seconds : 0.0;
  return m;
}

void Simulator::schedule(double timestamp) {
  std::vector<CoreMetrics> metrics;
  metrics.reserve(cores_.size());
  for (std::size_t c = 0; c < cores_.size(); ++c) metrics.push_back(lagged_metrics(c));
  auto cycle = sched::scheduling_cycle(cores_, metrics, config_.thresholds, config_.levels,
                                       timestamp, config_.polarity);
  cores_ = std::move(cycle.cores);
  result_.transitions.insert(result_.transitions.end(), cycle.events.begin(),
                             cycle.events.end());
}

ExperimentResult Simulator::finish() && {
  auto& a = result_.aggregate;
  a.windows = steps_;
  a.elapsed_s = now();
  a.cpu_energy_j = 0.0;
  a.l2_energy_j = 0.0;
  for (std::uint64_t w = 0; w < steps_; ++w) {
    for (const auto& core_series : result_.series) {
      a.cpu_energy_j += core_series[w].power.cpu_dynamic_watts * config_.window;
      a.l2_energy_j += core_series[w].power.l2_dynamic_watts * config_.window;
    }
  }
  a.average_cpu_power_w = a.elapsed_s > 0.0 ? a.cpu_energy_j / a.elapsed_s : 0.0;
  a.average_l2_power_w = a.elapsed_s > 0.0 ? a.l2_energy_j / a.elapsed_s : 0.0;
  a.all_completed = all_tasks_done();
  a.makespan_s = 0.0;
  for (const auto& t : result_.tasks)
    if (t.completion_time) a.makespan_s = std::max(a.makespan_s, *t.completion_time);
  if (!a.all_completed) a.makespan_s = a.elapsed_s;
  return std::move(result_);
}

ExperimentResult run(const SimConfig& config, std::vector<TaskSpec> tasks) {
  Simulator sim(config, std::move(tasks));
  const auto duration_steps = static_cast<std::uint64_t>(
      std::ceil(config.duration / config.window - 1e-9));
  bool capped = false;
  for (;;) {
    const bool done = sim.all_tasks_done();
    const bool timed_out = sim.steps_taken() >= duration_steps;
    bool stop = false;
    switch (config.stop_rule) {
      case StopRule::kCompletion: stop = done; break;
      case StopRule::kDuration: stop = timed_out; break;
      case StopRule::kEarlier: stop = done || timed_out; break;
      case StopRule::kLater: stop = done && timed_out; break;
    }
    if (stop) break;
    if (sim.steps_taken() >= config.max_steps) {
      capped = true;
      break;
    }
    sim.step();
  }
  auto result = std::move(sim).finish();
  if (capped) {
    result.aggregate.hit_step_cap = true;
    result.diagnostics.push_back("stopped at max_steps=" + std::to_string(config.max_steps) +
                                 " with " + std::to_string(
                                     std::count_if(result.tasks.begin(), result.tasks.end(),
                                                   [](const TaskOutcome& t) {
                                                     return t.remaining_instructions > 0;
                                                   })) +
                                 " tasks unfinished");
  }
  return result;
}

ComparisonReport compare_averages(double theas_avg_w, double baseline_avg_w) {
  ComparisonReport r;
  r.theas_avg_w = theas_avg_w;
  r.baseline_avg_w = baseline_avg_w;
  r.improvement_percent =
      baseline_avg_w != 0.0 ? (baseline_avg_w - theas_avg_w) / baseline_avg_w * 100.0 : 0.0;
  return r;
}

ComparisonReport compare_runs(const ExperimentResult& theas,
                              const ExperimentResult& baseline) {
  auto r = compare_averages(theas.aggregate.average_cpu_power_w,
                            baseline.aggregate.average_cpu_power_w);
  r.theas_makespan_s = theas.aggregate.makespan_s;
  r.baseline_makespan_s = baseline.aggregate.makespan_s;
  r.makespan_ratio = baseline.aggregate.makespan_s > 0.0
                         ? theas.aggregate.makespan_s / baseline.aggregate.makespan_s
                         : 1.0;

  const auto& a = theas.config;
  const auto& b = baseline.config;
  if (a.seed != b.seed) r.warnings.push_back("runs use different seeds");
  if (a.window != b.window) r.warnings.push_back("runs use different window lengths");
  if (a.core_count != b.core_count) r.warnings.push_back("runs use different core counts");
  if (a.stop_rule != b.stop_rule || a.duration != b.duration)
    r.warnings.push_back("runs use different stop rules or durations");
  const auto total_work = [](const ExperimentResult& e) {
    std::uint64_t w = 0;
    for (const auto& t : e.tasks) w += t.instruction_count;
    return w;
  };
  if (theas.tasks.size() != baseline.tasks.size() || total_work(theas) != total_work(baseline))
    r.warnings.push_back("runs execute different workloads");
  if (!theas.aggregate.all_completed || !baseline.aggregate.all_completed)
    r.warnings.push_back("at least one run ended with unfinished tasks");

  const auto cores = std::min(theas.series.size(), baseline.series.size());
  for (std::size_t c = 0; c < cores; ++c) {
    CoreComparison cc;
    cc.core_id = c;
    cc.theas_avg_w = theas.aggregate.elapsed_s > 0.0
                         ? theas.core_energy(c) / theas.aggregate.elapsed_s
                         : 0.0;
    cc.baseline_avg_w = baseline.aggregate.elapsed_s > 0.0
                            ? baseline.core_energy(c) / baseline.aggregate.elapsed_s
                            : 0.0;
    r.per_core.push_back(cc);
  }
  return r;
}

}  // namespace theas::sim
