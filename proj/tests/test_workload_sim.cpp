#include <doctest.h>

#include <algorithm>
#include <stdexcept>

#include "theas/config.hpp"
#include "theas/errors.hpp"
#include "theas/workload_sim.hpp"

using namespace theas::sim;
using theas::ConfigError;

namespace {

WorkloadProfile cpu_profile(double ipc, std::uint64_t instructions) {
  return {"cpu", WorkloadClass::kCpuBound, ipc, 0.0, instructions, 0.0};
}

WorkloadProfile memory_profile(double ipc, std::uint64_t instructions, double sensitivity = 0.5) {
  return {"mem", WorkloadClass::kMemoryBound, ipc, 0.2, instructions, sensitivity};
}

TaskSpec task(TaskId id, const WorkloadProfile& p, double arrival = 0.0) {
  return {id, p, arrival, p.instruction_count};
}

SimConfig quiet() {
  SimConfig c;
  c.pmc.noise_amplitude = 0.0;
  return c;
}

ExperimentResult run_mixed(std::uint64_t seed, bool theas_on) {
  const auto cfg = theas::config::default_config();
  auto sim = cfg.sim;
  sim.seed = seed;
  sim.theas_enabled = theas_on;
  if (!theas_on) sim.initial_levels = {ResourceLevel::kHigh};
  return run(sim, generate_workload(cfg.workload.mix, seed));
}

}  // namespace

TEST_CASE("generate_workload") {
  const std::vector<MixEntry> fmm{{theas::config::fmm_profile(), 8}};
  const auto tasks = generate_workload(fmm, 1);
  REQUIRE(tasks.size() == 8);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    CHECK(tasks[i].task_id == i);
    CHECK(tasks[i].profile == tasks[0].profile);
    CHECK(tasks[i].arrival_time == 0.0);
    CHECK(tasks[i].remaining_instructions == tasks[i].profile.instruction_count);
  }
  CHECK(generate_workload(fmm, 1) == tasks);
  CHECK_THROWS_AS(generate_workload(std::span<const MixEntry>{}, 1), std::invalid_argument);

  const auto spread = generate_workload(fmm, 5, 2.0);
  CHECK(spread == generate_workload(fmm, 5, 2.0));
  CHECK(spread != generate_workload(fmm, 6, 2.0));
  for (const auto& t : spread) {
    CHECK(t.arrival_time >= 0.0);
    CHECK(t.arrival_time < 2.0);
  }
}

TEST_CASE("effective ipc") {
  CHECK(effective_ipc(cpu_profile(1.5, 1), 1800, 800) == 1.5);
  CHECK(effective_ipc(cpu_profile(1.5, 1), 800, 800) == 1.5);
  CHECK(effective_ipc(memory_profile(1.0, 1, 1.0), 1600, 800) == doctest::Approx(0.5));
  CHECK(effective_ipc(memory_profile(1.0, 1, 0.0), 1600, 800) == 1.0);
  CHECK(effective_ipc(memory_profile(0.6, 1, 0.3), 800, 800) == doctest::Approx(0.6));
}

TEST_CASE("synthesize_pmc") {
  PmcSynthesis params;
  params.noise_amplitude = 0.0;
  Rng rng(1);
  const OperatingPoint high{1800, 1.1};

  SUBCASE("idle core") {
    const auto w = synthesize_pmc({}, high, params, 0.1, rng);
    CHECK(w.sample.ipc == 0.0);
    CHECK(w.sample.dcache_overall_accesses == 0);
    CHECK(w.sample.dcache_overall_misses == 0);
    CHECK(w.sample.l2_overall_accesses == 0);
    CHECK(w.sample.fetch_rate == 0.0);
    CHECK(w.sample.sim_seconds == 0.1);
  }
  SUBCASE("cpu-bound IPC is frequency independent") {
    const std::vector<TaskSpec> t{task(0, cpu_profile(1.5, 1'000'000'000'000))};
    for (double f : {800.0, 1200.0, 1800.0}) {
      const auto w = synthesize_pmc(t, {f, 1.0}, params, 0.1, rng);
      CHECK(w.sample.ipc == doctest::Approx(1.5));
      CHECK(w.sample.fetch_rate == doctest::Approx(1.5 * f * 1e6 * 1.1));
      CHECK(w.sample.dcache_overall_accesses == std::llround(0.3 * 1.5 * f * 1e6 * 0.1));
    }
  }
  SUBCASE("work is capped by what remains") {
    const std::vector<TaskSpec> t{task(0, cpu_profile(1.0, 1000)),
                                  task(1, cpu_profile(1.0, 1'000'000'000'000))};
    const auto w = synthesize_pmc(t, high, params, 0.1, rng);
    CHECK(w.executed[0] == 1000);
    CHECK(w.finish_offset[0] > 0.0);
    CHECK(w.finish_offset[0] < 1e-5);
    CHECK(w.executed[1] > 0);
    CHECK(w.finish_offset[1] < 0.0);
    CHECK(w.executed[0] + w.executed[1] == std::llround(1.0 * 1800e6 * 0.1));
  }
  SUBCASE("noise stays within its amplitude") {
    params.noise_amplitude = 0.02;
    const std::vector<TaskSpec> t{task(0, cpu_profile(1.0, 1'000'000'000'000))};
    for (int i = 0; i < 200; ++i) {
      const auto w = synthesize_pmc(t, high, params, 0.1, rng);
      CHECK(w.sample.ipc >= 0.98 - 1e-12);
      CHECK(w.sample.ipc <= 1.02 + 1e-12);
    }
  }
}

TEST_CASE("sim config validation") {
  auto c = quiet();
  CHECK_NOTHROW(c.validate());
  c.duration = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = quiet();
  c.window = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = quiet();
  c.scheduling_period = 0.55;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = quiet();
  c.initial_levels = {ResourceLevel::kLow, ResourceLevel::kHigh};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.initial_levels.resize(4, ResourceLevel::kMedium);
  CHECK_NOTHROW(c.validate());
  CHECK(c.initial_level(3) == ResourceLevel::kMedium);
}

TEST_CASE("step") {
  SUBCASE("no tasks anywhere gives zero power") {
    Simulator sim(quiet(), {});
    sim.step();
    for (const auto& s : sim.result().series) CHECK(s.back().power.cpu_dynamic_watts == 0.0);
  }
  SUBCASE("single cpu-bound task at IPC 1 and 1 V draws 2 W") {
    auto c = quiet();
    c.theas_enabled = false;
    c.initial_levels = {ResourceLevel::kMedium};  // 1.0 V in the default table
    Simulator sim(c, {task(0, cpu_profile(1.0, 1'000'000'000'000))});
    sim.step();
    CHECK(sim.result().series[0][0].power.cpu_dynamic_watts == doctest::Approx(2.0));
  }
  SUBCASE("finished task leaves the system") {
    Simulator sim(quiet(), {task(0, cpu_profile(1.0, 1000)),
                            task(1, cpu_profile(1.0, 1'000'000'000'000))});
    CHECK(sim.live_task_count() == 2);
    sim.step();
    CHECK(sim.live_task_count() == 1);
    std::size_t placed = 0;
    for (const auto& core : sim.cores()) placed += core.assigned_tasks.size();
    CHECK(placed == 1);
  }
}

TEST_CASE("run") {
  SUBCASE("baseline has no transitions") {
    const auto r = run_mixed(1, false);
    CHECK(r.transitions.empty());
    CHECK(r.aggregate.all_completed);
    for (const auto& s : r.series)
      for (const auto& p : s) CHECK(p.level == ResourceLevel::kHigh);
  }
  SUBCASE("constant memory-bound saturation settles") {
    auto c = quiet();
    c.initial_levels = {ResourceLevel::kLow};
    std::vector<TaskSpec> tasks;
    for (TaskId i = 0; i < 8; ++i) tasks.push_back(task(i, memory_profile(0.2, 4'000'000'000)));
    const auto r = run(c, tasks);
    CHECK(r.transitions.size() == 8);  // LOW -> MEDIUM -> HIGH on every core
    for (const auto& s : r.series) CHECK(s.back().level == ResourceLevel::kHigh);
  }
  SUBCASE("decisions wait for lagged statistics") {
    auto c = quiet();
    c.initial_levels = {ResourceLevel::kLow};
    const auto r = run(c, {task(0, memory_profile(0.2, 4'000'000'000))});
    REQUIRE_FALSE(r.transitions.empty());
    CHECK(r.transitions.front().timestamp >= c.scheduling_period + c.stats_latency - 1e-9);
  }
  SUBCASE("identical config and seed give identical results") {
    const auto a = run_mixed(3, true);
    const auto b = run_mixed(3, true);
    CHECK(a.transitions == b.transitions);
    REQUIRE(a.series.size() == b.series.size());
    for (std::size_t c = 0; c < a.series.size(); ++c) {
      REQUIRE(a.series[c].size() == b.series[c].size());
      for (std::size_t w = 0; w < a.series[c].size(); ++w)
        CHECK(a.series[c][w].power.cpu_dynamic_watts == b.series[c][w].power.cpu_dynamic_watts);
    }
    CHECK(a.aggregate.cpu_energy_j == b.aggregate.cpu_energy_j);
  }
  SUBCASE("duration stop rule") {
    auto c = quiet();
    c.stop_rule = StopRule::kDuration;
    c.duration = 2.0;
    const auto r = run(c, {task(0, cpu_profile(1.0, 1'000'000'000'000))});
    CHECK(r.aggregate.windows == 20);
    CHECK_FALSE(r.aggregate.all_completed);
    CHECK(r.aggregate.makespan_s == doctest::Approx(2.0));
  }
  SUBCASE("step cap ends a run with a diagnostic") {
    auto c = quiet();
    c.max_steps = 5;
    const auto r = run(c, {task(0, cpu_profile(1.0, 1'000'000'000'000))});
    CHECK(r.aggregate.hit_step_cap);
    CHECK(r.aggregate.windows == 5);
    CHECK(r.diagnostics.size() == 1);
  }
}

TEST_CASE("reporting invariants hold on every run") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    for (bool on : {true, false}) {
      const auto r = run_mixed(seed, on);
      const auto& a = r.aggregate;

      double energy = 0.0;
      for (const auto& s : r.series)
        for (const auto& p : s) energy += p.power.cpu_dynamic_watts * r.config.window;
      CHECK(energy == doctest::Approx(a.cpu_energy_j).epsilon(1e-9));
      CHECK(a.average_cpu_power_w * a.elapsed_s == doctest::Approx(a.cpu_energy_j).epsilon(1e-9));

      std::uint64_t done = 0;
      for (const auto& t : r.tasks) done += t.instruction_count - t.remaining_instructions;
      CHECK(done == a.instructions_executed);

      for (const auto& s : r.series)
        for (std::size_t w = 1; w < s.size(); ++w) CHECK(s[w].timestamp > s[w - 1].timestamp);
    }
  }
}

TEST_CASE("idle windows draw no dynamic power") {
  auto c = quiet();
  c.theas_enabled = true;
  const auto r = run(c, {task(0, cpu_profile(1.0, 2'000'000'000), 0.0),
                         task(1, cpu_profile(1.0, 2'000'000'000), 3.0)});
  std::size_t idle = 0;
  for (const auto& s : r.series)
    for (const auto& p : s)
      if (p.pmc.ipc == 0.0 && p.pmc.dcache_overall_misses == 0) {
        ++idle;
        CHECK(p.power.cpu_dynamic_watts == 0.0);
      }
  CHECK(idle > 0);
}

TEST_CASE("frequency effects") {
  SUBCASE("a cpu-bound task finishes no later at HIGH") {
    auto c = quiet();
    c.theas_enabled = false;
    c.core_count = 1;
    const auto t = task(0, cpu_profile(1.2, 5'000'000'000));
    c.initial_levels = {ResourceLevel::kHigh};
    const auto high = run(c, {t});
    c.initial_levels = {ResourceLevel::kLow};
    const auto low = run(c, {t});
    CHECK(high.aggregate.makespan_s <= low.aggregate.makespan_s);
  }
  SUBCASE("a memory-bound core draws less at LOW") {
    auto c = quiet();
    c.theas_enabled = false;
    c.core_count = 1;
    c.stop_rule = StopRule::kDuration;
    c.duration = 1.0;
    const auto t = task(0, theas::config::fmm_profile());
    c.initial_levels = {ResourceLevel::kHigh};
    const auto high = run(c, {t});
    c.initial_levels = {ResourceLevel::kLow};
    const auto low = run(c, {t});
    for (std::size_t w = 0; w < low.series[0].size(); ++w)
      CHECK(low.series[0][w].power.cpu_dynamic_watts <
            high.series[0][w].power.cpu_dynamic_watts);
  }
}

TEST_CASE("THEAS does not raise average power on the mixed workload") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto theas_run = run_mixed(seed, true);
    const auto base = run_mixed(seed, false);
    CHECK(theas_run.aggregate.average_cpu_power_w <= base.aggregate.average_cpu_power_w);
  }
}

TEST_CASE("comparison arithmetic") {
  CHECK(compare_averages(0.505525, 0.530125).improvement_percent ==
        doctest::Approx(4.6404).epsilon(1e-4));
  CHECK(compare_averages(0.34254, 0.35356).improvement_percent ==
        doctest::Approx(3.1169).epsilon(1e-4));
  CHECK(compare_averages(1.0, 1.0).improvement_percent == 0.0);

  const auto a = run_mixed(2, true);
  const auto same = compare_runs(a, a);
  CHECK(same.improvement_percent == 0.0);
  CHECK(same.makespan_ratio == 1.0);
  CHECK(same.warnings.empty());
  CHECK(same.per_core.size() == 4);

  const auto b = run_mixed(3, false);
  const auto mismatched = compare_runs(a, b);
  CHECK(std::find(mismatched.warnings.begin(), mismatched.warnings.end(),
                  "runs use different seeds") != mismatched.warnings.end());
}
