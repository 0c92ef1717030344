#include "theas/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "theas/errors.hpp"

namespace theas::config {

using nlohmann::json;
using sched::ResourceLevel;

namespace {

// Reads fields from one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  template <typename T>
  void read_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) return;
    T v{};
    read(key, v);
    out = v;
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string path(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown key " + path_ + "." + it.key());
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<ResourceLevel> parse_levels(const json& j, const std::string& path) {
  std::vector<ResourceLevel> out;
  if (j.is_string()) {
    out.push_back(sched::parse_level(j.get<std::string>()));
  } else if (j.is_array()) {
    for (const auto& e : j) {
      if (!e.is_string()) throw ConfigError(path + " entries must be level names");
      out.push_back(sched::parse_level(e.get<std::string>()));
    }
  } else {
    throw ConfigError(path + " must be a level name or a list of level names");
  }
  return out;
}

json levels_to_json(const std::vector<ResourceLevel>& levels) {
  json arr = json::array();
  for (auto l : levels) arr.push_back(std::string(sched::to_string(l)));
  return arr;
}

sim::WorkloadProfile parse_profile(Section& s, const std::string& path) {
  sim::WorkloadProfile p;
  std::string cls = "cpu_bound";
  double instructions = 0.0;
  s.read("name", p.name);
  s.read("class", cls);
  s.read("nominal_ipc", p.nominal_ipc);
  s.read("miss_rate", p.miss_rate);
  s.read("instruction_count", instructions);
  s.read("memory_sensitivity", p.memory_sensitivity);
  p.workload_class = sched::parse_workload_class(cls);
  if (!(instructions >= 1.0 && instructions < 1.8e19))
    throw ConfigError(path + ".instruction_count must be a positive count");
  p.instruction_count = static_cast<std::uint64_t>(instructions);
  return p;
}

json profile_to_json(const sim::WorkloadProfile& p, std::size_t processes) {
  return {{"name", p.name},
          {"class", std::string(sched::to_string(p.workload_class))},
          {"nominal_ipc", p.nominal_ipc},
          {"miss_rate", p.miss_rate},
          {"instruction_count", p.instruction_count},
          {"memory_sensitivity", p.memory_sensitivity},
          {"processes", processes}};
}

void parse_key_template(const json* j, stats::KeyTemplate& t, const std::string& path) {
  if (!j) return;
  if (j->is_string()) {
    t.pattern = j->get<std::string>();
    return;
  }
  Section s(*j, path);
  s.read("pattern", t.pattern);
  s.read("counter", t.counter);
  s.finish();
}

}  // namespace

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::kSimulate: return "simulate";
    case Mode::kCompare: return "compare";
    case Mode::kReplay: return "replay";
    case Mode::kValidate: return "validate";
  }
  return "?";
}

sim::WorkloadProfile barnes_profile() {
  return {"barnes", sched::WorkloadClass::kCpuBound, 1.3, 0.01, 37'200'000'000ULL, 0.0};
}

sim::WorkloadProfile fmm_profile() {
  return {"fmm", sched::WorkloadClass::kMemoryBound, 0.45, 0.20, 8'600'000'000ULL, 0.20};
}

sim::WorkloadProfile blend_profile() {
  return {"blend", sched::WorkloadClass::kMixed, 1.1, 0.04, 20'000'000'000ULL, 0.25};
}

Workload preset_workload(const std::string& name) {
  Workload w;
  w.name = name;
  if (name == "barnes") {
    w.mix = {{barnes_profile(), 8}};
  } else if (name == "fmm") {
    w.mix = {{fmm_profile(), 8}};
  } else if (name == "mixed") {
    w.mix = {{barnes_profile(), 1}, {blend_profile(), 5}, {fmm_profile(), 2}};
  } else if (name == "joint") {
    // FMM alongside the mixed set, 16 processes. Illustrative only.
    w.mix = {{barnes_profile(), 1}, {blend_profile(), 5}, {fmm_profile(), 10}};
  } else {
    throw ConfigError("unknown workload preset '" + name + "'");
  }
  return w;
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.workload = preset_workload("mixed");
  cfg.compare_runs = {{"theas", true, {}}, {"baseline", false, {ResourceLevel::kHigh}}};
  return cfg;
}

void ExperimentConfig::check(Mode mode) const {
  switch (mode) {
    case Mode::kSimulate:
    case Mode::kCompare:
      sim.validate();
      if (workload.mix.empty()) throw ConfigError("workload has no entries");
      for (const auto& e : workload.mix) e.profile.validate();
      if (!(workload.arrival_spread_s >= 0.0))
        throw ConfigError("workload.arrival_spread_s must be >= 0");
      if (mode == Mode::kCompare && compare_runs.size() != 2)
        throw ConfigError("compare needs exactly two run specs");
      break;
    case Mode::kReplay:
      if (replay.stats_path.empty()) throw ConfigError("replay needs a stats file (--stats)");
      if (!std::filesystem::exists(replay.stats_path))
        throw ConfigError("stats file does not exist: " + replay.stats_path);
      sim.thresholds.validate();
      sim.levels.validate();
      if (!(replay.voltage_v >= 0.0) || !(replay.frequency_mhz > 0.0))
        throw ConfigError("replay operating point must be positive");
      break;
    case Mode::kValidate:
      if (!(validate.supply_voltage_v >= 0.0))
        throw ConfigError("validate.supply_voltage_v must be >= 0");
      if (!validate.trials_path.empty() && !std::filesystem::exists(validate.trials_path))
        throw ConfigError("trials file does not exist: " + validate.trials_path);
      if (validate.trials.empty() && validate.trials_path.empty() &&
          !validate.measured_power_override_w)
        throw ConfigError("validate needs current trials (--trials) or a measured power");
      if (validate.simulated_power_w && !(*validate.simulated_power_w > 0.0))
        throw ConfigError("simulated power must be positive");
      if (validate.measured_power_override_w && !(*validate.measured_power_override_w >= 0.0))
        throw ConfigError("measured power override must be >= 0");
      break;
  }
}

ExperimentConfig from_json(const json& doc) {
  ExperimentConfig cfg = default_config();
  Section root(doc, "config");
  std::string mode_ignored;
  root.read("mode", mode_ignored);

  if (const auto* j = root.child("sim")) {
    Section s(*j, "sim");
    auto& c = cfg.sim;
    std::string stop = std::string(sim::to_string(c.stop_rule));
    std::string polarity = std::string(sched::to_string(c.polarity));
    s.read("core_count", c.core_count);
    s.read("window_s", c.window);
    s.read("scheduling_period_s", c.scheduling_period);
    s.read("stats_latency_s", c.stats_latency);
    s.read("duration_s", c.duration);
    s.read("stop_rule", stop);
    s.read("max_steps", c.max_steps);
    s.read("seed", c.seed);
    s.read("theas_enabled", c.theas_enabled);
    s.read("decision_polarity", polarity);
    if (const auto* lv = s.child("initial_levels"))
      c.initial_levels = parse_levels(*lv, s.path("initial_levels"));
    s.finish();
    c.stop_rule = sim::parse_stop_rule(stop);
    c.polarity = sched::parse_polarity(polarity);
  }

  if (const auto* j = root.child("levels")) {
    Section s(*j, "levels");
    sched::LevelTable table;
    for (auto level : sched::kAllLevels) {
      const std::string name(sched::to_string(level));
      if (const auto* e = s.child(name.c_str())) {
        Section p(*e, "levels." + name);
        sched::OperatingPoint op;
        p.read("frequency_mhz", op.frequency_mhz);
        p.read("voltage_v", op.voltage_v);
        p.finish();
        table.set(level, op);
      }
    }
    s.finish();
    cfg.sim.levels = table;  // a partial table is reported by validate()
  }

  if (const auto* j = root.child("thresholds")) {
    Section s(*j, "thresholds");
    s.read("ipc_low", cfg.sim.thresholds.ipc_low);
    s.read("ipc_high", cfg.sim.thresholds.ipc_high);
    s.read("cache_miss_rate", cfg.sim.thresholds.cache_miss_rate);
    s.read("fetch_rate", cfg.sim.thresholds.fetch_rate);
    s.finish();
  }

  if (const auto* j = root.child("pmc")) {
    Section s(*j, "pmc");
    auto& p = cfg.sim.pmc;
    s.read("reference_frequency_mhz", p.reference_frequency_mhz);
    s.read("accesses_per_instruction", p.accesses_per_instruction);
    s.read("fetch_inflation", p.fetch_inflation);
    s.read("noise_amplitude", p.noise_amplitude);
    s.finish();
  }

  if (const auto* j = root.child("workload")) {
    if (j->is_string()) {
      cfg.workload = preset_workload(j->get<std::string>());
    } else {
      Section s(*j, "workload");
      std::string name = cfg.workload.name;
      s.read("name", name);
      const auto* mix = s.child("mix");
      cfg.workload = mix ? Workload{name, {}, 0.0} : preset_workload(name);
      s.read("arrival_spread_s", cfg.workload.arrival_spread_s);
      if (mix) {
        if (!mix->is_array()) throw ConfigError("workload.mix must be a list");
        for (std::size_t i = 0; i < mix->size(); ++i) {
          const auto path = "workload.mix[" + std::to_string(i) + "]";
          Section e((*mix)[i], path);
          sim::MixEntry entry;
          e.read("processes", entry.process_count);
          entry.profile = parse_profile(e, path);
          e.finish();
          cfg.workload.mix.push_back(std::move(entry));
        }
      }
      s.finish();
    }
  }

  if (const auto* j = root.child("compare")) {
    Section s(*j, "compare");
    if (const auto* runs = s.child("runs")) {
      if (!runs->is_array()) throw ConfigError("compare.runs must be a list");
      cfg.compare_runs.clear();
      for (std::size_t i = 0; i < runs->size(); ++i) {
        const auto path = "compare.runs[" + std::to_string(i) + "]";
        Section r((*runs)[i], path);
        RunSpec spec;
        spec.label = "run" + std::to_string(i);
        r.read("label", spec.label);
        r.read("theas_enabled", spec.theas_enabled);
        if (const auto* lv = r.child("initial_levels"))
          spec.initial_levels = parse_levels(*lv, path + ".initial_levels");
        r.finish();
        cfg.compare_runs.push_back(std::move(spec));
      }
    }
    s.finish();
  }

  if (const auto* j = root.child("replay")) {
    Section s(*j, "replay");
    auto& r = cfg.replay;
    std::string level = std::string(sched::to_string(r.initial_level));
    s.read("stats_path", r.stats_path);
    s.read("core_count", r.core_count);
    s.read("cumulative", r.cumulative);
    s.read("voltage_v", r.voltage_v);
    s.read("frequency_mhz", r.frequency_mhz);
    s.read("initial_level", level);
    r.initial_level = sched::parse_level(level);
    if (const auto* keys = s.child("keys")) {
      Section k(*keys, "replay.keys");
      parse_key_template(k.child("ipc"), r.keys.ipc, "replay.keys.ipc");
      parse_key_template(k.child("dcache_misses"), r.keys.dcache_misses,
                         "replay.keys.dcache_misses");
      parse_key_template(k.child("dcache_accesses"), r.keys.dcache_accesses,
                         "replay.keys.dcache_accesses");
      parse_key_template(k.child("fetch_count"), r.keys.fetch_count,
                         "replay.keys.fetch_count");
      parse_key_template(k.child("l2_accesses"), r.keys.l2_accesses,
                         "replay.keys.l2_accesses");
      k.finish();
    }
    s.finish();
  }

  if (const auto* j = root.child("validate")) {
    Section s(*j, "validate");
    auto& v = cfg.validate;
    s.read("label", v.label);
    s.read("supply_voltage_v", v.supply_voltage_v);
    s.read("trials_path", v.trials_path);
    s.read_optional("simulated_power_w", v.simulated_power_w);
    s.read_optional("measured_power_override_w", v.measured_power_override_w);
    if (const auto* trials = s.child("trials")) {
      if (!trials->is_array()) throw ConfigError("validate.trials must be a list");
      for (std::size_t i = 0; i < trials->size(); ++i) {
        Section t((*trials)[i], "validate.trials[" + std::to_string(i) + "]");
        power::CurrentTrial trial;
        t.read("initial_amps", trial.initial_amps);
        t.read("final_amps", trial.final_amps);
        t.finish();
        v.trials.push_back(trial);
      }
    }
    s.finish();
  }

  if (const auto* j = root.child("output")) {
    Section s(*j, "output");
    s.read("dir", cfg.output_dir);
    s.finish();
  }

  root.finish();
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  const auto& c = cfg.sim;
  json doc;
  doc["sim"] = {{"core_count", c.core_count},
                {"window_s", c.window},
                {"scheduling_period_s", c.scheduling_period},
                {"stats_latency_s", c.stats_latency},
                {"duration_s", c.duration},
                {"stop_rule", std::string(sim::to_string(c.stop_rule))},
                {"max_steps", c.max_steps},
                {"seed", c.seed},
                {"theas_enabled", c.theas_enabled},
                {"decision_polarity", std::string(sched::to_string(c.polarity))},
                {"initial_levels", levels_to_json(c.initial_levels.empty()
                                                      ? std::vector{ResourceLevel::kHigh}
                                                      : c.initial_levels)}};
  json levels = json::object();
  for (auto l : sched::kAllLevels) {
    if (!c.levels.contains(l)) continue;
    const auto& op = c.levels.at(l);
    levels[std::string(sched::to_string(l))] = {{"frequency_mhz", op.frequency_mhz},
                                                {"voltage_v", op.voltage_v}};
  }
  doc["levels"] = levels;
  doc["thresholds"] = {{"ipc_low", c.thresholds.ipc_low},
                       {"ipc_high", c.thresholds.ipc_high},
                       {"cache_miss_rate", c.thresholds.cache_miss_rate},
                       {"fetch_rate", c.thresholds.fetch_rate}};
  doc["pmc"] = {{"reference_frequency_mhz", c.pmc.reference_frequency_mhz},
                {"accesses_per_instruction", c.pmc.accesses_per_instruction},
                {"fetch_inflation", c.pmc.fetch_inflation},
                {"noise_amplitude", c.pmc.noise_amplitude}};

  json mix = json::array();
  for (const auto& e : cfg.workload.mix) mix.push_back(profile_to_json(e.profile, e.process_count));
  doc["workload"] = {{"name", cfg.workload.name},
                     {"arrival_spread_s", cfg.workload.arrival_spread_s},
                     {"mix", mix}};

  json runs = json::array();
  for (const auto& r : cfg.compare_runs) {
    json run = {{"label", r.label}, {"theas_enabled", r.theas_enabled}};
    if (!r.initial_levels.empty()) run["initial_levels"] = levels_to_json(r.initial_levels);
    runs.push_back(run);
  }
  doc["compare"] = {{"runs", runs}};

  const auto key = [](const stats::KeyTemplate& t) {
    return json{{"pattern", t.pattern}, {"counter", t.counter}};
  };
  const auto& r = cfg.replay;
  doc["replay"] = {{"stats_path", r.stats_path},
                   {"core_count", r.core_count},
                   {"cumulative", r.cumulative},
                   {"voltage_v", r.voltage_v},
                   {"frequency_mhz", r.frequency_mhz},
                   {"initial_level", std::string(sched::to_string(r.initial_level))},
                   {"keys",
                    {{"ipc", key(r.keys.ipc)},
                     {"dcache_misses", key(r.keys.dcache_misses)},
                     {"dcache_accesses", key(r.keys.dcache_accesses)},
                     {"fetch_count", key(r.keys.fetch_count)},
                     {"l2_accesses", key(r.keys.l2_accesses)}}}};

  const auto& v = cfg.validate;
  json trials = json::array();
  for (const auto& t : v.trials)
    trials.push_back({{"initial_amps", t.initial_amps}, {"final_amps", t.final_amps}});
  doc["validate"] = {{"label", v.label},
                     {"supply_voltage_v", v.supply_voltage_v},
                     {"trials_path", v.trials_path},
                     {"trials", trials},
                     {"simulated_power_w", v.simulated_power_w ? json(*v.simulated_power_w)
                                                               : json(nullptr)},
                     {"measured_power_override_w", v.measured_power_override_w
                                                       ? json(*v.measured_power_override_w)
                                                       : json(nullptr)}};
  doc["output"] = {{"dir", cfg.output_dir}};
  return doc;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(doc);
}

std::vector<power::CurrentTrial> load_trials(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read trials " + path.string());

  const auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t\r");
      const auto e = cell.find_last_not_of(" \t\r");
      cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    return cells;
  };

  std::vector<power::CurrentTrial> trials;
  std::optional<std::size_t> initial_col, final_col;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    const auto cells = split(line);
    if (!initial_col) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i] == "initial_amps") initial_col = i;
        if (cells[i] == "final_amps") final_col = i;
      }
      if (!initial_col || !final_col)
        throw ConfigError(path.string() +
                          ": header must name initial_amps and final_amps columns");
      continue;
    }
    const auto need = std::max(*initial_col, *final_col);
    if (cells.size() <= need)
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": missing columns");
    try {
      trials.push_back({std::stod(cells[*initial_col]), std::stod(cells[*final_col])});
    } catch (const std::exception&) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": bad number");
    }
  }
  return trials;
}

}  // namespace theas::config
