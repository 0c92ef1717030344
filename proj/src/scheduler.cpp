#include "theas/scheduler.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>
#include <tuple>

#include "theas/errors.hpp"

namespace theas::sched {

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::size_t index_of(ResourceLevel l) { return static_cast<std::size_t>(l); }

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

ResourceLevel promote(ResourceLevel l) {
  return l == ResourceLevel::kHigh ? l
                                   : static_cast<ResourceLevel>(index_of(l) + 1);
}

ResourceLevel demote(ResourceLevel l) {
  return l == ResourceLevel::kLow ? l : static_cast<ResourceLevel>(index_of(l) - 1);
}

std::string_view to_string(ResourceLevel l) {
  switch (l) {
    case ResourceLevel::kLow: return "LOW";
    case ResourceLevel::kMedium: return "MEDIUM";
    case ResourceLevel::kHigh: return "HIGH";
  }
  return "?";
}

ResourceLevel parse_level(std::string_view text) {
  const auto u = upper(text);
  if (u == "LOW") return ResourceLevel::kLow;
  if (u == "MEDIUM") return ResourceLevel::kMedium;
  if (u == "HIGH") return ResourceLevel::kHigh;
  throw ConfigError("unknown resource level '" + std::string(text) + "'");
}

std::string_view to_string(WorkloadClass c) {
  switch (c) {
    case WorkloadClass::kCpuBound: return "cpu_bound";
    case WorkloadClass::kMemoryBound: return "memory_bound";
    case WorkloadClass::kMixed: return "mixed";
  }
  return "?";
}

WorkloadClass parse_workload_class(std::string_view text) {
  if (text == "cpu_bound") return WorkloadClass::kCpuBound;
  if (text == "memory_bound") return WorkloadClass::kMemoryBound;
  if (text == "mixed") return WorkloadClass::kMixed;
  throw ConfigError("unknown workload class '" + std::string(text) + "'");
}

std::string_view to_string(DecisionPolarity p) {
  return p == DecisionPolarity::kPseudocode ? "pseudocode" : "prose";
}

DecisionPolarity parse_polarity(std::string_view text) {
  if (text == "pseudocode") return DecisionPolarity::kPseudocode;
  if (text == "prose") return DecisionPolarity::kProse;
  throw ConfigError("unknown decision_polarity '" + std::string(text) + "'");
}

LevelTable LevelTable::defaults() {
  LevelTable t;
  t.set(ResourceLevel::kLow, {800.0, 0.90});
  t.set(ResourceLevel::kMedium, {1200.0, 1.00});
  t.set(ResourceLevel::kHigh, {1800.0, 1.10});
  return t;
}

void LevelTable::set(ResourceLevel level, OperatingPoint op) {
  points_[index_of(level)] = op;
}

bool LevelTable::contains(ResourceLevel level) const {
  return points_[index_of(level)].has_value();
}

const OperatingPoint& LevelTable::at(ResourceLevel level) const {
  const auto& p = points_[index_of(level)];
  if (!p)
    throw ConfigError("level table has no entry for " + std::string(to_string(level)));
  return *p;
}

void LevelTable::validate() const {
  for (auto l : kAllLevels) {
    const auto& op = at(l);
    if (!finite_positive(op.frequency_mhz) || !finite_positive(op.voltage_v))
      throw ConfigError("operating point for " + std::string(to_string(l)) +
                        " must have finite positive frequency and voltage");
  }
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (!(points_[i]->frequency_mhz > points_[i - 1]->frequency_mhz))
      throw ConfigError("level table frequency must strictly increase with level");
    if (points_[i]->voltage_v < points_[i - 1]->voltage_v)
      throw ConfigError("level table voltage must not decrease with level");
  }
}

void Thresholds::validate() const {
  const bool finite = std::isfinite(ipc_low) && std::isfinite(ipc_high) &&
                      std::isfinite(cache_miss_rate) && std::isfinite(fetch_rate);
  if (!finite) throw ConfigError("thresholds must be finite");
  if (!(ipc_low >= 0.0 && ipc_low < ipc_high))
    throw ConfigError("thresholds need 0 <= ipc_low < ipc_high");
  if (cache_miss_rate < 0.0 || cache_miss_rate > 1.0)
    throw ConfigError("cache_miss_rate threshold must lie in [0, 1]");
  if (fetch_rate < 0.0) throw ConfigError("fetch_rate threshold must be >= 0");
}

double miss_rate(std::uint64_t misses, std::uint64_t accesses) {
  if (accesses == 0) return 0.0;
  return static_cast<double>(misses) / static_cast<double>(accesses);
}

CoreState make_core(std::size_t core_id, ResourceLevel level, const LevelTable& table) {
  return CoreState{core_id, level, table.at(level), {}};
}

ResourceLevel decide_level(const CoreMetrics& m, ResourceLevel current,
                           const Thresholds& t, DecisionPolarity polarity) {
  const bool starved = m.ipc < t.ipc_low && m.cache_miss_rate > t.cache_miss_rate;
  const bool saturated = m.ipc > t.ipc_high && m.fetch_rate > t.fetch_rate;
  if (polarity == DecisionPolarity::kPseudocode) {
    if (starved) return promote(current);
    if (saturated) return demote(current);
  } else {
    if (starved) return demote(current);
    if (saturated) return promote(current);
  }
  return current;
}

ApplyResult apply_level(const CoreState& core, ResourceLevel level,
                        const LevelTable& table) {
  // Look up first so a missing entry is reported even on the no-op path.
  const auto& op = table.at(level);
  if (level == core.current_level) return {core, false};
  CoreState next = core;
  next.current_level = level;
  next.operating_point = op;
  return {std::move(next), true};
}

CycleResult scheduling_cycle(std::span<const CoreState> cores,
                             std::span<const CoreMetrics> metrics,
                             const Thresholds& t, const LevelTable& table,
                             double timestamp, DecisionPolarity polarity) {
  if (cores.size() != metrics.size())
    throw std::invalid_argument("scheduling_cycle: " + std::to_string(metrics.size()) +
                                " metric sets for " + std::to_string(cores.size()) +
                                " cores");
  CycleResult out;
  out.cores.reserve(cores.size());
  for (std::size_t i = 0; i < cores.size(); ++i) {
    const auto target = decide_level(metrics[i], cores[i].current_level, t, polarity);
    auto applied = apply_level(cores[i], target, table);
    if (applied.transitioned)
      out.events.push_back(
          {cores[i].core_id, cores[i].current_level, target, timestamp});
    out.cores.push_back(std::move(applied.core));
  }
  return out;
}

std::size_t assign_task(WorkloadClass demand, std::span<const CoreState> cores) {
  if (cores.empty()) throw std::invalid_argument("assign_task: no cores");
  const auto distance = [demand](ResourceLevel l) {
    const int level = static_cast<int>(l);
    switch (demand) {
      case WorkloadClass::kCpuBound: return 2 - level;
      case WorkloadClass::kMemoryBound: return level;
      case WorkloadClass::kMixed: return std::abs(level - 1);
    }
    return 0;
  };
  const auto key = [&](const CoreState& c) {
    return std::tuple(distance(c.current_level), c.assigned_tasks.size(), c.core_id);
  };
  const auto best = std::min_element(
      cores.begin(), cores.end(),
      [&](const CoreState& a, const CoreState& b) { return key(a) < key(b); });
  return best->core_id;
}

}  // namespace theas::sched
