#pragma once

// Threshold-driven resource level controller. Each scheduling cycle compares
// per-core IPC, cache miss rate and fetch rate against four thresholds and
// moves the core one level up, one level down, or leaves it alone. Levels
// saturate at LOW and HIGH.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace theas::sched {

enum class ResourceLevel : std::uint8_t { kLow = 0, kMedium = 1, kHigh = 2 };

inline constexpr std::array kAllLevels{ResourceLevel::kLow, ResourceLevel::kMedium,
                                       ResourceLevel::kHigh};

ResourceLevel promote(ResourceLevel l);  // min(l + 1, HIGH)
ResourceLevel demote(ResourceLevel l);   // max(l - 1, LOW)

std::string_view to_string(ResourceLevel l);
/// Accepts LOW/MEDIUM/HIGH in any case. Throws ConfigError otherwise.
ResourceLevel parse_level(std::string_view text);

enum class WorkloadClass : std::uint8_t { kCpuBound, kMemoryBound, kMixed };

std::string_view to_string(WorkloadClass c);
WorkloadClass parse_workload_class(std::string_view text);

struct OperatingPoint {
  double frequency_mhz = 0.0;
  double voltage_v = 0.0;

  bool operator==(const OperatingPoint&) const = default;
};

/// Level -> operating point. Entries may be missing while a table is being
/// assembled from configuration; validate() and at() report that.
class LevelTable {
 public:
  LevelTable() = default;

  /// 800/1200/1800 MHz at 0.90/1.00/1.10 V.
  static LevelTable defaults();

  void set(ResourceLevel level, OperatingPoint op);
  bool contains(ResourceLevel level) const;
  /// Throws ConfigError when the level has no entry.
  const OperatingPoint& at(ResourceLevel level) const;

  /// All three levels present, frequency strictly increasing and voltage
  /// non-decreasing with level, every value finite and > 0.
  void validate() const;

  bool operator==(const LevelTable&) const = default;

 private:
  std::array<std::optional<OperatingPoint>, 3> points_{};
};

struct Thresholds {
  double ipc_low = 0.4;
  double ipc_high = 1.2;
  double cache_miss_rate = 0.05;
  double fetch_rate = 1e9;  // instructions fetched per second

  void validate() const;
  bool operator==(const Thresholds&) const = default;
};

struct CoreMetrics {
  double ipc = 0.0;
  double cache_miss_rate = 0.0;
  double fetch_rate = 0.0;
};

/// misses / accesses, 0 when there were no accesses.
double miss_rate(std::uint64_t misses, std::uint64_t accesses);

/// Which branch raises the level. `kPseudocode` promotes on low IPC with a
/// high miss rate and demotes on high IPC with a high fetch rate; `kProse`
/// swaps the two outcomes.
enum class DecisionPolarity : std::uint8_t { kPseudocode, kProse };

std::string_view to_string(DecisionPolarity p);
DecisionPolarity parse_polarity(std::string_view text);

using TaskId = std::uint32_t;

struct CoreState {
  std::size_t core_id = 0;
  ResourceLevel current_level = ResourceLevel::kHigh;
  OperatingPoint operating_point{};
  std::vector<TaskId> assigned_tasks;  // insertion order, no duplicates

  bool operator==(const CoreState&) const = default;
};

CoreState make_core(std::size_t core_id, ResourceLevel level, const LevelTable& table);

struct TransitionEvent {
  std::size_t core_id = 0;
  ResourceLevel from = ResourceLevel::kHigh;
  ResourceLevel to = ResourceLevel::kHigh;
  double timestamp = 0.0;

  bool operator==(const TransitionEvent&) const = default;
};

/// The first condition is tested first, so inputs satisfying both take it.
ResourceLevel decide_level(const CoreMetrics& m, ResourceLevel current,
                           const Thresholds& t,
                           DecisionPolarity polarity = DecisionPolarity::kPseudocode);

struct ApplyResult {
  CoreState core;
  bool transitioned = false;
};

ApplyResult apply_level(const CoreState& core, ResourceLevel level,
                        const LevelTable& table);

struct CycleResult {
  std::vector<CoreState> cores;
  std::vector<TransitionEvent> events;
};

/// One pass of decide + apply over every core. metrics[i] belongs to
/// cores[i]. Throws std::invalid_argument on a size mismatch.
CycleResult scheduling_cycle(std::span<const CoreState> cores,
                             std::span<const CoreMetrics> metrics,
                             const Thresholds& t, const LevelTable& table,
                             double timestamp,
                             DecisionPolarity polarity = DecisionPolarity::kPseudocode);

/// Picks the core for a newly runnable task. CPU-bound work prefers the
/// highest level, memory-bound work the lowest, mixed work MEDIUM; ties go to
/// the core with the fewest assigned tasks, then the lowest core_id.
/// Throws std::invalid_argument if `cores` is empty.
std::size_t assign_task(WorkloadClass demand, std::span<const CoreState> cores);

}  // namespace theas::sched
