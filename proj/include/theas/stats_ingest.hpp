#pragma once

// Reader for gem5-style periodic statistics dumps (stats.txt).
//
// A dump is a sequence of blocks:
//
//   ---------- Begin Simulation Statistics ----------
//   simSeconds                  0.500000   # Number of seconds simulated
//   system.cpu0.ipc             1.250000   # IPC
//   ...
//   ---------- End Simulation Statistics ----------
//
// Marker lines are matched with runs of blanks collapsed, so gem5's own
// padded end marker is accepted as well. Only `<key> <value> [# comment]`
// lines are kept. Distribution and histogram lines with more than one value
// column are skipped and counted, as are nan/inf values.

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "theas/power_model.hpp"
#include "theas/scheduler.hpp"

namespace theas::stats {

inline constexpr std::string_view kBeginMarker =
    "---------- Begin Simulation Statistics ----------";
inline constexpr std::string_view kEndMarker =
    "---------- End Simulation Statistics ----------";
inline constexpr std::string_view kSimSecondsKey = "simSeconds";

struct StatsSnapshot {
  std::size_t index = 0;
  std::map<std::string, double> entries;
  double sim_seconds = 0.0;  // mirrors entries["simSeconds"], 0 when absent
  bool has_sim_seconds = false;
  bool complete = true;  // false when the end marker never arrived

  bool operator==(const StatsSnapshot&) const = default;
};

struct Diagnostic {
  std::size_t line = 0;  // 1-based; 0 for diagnostics not tied to a line
  std::string reason;
};

/// `line:<n> <reason>`
std::string format(const Diagnostic& d);

struct ParseResult {
  std::vector<StatsSnapshot> snapshots;
  std::vector<Diagnostic> diagnostics;
  std::size_t skipped_lines = 0;
  bool truncated = false;  // last block had no end marker
};

ParseResult parse_stats_stream(std::istream& in);
ParseResult parse_stats_text(std::string_view text);

/// Parses a single value token: integers, floats, percentages ("12.5%" ->
/// 0.125). Returns false for nan/inf or anything unparseable.
bool parse_value(std::string_view token, double& out);

/// Writes snapshots back in dump format. Values use shortest round-trip
/// formatting, so parse(serialize(x)) == x for complete snapshots.
std::string serialize(const std::vector<StatsSnapshot>& snapshots);

/// Key template with at most one `{N}` placeholder standing for a core index.
struct KeyTemplate {
  std::string pattern;
  bool counter = true;  // counters are differenced across dumps, rates are not

  std::string resolve(std::size_t core_id) const;
  bool matches(std::string_view key) const;
};

/// Templates for the five per-core counters read from a dump.
struct CoreKeyMap {
  KeyTemplate ipc{"system.cpu{N}.ipc", false};
  KeyTemplate dcache_misses{"system.cpu{N}.dcache.overallMisses::total", true};
  KeyTemplate dcache_accesses{"system.cpu{N}.dcache.overallAccesses::total", true};
  KeyTemplate fetch_count{"system.cpu{N}.fetch.nInsts", true};
  KeyTemplate l2_accesses{"system.l2.overallAccesses::total", true};

  /// Templates in a fixed order: ipc, misses, accesses, fetch, l2.
  std::vector<const KeyTemplate*> all() const;
  /// True if `key` matches a counter-class template. Keys matching no
  /// template are treated as rates.
  bool is_counter(std::string_view key) const;
};

struct CoreExtraction {
  power::PmcSample sample;
  sched::CoreMetrics metrics;
  std::vector<Diagnostic> diagnostics;  // one per missing key
};

/// Missing keys read as 0 with a diagnostic. Throws DataError when the
/// snapshot has no positive simSeconds.
CoreExtraction extract_core_metrics(const StatsSnapshot& snapshot, std::size_t core_id,
                                    const CoreKeyMap& keymap);

/// Windowed view of two dumps of a cumulative stats stream: counters are
/// subtracted, rates come from `b`, simSeconds becomes the window length.
/// Requires b.index > a.index (std::invalid_argument) and a positive window
/// (DataError).
StatsSnapshot delta_snapshots(const StatsSnapshot& a, const StatsSnapshot& b,
                              const CoreKeyMap& keymap = {});

}  // namespace theas::stats
