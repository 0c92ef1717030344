#pragma once

// Empirical PMC-driven dynamic power model and the hardware-side helpers
// used to validate it against meter readings.
//
// Every function here is pure. Inputs that are negative or non-finite are
// rejected with std::invalid_argument.

#include <cstdint>
#include <span>

namespace theas::power {

/// Coefficient applied to data cache misses per second in the full core model.
inline constexpr double kMissCoefficient = 3e-9;
/// Fixed IPC weight of the core model (not calibratable).
inline constexpr double kIpcWeight = 2.0;
/// Per-access coefficient of the L2 model.
inline constexpr double kL2AccessCoefficient = 0.000018;

struct CmosParams {
  double activity_factor = 0.0;  // fraction in [0, 1]
  double capacitance = 0.0;      // farads switched per cycle
  double voltage = 0.0;          // volts
  double frequency = 0.0;        // hertz
};

/// One per-core observation window of performance counters.
struct PmcSample {
  double ipc = 0.0;
  std::uint64_t dcache_overall_misses = 0;
  std::uint64_t dcache_overall_accesses = 0;
  std::uint64_t l2_overall_accesses = 0;
  double fetch_rate = 0.0;   // instructions fetched per second
  double sim_seconds = 0.0;  // window length, must be > 0
};

struct PowerSample {
  double cpu_dynamic_watts = 0.0;
  double l2_dynamic_watts = 0.0;
  double timestamp = 0.0;
};

/// One meter trial: current before and after the workload was started.
struct CurrentTrial {
  double initial_amps = 0.0;
  double final_amps = 0.0;
};

/// Throws std::invalid_argument when the sample breaks its invariants.
void validate(const PmcSample& sample);

/// alpha * C * V^2 * f.
double cmos_dynamic_power(const CmosParams& p);

/// V * (2 * IPC).
double cpu_power_basic(double voltage, double ipc);

/// V * (2 * IPC + 3e-9 * misses / simSeconds).
double cpu_power_full(double voltage, const PmcSample& sample);

/// 0.000018 * sum(access_counts). The counts are per-window totals for each
/// L2 instance; the coefficient carries the window length, so window_seconds
/// is checked but takes no part in the arithmetic.
double l2_power(std::span<const std::uint64_t> access_counts,
                double window_seconds);

/// P = V * I.
double measured_power(double voltage, double current);

/// Arithmetic mean of (final - initial). Throws on an empty list. Negative
/// deltas (meter fluctuation) are kept as-is.
double mean_current_delta(std::span<const CurrentTrial> trials);

/// Number of trials whose final reading is below the initial one.
std::size_t count_negative_deltas(std::span<const CurrentTrial> trials);

/// |simulated - measured| / simulated.
double relative_error(double simulated_watts, double measured_watts);

}  // namespace theas::power
