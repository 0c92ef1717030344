#include "theas/power_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace theas::power {

namespace {

void require_non_negative(double v, const char* what) {
  if (!std::isfinite(v))
    throw std::invalid_argument(std::string(what) + " must be finite");
  if (v < 0.0)
    throw std::invalid_argument(std::string(what) + " must be >= 0");
}

}  // namespace

void validate(const PmcSample& s) {
  require_non_negative(s.ipc, "ipc");
  require_non_negative(s.fetch_rate, "fetch_rate");
  if (!std::isfinite(s.sim_seconds) || s.sim_seconds <= 0.0)
    throw std::invalid_argument("sim_seconds must be finite and > 0");
  if (s.dcache_overall_misses > s.dcache_overall_accesses)
    throw std::invalid_argument("dcache misses exceed dcache accesses");
}

double cmos_dynamic_power(const CmosParams& p) {
  require_non_negative(p.activity_factor, "activity_factor");
  require_non_negative(p.capacitance, "capacitance");
  require_non_negative(p.voltage, "voltage");
  require_non_negative(p.frequency, "frequency");
  if (p.activity_factor > 1.0)
    throw std::invalid_argument("activity_factor must be <= 1");
  return p.activity_factor * p.capacitance * p.voltage * p.voltage * p.frequency;
}

double cpu_power_basic(double voltage, double ipc) {
  require_non_negative(voltage, "voltage");
  require_non_negative(ipc, "ipc");
  return voltage * (kIpcWeight * ipc);
}

double cpu_power_full(double voltage, const PmcSample& sample) {
  require_non_negative(voltage, "voltage");
  validate(sample);
  const double miss_rate_per_s =
      static_cast<double>(sample.dcache_overall_misses) / sample.sim_seconds;
  return voltage * (kIpcWeight * sample.ipc + kMissCoefficient * miss_rate_per_s);
}

double l2_power(std::span<const std::uint64_t> access_counts,
                double window_seconds) {
  if (!std::isfinite(window_seconds) || window_seconds <= 0.0)
    throw std::invalid_argument("window_seconds must be finite and > 0");
  double total = 0.0;
  for (auto c : access_counts) total += static_cast<double>(c);
  return kL2AccessCoefficient * total;
}

double measured_power(double voltage, double current) {
  require_non_negative(voltage, "voltage");
  require_non_negative(current, "current");
  return voltage * current;
}

double mean_current_delta(std::span<const CurrentTrial> trials) {
  if (trials.empty())
    throw std::invalid_argument("mean_current_delta needs at least one trial");
  double sum = 0.0;
  for (const auto& t : trials) {
    require_non_negative(t.initial_amps, "initial_amps");
    require_non_negative(t.final_amps, "final_amps");
    sum += t.final_amps - t.initial_amps;
  }
  return sum / static_cast<double>(trials.size());
}

std::size_t count_negative_deltas(std::span<const CurrentTrial> trials) {
  std::size_t n = 0;
  for (const auto& t : trials)
    if (t.final_amps < t.initial_amps) ++n;
  return n;
}

double relative_error(double simulated_watts, double measured_watts) {
  if (!std::isfinite(simulated_watts) || !std::isfinite(measured_watts))
    throw std::invalid_argument("relative_error inputs must be finite");
  if (simulated_watts <= 0.0)
    throw std::invalid_argument("simulated power must be > 0");
  return std::fabs(simulated_watts - measured_watts) / simulated_watts;
}

}  // namespace theas::power
