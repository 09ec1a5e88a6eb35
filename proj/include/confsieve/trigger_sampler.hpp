#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "confsieve/error.hpp"
#include "confsieve/types.hpp"

namespace confsieve {

// T (sampling period) and M (sample length).
struct TriggerConfig {
  std::chrono::nanoseconds period = std::chrono::hours(3);
  std::size_t sample_length = 12;

  void validate() const {
    if (period.count() <= 0) throw ArgumentError("sampling period must be positive");
    if (sample_length < 1) throw ArgumentError("sample length must be at least 1");
  }
};

struct TriggerScan {
  std::optional<std::size_t> trigger;
  std::vector<std::size_t> openers;  // first version of each sampling period
};

// One pass of the trigger function. The period-opening version only advances
// when a later version is strictly more than T past it; the scan stops as
// soon as M openers exist.
inline TriggerScan scan_periods(std::span<const TimestampNs> timestamps, const TriggerConfig& cfg) {
  cfg.validate();
  TriggerScan out;
  if (timestamps.empty()) return out;
  for (std::size_t i = 1; i < timestamps.size(); ++i)
    if (timestamps[i] < timestamps[i - 1]) throw ArgumentError("timestamps must be non-decreasing");

  const auto period = cfg.period.count();
  std::size_t opener = 0;
  std::size_t next = 1;
  out.openers.push_back(0);
  while (out.openers.size() < cfg.sample_length) {
    if (next == timestamps.size()) return out;
    const std::size_t x = next++;
    if (timestamps[x] - timestamps[opener] > period) {
      opener = x;
      out.openers.push_back(x);
    }
  }
  out.trigger = opener;
  return out;
}

// Index of the version at which the similarity measurement is taken, or
// nullopt while fewer than M sampling periods have been seen.
inline std::optional<std::size_t> trigger_point(std::span<const TimestampNs> timestamps, const TriggerConfig& cfg) {
  return scan_periods(timestamps, cfg).trigger;
}

// The first version of each sampling period, ending at the trigger point.
// Always starts at 0 for a non-empty list and never exceeds M entries.
inline std::vector<std::size_t> sample_indices(std::span<const TimestampNs> timestamps, const TriggerConfig& cfg) {
  return scan_periods(timestamps, cfg).openers;
}

}  // namespace confsieve
