#pragma once

#include <cstdint>
#include <vector>

#include "hns/can_bus.h"
#include "hns/scenario.h"

namespace hns {

struct TrafficPlan {
  // Aperiodic frames per ECU index, sorted by release time.
  std::vector<std::vector<Frame>> per_ecu;
  double periodic_load = 0.0;
  double target_load = 0.0;
  int aperiodic_count = 0;
};

// Background frames over [0, horizon) that lift the bus from the periodic
// load to the scenario's busload. Ids are drawn uniformly from a pool of the
// aperiodic ids and non-control task ids of all ECUs, each sent by its own
// ECU and tagged aperiodic. Times are uniform over the horizon, so the
// arrivals form a Poisson process conditioned on the frame count. Throws
// BusloadError when the periodic load alone exceeds the target, or when
// extra load is needed and the pool is empty.
TrafficPlan GenTraffic(const Scenario& scenario, Micros horizon,
                       std::uint64_t seed);

// Fraction of [from, to) during which the bus carried a frame or an error.
double MeasuredLoad(const std::vector<BusEvent>& events, Micros from,
                    Micros to);

}  // namespace hns
