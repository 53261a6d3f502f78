#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hns/can_bus.h"
#include "hns/scenario.h"

namespace hns::testing {

// Plants shared by generated scenarios. Skip limits at gamma 0.95 are 1, 2
// and 3 in this order.
std::string PlantsYaml();

struct RandomScenarioOptions {
  int max_slots_per_hp = 12;
  int max_recon = 3;
  int cycles = 3;
  bool allow_attacker = true;
  bool allow_jitter = true;
};

// Small two-ECU scenario drawn from `seed`: ECU "D" is defended and owns
// two or three control tasks, ECU "F" sends foreign traffic. At most
// max_slots_per_hp frames per CAN hyper-period, background included.
std::string RandomScenarioText(std::uint64_t seed,
                               const RandomScenarioOptions& options = {});
Scenario RandomScenario(std::uint64_t seed,
                        const RandomScenarioOptions& options = {});

// Independent slot statistics: walks the raw event list without TraceIndex.
// A frame is invisible when `hidden` returns true. Idle time is detected
// from gaps in bus activity rather than from Idle events.
struct OracleRow {
  int hyper_period = 0;
  int instance = 0;
  int ct = 0;
  int n = 0;
  int tbi = 0;
};
template <typename Hidden>
std::vector<OracleRow> EnumerateSlots(const std::vector<BusEvent>& events,
                                      MessageId victim, int recon, Micros H,
                                      Micros origin, Hidden hidden);

// Direct fold of the CAN error confinement rules over an outcome sequence.
struct ReferenceNode {
  int tec = 0;
  int rec = 0;
  bool bus_off = false;
  ErrorMode Mode() const;
};
// 'S' success, 'A' active collision, 'P' passive collision for node 0 of
// two transmitters; returns both transmitters and one receiver.
std::vector<ReferenceNode> FoldOutcomes(const std::string& outcomes);

}  // namespace hns::testing

#include "support/random_scenario_inl.h"
