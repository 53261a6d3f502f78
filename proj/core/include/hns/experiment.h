#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "hns/asp_metrics.h"
#include "hns/attacker.h"
#include "hns/can_bus.h"
#include "hns/ecu_scheduler.h"
#include "hns/hide_n_seek.h"
#include "hns/scenario.h"

namespace hns {

struct CycleAspRow {
  int cycle = 0;
  MessageId victim;
  AspRow row;
  double asp_randomized = 0.0;
};

struct AlarmRow {
  int cycle = 0;
  std::string ecu;
  AlarmEvidence evidence;
};

struct TecRow {
  int cycle = 0;
  int hyper_period = 0;  // global index
  Micros time = 0;       // end of the hyper-period
  int victim_tec = 0;
  ErrorMode victim_mode = ErrorMode::kErrorActive;
  int attacker_tec = 0;
  ErrorMode attacker_mode = ErrorMode::kErrorActive;
  int collision = 0;
};

struct PlanRow {
  int cycle = 0;  // cycle the plan applies to
  std::string ecu;
  int ecu_slot = 0;
  std::string task;
  std::int64_t instance = 0;
  ObfAction action = ObfAction::kNone;
  std::string predecessor;
  std::string group;
  std::string reason;
};

struct AttackRow {
  int cycle = 0;
  int hyper_period = 0;
  int targeted_instance = 0;
  int injected = 0;
  int collision = 0;
  bool escalated = false;
};

struct CycleSummary {
  int cycle = 0;
  MessageId victim;
  double asp_total = 0.0;
  double asp_conditional_total = 0.0;
  double randomization_bound_total = 0.0;
  double asp_randomized_total = 0.0;
  bool saturated = false;
  int alarms = 0;
  int victim_tec = 0;
  ErrorMode victim_mode = ErrorMode::kErrorActive;
  std::array<double, 4> rule_frequency{};
};

// Everything one cycle produced, for callers that need more than the CSVs.
struct CycleRecord {
  int cycle = 0;
  Micros origin = 0;
  std::vector<Schedule> schedules;  // applied, per ECU
  std::vector<ObfPlan> plans;       // applied, per ECU
  std::vector<Alarm> alarms;        // per ECU (empty alarm if not checked)
  std::vector<Frame> injections;
  std::vector<HideResult> hide;     // per ECU, plans for the next cycle
};

struct Report {
  Scenario scenario;
  BusTrace trace;
  std::vector<CycleAspRow> asp;
  std::vector<AlarmRow> alarms;
  std::vector<TecRow> tec;
  std::vector<PlanRow> plan;
  std::vector<AttackRow> attack;
  std::vector<CycleSummary> summary;
  std::vector<CycleRecord> cycles;
  double periodic_load = 0.0;
  double measured_load = 0.0;
  int aperiodic_frames = 0;
  bool victim_bus_off = false;
  std::optional<Micros> bus_off_time;

  // Sum of the per-cycle totals.
  double TotalAsp() const;
  double TotalConditional() const;
  double TotalRandomized() const;
  int AlarmCount() const;
};

// Runs the scenario cycle by cycle. Hide for cycle c+1 reads only the trace
// of cycle c; Seek checks cycle c against the plan applied in it. The
// attacker sits on its own bus node (index = number of ECUs) in every mode
// so background traffic and node layout match across defense modes.
Report RunExperiment(const Scenario& scenario);

// The scenario at each busload, otherwise unchanged.
std::vector<Report> Sweep(const Scenario& scenario,
                          const std::vector<double>& busloads);

// The scenario under each defense mode, otherwise unchanged.
std::vector<Report> Compare(const Scenario& scenario,
                            const std::vector<DefenseMode>& modes);

// Seed for a labelled sub-stream of the scenario seed.
std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t a,
                         std::uint64_t b = 0);

}  // namespace hns
