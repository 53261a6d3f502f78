#pragma once

#include <optional>
#include <vector>

#include "hns/can_bus.h"
#include "hns/trace_scan.h"

namespace hns {

struct AttackWindow {
  int hyper_period = 0;  // 0-based within the reconnaissance period
  int instance = 1;      // 1-based, by order of appearance in the hyper-period
  std::int64_t victim_slot = 0;
  Micros victim_time = 0;
  int window_len = 0;
  std::vector<std::int64_t> window_slots;
  // Start of the last higher-priority frame before the victim (the victim
  // time itself when the window is empty).
  Micros last_window_start = 0;
  Precedence preceded_by = Precedence::kIdle;
};

struct ReconReport {
  MessageId victim;
  int recon = 0;
  Micros hyperperiod = 0;
  Micros origin = 0;
  int dlc = 0;
  // windows[k] lists the victim instances seen in hyper-period k.
  std::vector<std::vector<AttackWindow>> windows;
  // Per instance (index i-1): ceil(sum of window lengths / recon).
  std::vector<int> averages;

  // ct(v, kJ + i): 1 if instance i was present in hyper-period k.
  int Presence(int k, int instance) const;
  const AttackWindow* Window(int k, int instance) const;
};

// Scans `recon` hyper-periods of length H starting at `origin`. Instances are
// numbered by order of appearance in each hyper-period. Throws NoVictimError
// when the victim id never appears.
ReconReport ReconAnalyze(const std::vector<BusEvent>& events,
                         MessageId victim, int recon, Micros H,
                         Micros origin = 0,
                         const TransparencyFn& transparent = {});

// Instance (1-based) with the largest average window; ties go to the
// earliest instance. nullopt when every average is zero.
std::optional<int> SelectTarget(const ReconReport& report);

struct AttackPlan {
  MessageId victim;
  int target_instance = 0;
  // Release offset from the start of each hyper-period.
  Micros offset = 0;
  Frame frame;  // same id as the victim, all-zero payload
  // Offsets for every instance with a non-empty average window, used once
  // the victim has been driven error-passive.
  std::vector<std::pair<int, Micros>> followup_offsets;
};

// Builds the plan for a target instance. The offset is the start of the last
// higher-priority frame of the instance's window in the latest hyper-period
// where that window was non-empty. Throws PlanError when the target's
// average window is zero.
AttackPlan MakeAttackPlan(const ReconReport& report, int target_instance,
                          EcuId attacker);

struct AttackLogRow {
  int hyper_period = 0;
  int targeted_instance = 0;
  int collision = 0;
  int victim_tec = 0;
  int attacker_tec = 0;
  ErrorMode victim_mode = ErrorMode::kErrorActive;
};

// Schedule-based bus-off attacker living on its own bus node. Stage one
// fires once per hyper-period at the target instance; after its own TEC has
// reached the error-passive threshold (so the victim's has too) it fires at
// every instance with a non-empty window.
class Attacker {
 public:
  Attacker(EcuId node, EcuId victim_node) : node_(node), victim_node_(victim_node) {}

  EcuId node() const { return node_; }
  void SetPlan(std::optional<AttackPlan> plan) { plan_ = std::move(plan); }
  const std::optional<AttackPlan>& plan() const { return plan_; }
  bool escalated() const { return escalated_; }

  // Releases this hyper-period's attack frames; returns them.
  std::vector<Frame> InjectAttack(BusSimulator& bus, Micros hp_start);

  // Call after the bus has run through the hyper-period. Inspects events
  // from `first_event` on and appends a log row.
  void Observe(const BusSimulator& bus, std::size_t first_event,
               int hyper_period);

  const std::vector<AttackLogRow>& log() const { return log_; }

 private:
  EcuId node_;
  EcuId victim_node_;
  std::optional<AttackPlan> plan_;
  bool escalated_ = false;
  std::vector<AttackLogRow> log_;
};

}  // namespace hns
