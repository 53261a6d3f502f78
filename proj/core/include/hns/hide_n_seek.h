#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hns/asp_metrics.h"
#include "hns/can_bus.h"
#include "hns/ecu_scheduler.h"
#include "hns/trace_scan.h"

namespace hns {

// Hides foreign frames that carry one of the ECU's own ids. The defender
// knows what it sent, so injected copies are not part of its view of the
// bus schedule.
TransparencyFn DefenderView(const Schedule& schedule, EcuId ecu);

// Trailing run of skipped jobs per task at the end of `schedule`, indexed by
// task. Feeds the cross-boundary skip count of the following plan.
std::vector<int> TrailingSkips(const Schedule& schedule);

// True when skipping `job` keeps every run of consecutive skipped instances
// of its task within the task's skip limit. `skipped` is the plan so far and
// `carry_in` the run ending right before the schedule's first instance of the
// task. Non-control tasks and limit 0 always give false. Throws LookupError
// for a job outside the schedule.
bool CheckSkipLim(const Schedule& schedule, JobKey job,
                  const std::set<JobKey>& skipped, int carry_in = 0);

// Own-ECU control jobs whose frames sit in the occurrence's window, latest
// execution start first. Jobs are those of the schedule the trace came from.
std::vector<JobKey> GetHpPreds(const VictimOccurrence& occurrence,
                               const std::vector<BusEvent>& events,
                               const Schedule& observed,
                               const SlotMapper& mapper);

// Adds a reorder of `victim` ahead of `group` to the plan and validates the
// result against `base`. Returns false with the scheduler's complaint in
// `reason` (plan untouched) when the reorder cannot be realized. Throws
// std::invalid_argument when no group member has a frame in the window.
bool ShiftVic(const Schedule& base, ObfPlan& plan, JobKey victim,
              const std::vector<JobKey>& group, int group_in_window,
              std::string* reason = nullptr);

// Decision for one observed victim occurrence.
struct VictimDecision {
  MessageId id;
  int hyper_period = 0;  // k within the observed period
  int instance = 1;      // by order of appearance in hyper-period k
  int window_len = 0;
  int tbi = 0;
  int class_average = 0;  // ceil of the instance's mean window over recon
  JobKey observed_job;
  JobKey job;  // same job one period later
  // Next-period jobs of the own frames in the window, oldest first.
  std::vector<JobKey> window_jobs;
  // Own control jobs in the window, latest execution start first.
  std::vector<JobKey> preds;
  // Jobs tied with `job` in the unobfuscated next schedule.
  std::vector<JobKey> group;
  int eq_pri_size = 0;  // window frames sent by `group` members
  ObfAction rule = ObfAction::kNone;
  std::optional<JobKey> predecessor;
  int window_reduction = 0;  // window frames removed by the final plan
  std::string reason;        // set for kNone
};

struct HideInput {
  const std::vector<BusEvent>* events = nullptr;
  Micros origin = 0;  // start of the observed period
  int recon = 3;
  Micros can_hyperperiod = 0;
  const Schedule* observed = nullptr;   // as executed in the observed period
  const Schedule* next_base = nullptr;  // unobfuscated next period
  EcuId ecu = 0;
};

struct HideResult {
  ObfPlan plan;
  Schedule schedule;  // next_base with the plan applied
  std::vector<VictimDecision> decisions;

  // Decisions aligned with ComputeSlotStats rows of the same id and period.
  std::vector<std::optional<SlotDecision>> DecisionsFor(
      MessageId id, const std::vector<SlotStats>& rows) const;
};

// Own control-id occurrences with a non-empty window in the observed period,
// in the order Hide visits them, with rule kNone and no reduction.
std::vector<VictimDecision> AnalyzeVictims(const HideInput& input);

// Window frames of `d` sent by tied jobs that run after d.job in
// `schedule`, which must cover the same period as d.job.
int MovedOut(const VictimDecision& d, const Schedule& schedule);

// Builds the obfuscation plan for the period after the observed one. Every
// own control id is treated as a potential victim. Ids are handled by
// descending largest class average, occurrences by descending class average
// (earlier instance, then earlier hyper-period first on ties). Each
// occurrence with a non-empty window gets Obf1 if the skip limit allows,
// otherwise the larger of the Obf2 and Obf3 reductions, otherwise None.
HideResult Hide(const HideInput& input);

struct AlarmEvidence {
  Micros time = 0;
  std::int64_t bus_slot = 0;  // from the start of the period
  MessageId observed_id;
  EcuId source = -1;
  JobKey planned_job;
  ObfAction planned_action = ObfAction::kNone;
};

struct Alarm {
  bool raised = false;
  std::vector<AlarmEvidence> evidence;  // frames seen where a skip was planned
  std::vector<AlarmEvidence> logged;    // foreign own-id frames elsewhere
};

// Checks the period [origin, origin+length) of the trace against the
// schedule that was applied for it. A foreign frame with one of the ECU's
// ids, sent or errored, is matched to the planned job with the latest frame
// release at or before it; if that job was skipped the alarm is raised.
// Throws AlignmentError when the schedule covers a different period.
Alarm Seek(const std::vector<BusEvent>& events, Micros origin, Micros length,
           const Schedule& applied, const ObfPlan& plan, EcuId ecu);

}  // namespace hns
