#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hns/can_bus.h"
#include "hns/trace_scan.h"

namespace hns {

enum class SchedPolicy { kEdf, kStaticTable };

struct TaskSpec {
  std::string name;
  Micros period = 0;
  Micros wcet = 0;
  int ecu_priority = 0;  // smaller is higher; StaticTable only
  std::optional<MessageId> msg_id;
  int dlc = 8;
  bool is_control = false;
  int skip_limit = 0;

  bool transmits() const { return msg_id.has_value(); }
};

// Validates one task: positive period, wcet within period, control tasks
// transmit, dlc in range. Throws InfeasibleError / std::invalid_argument.
void ValidateTask(const TaskSpec& task);

// A job is identified by task index and 1-based instance number. Instances
// count from time zero, so instance k of a task is released at (k-1)*period.
struct JobKey {
  int task = -1;
  std::int64_t instance = 0;
  auto operator<=>(const JobKey&) const = default;
};

enum class ObfAction { kNone, kSkip, kSkipPredecessor, kReorder };

// "None", "Obf1", "Obf2", "Obf3".
const char* ToString(ObfAction action);

struct ScheduleSlot {
  int index = 0;
  Micros start = 0;
  Micros end = 0;
  int task = -1;              // -1 for an idle slot
  std::int64_t instance = 0;  // 0 for an idle slot
  Micros release = 0;
  Micros deadline = 0;
  bool skipped = false;   // reservation kept, no frame released
  bool reordered = false; // moved ahead of its equal-priority group

  bool idle() const { return task < 0; }
  JobKey job() const { return {task, instance}; }
};

// Jobs that tied with a control job at a dispatch decision while both were
// ready. `before` were dispatched ahead of it, `after` behind it.
struct EqPriEntry {
  JobKey job;
  std::vector<JobKey> before;
  std::vector<JobKey> after;
};

struct ScheduleOptions {
  // Jobs that win every tie they take part in.
  std::set<JobKey> preferred;
  // Jobs whose execution is kept but whose frame is suppressed.
  std::set<JobKey> skipped;
  // When set, ties are broken by a seeded random rank instead of by name.
  std::optional<std::uint64_t> shuffle_seed;
};

struct Schedule {
  std::vector<TaskSpec> tasks;
  SchedPolicy policy = SchedPolicy::kEdf;
  Micros hyperperiod = 0;
  Micros origin = 0;
  Micros horizon = 0;
  std::vector<ScheduleSlot> slots;
  std::vector<EqPriEntry> eq_pri;
  ScheduleOptions options;

  // Slot index of a job, or -1.
  int SlotOf(JobKey job) const;
  const EqPriEntry* EqPriFor(JobKey job) const;
  // Task index by name; throws LookupError.
  int TaskIndex(const std::string& name) const;
  // Task transmitting `id`, or -1.
  int TaskForId(MessageId id) const;

 private:
  friend Schedule BuildSchedule(const std::vector<TaskSpec>&, Micros, Micros,
                                SchedPolicy, const ScheduleOptions&);
  std::map<JobKey, int> slot_of_;
};

// Least common multiple of task periods. Throws std::overflow_error.
Micros Hyperperiod(const std::vector<TaskSpec>& tasks);

// Non-preemptive schedule of every job released in [origin, origin+horizon).
// Deadlines are the next release. EDF ranks by absolute deadline,
// StaticTable by ecu_priority; remaining ties go to preferred jobs, then to
// the shuffle rank or task name, then instance. Throws InfeasibleError on
// utilization above one or the first missed deadline.
Schedule BuildSchedule(const std::vector<TaskSpec>& tasks, Micros origin,
                       Micros horizon, SchedPolicy policy,
                       const ScheduleOptions& options = {});

// One obfuscation decision, keyed by the victim job it protects.
struct PlanEntry {
  JobKey job;
  ObfAction action = ObfAction::kNone;
  std::optional<JobKey> predecessor;  // kSkipPredecessor
  std::vector<JobKey> group;          // kReorder
  std::string reason;                 // kNone
};

struct ObfPlan {
  Micros origin = 0;
  Micros horizon = 0;
  std::vector<PlanEntry> entries;

  std::set<JobKey> SkippedJobs() const;
  std::set<JobKey> PreferredJobs() const;
  const PlanEntry* EntryFor(JobKey job) const;
};

// Re-schedules with the plan's skips and reorders. Every reordered job must
// end up ahead of its whole group. Throws PlanError naming the violating
// job on a deadline miss or an unrealized reorder.
Schedule ApplyObf(const Schedule& schedule, const ObfPlan& plan);

// Frames released by an ECU for a schedule: one per non-skipped job of a
// transmitting task, at job completion plus jitter. Jitter is uniform in
// [0, jitter_us] and depends only on (seed, ecu, task, instance).
std::vector<Frame> ReleaseFrames(const Schedule& schedule, EcuId ecu,
                                 Micros jitter_us = 0, std::uint64_t seed = 0);

// Payload used for task frames. Never all-zero, so an all-zero attack frame
// of the same length is dominant.
std::vector<std::uint8_t> TaskPayload(int dlc);

// Maps between bus transmission slots of one observation window and the ECU
// execution slots that produced them. Own frames are matched by order: the
// k-th transmission of id X from this ECU inside the window corresponds to
// the k-th non-skipped job of the task sending X. Aperiodic frames are
// never matched.
class SlotMapper {
 public:
  SlotMapper(const Schedule& schedule, const TraceIndex& index, EcuId ecu);

  // ECU slot index, or nullopt for idle/foreign/unmatched transmissions.
  // Throws LookupError for a slot outside the trace.
  std::optional<int> BusToEcu(std::int64_t bus_slot) const;
  // Bus slot for an ECU slot, or nullopt when the job sent nothing.
  // Throws LookupError for an unknown ECU slot.
  std::optional<std::int64_t> EcuToBus(int ecu_slot) const;

  // Job of `task` whose planned frame release lies closest to `time`. An
  // injected copy can arrive a little before the release it aims at when
  // the window in front of it thins out. nullopt if the task has no jobs.
  std::optional<JobKey> NearestPlannedJob(int task, Micros time) const;

 private:
  const Schedule& schedule_;
  const TraceIndex& index_;
  std::map<std::int64_t, int> bus_to_ecu_;
  std::map<int, std::int64_t> ecu_to_bus_;
};

}  // namespace hns
