#include "hns/ecu_scheduler.h"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "hns/error.h"

namespace hns {

const char* ToString(ObfAction action) {
  switch (action) {
    case ObfAction::kNone:
      return "None";
    case ObfAction::kSkip:
      return "Obf1";
    case ObfAction::kSkipPredecessor:
      return "Obf2";
    case ObfAction::kReorder:
      return "Obf3";
  }
  return "?";
}

void ValidateTask(const TaskSpec& task) {
  if (task.period <= 0) {
    throw std::invalid_argument("task " + task.name +
                                ": period must be positive");
  }
  if (task.wcet <= 0 || task.wcet > task.period) {
    throw InfeasibleError("task " + task.name +
                          ": wcet must lie in (0, period]");
  }
  if (task.dlc < 0 || task.dlc > 8) {
    throw std::invalid_argument("task " + task.name + ": dlc must be 0..8");
  }
  if (task.is_control && !task.msg_id) {
    throw std::invalid_argument("control task " + task.name +
                                " must transmit a message");
  }
  if (task.skip_limit < 0) {
    throw std::invalid_argument("task " + task.name +
                                ": negative skip limit");
  }
}

Micros Hyperperiod(const std::vector<TaskSpec>& tasks) {
  if (tasks.empty()) throw std::invalid_argument("empty task set");
  Micros h = 1;
  for (const TaskSpec& t : tasks) {
    if (t.period <= 0) {
      throw std::invalid_argument("task " + t.name +
                                  ": period must be positive");
    }
    const Micros g = std::gcd(h, t.period);
    const Micros factor = t.period / g;
    if (h > std::numeric_limits<Micros>::max() / factor) {
      throw std::overflow_error("hyperperiod overflows");
    }
    h *= factor;
  }
  return h;
}

int Schedule::SlotOf(JobKey job) const {
  auto it = slot_of_.find(job);
  return it == slot_of_.end() ? -1 : it->second;
}

const EqPriEntry* Schedule::EqPriFor(JobKey job) const {
  for (const EqPriEntry& e : eq_pri) {
    if (e.job == job) return &e;
  }
  return nullptr;
}

int Schedule::TaskIndex(const std::string& name) const {
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i].name == name) return static_cast<int>(i);
  }
  throw LookupError("unknown task '" + name + "'");
}

int Schedule::TaskForId(MessageId id) const {
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i].msg_id && *tasks[i].msg_id == id) return static_cast<int>(i);
  }
  return -1;
}

namespace {

struct Job {
  JobKey key;
  Micros release = 0;
  Micros deadline = 0;
  std::uint64_t rank = 0;
};

}  // namespace

Schedule BuildSchedule(const std::vector<TaskSpec>& tasks, Micros origin,
                       Micros horizon, SchedPolicy policy,
                       const ScheduleOptions& options) {
  if (horizon <= 0) throw std::invalid_argument("horizon must be positive");
  double utilization = 0.0;
  for (const TaskSpec& t : tasks) {
    ValidateTask(t);
    utilization += static_cast<double>(t.wcet) / static_cast<double>(t.period);
  }
  if (utilization > 1.0 + 1e-12) {
    throw InfeasibleError("utilization " + std::to_string(utilization) +
                          " exceeds 1");
  }

  Schedule sched;
  sched.tasks = tasks;
  sched.policy = policy;
  sched.hyperperiod = Hyperperiod(tasks);
  sched.origin = origin;
  sched.horizon = horizon;
  sched.options = options;

  std::vector<Job> jobs;
  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    const TaskSpec& t = tasks[ti];
    const std::int64_t first = (origin + t.period - 1) / t.period;
    for (std::int64_t k = first; k * t.period < origin + horizon; ++k) {
      Job j;
      j.key = {static_cast<int>(ti), k + 1};
      j.release = k * t.period;
      j.deadline = j.release + t.period;
      jobs.push_back(j);
    }
  }
  std::sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) {
    if (a.release != b.release) return a.release < b.release;
    return a.key < b.key;
  });
  if (options.shuffle_seed) {
    std::mt19937_64 rng(*options.shuffle_seed);
    for (Job& j : jobs) j.rank = rng();
  }

  auto priority_key = [&](const Job& j) -> Micros {
    return policy == SchedPolicy::kEdf ? j.deadline
                                       : tasks[j.key.task].ecu_priority;
  };
  // Strict weak order: true if a should run before b.
  auto better = [&](const Job& a, const Job& b) {
    const Micros ka = priority_key(a);
    const Micros kb = priority_key(b);
    if (ka != kb) return ka < kb;
    const bool pa = options.preferred.count(a.key) > 0;
    const bool pb = options.preferred.count(b.key) > 0;
    if (pa != pb) return pa;
    if (options.shuffle_seed && a.rank != b.rank) return a.rank < b.rank;
    const std::string& na = tasks[a.key.task].name;
    const std::string& nb = tasks[b.key.task].name;
    if (na != nb) return na < nb;
    return a.key.instance < b.key.instance;
  };

  std::map<JobKey, EqPriEntry> eq;
  auto note_tie = [&](const JobKey& first, const JobKey& second) {
    if (tasks[second.task].is_control) {
      EqPriEntry& e = eq[second];
      e.job = second;
      if (std::find(e.before.begin(), e.before.end(), first) == e.before.end())
        e.before.push_back(first);
    }
    if (tasks[first.task].is_control) {
      EqPriEntry& e = eq[first];
      e.job = first;
      if (std::find(e.after.begin(), e.after.end(), second) == e.after.end())
        e.after.push_back(second);
    }
  };

  std::vector<Job> ready;
  std::size_t next = 0;
  Micros t = origin;
  int slot_index = 0;
  while (next < jobs.size() || !ready.empty()) {
    while (next < jobs.size() && jobs[next].release <= t) {
      ready.push_back(jobs[next++]);
    }
    if (ready.empty()) {
      const Micros r = jobs[next].release;
      ScheduleSlot idle;
      idle.index = slot_index++;
      idle.start = t;
      idle.end = r;
      sched.slots.push_back(idle);
      t = r;
      continue;
    }
    auto best_it = std::min_element(ready.begin(), ready.end(), better);
    const Job best = *best_it;
    const Micros best_key = priority_key(best);
    for (const Job& other : ready) {
      if (other.key == best.key || priority_key(other) != best_key) continue;
      note_tie(best.key, other.key);
    }
    ready.erase(best_it);

    const TaskSpec& task = tasks[best.key.task];
    ScheduleSlot s;
    s.index = slot_index++;
    s.start = t;
    s.end = t + task.wcet;
    s.task = best.key.task;
    s.instance = best.key.instance;
    s.release = best.release;
    s.deadline = best.deadline;
    s.skipped = options.skipped.count(best.key) > 0;
    s.reordered = options.preferred.count(best.key) > 0;
    if (s.end > s.deadline) {
      throw InfeasibleError("task " + task.name + " instance " +
                            std::to_string(best.key.instance) +
                            " misses its deadline at " +
                            std::to_string(s.deadline) + " us");
    }
    sched.slot_of_[best.key] = s.index;
    sched.slots.push_back(s);
    t = s.end;
  }
  for (auto& [key, entry] : eq) sched.eq_pri.push_back(std::move(entry));
  return sched;
}

std::set<JobKey> ObfPlan::SkippedJobs() const {
  std::set<JobKey> out;
  for (const PlanEntry& e : entries) {
    if (e.action == ObfAction::kSkip) out.insert(e.job);
    if (e.action == ObfAction::kSkipPredecessor && e.predecessor) {
      out.insert(*e.predecessor);
    }
  }
  return out;
}

std::set<JobKey> ObfPlan::PreferredJobs() const {
  std::set<JobKey> out;
  for (const PlanEntry& e : entries) {
    if (e.action == ObfAction::kReorder) out.insert(e.job);
  }
  return out;
}

const PlanEntry* ObfPlan::EntryFor(JobKey job) const {
  for (const PlanEntry& e : entries) {
    if (e.job == job) return &e;
  }
  return nullptr;
}

Schedule ApplyObf(const Schedule& schedule, const ObfPlan& plan) {
  ScheduleOptions options = schedule.options;
  for (const JobKey& j : plan.SkippedJobs()) {
    if (schedule.SlotOf(j) < 0) {
      throw PlanError("plan skips a job outside the schedule: task " +
                      std::to_string(j.task) + " instance " +
                      std::to_string(j.instance));
    }
    options.skipped.insert(j);
  }
  for (const JobKey& j : plan.PreferredJobs()) options.preferred.insert(j);

  Schedule out;
  try {
    out = BuildSchedule(schedule.tasks, schedule.origin, schedule.horizon,
                        schedule.policy, options);
  } catch (const InfeasibleError& e) {
    throw PlanError(std::string("plan rejected: ") + e.what());
  }
  for (const PlanEntry& e : plan.entries) {
    if (e.action != ObfAction::kReorder) continue;
    const int vs = out.SlotOf(e.job);
    for (const JobKey& g : e.group) {
      const int gs = out.SlotOf(g);
      if (vs < 0 || gs < 0 || gs < vs) {
        throw PlanError("reorder of " + schedule.tasks[e.job.task].name +
                        " instance " + std::to_string(e.job.instance) +
                        " not realized");
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> TaskPayload(int dlc) {
  return std::vector<std::uint8_t>(static_cast<std::size_t>(dlc), 0xA5);
}

std::vector<Frame> ReleaseFrames(const Schedule& schedule, EcuId ecu,
                                 Micros jitter_us, std::uint64_t seed) {
  std::vector<Frame> frames;
  for (const ScheduleSlot& s : schedule.slots) {
    if (s.idle() || s.skipped) continue;
    const TaskSpec& task = schedule.tasks[s.task];
    if (!task.msg_id) continue;
    Frame f;
    f.id = *task.msg_id;
    f.payload = TaskPayload(task.dlc);
    f.source = ecu;
    f.task = s.task;
    f.instance = s.instance;
    f.release_time = s.end;
    if (jitter_us > 0) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed),
                        static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(ecu),
                        static_cast<std::uint32_t>(s.task),
                        static_cast<std::uint32_t>(s.instance),
                        static_cast<std::uint32_t>(s.instance >> 32)};
      std::mt19937_64 rng(seq);
      std::uniform_int_distribution<Micros> dist(0, jitter_us);
      f.release_time += dist(rng);
    }
    frames.push_back(std::move(f));
  }
  std::stable_sort(frames.begin(), frames.end(),
                   [](const Frame& a, const Frame& b) {
                     return a.release_time < b.release_time;
                   });
  return frames;
}

SlotMapper::SlotMapper(const Schedule& schedule, const TraceIndex& index,
                       EcuId ecu)
    : schedule_(schedule), index_(index) {
  // Per task: the non-skipped jobs in execution order.
  std::map<int, std::vector<int>> jobs_by_task;
  for (const ScheduleSlot& s : schedule.slots) {
    if (s.idle() || s.skipped) continue;
    if (!schedule.tasks[s.task].msg_id) continue;
    jobs_by_task[s.task].push_back(s.index);
  }
  std::map<int, std::size_t> consumed;
  for (const Transmission& t : index.transmissions()) {
    const BusEvent& e = index.EventAtSlot(t.slot);
    if (e.source != ecu || e.frame.aperiodic) continue;
    const int task = schedule.TaskForId(e.frame.id);
    if (task < 0) continue;
    auto it = jobs_by_task.find(task);
    if (it == jobs_by_task.end()) continue;
    const std::vector<int>& slots = it->second;
    // Frames released before this window's first job belong to the
    // previous window.
    if (e.time < schedule.slots[slots.front()].end) continue;
    std::size_t& k = consumed[task];
    if (k >= slots.size()) continue;
    bus_to_ecu_[t.slot] = slots[k];
    ecu_to_bus_[slots[k]] = t.slot;
    ++k;
  }
}

std::optional<int> SlotMapper::BusToEcu(std::int64_t bus_slot) const {
  if (bus_slot < 0 ||
      bus_slot >= static_cast<std::int64_t>(index_.transmissions().size())) {
    throw LookupError("unknown bus slot " + std::to_string(bus_slot));
  }
  auto it = bus_to_ecu_.find(bus_slot);
  if (it == bus_to_ecu_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::int64_t> SlotMapper::EcuToBus(int ecu_slot) const {
  if (ecu_slot < 0 || ecu_slot >= static_cast<int>(schedule_.slots.size())) {
    throw LookupError("unknown ECU slot " + std::to_string(ecu_slot));
  }
  auto it = ecu_to_bus_.find(ecu_slot);
  if (it == ecu_to_bus_.end()) return std::nullopt;
  return it->second;
}

std::optional<JobKey> SlotMapper::NearestPlannedJob(int task,
                                                    Micros time) const {
  std::optional<JobKey> best;
  Micros best_gap = 0;
  for (const ScheduleSlot& s : schedule_.slots) {
    if (s.task != task) continue;
    const Micros gap = s.end > time ? s.end - time : time - s.end;
    // Equal gaps go to the later job.
    if (!best || gap < best_gap ||
        (gap == best_gap && s.end > schedule_.slots[schedule_.SlotOf(*best)].end)) {
      best = s.job();
      best_gap = gap;
    }
  }
  return best;
}

}  // namespace hns
