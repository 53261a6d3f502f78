#include "hns/hide_n_seek.h"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "hns/error.h"

namespace hns {

TransparencyFn DefenderView(const Schedule& schedule, EcuId ecu) {
  std::set<MessageId> own;
  for (const TaskSpec& t : schedule.tasks) {
    if (t.msg_id) own.insert(*t.msg_id);
  }
  return [own = std::move(own), ecu](const BusEvent& e) {
    return e.source != ecu && own.count(e.frame.id) > 0;
  };
}

std::vector<int> TrailingSkips(const Schedule& schedule) {
  std::vector<std::vector<const ScheduleSlot*>> by_task(schedule.tasks.size());
  for (const ScheduleSlot& s : schedule.slots) {
    if (!s.idle()) by_task[s.task].push_back(&s);
  }
  std::vector<int> out(schedule.tasks.size(), 0);
  for (std::size_t t = 0; t < by_task.size(); ++t) {
    auto& jobs = by_task[t];
    std::sort(jobs.begin(), jobs.end(),
              [](const ScheduleSlot* a, const ScheduleSlot* b) {
                return a->instance < b->instance;
              });
    int run = 0;
    for (auto it = jobs.rbegin(); it != jobs.rend() && (*it)->skipped; ++it) {
      ++run;
    }
    out[t] = run;
  }
  return out;
}

bool CheckSkipLim(const Schedule& schedule, JobKey job,
                  const std::set<JobKey>& skipped, int carry_in) {
  if (job.task < 0 || job.task >= static_cast<int>(schedule.tasks.size()) ||
      schedule.SlotOf(job) < 0) {
    throw LookupError("job outside the schedule: task " +
                      std::to_string(job.task) + " instance " +
                      std::to_string(job.instance));
  }
  const TaskSpec& task = schedule.tasks[job.task];
  if (!task.is_control || task.skip_limit <= 0) return false;

  std::int64_t first = job.instance;
  std::int64_t last = job.instance;
  for (const ScheduleSlot& s : schedule.slots) {
    if (s.task != job.task) continue;
    first = std::min(first, s.instance);
    last = std::max(last, s.instance);
  }
  auto is_skipped = [&](std::int64_t i) {
    return skipped.count({job.task, i}) > 0;
  };
  int run = 1;
  std::int64_t i = job.instance - 1;
  while (i >= first && is_skipped(i)) {
    ++run;
    --i;
  }
  if (i < first) run += carry_in;
  for (i = job.instance + 1; i <= last && is_skipped(i); ++i) ++run;
  return run <= task.skip_limit;
}

namespace {

std::optional<JobKey> ObservedJob(std::int64_t bus_slot, const BusEvent& e,
                                  const Schedule& observed,
                                  const SlotMapper& mapper) {
  if (auto s = mapper.BusToEcu(bus_slot)) return observed.slots[*s].job();
  if (e.frame.task >= 0) return JobKey{e.frame.task, e.frame.instance};
  return std::nullopt;
}

}  // namespace

std::vector<JobKey> GetHpPreds(const VictimOccurrence& occurrence,
                               const std::vector<BusEvent>& events,
                               const Schedule& observed,
                               const SlotMapper& mapper) {
  std::vector<std::pair<Micros, JobKey>> found;
  for (std::size_t w = 0; w < occurrence.window_events.size(); ++w) {
    const BusEvent& e = events[occurrence.window_events[w]];
    if (e.source != occurrence.source) continue;
    auto job = ObservedJob(occurrence.window_slots[w], e, observed, mapper);
    if (!job || job->task < 0 ||
        job->task >= static_cast<int>(observed.tasks.size())) {
      continue;
    }
    if (!observed.tasks[job->task].is_control) continue;
    const int slot = observed.SlotOf(*job);
    if (slot < 0) continue;
    found.emplace_back(observed.slots[slot].start, *job);
  }
  std::stable_sort(found.begin(), found.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<JobKey> out;
  for (const auto& [start, job] : found) out.push_back(job);
  return out;
}

bool ShiftVic(const Schedule& base, ObfPlan& plan, JobKey victim,
              const std::vector<JobKey>& group, int group_in_window,
              std::string* reason) {
  if (group.empty() || group_in_window < 1) {
    throw std::invalid_argument(
        "reorder needs an equal-priority job with a frame in the window");
  }
  ObfPlan trial = plan;
  PlanEntry entry;
  entry.job = victim;
  entry.action = ObfAction::kReorder;
  entry.group = group;
  trial.entries.push_back(entry);
  try {
    ApplyObf(base, trial);
  } catch (const PlanError& e) {
    if (reason != nullptr) *reason = e.what();
    return false;
  }
  plan = std::move(trial);
  return true;
}

std::vector<std::optional<SlotDecision>> HideResult::DecisionsFor(
    MessageId id, const std::vector<SlotStats>& rows) const {
  std::vector<std::optional<SlotDecision>> out(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].ct == 0) continue;
    for (const VictimDecision& d : decisions) {
      if (d.id == id && d.hyper_period == rows[r].hyper_period &&
          d.instance == rows[r].instance) {
        out[r] = SlotDecision{d.rule, d.window_reduction, d.eq_pri_size};
        break;
      }
    }
  }
  return out;
}

namespace {

struct Analysis {
  std::vector<VictimDecision> occurrences;
  std::vector<int> carry;
};

Analysis Analyze(const HideInput& in) {
  if (in.events == nullptr || in.observed == nullptr ||
      in.next_base == nullptr) {
    throw std::invalid_argument("hide input is incomplete");
  }
  if (in.recon < 1 || in.can_hyperperiod <= 0) {
    throw std::invalid_argument("recon and hyper-period must be positive");
  }
  const std::vector<BusEvent>& events = *in.events;
  const Schedule& observed = *in.observed;
  const Schedule& next = *in.next_base;
  const Micros length = in.recon * in.can_hyperperiod;
  if (next.origin != in.origin + length) {
    throw AlignmentError("next schedule does not follow the observed period");
  }

  const TraceIndex index(events, DefenderView(observed, in.ecu));
  const SlotMapper mapper(observed, index, in.ecu);

  auto shift = [&](JobKey j) {
    const Micros p = observed.tasks[j.task].period;
    if (length % p != 0) {
      throw AlignmentError("period length is not a multiple of task " +
                           observed.tasks[j.task].name + "'s period");
    }
    return JobKey{j.task, j.instance + length / p};
  };

  struct Candidate {
    VictimDecision d;
    VictimOccurrence occ;
  };
  std::map<MessageId, std::vector<Candidate>> by_id;
  for (const TaskSpec& t : observed.tasks) {
    if (!t.is_control || !t.msg_id) continue;
    std::vector<std::vector<Candidate>> per_hp(in.recon);
    for (const VictimOccurrence& occ : index.Occurrences(*t.msg_id)) {
      if (occ.source != in.ecu) continue;
      if (occ.time < in.origin || occ.time >= in.origin + length) continue;
      const int k =
          static_cast<int>((occ.time - in.origin) / in.can_hyperperiod);
      Candidate c;
      c.occ = occ;
      c.d.id = *t.msg_id;
      c.d.hyper_period = k;
      c.d.instance = static_cast<int>(per_hp[k].size()) + 1;
      c.d.window_len = occ.window_len;
      c.d.tbi = occ.tbi;
      per_hp[k].push_back(std::move(c));
    }
    std::map<int, int> sums;
    for (const auto& hp : per_hp) {
      for (const Candidate& c : hp) sums[c.d.instance] += c.d.window_len;
    }
    std::vector<Candidate>& list = by_id[*t.msg_id];
    for (auto& hp : per_hp) {
      for (Candidate& c : hp) {
        c.d.class_average = (sums[c.d.instance] + in.recon - 1) / in.recon;
        if (c.d.window_len > 0) list.push_back(std::move(c));
      }
    }
  }

  std::vector<std::pair<int, MessageId>> id_order;
  for (auto& [id, list] : by_id) {
    int best = 0;
    for (const Candidate& c : list) best = std::max(best, c.d.class_average);
    id_order.emplace_back(best, id);
    std::stable_sort(list.begin(), list.end(),
                     [](const Candidate& a, const Candidate& b) {
                       if (a.d.class_average != b.d.class_average) {
                         return a.d.class_average > b.d.class_average;
                       }
                       if (a.d.instance != b.d.instance) {
                         return a.d.instance < b.d.instance;
                       }
                       return a.d.hyper_period < b.d.hyper_period;
                     });
  }
  std::stable_sort(id_order.begin(), id_order.end(),
                   [](const auto& a, const auto& b) {
                     if (a.first != b.first) return a.first > b.first;
                     return a.second < b.second;
                   });

  Analysis out;
  out.carry = TrailingSkips(observed);
  for (const auto& [best, id] : id_order) {
    for (Candidate& c : by_id[id]) {
      VictimDecision& d = c.d;
      auto observed_job = ObservedJob(c.occ.bus_slot,
                                      events[c.occ.event_index], observed,
                                      mapper);
      if (!observed_job) continue;
      d.observed_job = *observed_job;
      d.job = shift(*observed_job);
      if (next.SlotOf(d.job) < 0) {
        throw AlignmentError("victim job missing from the next schedule");
      }
      for (std::size_t w = 0; w < c.occ.window_events.size(); ++w) {
        const BusEvent& e = events[c.occ.window_events[w]];
        if (e.source != in.ecu) continue;
        if (auto j = ObservedJob(c.occ.window_slots[w], e, observed, mapper)) {
          d.window_jobs.push_back(shift(*j));
        }
      }
      for (const JobKey& p : GetHpPreds(c.occ, events, observed, mapper)) {
        d.preds.push_back(shift(p));
      }
      if (const EqPriEntry* eq = next.EqPriFor(d.job)) {
        d.group = eq->before;
        d.group.insert(d.group.end(), eq->after.begin(), eq->after.end());
      }
      for (const JobKey& j : d.window_jobs) {
        if (std::find(d.group.begin(), d.group.end(), j) != d.group.end()) {
          ++d.eq_pri_size;
        }
      }
      out.occurrences.push_back(std::move(d));
    }
  }
  return out;
}

bool Contains(const std::vector<JobKey>& v, const JobKey& j) {
  return std::find(v.begin(), v.end(), j) != v.end();
}

}  // namespace

std::vector<VictimDecision> AnalyzeVictims(const HideInput& input) {
  return Analyze(input).occurrences;
}

int MovedOut(const VictimDecision& d, const Schedule& schedule) {
  const int vs = schedule.SlotOf(d.job);
  if (vs < 0) throw LookupError("victim job outside the schedule");
  int moved = 0;
  for (const JobKey& j : d.window_jobs) {
    if (!Contains(d.group, j)) continue;
    const int js = schedule.SlotOf(j);
    if (js > vs) ++moved;
  }
  return moved;
}

HideResult Hide(const HideInput& in) {
  Analysis analysis = Analyze(in);
  const Schedule& next = *in.next_base;
  HideResult result;
  result.plan.origin = next.origin;
  result.plan.horizon = next.horizon;
  ObfPlan& plan = result.plan;

  for (VictimDecision& d : analysis.occurrences) {
    const std::set<JobKey> skipped = plan.SkippedJobs();
    const int carry_in = analysis.carry[d.job.task];
    if (skipped.count(d.job) > 0) {
      d.rule = ObfAction::kSkip;
    } else if (CheckSkipLim(next, d.job, skipped, carry_in)) {
      d.rule = ObfAction::kSkip;
      plan.entries.push_back({d.job, ObfAction::kSkip, std::nullopt, {}, {}});
    } else {
      int already = 0;
      std::optional<JobKey> fresh;
      for (const JobKey& p : d.preds) {
        if (skipped.count(p) > 0) {
          ++already;
        } else if (!fresh &&
                   CheckSkipLim(next, p, skipped, analysis.carry[p.task])) {
          fresh = p;
        }
      }
      const int obf2 = fresh ? already + 1 : 0;
      auto take_obf2 = [&] {
        d.rule = ObfAction::kSkipPredecessor;
        d.predecessor = fresh;
        d.reason.clear();
        plan.entries.push_back(
            {d.job, ObfAction::kSkipPredecessor, fresh, {}, {}});
      };
      bool done = false;
      // A reorder that clears more of the window than one extra skip wins.
      if (fresh && obf2 >= d.eq_pri_size) {
        take_obf2();
        done = true;
      }
      if (!done && d.eq_pri_size > 0) {
        std::string why;
        if (ShiftVic(next, plan, d.job, d.group, d.eq_pri_size, &why)) {
          d.rule = ObfAction::kReorder;
          done = true;
        } else {
          d.reason = "reorder rejected: " + why;
        }
      }
      if (!done && fresh) {
        take_obf2();
        done = true;
      }
      if (!done) {
        if (d.reason.empty()) {
          d.reason =
              "skip limits exhausted and no equal-priority frame in the window";
        }
        plan.entries.push_back(
            {d.job, ObfAction::kNone, std::nullopt, {}, d.reason});
      }
    }
    result.decisions.push_back(std::move(d));
  }

  // Effective reductions under the complete plan; a job skipped by any
  // entry is an Obf1 outcome whatever rule was chosen for it.
  const std::set<JobKey> skipped = plan.SkippedJobs();
  for (VictimDecision& d : result.decisions) {
    if (skipped.count(d.job) > 0) {
      d.rule = ObfAction::kSkip;
      d.predecessor.reset();
      d.reason.clear();
      d.window_reduction = d.window_len;
      continue;
    }
    int reduction = 0;
    for (const JobKey& j : d.window_jobs) {
      const bool grouped = d.rule == ObfAction::kReorder && Contains(d.group, j);
      if (skipped.count(j) > 0 || grouped) ++reduction;
    }
    d.window_reduction = reduction;
  }

  result.schedule = ApplyObf(next, plan);
  return result;
}

Alarm Seek(const std::vector<BusEvent>& events, Micros origin, Micros length,
           const Schedule& applied, const ObfPlan& plan, EcuId ecu) {
  if (applied.origin != origin || applied.horizon != length) {
    throw AlignmentError("schedule covers [" + std::to_string(applied.origin) +
                         ", " +
                         std::to_string(applied.origin + applied.horizon) +
                         ") but the trace period is [" +
                         std::to_string(origin) + ", " +
                         std::to_string(origin + length) + ")");
  }
  const TraceIndex plain(events, {});
  const SlotMapper mapper(applied, plain, ecu);
  const std::int64_t first_slot = plain.FirstSlotAtOrAfter(origin);

  std::set<JobKey> skipped = plan.SkippedJobs();
  for (const ScheduleSlot& s : applied.slots) {
    if (s.skipped) skipped.insert(s.job());
  }

  Alarm alarm;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const BusEvent& e = events[i];
    if (e.time < origin || e.time >= origin + length) continue;
    if (e.kind != EventKind::kTxSuccess && e.kind != EventKind::kTxError) {
      continue;
    }
    if (e.source == ecu) continue;
    const int task = applied.TaskForId(e.frame.id);
    if (task < 0) continue;
    const std::optional<JobKey> job = mapper.NearestPlannedJob(task, e.time);
    if (!job) continue;

    AlarmEvidence ev;
    ev.time = e.time;
    std::int64_t slot = plain.SlotOfEvent(i);
    if (slot < 0) slot = plain.FirstSlotAtOrAfter(e.time);
    ev.bus_slot = slot - first_slot;
    ev.observed_id = e.frame.id;
    ev.source = e.source;
    ev.planned_job = *job;
    const bool was_skipped = skipped.count(*job) > 0;
    if (const PlanEntry* entry = plan.EntryFor(*job)) {
      ev.planned_action = entry->action;
    }
    if (was_skipped && ev.planned_action != ObfAction::kSkip) {
      ev.planned_action = ObfAction::kSkipPredecessor;
    }
    (was_skipped ? alarm.evidence : alarm.logged).push_back(ev);
  }
  alarm.raised = !alarm.evidence.empty();
  return alarm;
}

}  // namespace hns
