#include "hns/experiment.h"

#include <algorithm>

#include "hns/error.h"
#include "hns/traffic.h"

namespace hns {

double Report::TotalAsp() const {
  double t = 0.0;
  for (const CycleSummary& s : summary) t += s.asp_total;
  return t;
}

double Report::TotalConditional() const {
  double t = 0.0;
  for (const CycleSummary& s : summary) t += s.asp_conditional_total;
  return t;
}

double Report::TotalRandomized() const {
  double t = 0.0;
  for (const CycleSummary& s : summary) t += s.asp_randomized_total;
  return t;
}

int Report::AlarmCount() const { return static_cast<int>(alarms.size()); }

std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t a,
                         std::uint64_t b) {
  // splitmix64 over the three words.
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ b);
}

namespace {

std::string JobName(const Schedule& s, const JobKey& j) {
  return s.tasks[j.task].name + "#" + std::to_string(j.instance);
}

// Victim ids whose ASP is reported, each with its ECU index.
std::vector<std::pair<MessageId, int>> ReportedVictims(const Scenario& sc) {
  std::vector<std::pair<MessageId, int>> out;
  if (sc.attacker.present) {
    out.emplace_back(sc.attacker.victim, sc.Locate(sc.attacker.victim).first);
    return out;
  }
  bool any_defended = false;
  for (const EcuConfig& e : sc.ecus) any_defended |= e.defended;
  for (std::size_t e = 0; e < sc.ecus.size(); ++e) {
    if (any_defended && !sc.ecus[e].defended) continue;
    for (const TaskSpec& t : sc.ecus[e].tasks) {
      if (t.is_control && t.msg_id) {
        out.emplace_back(*t.msg_id, static_cast<int>(e));
      }
    }
  }
  return out;
}

const VictimDecision* Match(const std::vector<VictimDecision>& ds,
                            MessageId id, const SlotStats& row) {
  for (const VictimDecision& d : ds) {
    if (d.id == id && d.hyper_period == row.hyper_period &&
        d.instance == row.instance) {
      return &d;
    }
  }
  return nullptr;
}

}  // namespace

Report RunExperiment(const Scenario& sc) {
  Report rep;
  rep.scenario = sc;
  const Micros H = sc.CanHyperperiod();
  const Micros L = sc.PeriodLength();
  const Micros horizon = L * sc.cycles;
  const int n_ecu = static_cast<int>(sc.ecus.size());
  const EcuId attacker_node = n_ecu;

  const TrafficPlan traffic = GenTraffic(sc, horizon, DeriveSeed(sc.seed, 1));
  rep.periodic_load = traffic.periodic_load;
  rep.aperiodic_frames = traffic.aperiodic_count;

  BusSimulator bus(n_ecu + 1, sc.bitrate);
  for (const auto& frames : traffic.per_ecu) {
    for (const Frame& f : frames) bus.Release(f);
  }

  const auto victims = ReportedVictims(sc);
  const int victim_ecu = sc.attacker.present ? victims.front().second : -1;
  std::optional<Attacker> attacker;
  if (sc.attacker.enabled) attacker.emplace(attacker_node, victim_ecu);

  auto randomized = [&](int e) {
    return sc.defense == DefenseMode::kRandomize && sc.ecus[e].defended;
  };
  auto hns = [&](int e) {
    return sc.defense == DefenseMode::kHns && sc.ecus[e].defended;
  };
  auto build = [&](int e, int cycle, bool shuffled) {
    ScheduleOptions o;
    if (shuffled) {
      o.shuffle_seed = DeriveSeed(sc.seed, 2,
                                  static_cast<std::uint64_t>(cycle) * 64 + e);
    }
    return BuildSchedule(sc.ecus[e].tasks, cycle * L, L, sc.policy, o);
  };

  std::vector<Schedule> current(n_ecu);
  std::vector<ObfPlan> plans(n_ecu);
  for (int e = 0; e < n_ecu; ++e) {
    current[e] = build(e, 0, randomized(e));
    plans[e].origin = 0;
    plans[e].horizon = L;
  }

  for (int c = 0; c < sc.cycles; ++c) {
    const Micros origin = c * L;
    CycleRecord rec;
    rec.cycle = c;
    rec.origin = origin;
    rec.schedules = current;
    rec.plans = plans;

    for (int e = 0; e < n_ecu; ++e) {
      for (const Frame& f : ReleaseFrames(current[e], e, sc.jitter_us,
                                          DeriveSeed(sc.seed, 3))) {
        bus.Release(f);
      }
    }

    for (int k = 0; k < sc.recon; ++k) {
      const Micros hp_start = origin + k * H;
      const int global_hp = c * sc.recon + k;
      std::vector<Frame> injected;
      if (attacker && c >= sc.attacker.start_cycle) {
        injected = attacker->InjectAttack(bus, hp_start);
        rec.injections.insert(rec.injections.end(), injected.begin(),
                              injected.end());
      }
      const std::size_t first_event = bus.events().size();
      bus.RunUntil(hp_start + H);

      TecRow tec;
      tec.cycle = c;
      tec.hyper_period = global_hp;
      tec.time = hp_start + H;
      if (attacker) {
        attacker->Observe(bus, first_event, global_hp);
        const AttackLogRow& log = attacker->log().back();
        tec.collision = log.collision;
        rep.attack.push_back({c, global_hp, log.targeted_instance,
                              static_cast<int>(injected.size()),
                              log.collision, attacker->escalated()});
      }
      if (victim_ecu >= 0) {
        const NodeState& v = bus.node(victim_ecu);
        tec.victim_tec = v.tec;
        tec.victim_mode = v.mode();
        if (v.bus_off() && !rep.bus_off_time) {
          const auto& ev = bus.events();
          for (std::size_t i = first_event; i < ev.size(); ++i) {
            if (ev[i].source == victim_ecu &&
                ev[i].mode_after == ErrorMode::kBusOff) {
              rep.bus_off_time = ev[i].time;
              break;
            }
          }
        }
      }
      tec.attacker_tec = bus.node(attacker_node).tec;
      tec.attacker_mode = bus.node(attacker_node).mode();
      rep.tec.push_back(tec);
    }

    const std::vector<BusEvent>& events = bus.events();

    rec.alarms.resize(n_ecu);
    int cycle_alarms = 0;
    for (int e = 0; e < n_ecu; ++e) {
      if (!hns(e)) continue;
      rec.alarms[e] = Seek(events, origin, L, current[e], plans[e], e);
      for (const AlarmEvidence& ev : rec.alarms[e].evidence) {
        rep.alarms.push_back({c, sc.ecus[e].name, ev});
        ++cycle_alarms;
      }
    }

    if (attacker && c + 1 >= sc.attacker.start_cycle) {
      try {
        const ReconReport recon = ReconAnalyze(
            events, sc.attacker.victim, sc.recon, H, origin,
            [attacker_node](const BusEvent& e) {
              return e.source == attacker_node;
            });
        if (auto target = SelectTarget(recon)) {
          attacker->SetPlan(MakeAttackPlan(recon, *target, attacker_node));
        }
      } catch (const NoVictimError&) {
        // Victim silent (bus-off or fully skipped): keep the last plan.
      }
    }

    const Micros next_origin = origin + L;
    std::vector<Schedule> next(n_ecu);
    std::vector<ObfPlan> next_plans(n_ecu);
    rec.hide.resize(n_ecu);
    for (int e = 0; e < n_ecu; ++e) {
      const Schedule next_base = build(e, c + 1, false);
      next_plans[e].origin = next_origin;
      next_plans[e].horizon = L;
      HideInput in;
      in.events = &events;
      in.origin = origin;
      in.recon = sc.recon;
      in.can_hyperperiod = H;
      in.observed = &current[e];
      in.next_base = &next_base;
      in.ecu = e;

      std::vector<VictimDecision> analysis;
      if (hns(e)) {
        rec.hide[e] = Hide(in);
        next[e] = rec.hide[e].schedule;
        next_plans[e] = rec.hide[e].plan;
        analysis = rec.hide[e].decisions;
        for (const PlanEntry& entry : next_plans[e].entries) {
          PlanRow row;
          row.cycle = c + 1;
          row.ecu = sc.ecus[e].name;
          row.ecu_slot = next[e].SlotOf(entry.job);
          row.task = next[e].tasks[entry.job.task].name;
          row.instance = entry.job.instance;
          row.action = entry.action;
          if (entry.predecessor) {
            row.predecessor = JobName(next[e], *entry.predecessor);
          }
          for (const JobKey& g : entry.group) {
            if (!row.group.empty()) row.group += ";";
            row.group += JobName(next[e], g);
          }
          row.reason = entry.reason;
          rep.plan.push_back(std::move(row));
        }
      } else {
        next[e] = randomized(e) ? build(e, c + 1, true) : next_base;
        bool reports = false;
        for (const auto& [id, ve] : victims) reports |= ve == e;
        if (reports) analysis = AnalyzeVictims(in);
      }

      // What an attack-unaware shuffle of the next period would leave.
      const Schedule shuffled = randomized(e) ? next[e] : build(e, c + 1, true);

      for (const auto& [victim, ve] : victims) {
        if (ve != e) continue;
        const TraceIndex index(events, DefenderView(current[e], e));
        const std::vector<SlotStats> rows =
            ComputeSlotStats(index, victim, sc.recon, H, origin);
        HideResult view;
        view.decisions = analysis;
        if (!hns(e)) {
          for (VictimDecision& d : view.decisions) {
            d.rule = ObfAction::kNone;
            d.window_reduction = 0;
          }
        }
        const AspBreakdown breakdown =
            ConditionalAsp(rows, view.DecisionsFor(victim, rows), sc.recon);

        CycleSummary sum;
        sum.cycle = c;
        sum.victim = victim;
        sum.asp_total = breakdown.total;
        sum.asp_conditional_total = breakdown.total_conditional;
        sum.saturated = breakdown.saturated;
        sum.alarms = cycle_alarms;
        sum.rule_frequency = breakdown.rule_frequency;
        for (std::size_t r = 0; r < rows.size(); ++r) {
          CycleAspRow out;
          out.cycle = c;
          out.victim = victim;
          out.row = breakdown.rows[r];
          const SlotStats& s = rows[r];
          out.asp_randomized = out.row.asp;
          if (const VictimDecision* d = Match(analysis, victim, s)) {
            const int moved = MovedOut(*d, shuffled);
            out.asp_randomized = ReducedTerm(s, sc.recon, moved);
          }
          sum.randomization_bound_total += out.row.randomization_bound;
          sum.asp_randomized_total += out.asp_randomized;
          rep.asp.push_back(out);
        }
        if (victim_ecu >= 0) {
          sum.victim_tec = rep.tec.back().victim_tec;
          sum.victim_mode = rep.tec.back().victim_mode;
        }
        rep.summary.push_back(sum);
      }
    }

    rep.cycles.push_back(std::move(rec));
    current = std::move(next);
    plans = std::move(next_plans);
  }

  rep.trace = bus.Finish(horizon);
  rep.measured_load = MeasuredLoad(rep.trace.events, 0, horizon);
  rep.victim_bus_off = rep.bus_off_time.has_value();
  return rep;
}

std::vector<Report> Sweep(const Scenario& scenario,
                          const std::vector<double>& busloads) {
  std::vector<Report> out;
  for (double b : busloads) {
    if (!(b > 0.0 && b < 1.0)) {
      throw ScenarioError("busload must lie in (0, 1)");
    }
    Scenario s = scenario;
    s.busload = b;
    out.push_back(RunExperiment(s));
  }
  return out;
}

std::vector<Report> Compare(const Scenario& scenario,
                            const std::vector<DefenseMode>& modes) {
  std::vector<Report> out;
  for (DefenseMode m : modes) {
    Scenario s = scenario;
    s.defense = m;
    out.push_back(RunExperiment(s));
  }
  return out;
}

}  // namespace hns
