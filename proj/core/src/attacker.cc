#include "hns/attacker.h"

#include <algorithm>

#include "hns/error.h"

namespace hns {

int ReconReport::Presence(int k, int instance) const {
  return Window(k, instance) != nullptr ? 1 : 0;
}

const AttackWindow* ReconReport::Window(int k, int instance) const {
  if (k < 0 || k >= static_cast<int>(windows.size())) return nullptr;
  if (instance < 1 || instance > static_cast<int>(windows[k].size())) {
    return nullptr;
  }
  return &windows[k][instance - 1];
}

ReconReport ReconAnalyze(const std::vector<BusEvent>& events,
                         MessageId victim, int recon, Micros H,
                         Micros origin, const TransparencyFn& transparent) {
  if (recon < 1) throw std::invalid_argument("recon must be >= 1");
  if (H <= 0) throw std::invalid_argument("hyper-period must be positive");
  ReconReport report;
  report.victim = victim;
  report.recon = recon;
  report.hyperperiod = H;
  report.origin = origin;
  report.windows.resize(recon);

  const TraceIndex index(events, transparent);
  const Micros end = origin + recon * H;
  bool seen = false;
  for (const VictimOccurrence& occ : index.Occurrences(victim)) {
    if (occ.time < origin || occ.time >= end) continue;
    seen = true;
    const int k = static_cast<int>((occ.time - origin) / H);
    AttackWindow w;
    w.hyper_period = k;
    w.instance = static_cast<int>(report.windows[k].size()) + 1;
    w.victim_slot = occ.bus_slot;
    w.victim_time = occ.time;
    w.window_len = occ.window_len;
    w.window_slots = occ.window_slots;
    w.preceded_by = occ.preceded_by;
    w.last_window_start = occ.window_events.empty()
                              ? occ.time
                              : events[occ.window_events.back()].time;
    report.dlc = events[occ.event_index].frame.dlc();
    report.windows[k].push_back(std::move(w));
  }
  if (!seen) {
    throw NoVictimError("victim " + victim.ToHex() +
                        " absent from the reconnaissance window");
  }
  std::size_t instances = 0;
  for (const auto& hp : report.windows) {
    instances = std::max(instances, hp.size());
  }
  report.averages.assign(instances, 0);
  for (std::size_t i = 0; i < instances; ++i) {
    int sum = 0;
    for (const auto& hp : report.windows) {
      if (i < hp.size()) sum += hp[i].window_len;
    }
    report.averages[i] = (sum + recon - 1) / recon;
  }
  return report;
}

std::optional<int> SelectTarget(const ReconReport& report) {
  int best = -1;
  int best_avg = 0;
  for (std::size_t i = 0; i < report.averages.size(); ++i) {
    if (report.averages[i] > best_avg) {
      best_avg = report.averages[i];
      best = static_cast<int>(i) + 1;
    }
  }
  if (best < 0) return std::nullopt;
  return best;
}

namespace {

std::optional<Micros> OffsetFor(const ReconReport& report, int instance) {
  for (int k = report.recon - 1; k >= 0; --k) {
    const AttackWindow* w = report.Window(k, instance);
    if (w != nullptr && w->window_len > 0) {
      return w->last_window_start - (report.origin + k * report.hyperperiod);
    }
  }
  return std::nullopt;
}

}  // namespace

AttackPlan MakeAttackPlan(const ReconReport& report, int target_instance,
                          EcuId attacker) {
  if (target_instance < 1 ||
      target_instance > static_cast<int>(report.averages.size()) ||
      report.averages[target_instance - 1] == 0) {
    throw PlanError("attack target must follow a non-empty window");
  }
  AttackPlan plan;
  plan.victim = report.victim;
  plan.target_instance = target_instance;
  plan.offset = *OffsetFor(report, target_instance);
  plan.frame.id = report.victim;
  plan.frame.payload.assign(static_cast<std::size_t>(report.dlc), 0);
  plan.frame.source = attacker;
  for (std::size_t i = 0; i < report.averages.size(); ++i) {
    if (report.averages[i] == 0) continue;
    if (auto off = OffsetFor(report, static_cast<int>(i) + 1)) {
      plan.followup_offsets.emplace_back(static_cast<int>(i) + 1, *off);
    }
  }
  return plan;
}

std::vector<Frame> Attacker::InjectAttack(BusSimulator& bus, Micros hp_start) {
  std::vector<Frame> out;
  if (!plan_) return out;
  if (bus.node(node_).bus_off()) return out;
  std::vector<Micros> offsets;
  if (escalated_) {
    for (const auto& [instance, off] : plan_->followup_offsets) {
      offsets.push_back(off);
    }
  } else {
    offsets.push_back(plan_->offset);
  }
  std::sort(offsets.begin(), offsets.end());
  for (Micros off : offsets) {
    Frame f = plan_->frame;
    f.source = node_;
    f.release_time = hp_start + off;
    bus.Release(f);
    out.push_back(std::move(f));
  }
  return out;
}

void Attacker::Observe(const BusSimulator& bus, std::size_t first_event,
                       int hyper_period) {
  AttackLogRow row;
  row.hyper_period = hyper_period;
  row.targeted_instance = plan_ ? plan_->target_instance : 0;
  const auto& events = bus.events();
  for (std::size_t i = first_event; i < events.size(); ++i) {
    const BusEvent& e = events[i];
    if (e.kind == EventKind::kTxError && plan_ && e.frame.id == plan_->victim) {
      row.collision = 1;
    }
    if (e.source == node_ && e.tec_after > 127) escalated_ = true;
  }
  row.victim_tec = bus.node(victim_node_).tec;
  row.attacker_tec = bus.node(node_).tec;
  row.victim_mode = bus.node(victim_node_).mode();
  log_.push_back(row);
}

}  // namespace hns
