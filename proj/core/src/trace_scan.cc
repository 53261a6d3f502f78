#include "hns/trace_scan.h"

#include <algorithm>

#include "hns/error.h"

namespace hns {

const char* ToString(Precedence p) {
  switch (p) {
    case Precedence::kHigherPriority:
      return "higher";
    case Precedence::kLowerPriority:
      return "lower";
    case Precedence::kIdle:
      return "idle";
    case Precedence::kVictim:
      return "victim";
  }
  return "?";
}

TraceIndex::TraceIndex(const std::vector<BusEvent>& events,
                       TransparencyFn transparent)
    : events_(events),
      slot_of_event_(events.size(), -1),
      idle_prefix_(events.size() + 1, 0) {
  for (std::size_t i = 0; i < events.size(); ++i) {
    const BusEvent& e = events[i];
    idle_prefix_[i + 1] = idle_prefix_[i] + (e.kind == EventKind::kIdle);
    if (e.kind != EventKind::kTxSuccess) continue;
    if (transparent && transparent(e)) continue;
    slot_of_event_[i] = static_cast<std::int64_t>(tx_.size());
    tx_.push_back({i, static_cast<std::int64_t>(tx_.size())});
  }
}

std::int64_t TraceIndex::SlotOfEvent(std::size_t event_index) const {
  if (event_index >= slot_of_event_.size()) return -1;
  return slot_of_event_[event_index];
}

std::int64_t TraceIndex::FirstSlotAtOrAfter(Micros t) const {
  auto it = std::lower_bound(
      tx_.begin(), tx_.end(), t, [this](const Transmission& x, Micros v) {
        return events_[x.event_index].time < v;
      });
  return static_cast<std::int64_t>(it - tx_.begin());
}

const BusEvent& TraceIndex::EventAtSlot(std::int64_t slot) const {
  if (slot < 0 || slot >= static_cast<std::int64_t>(tx_.size())) {
    throw LookupError("bus slot " + std::to_string(slot) + " out of range");
  }
  return events_[tx_[slot].event_index];
}

bool TraceIndex::IdleBetween(std::size_t from_event,
                             std::size_t to_event) const {
  // Idle events strictly between the two indices.
  return idle_prefix_[to_event] - idle_prefix_[from_event + 1] > 0;
}

std::vector<VictimOccurrence> TraceIndex::Occurrences(MessageId victim) const {
  std::vector<VictimOccurrence> out;
  std::int64_t prev_victim_slot = -1;
  for (const Transmission& t : tx_) {
    const BusEvent& e = events_[t.event_index];
    if (e.frame.id != victim) continue;
    VictimOccurrence occ;
    occ.event_index = t.event_index;
    occ.bus_slot = t.slot;
    occ.time = e.time;
    occ.source = e.source;
    occ.task = e.frame.task;
    occ.instance = e.frame.instance;
    occ.tbi = static_cast<int>(t.slot - prev_victim_slot - 1);

    std::size_t later = t.event_index;
    bool first = true;
    for (std::int64_t s = t.slot - 1; s >= 0; --s) {
      const Transmission& p = tx_[s];
      const BusEvent& pe = events_[p.event_index];
      if (IdleBetween(p.event_index, later)) {
        if (first) occ.preceded_by = Precedence::kIdle;
        break;
      }
      if (pe.frame.id < victim) {
        if (first) occ.preceded_by = Precedence::kHigherPriority;
        occ.window_slots.push_back(p.slot);
        occ.window_events.push_back(p.event_index);
      } else {
        if (first) {
          occ.preceded_by = pe.frame.id == victim ? Precedence::kVictim
                                                  : Precedence::kLowerPriority;
        }
        break;
      }
      first = false;
      later = p.event_index;
    }
    // Nothing before the frame at all also counts as idle bus.
    std::reverse(occ.window_slots.begin(), occ.window_slots.end());
    std::reverse(occ.window_events.begin(), occ.window_events.end());
    occ.window_len = static_cast<int>(occ.window_slots.size());
    out.push_back(std::move(occ));
    prev_victim_slot = t.slot;
  }
  return out;
}

}  // namespace hns
