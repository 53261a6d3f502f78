#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "hns/can_bus.h"

namespace hns {

// What sits on the bus immediately before a victim frame.
enum class Precedence { kHigherPriority, kLowerPriority, kIdle, kVictim };

const char* ToString(Precedence p);

// Events for which this returns true are invisible to a scan. The attacker
// hides its own injections this way; a defender hides foreign copies of its
// own ids.
using TransparencyFn = std::function<bool(const BusEvent&)>;

// A successful, visible transmission. `slot` numbers these from 0 over the
// whole trace.
struct Transmission {
  std::size_t event_index = 0;
  std::int64_t slot = 0;
};

struct VictimOccurrence {
  std::size_t event_index = 0;
  std::int64_t bus_slot = 0;
  Micros time = 0;
  EcuId source = -1;
  int task = -1;
  std::int64_t instance = 0;
  // Contiguous run of higher-priority transmissions right before the frame.
  int window_len = 0;
  std::vector<std::int64_t> window_slots;       // oldest first
  std::vector<std::size_t> window_events;       // parallel to window_slots
  Precedence preceded_by = Precedence::kIdle;
  // Visible transmissions since the previous victim frame (or trace start).
  int tbi = 0;
};

class TraceIndex {
 public:
  TraceIndex(const std::vector<BusEvent>& events, TransparencyFn transparent);

  const std::vector<Transmission>& transmissions() const { return tx_; }
  // Slot of a transmission event, or -1 if the event is not one.
  std::int64_t SlotOfEvent(std::size_t event_index) const;
  // First slot whose start time is >= t.
  std::int64_t FirstSlotAtOrAfter(Micros t) const;
  const BusEvent& EventAtSlot(std::int64_t slot) const;

  // Every visible transmission of `victim` in the trace, with window and tbi.
  std::vector<VictimOccurrence> Occurrences(MessageId victim) const;

 private:
  bool IdleBetween(std::size_t from_event, std::size_t to_event) const;

  const std::vector<BusEvent>& events_;
  std::vector<Transmission> tx_;
  std::vector<std::int64_t> slot_of_event_;
  std::vector<int> idle_prefix_;
};

}  // namespace hns
