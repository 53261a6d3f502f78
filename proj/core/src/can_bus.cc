#include "hns/can_bus.h"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "hns/error.h"

namespace hns {

namespace {

constexpr int kMaxStandardId = 0x7FF;
constexpr int kPassiveThreshold = 127;
constexpr int kBusOffThreshold = 255;

}  // namespace

MessageId::MessageId(int raw) : raw_(raw) {
  if (raw < 0 || raw > kMaxStandardId) {
    throw std::out_of_range("message id " + std::to_string(raw) +
                            " outside the 11-bit range");
  }
}

std::string MessageId::ToHex() const {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "0x%X", raw_);
  return buf;
}

MessageId MessageId::Parse(std::string_view text) {
  std::string s(text);
  std::size_t used = 0;
  long value = 0;
  try {
    value = std::stol(s, &used, 0);
  } catch (const std::exception&) {
    throw std::invalid_argument("not a message id: '" + s + "'");
  }
  if (used != s.size()) {
    throw std::invalid_argument("not a message id: '" + s + "'");
  }
  return MessageId(static_cast<int>(value));
}

const char* ToString(ErrorMode mode) {
  switch (mode) {
    case ErrorMode::kErrorActive:
      return "ErrorActive";
    case ErrorMode::kErrorPassive:
      return "ErrorPassive";
    case ErrorMode::kBusOff:
      return "BusOff";
  }
  return "?";
}

const char* ToString(EventKind kind) {
  switch (kind) {
    case EventKind::kTxSuccess:
      return "TxSuccess";
    case EventKind::kTxError:
      return "TxError";
    case EventKind::kArbitrationLoss:
      return "ArbitrationLoss";
    case EventKind::kIdle:
      return "Idle";
  }
  return "?";
}

ErrorMode NodeState::mode() const {
  if (tec > kBusOffThreshold || rec > kBusOffThreshold) {
    return ErrorMode::kBusOff;
  }
  if (tec > kPassiveThreshold || rec > kPassiveThreshold) {
    return ErrorMode::kErrorPassive;
  }
  return ErrorMode::kErrorActive;
}

void ChargeTxError(NodeState& node) {
  if (!node.bus_off()) node.tec += 8;
}

void CreditTxSuccess(NodeState& node) {
  if (!node.bus_off() && node.tec > 0) --node.tec;
}

void ChargeRxError(NodeState& node) {
  if (!node.bus_off()) node.rec += 1;
}

void CreditRxSuccess(NodeState& node) {
  if (!node.bus_off() && node.rec > 0) --node.rec;
}

void UpdateErrorCounters(std::span<NodeState* const> transmitters,
                         std::span<NodeState* const> receivers,
                         TxOutcome outcome) {
  switch (outcome) {
    case TxOutcome::kSuccess:
      for (NodeState* n : transmitters) CreditTxSuccess(*n);
      for (NodeState* n : receivers) CreditRxSuccess(*n);
      break;
    case TxOutcome::kBitErrorActive:
      for (NodeState* n : transmitters) ChargeTxError(*n);
      for (NodeState* n : receivers) ChargeRxError(*n);
      break;
    case TxOutcome::kBitErrorPassive: {
      if (transmitters.empty()) return;
      NodeState& detector = *transmitters[0];
      ChargeTxError(detector);
      CreditTxSuccess(detector);  // retransmission; no-op once bus-off
      for (std::size_t i = 1; i < transmitters.size(); ++i) {
        CreditTxSuccess(*transmitters[i]);
      }
      for (NodeState* n : receivers) {
        CreditRxSuccess(*n);
        CreditRxSuccess(*n);
      }
      break;
    }
  }
}

int FrameBits(int dlc) {
  if (dlc < 0 || dlc > 8) throw std::out_of_range("dlc must be in [0, 8]");
  const int stuffed_region = 34 + 8 * dlc;
  return 47 + 8 * dlc + (stuffed_region - 1) / 4;
}

Micros FrameDuration(int dlc, int bitrate) {
  if (bitrate <= 0) throw std::invalid_argument("bitrate must be positive");
  const std::int64_t bits = FrameBits(dlc);
  return (bits * 1'000'000 + bitrate - 1) / bitrate;
}

ArbitrationResult Arbitrate(std::span<const Frame> pending) {
  if (pending.empty()) throw std::invalid_argument("nothing to arbitrate");
  ArbitrationResult result;
  for (std::size_t i = 1; i < pending.size(); ++i) {
    if (pending[i].id < pending[result.winner].id) result.winner = i;
  }
  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (pending[i].id == pending[result.winner].id) {
      result.contenders.push_back(i);
    }
  }
  return result;
}

BusSimulator::BusSimulator(int num_nodes, int bitrate)
    : bitrate_(bitrate), nodes_(num_nodes) {
  if (num_nodes <= 0) throw std::invalid_argument("bus needs a node");
  if (bitrate <= 0) throw std::invalid_argument("bitrate must be positive");
}

const NodeState& BusSimulator::node(EcuId id) const {
  return nodes_.at(id).state;
}

std::size_t BusSimulator::QueueLength(EcuId id) const {
  return nodes_.at(id).queue.size();
}

void BusSimulator::Release(Frame frame) {
  if (frame.source < 0 || frame.source >= num_nodes()) {
    throw LookupError("frame source " + std::to_string(frame.source) +
                      " is not a bus node");
  }
  Node& n = nodes_[frame.source];
  if (n.state.bus_off()) {
    suppressed_.push_back(std::move(frame));
    return;
  }
  auto pos = std::upper_bound(
      n.queue.begin(), n.queue.end(), frame.release_time,
      [](Micros t, const Frame& f) { return t < f.release_time; });
  n.queue.insert(pos, std::move(frame));
}

void BusSimulator::Emit(BusEvent event) { events_.push_back(std::move(event)); }

void BusSimulator::RunUntil(Micros until) {
  std::vector<EcuId> candidates;
  while (now_ < until) {
    candidates.clear();
    Micros next_release = -1;
    for (EcuId id = 0; id < num_nodes(); ++id) {
      Node& n = nodes_[id];
      if (n.state.bus_off()) {
        for (Frame& f : n.queue) suppressed_.push_back(std::move(f));
        n.queue.clear();
        continue;
      }
      if (n.queue.empty()) continue;
      const Micros r = n.queue.front().release_time;
      if (r <= now_) {
        // Released frames form a prefix of the queue; the node offers its
        // highest-priority one, earliest release first among equal ids.
        std::size_t best = 0;
        for (std::size_t i = 1;
             i < n.queue.size() && n.queue[i].release_time <= now_; ++i) {
          if (n.queue[i].id < n.queue[best].id) best = i;
        }
        n.head = best;
        candidates.push_back(id);
      } else if (next_release < 0 || r < next_release) {
        next_release = r;
      }
    }
    if (candidates.empty()) {
      if (next_release < 0 || next_release >= until) break;
      now_ = next_release;
      continue;
    }
    if (now_ > last_end_) {
      BusEvent idle;
      idle.time = last_end_;
      idle.end = now_;
      idle.kind = EventKind::kIdle;
      Emit(std::move(idle));
    }
    Transmit(candidates);
  }
}

void BusSimulator::Transmit(const std::vector<EcuId>& candidates) {
  std::vector<Frame> heads;
  heads.reserve(candidates.size());
  for (EcuId id : candidates) {
    heads.push_back(nodes_[id].queue[nodes_[id].head]);
  }
  const ArbitrationResult arb = Arbitrate(heads);

  std::vector<bool> contending(candidates.size(), false);
  for (std::size_t i : arb.contenders) contending[i] = true;

  // Losers of arbitration keep their frame queued.
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (contending[i]) continue;
    BusEvent e;
    e.time = now_;
    e.end = now_;
    e.kind = EventKind::kArbitrationLoss;
    e.frame = heads[i];
    e.source = candidates[i];
    e.tec_after = nodes_[candidates[i]].state.tec;
    e.mode_after = nodes_[candidates[i]].state.mode();
    Emit(std::move(e));
  }

  // Among same-id contenders the smallest payload drives dominant bits.
  std::size_t dominant = arb.contenders.front();
  for (std::size_t i : arb.contenders) {
    if (heads[i].payload < heads[dominant].payload) dominant = i;
  }
  std::vector<std::size_t> winners;
  std::vector<std::size_t> detectors;
  for (std::size_t i : arb.contenders) {
    if (heads[i].payload == heads[dominant].payload) {
      winners.push_back(i);
    } else {
      detectors.push_back(i);
    }
  }

  const Micros start = now_;
  const Micros end = start + FrameDuration(heads[dominant], bitrate_);

  std::vector<bool> transmitting(num_nodes(), false);
  for (std::size_t i : arb.contenders) transmitting[candidates[i]] = true;

  bool any_active_detector = false;
  for (std::size_t i : detectors) {
    if (nodes_[candidates[i]].state.mode() == ErrorMode::kErrorActive) {
      any_active_detector = true;
    }
  }

  auto make_event = [&](std::size_t i, EventKind kind, bool passive) {
    BusEvent e;
    e.time = start;
    e.end = end;
    e.kind = kind;
    e.passive_flag = passive;
    e.frame = heads[i];
    e.source = candidates[i];
    e.tec_after = nodes_[candidates[i]].state.tec;
    e.mode_after = nodes_[candidates[i]].state.mode();
    return e;
  };

  // Candidates are visited in node order, so events at one instant come out
  // sorted by source.
  if (any_active_detector) {
    // Active error flag destroys the frame for everyone on the bus.
    for (std::size_t i : arb.contenders) {
      ChargeTxError(nodes_[candidates[i]].state);
    }
    for (EcuId id = 0; id < num_nodes(); ++id) {
      if (!transmitting[id]) ChargeRxError(nodes_[id].state);
    }
    for (std::size_t i : arb.contenders) {
      Emit(make_event(i, EventKind::kTxError, false));
    }
  } else {
    // No detector, or only passive ones: the dominant frame completes.
    for (std::size_t i : detectors) ChargeTxError(nodes_[candidates[i]].state);
    for (std::size_t i : winners) CreditTxSuccess(nodes_[candidates[i]].state);
    for (EcuId id = 0; id < num_nodes(); ++id) {
      if (!transmitting[id]) CreditRxSuccess(nodes_[id].state);
    }
    for (std::size_t i : arb.contenders) {
      const bool won = std::find(winners.begin(), winners.end(), i) !=
                       winners.end();
      Emit(make_event(i, won ? EventKind::kTxSuccess : EventKind::kTxError,
                      !won));
    }
    for (std::size_t i : winners) {
      Node& n = nodes_[candidates[i]];
      n.queue.erase(n.queue.begin() + static_cast<std::ptrdiff_t>(n.head));
    }
  }
  now_ = end;
  last_end_ = end;
}

BusTrace BusSimulator::Finish(Micros horizon) {
  RunUntil(horizon);
  BusTrace trace;
  trace.events = events_;
  trace.horizon = horizon;
  trace.bitrate = bitrate_;
  for (const Node& n : nodes_) {
    trace.final_states.push_back(n.state);
    for (const Frame& f : n.queue) {
      if (f.release_time < horizon) trace.pending_at_horizon.push_back(f);
    }
  }
  trace.suppressed = suppressed_;
  return trace;
}

BusTrace RunBus(const std::vector<std::vector<Frame>>& ecu_queues,
                Micros horizon, int bitrate) {
  if (horizon <= 0) throw std::invalid_argument("horizon must be positive");
  for (const auto& q : ecu_queues) {
    if (!std::is_sorted(q.begin(), q.end(),
                        [](const Frame& a, const Frame& b) {
                          return a.release_time < b.release_time;
                        })) {
      throw std::invalid_argument("release stream not time-sorted");
    }
  }
  BusSimulator sim(static_cast<int>(ecu_queues.size()), bitrate);
  for (std::size_t e = 0; e < ecu_queues.size(); ++e) {
    for (Frame f : ecu_queues[e]) {
      f.source = static_cast<EcuId>(e);
      sim.Release(std::move(f));
    }
  }
  return sim.Finish(horizon);
}

}  // namespace hns
