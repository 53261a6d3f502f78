#pragma once

#include <compare>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hns {

// Simulation time in microseconds.
using Micros = std::int64_t;
// Index of a node on the bus. ECUs come first, the attacker node (if any) last.
using EcuId = int;

// 11-bit standard identifier. Lower raw value means higher priority.
class MessageId {
 public:
  constexpr MessageId() = default;
  explicit MessageId(int raw);

  int raw() const { return raw_; }
  std::string ToHex() const;

  // Accepts decimal or 0x-prefixed hex.
  static MessageId Parse(std::string_view text);

  auto operator<=>(const MessageId&) const = default;

 private:
  int raw_ = 0;
};

struct Frame {
  MessageId id;
  std::vector<std::uint8_t> payload;
  EcuId source = 0;
  Micros release_time = 0;
  // Origin bookkeeping; never consulted by arbitration.
  int task = -1;
  std::int64_t instance = 0;
  bool aperiodic = false;  // background frame, not produced by a task job

  int dlc() const { return static_cast<int>(payload.size()); }
};

enum class ErrorMode { kErrorActive, kErrorPassive, kBusOff };

const char* ToString(ErrorMode mode);

struct NodeState {
  int tec = 0;
  int rec = 0;

  ErrorMode mode() const;
  bool bus_off() const { return mode() == ErrorMode::kBusOff; }
  bool operator==(const NodeState&) const = default;
};

// Counter primitives. A bus-off node is frozen: none of these change it.
void ChargeTxError(NodeState& node);
void CreditTxSuccess(NodeState& node);
void ChargeRxError(NodeState& node);
void CreditRxSuccess(NodeState& node);

enum class TxOutcome { kSuccess, kBitErrorActive, kBitErrorPassive };

// Applies one bus outcome to the error counters.
//
// kSuccess: every transmitter -1, receivers rec -1.
// kBitErrorActive: every transmitter +8 (all colliding transmitters),
//   receivers rec +1.
// kBitErrorPassive: transmitters[0] is the error-passive node that detected
//   the bit error; it gets +8 and, unless that sent it bus-off, -1 for its
//   successful retransmission. The remaining transmitters completed their
//   frame and get -1. Receivers see two valid frames.
void UpdateErrorCounters(std::span<NodeState* const> transmitters,
                         std::span<NodeState* const> receivers,
                         TxOutcome outcome);

// Worst-case stuffed frame length for a standard data frame.
int FrameBits(int dlc);
// Frame transmission time, rounded up to whole microseconds.
Micros FrameDuration(int dlc, int bitrate);
inline Micros FrameDuration(const Frame& frame, int bitrate) {
  return FrameDuration(frame.dlc(), bitrate);
}

struct ArbitrationResult {
  std::size_t winner = 0;
  // Indices of every frame sharing the winning id (size 1 without a
  // same-id conflict).
  std::vector<std::size_t> contenders;
  bool same_id_conflict() const { return contenders.size() > 1; }
};

// Picks the frame with the smallest id. Frames must be non-empty.
ArbitrationResult Arbitrate(std::span<const Frame> pending);

enum class EventKind { kTxSuccess, kTxError, kArbitrationLoss, kIdle };

const char* ToString(EventKind kind);

struct BusEvent {
  Micros time = 0;
  Micros end = 0;
  EventKind kind = EventKind::kIdle;
  // TxError only: the transmitter signalled a passive error flag.
  bool passive_flag = false;
  Frame frame;
  EcuId source = -1;
  int tec_after = 0;
  ErrorMode mode_after = ErrorMode::kErrorActive;

  bool is_transmission() const { return kind == EventKind::kTxSuccess; }
};

struct BusTrace {
  std::vector<BusEvent> events;
  Micros horizon = 0;
  int bitrate = 0;
  std::vector<NodeState> final_states;
  // Frames still queued when the horizon was reached.
  std::vector<Frame> pending_at_horizon;
  // Frames released to a node that was already bus-off.
  std::vector<Frame> suppressed;
};

// Deterministic frame-level CAN bus. Each node keeps its transmit queue
// ordered by release time and, at every idle instant, offers its released
// frame with the lowest id; those frames contend for the bus.
class BusSimulator {
 public:
  BusSimulator(int num_nodes, int bitrate);

  // Queues a frame on node frame.source.
  void Release(Frame frame);

  // Runs every transmission that starts strictly before `until`.
  void RunUntil(Micros until);

  BusTrace Finish(Micros horizon);

  Micros now() const { return now_; }
  int bitrate() const { return bitrate_; }
  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  const NodeState& node(EcuId id) const;
  const std::vector<BusEvent>& events() const { return events_; }
  std::size_t QueueLength(EcuId id) const;

 private:
  struct Node {
    NodeState state;
    std::deque<Frame> queue;
    std::size_t head = 0;  // frame offered in the current arbitration
  };

  void Emit(BusEvent event);
  void Transmit(const std::vector<EcuId>& candidates);

  int bitrate_;
  Micros now_ = 0;
  Micros last_end_ = 0;
  std::vector<Node> nodes_;
  std::vector<BusEvent> events_;
  std::vector<Frame> suppressed_;
};

// Convenience wrapper: releases every stream, runs to the horizon, and
// returns the trace.
BusTrace RunBus(const std::vector<std::vector<Frame>>& ecu_queues,
                Micros horizon, int bitrate);

}  // namespace hns
