#include "hns/traffic.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "hns/ecu_scheduler.h"
#include "hns/error.h"

namespace hns {

TrafficPlan GenTraffic(const Scenario& scenario, Micros horizon,
                       std::uint64_t seed) {
  if (horizon <= 0) throw std::invalid_argument("horizon must be positive");
  TrafficPlan plan;
  plan.per_ecu.resize(scenario.ecus.size());
  plan.periodic_load = scenario.PeriodicLoad();
  plan.target_load = scenario.busload;
  const double gap = plan.target_load - plan.periodic_load;
  if (gap < -1e-12) {
    throw BusloadError("periodic load " + std::to_string(plan.periodic_load) +
                       " already exceeds the busload target " +
                       std::to_string(plan.target_load));
  }

  struct Source {
    int ecu;
    AperiodicSpec spec;
  };
  std::vector<Source> pool;
  for (std::size_t e = 0; e < scenario.ecus.size(); ++e) {
    const EcuConfig& ecu = scenario.ecus[e];
    for (const AperiodicSpec& a : ecu.aperiodic) {
      pool.push_back({static_cast<int>(e), a});
    }
    // Non-control messages also show up outside their periodic slots.
    for (const TaskSpec& t : ecu.tasks) {
      if (t.is_control || !t.msg_id) continue;
      pool.push_back({static_cast<int>(e), AperiodicSpec{*t.msg_id, t.dlc}});
    }
  }
  double mean_frame = 0.0;
  for (const Source& s : pool) {
    mean_frame += static_cast<double>(FrameDuration(s.spec.dlc, scenario.bitrate));
  }
  if (!pool.empty()) mean_frame /= static_cast<double>(pool.size());

  const double wanted = gap * static_cast<double>(horizon);
  if (wanted <= 0.0) return plan;
  if (pool.empty()) {
    throw BusloadError("busload target needs background traffic but no ECU "
                       "has aperiodic or non-control ids");
  }
  const int count = static_cast<int>(std::lround(wanted / mean_frame));

  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32), 0x7a11cu};
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<Micros> when(0, horizon - 1);
  std::uniform_int_distribution<std::size_t> which(0, pool.size() - 1);
  for (int i = 0; i < count; ++i) {
    const Micros t = when(rng);
    const Source& s = pool[which(rng)];
    Frame f;
    f.id = s.spec.id;
    f.payload = TaskPayload(s.spec.dlc);
    f.source = s.ecu;
    f.release_time = t;
    f.aperiodic = true;
    plan.per_ecu[s.ecu].push_back(std::move(f));
  }
  for (auto& frames : plan.per_ecu) {
    std::stable_sort(frames.begin(), frames.end(),
                     [](const Frame& a, const Frame& b) {
                       return a.release_time < b.release_time;
                     });
  }
  plan.aperiodic_count = count;
  return plan;
}

double MeasuredLoad(const std::vector<BusEvent>& events, Micros from,
                    Micros to) {
  if (to <= from) throw std::invalid_argument("empty measurement interval");
  Micros busy = 0;
  Micros covered_until = from;
  for (const BusEvent& e : events) {
    if (e.kind != EventKind::kTxSuccess && e.kind != EventKind::kTxError) {
      continue;
    }
    // Colliding transmitters share one interval; count it once.
    const Micros start = std::max({e.time, from, covered_until});
    const Micros end = std::min(e.end, to);
    if (end > start) {
      busy += end - start;
      covered_until = end;
    }
  }
  return static_cast<double>(busy) / static_cast<double>(to - from);
}

}  // namespace hns
