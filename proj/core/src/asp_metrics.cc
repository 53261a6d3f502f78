#include "hns/asp_metrics.h"

#include <algorithm>

#include "hns/error.h"

namespace hns {

std::vector<SlotStats> ComputeSlotStats(const TraceIndex& index,
                                        MessageId victim, int recon, Micros H,
                                        Micros origin) {
  if (recon < 1) throw std::invalid_argument("recon must be >= 1");
  if (H <= 0) throw std::invalid_argument("hyper-period must be positive");
  const Micros end = origin + recon * H;
  const std::int64_t first_slot = index.FirstSlotAtOrAfter(origin);

  std::vector<std::vector<SlotStats>> per_hp(recon);
  for (const VictimOccurrence& occ : index.Occurrences(victim)) {
    if (occ.time < origin || occ.time >= end) continue;
    const int k = static_cast<int>((occ.time - origin) / H);
    SlotStats s;
    s.hyper_period = k;
    s.instance = static_cast<int>(per_hp[k].size()) + 1;
    s.slot_index = occ.bus_slot - first_slot;
    s.bus_slot = occ.bus_slot;
    s.time = occ.time;
    s.ct = 1;
    s.n = occ.window_len;
    s.tbi = occ.tbi;
    per_hp[k].push_back(s);
  }
  std::size_t instances = 0;
  for (const auto& hp : per_hp) instances = std::max(instances, hp.size());

  std::vector<SlotStats> out;
  for (int k = 0; k < recon; ++k) {
    for (std::size_t i = 0; i < instances; ++i) {
      if (i < per_hp[k].size()) {
        out.push_back(per_hp[k][i]);
      } else {
        SlotStats missing;
        missing.hyper_period = k;
        missing.instance = static_cast<int>(i) + 1;
        out.push_back(missing);
      }
    }
  }
  return out;
}

double SlotTerm(const SlotStats& row, int recon) {
  return ReducedTerm(row, recon, 0);
}

double ReducedTerm(const SlotStats& row, int recon, int reduction) {
  if (row.ct == 0 || row.tbi <= 0) return 0.0;
  const int n = std::max(row.n - reduction, 0);
  return (static_cast<double>(row.ct) / recon) *
         (static_cast<double>(n) / row.tbi);
}

double SlotAsp(const std::vector<SlotStats>& rows_of_slot, int recon) {
  double sum = 0.0;
  for (const SlotStats& r : rows_of_slot) sum += SlotTerm(r, recon);
  return sum;
}

std::map<int, double> PerSlotAsp(const std::vector<SlotStats>& rows,
                                 int recon) {
  std::map<int, double> out;
  for (const SlotStats& r : rows) out[r.instance] += SlotTerm(r, recon);
  return out;
}

TotalAsp SumAsp(const std::vector<double>& per_slot) {
  TotalAsp t;
  for (double v : per_slot) t.value += v;
  t.saturated = t.value > 1.0;
  return t;
}

double RandomizationBound(int n, int eq_pri_size, int tbi) {
  if (tbi <= 0) return 0.0;
  return static_cast<double>(std::max(n - eq_pri_size, 0)) / tbi;
}

AspBreakdown ConditionalAsp(
    const std::vector<SlotStats>& rows,
    const std::vector<std::optional<SlotDecision>>& decisions, int recon) {
  if (decisions.size() != rows.size()) {
    throw PlanError("plan does not line up with the slot statistics");
  }
  AspBreakdown out;
  std::array<int, 4> rule_count{};
  int victim_rows = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const SlotStats& s = rows[r];
    AspRow row;
    row.stats = s;
    row.asp = SlotTerm(s, recon);
    const std::optional<SlotDecision>& d = decisions[r];
    if (!d) {
      if (s.ct == 1 && s.n > 0) {
        throw PlanError("victim slot " + std::to_string(s.instance) +
                        " in hyper-period " + std::to_string(s.hyper_period) +
                        " has no obfuscation decision");
      }
      row.asp_conditional = row.asp;
    } else {
      row.rule = d->rule;
      switch (d->rule) {
        case ObfAction::kSkip:
          row.asp_conditional = 0.0;
          break;
        case ObfAction::kSkipPredecessor:
          if (d->window_reduction < 1) {
            throw PlanError("Obf2 decision without a skipped predecessor");
          }
          row.asp_conditional = ReducedTerm(s, recon, d->window_reduction);
          break;
        case ObfAction::kReorder:
          if (d->window_reduction < d->eq_pri_size || d->eq_pri_size < 1) {
            throw PlanError("Obf3 decision smaller than its group");
          }
          row.asp_conditional = ReducedTerm(s, recon, d->window_reduction);
          break;
        case ObfAction::kNone:
          row.asp_conditional = ReducedTerm(s, recon, d->window_reduction);
          break;
      }
      if (s.ct == 1) {
        ++victim_rows;
        ++rule_count[static_cast<int>(d->rule)];
      }
    }
    const int g = d ? d->eq_pri_size : 0;
    row.randomization_bound =
        s.ct == 0 ? 0.0
                  : RandomizationBound(s.n, g, s.tbi) *
                        (static_cast<double>(s.ct) / recon);
    out.per_slot[s.instance] += row.asp;
    out.per_slot_conditional[s.instance] += row.asp_conditional;
    out.total += row.asp;
    out.total_conditional += row.asp_conditional;
    out.rows.push_back(row);
  }
  out.saturated = out.total > 1.0;
  if (victim_rows > 0) {
    for (int q = 0; q < 4; ++q) {
      out.rule_frequency[q] = static_cast<double>(rule_count[q]) / victim_rows;
    }
  }
  return out;
}

}  // namespace hns
