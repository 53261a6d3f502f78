#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "hns/can_bus.h"
#include "hns/ecu_scheduler.h"
#include "hns/trace_scan.h"

namespace hns {

// One victim slot in one hyper-period of a reconnaissance period.
struct SlotStats {
  int hyper_period = 0;          // k, 0-based
  int instance = 1;              // slot j, as the victim instance number
  std::int64_t slot_index = -1;  // transmission index from period start
  std::int64_t bus_slot = -1;    // transmission index in the whole trace
  Micros time = 0;
  int ct = 0;
  int n = 0;
  int tbi = 0;
};

// Victim slots of `recon` hyper-periods starting at `origin`. Instances are
// numbered by order of appearance within each hyper-period; a hyper-period
// that shows fewer instances than the busiest one gets ct = 0 rows for the
// missing ones. Returns an empty list when the victim never appears.
std::vector<SlotStats> ComputeSlotStats(const TraceIndex& index,
                                        MessageId victim, int recon, Micros H,
                                        Micros origin = 0);

// ct/recon * n/tbi for one row; tbi = 0 contributes nothing.
double SlotTerm(const SlotStats& row, int recon);
// Ratio with a reduced window: ct/recon * max(n - reduction, 0)/tbi.
double ReducedTerm(const SlotStats& row, int recon, int reduction);

// P(AS_j): sum over k of the row terms of slot j.
double SlotAsp(const std::vector<SlotStats>& rows_of_slot, int recon);

// P(AS_j) for every slot j present in `rows`.
std::map<int, double> PerSlotAsp(const std::vector<SlotStats>& rows,
                                 int recon);

struct TotalAsp {
  double value = 0.0;
  bool saturated = false;  // raw sum exceeded 1
};

TotalAsp SumAsp(const std::vector<double>& per_slot);

// (n - eq_pri_size) / tbi, floored at zero; zero when tbi = 0.
double RandomizationBound(int n, int eq_pri_size, int tbi);

// Obfuscation rule applied at one victim row, with the number of window
// frames it removes. eq_pri_size is |T_v^<| for the row.
struct SlotDecision {
  ObfAction rule = ObfAction::kNone;
  int window_reduction = 0;
  int eq_pri_size = 0;
};

struct AspRow {
  SlotStats stats;
  double asp = 0.0;
  ObfAction rule = ObfAction::kNone;
  double asp_conditional = 0.0;
  double randomization_bound = 0.0;  // weighted by ct/recon like `asp`
};

struct AspBreakdown {
  std::vector<AspRow> rows;
  std::map<int, double> per_slot;
  std::map<int, double> per_slot_conditional;
  double total = 0.0;
  double total_conditional = 0.0;
  bool saturated = false;
  // Empirical P(O_q) over victim rows, indexed by ObfAction.
  std::array<double, 4> rule_frequency{};
};

// Conditional ASP under a plan: Obf1 rows drop to zero, Obf2/Obf3/None rows
// keep ct and lose `window_reduction` frames from n. Every row with ct = 1
// and n > 0 needs a decision, otherwise PlanError. Obf2 needs a reduction of
// at least one, Obf3 at least eq_pri_size.
AspBreakdown ConditionalAsp(
    const std::vector<SlotStats>& rows,
    const std::vector<std::optional<SlotDecision>>& decisions, int recon);

}  // namespace hns
