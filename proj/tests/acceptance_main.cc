// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Eigenvalues>

#include "hns/attacker.h"
#include "hns/can_bus.h"
#include "hns/control_skip.h"
#include "hns/experiment.h"
#include "hns/report.h"
#include "hns/scenario.h"
#include "hns/trace_io.h"
#include "support/random_scenario.h"
#include "support/scenario_text.h"

namespace hns {
namespace {

using Eigen::MatrixXd;

struct Outcome {
  bool pass = true;
  std::string detail;

  // Records the first failure; later ones only bump the count.
  void Fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
    ++failures;
  }
  int failures = 0;
};

Scenario Table(double busload) {
  return ParseScenario(testing::WithKey(testing::BundledText("two_ecu.scn"),
                                        "busload", std::to_string(busload)));
}

// 1. Victim and attacker collide once per 20 ms period from TEC 0.
Outcome BusOffStaging() {
  Outcome out;
  const Micros period = 20000;
  BusSimulator bus(2, 250000);
  auto frame = [](EcuId src, Micros t, std::uint8_t fill) {
    Frame f;
    f.id = MessageId(0xC4);
    f.payload.assign(8, fill);
    f.source = src;
    f.release_time = t;
    return f;
  };
  int active = 0, passive = 0;
  int victim_at_passive = -1, attacker_at_passive = -1;
  std::string outcomes;  // one letter per collision, for the reference fold
  std::vector<int> tec_per_period;
  for (int p = 0; p < 60 && !bus.node(0).bus_off(); ++p) {
    bus.Release(frame(0, p * period, 0x11));
    bus.Release(frame(1, p * period, 0x00));
    const std::size_t first = bus.events().size();
    bus.RunUntil((p + 1) * period);
    bool passive_here = false;
    for (std::size_t i = first; i < bus.events().size(); ++i) {
      const BusEvent& e = bus.events()[i];
      if (e.kind != EventKind::kTxError) continue;
      if (e.source == 1) {
        if (passive == 0) attacker_at_passive = e.tec_after;
        continue;
      }
      if (e.passive_flag) {
        if (passive == 0) victim_at_passive = e.tec_after - 8;
        ++passive;
        passive_here = true;
        outcomes += 'P';
      } else {
        ++active;
        outcomes += 'A';
      }
    }
    if (passive_here) tec_per_period.push_back(bus.node(0).tec);
  }

  const auto ref = testing::FoldOutcomes(outcomes);
  if (active != 16) out.Fail("active collisions " + std::to_string(active));
  if (victim_at_passive != 128 || attacker_at_passive != 128) {
    out.Fail("tec at first passive collision " +
             std::to_string(victim_at_passive) + "/" +
             std::to_string(attacker_at_passive));
  }
  if (passive != 19) out.Fail("passive collisions " + std::to_string(passive));
  for (std::size_t i = 0; i + 1 < tec_per_period.size(); ++i) {
    if (tec_per_period[i] != 128 + 7 * static_cast<int>(i + 1)) {
      out.Fail("passive period " + std::to_string(i + 1) + " tec " +
               std::to_string(tec_per_period[i]));
    }
  }
  if (!bus.node(0).bus_off()) out.Fail("victim not bus-off");
  if (bus.node(1).mode() != ErrorMode::kErrorActive) {
    out.Fail("attacker not back to error-active");
  }
  if (ref[0].tec != bus.node(0).tec || ref[0].bus_off != bus.node(0).bus_off() ||
      ref[1].tec != bus.node(1).tec) {
    out.Fail("simulator disagrees with the reference fold");
  }
  if (out.pass) {
    out.detail = "16 active, 19 passive (+7 each), victim tec " +
                 std::to_string(bus.node(0).tec) + " bus-off, attacker tec " +
                 std::to_string(bus.node(1).tec) + " error-active";
  }
  return out;
}

// 2. Bundled reconstruction of the four-instance example.
Outcome FourInstanceExample() {
  Outcome out;
  std::ifstream in(std::string(HNS_SCENARIO_DIR) + "/four_instance_trace.csv");
  const BusTrace t = ReadTraceCsv(in, 250000);
  const ReconReport r = ReconAnalyze(t.events, MessageId(0x100), 2, 20000);
  const std::optional<int> target = SelectTarget(r);
  std::string got;
  for (int a : r.averages) got += (got.empty() ? "" : ",") + std::to_string(a);
  if (r.averages != std::vector<int>{1, 1, 3, 5}) out.Fail("averages " + got);
  if (target != 4) out.Fail("target " + std::to_string(target.value_or(-1)));
  if (out.pass) out.detail = "averages (" + got + "), target 4";
  return out;
}

// Shared suite for criteria 3-5.
struct SuiteRun {
  std::uint64_t seed = 0;
  Scenario scenario;
  Report report;
};

const std::vector<SuiteRun>& RandomSuite() {
  static const std::vector<SuiteRun> suite = [] {
    std::vector<SuiteRun> out;
    for (std::uint64_t seed = 1; seed <= 120; ++seed) {
      SuiteRun r;
      r.seed = seed;
      r.scenario = testing::RandomScenario(seed);
      r.report = RunExperiment(r.scenario);
      out.push_back(std::move(r));
    }
    return out;
  }();
  return suite;
}

std::string Where(const SuiteRun& r, int cycle) {
  return "seed " + std::to_string(r.seed) + " cycle " + std::to_string(cycle);
}

// 3. Conditional ASP never above baseline, strictly below where a rule
// applied, zero under Obf1, and Obf1 jobs really skipped.
Outcome ConditionalBelowBaseline() {
  Outcome out;
  int rows = 0, applied = 0, skips_checked = 0;
  for (const SuiteRun& r : RandomSuite()) {
    for (const CycleAspRow& a : r.report.asp) {
      ++rows;
      const AspRow& row = a.row;
      if (row.asp_conditional > row.asp) {
        out.Fail(Where(r, a.cycle) + ": conditional above baseline");
      }
      if (row.rule != ObfAction::kNone) {
        ++applied;
        if (!(row.asp_conditional < row.asp)) {
          out.Fail(Where(r, a.cycle) + ": applied rule without reduction");
        }
      }
      if (row.rule == ObfAction::kSkip && row.asp_conditional != 0.0) {
        out.Fail(Where(r, a.cycle) + ": Obf1 slot not zero");
      }
    }
    const auto& cycles = r.report.cycles;
    for (std::size_t c = 0; c + 1 < cycles.size(); ++c) {
      for (std::size_t e = 0; e < cycles[c].hide.size(); ++e) {
        const Schedule& next = cycles[c + 1].schedules[e];
        for (const VictimDecision& d : cycles[c].hide[e].decisions) {
          if (d.rule != ObfAction::kSkip) continue;
          ++skips_checked;
          const int slot = next.SlotOf(d.job);
          if (slot < 0 || !next.slots[slot].skipped) {
            out.Fail(Where(r, static_cast<int>(c + 1)) +
                     ": Obf1 job executed");
          }
        }
      }
    }
  }
  if (applied == 0) out.Fail("no rule was ever applied");
  if (out.pass) {
    out.detail = std::to_string(RandomSuite().size()) + " scenarios, " +
                 std::to_string(rows) + " rows, " + std::to_string(applied) +
                 " with a rule, " + std::to_string(skips_checked) +
                 " Obf1 skips confirmed";
  } else {
    out.detail += " (" + std::to_string(out.failures) + " violations)";
  }
  return out;
}

// 4. Report rows against the independent trace walk.
Outcome AspOracle() {
  Outcome out;
  int compared = 0;
  for (const SuiteRun& r : RandomSuite()) {
    const Scenario& sc = r.scenario;
    const Micros H = sc.CanHyperperiod();
    const Micros L = sc.PeriodLength();
    const auto& events = r.report.trace.events;
    // Analyzed victims: control ids of the defended ECU.
    std::map<MessageId, int> victim_ecu;
    for (std::size_t e = 0; e < sc.ecus.size(); ++e) {
      for (const TaskSpec& t : sc.ecus[e].tasks) {
        if (t.is_control && t.msg_id) victim_ecu[*t.msg_id] = e;
      }
    }
    std::map<std::pair<int, MessageId>, std::vector<const CycleAspRow*>> got;
    for (const CycleAspRow& a : r.report.asp) {
      got[{a.cycle, a.victim}].push_back(&a);
    }
    for (const auto& [key, rows] : got) {
      const auto [cycle, victim] = key;
      const int ecu = victim_ecu.at(victim);
      std::set<MessageId> own;
      for (const TaskSpec& t : sc.ecus[ecu].tasks) {
        if (t.msg_id) own.insert(*t.msg_id);
      }
      const auto oracle = testing::EnumerateSlots(
          events, victim, sc.recon, H, cycle * L, [&](const BusEvent& e) {
            return e.source != ecu && own.count(e.frame.id) > 0;
          });
      if (oracle.size() != rows.size()) {
        out.Fail(Where(r, cycle) + ": row count");
        continue;
      }
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& o = oracle[i];
        const SlotStats& s = rows[i]->row.stats;
        const double expect =
            (o.ct && o.tbi > 0)
                ? (1.0 / sc.recon) * o.n / static_cast<double>(o.tbi)
                : 0.0;
        ++compared;
        if (s.ct != o.ct || s.n != o.n || (o.ct && s.tbi != o.tbi) ||
            std::abs(rows[i]->row.asp - expect) > 1e-12) {
          out.Fail(Where(r, cycle) + " " + victim.ToHex() + " row " +
                   std::to_string(i));
        }
      }
    }
  }
  if (out.pass) {
    out.detail = std::to_string(compared) + " rows match within 1e-12";
  } else {
    out.detail += " (" + std::to_string(out.failures) + " violations)";
  }
  return out;
}

// 5. Executed skip patterns stay within limits and keep the GUES envelope.
Outcome SkipSafety() {
  Outcome out;
  int patterns = 0;
  std::mt19937 rng(5);
  std::map<std::pair<std::string, double>, double> m_cache;
  for (const SuiteRun& r : RandomSuite()) {
    const Scenario& sc = r.scenario;
    for (std::size_t e = 0; e < sc.ecus.size(); ++e) {
      const EcuConfig& ecu = sc.ecus[e];
      for (std::size_t t = 0; t < ecu.tasks.size(); ++t) {
        const TaskSpec& task = ecu.tasks[t];
        if (!task.is_control) continue;
        std::map<std::int64_t, bool> executed;
        for (const CycleRecord& c : r.report.cycles) {
          for (const ScheduleSlot& s : c.schedules[e].slots) {
            if (!s.idle() && s.task == static_cast<int>(t)) {
              executed[s.instance] = !s.skipped;
            }
          }
        }
        std::string bits;
        int run = 0, worst = 0;
        for (const auto& [inst, ran] : executed) {
          bits += ran ? '1' : '0';
          run = ran ? 0 : run + 1;
          worst = std::max(worst, run);
        }
        ++patterns;
        if (worst > task.skip_limit) {
          out.Fail("seed " + std::to_string(r.seed) + " task " + task.name +
                   ": run " + std::to_string(worst));
          continue;
        }
        const std::string& plant_name = ecu.task_plants[t];
        if (plant_name.empty() || bits.empty()) continue;
        const PlantModel& plant = sc.plants.at(plant_name);
        auto it = m_cache.find({plant_name, sc.gamma});
        if (it == m_cache.end()) {
          const SkipLimitResult lim =
              ComputeSkipLimit(plant, sc.gamma, sc.max_skip_search);
          it = m_cache.emplace(std::make_pair(plant_name, sc.gamma),
                               GuesConstant(lim.P))
                   .first;
        }
        const Css css = Css::Parse(bits);
        const int n = static_cast<int>(plant.A.rows());
        Eigen::VectorXd x0(2 * n);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int i = 0; i < 2 * n; ++i) x0(i) = u(rng);
        const auto traj = SimulateCss(plant, css, x0);
        if (!VerifyGues(SwitchedTrajectory(traj, css), it->second, sc.gamma)) {
          out.Fail("seed " + std::to_string(r.seed) + " task " + task.name +
                   ": GUES envelope broken for " + bits);
        }
      }
    }
  }
  if (out.pass) {
    out.detail = std::to_string(patterns) +
                 " executed patterns within limits and GUES envelopes";
  } else {
    out.detail += " (" + std::to_string(out.failures) + " violations)";
  }
  return out;
}

double SpectralRadius(const MatrixXd& m) {
  return m.eigenvalues().cwiseAbs().maxCoeff();
}

// Definitional check, independent of the solver's own verification.
bool Certifies(const std::vector<MatrixXd>& ms, const MatrixXd& P,
               double gamma) {
  if ((P - P.transpose()).norm() > 1e-9 * P.norm()) return false;
  Eigen::SelfAdjointEigenSolver<MatrixXd> ps(P);
  if (ps.eigenvalues().minCoeff() <= 0.0) return false;
  for (const MatrixXd& m : ms) {
    const MatrixXd q = m.transpose() * P * m - gamma * gamma * P;
    Eigen::SelfAdjointEigenSolver<MatrixXd> qs(0.5 * (q + q.transpose()));
    if (qs.eigenvalues().maxCoeff() >= 0.0) return false;
  }
  return true;
}

// 6. 50 random 2-6 dimensional systems.
Outcome ClfSoundness() {
  Outcome out;
  std::mt19937 rng(2024);
  std::normal_distribution<double> g(0.0, 1.0);
  const double gamma = 0.95;
  int feasible = 0, infeasible_required = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 5;
    const int count = 2 + trial % 2;
    std::vector<MatrixXd> ms;
    for (int i = 0; i < count; ++i) {
      MatrixXd m(n, n);
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) m(r, c) = g(rng);
      }
      const double radius =
          trial % 4 == 0 ? 0.96 + 0.1 * (rng() % 100) / 100.0
                         : 0.3 + 0.5 * (rng() % 100) / 100.0;
      ms.push_back(m * (radius / SpectralRadius(m)));
    }
    bool necessary_violated = false;
    for (const MatrixXd& a : ms) {
      necessary_violated |= SpectralRadius(a) >= gamma;
      for (const MatrixXd& b : ms) {
        necessary_violated |= SpectralRadius(a * b) >= gamma * gamma;
      }
    }
    const ClfResult r = FindClf(ms, gamma);
    if (necessary_violated) {
      ++infeasible_required;
      if (r.feasible) out.Fail("trial " + std::to_string(trial) +
                               ": certificate despite eigenvalue >= gamma");
    }
    if (r.feasible) {
      ++feasible;
      if (!Certifies(ms, r.P, gamma)) {
        out.Fail("trial " + std::to_string(trial) + ": unsound certificate");
      }
    }
  }
  if (feasible == 0) out.Fail("no system certified");
  if (out.pass) {
    out.detail = std::to_string(feasible) + " certificates sound, " +
                 std::to_string(infeasible_required) +
                 " necessary-condition violations reported infeasible";
  }
  return out;
}

// 7. Attacks on Obf1-skipped instances always alarm; clean runs never do.
Outcome Detection() {
  Outcome out;
  int targeted = 0, alarmed = 0, clean_alarms = 0, silenced = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Scenario sc = Table(0.75);
    sc.seed = seed;
    sc.defense = DefenseMode::kHns;
    const Report r = RunExperiment(sc);
    const auto [ve, vt] = sc.Locate(sc.attacker.victim);
    const Micros period = sc.ecus[ve].tasks[vt].period;
    // Injections that reached the wire; a bus-off attacker sends nothing.
    const EcuId attacker_node = static_cast<EcuId>(sc.ecus.size());
    std::set<Micros> on_bus;
    for (const BusEvent& e : r.trace.events) {
      if (e.source == attacker_node && (e.kind == EventKind::kTxSuccess ||
                                        e.kind == EventKind::kTxError)) {
        on_bus.insert(e.frame.release_time);
      }
    }
    for (const CycleRecord& c : r.cycles) {
      const Schedule& s = c.schedules[ve];
      for (const Frame& f : c.injections) {
        if (!on_bus.count(f.release_time)) {
          ++silenced;
          continue;
        }
        // The instance whose period the injection falls in.
        const JobKey job{vt, f.release_time / period + 1};
        const PlanEntry* entry = c.plans[ve].EntryFor(job);
        const int slot = s.SlotOf(job);
        if (!entry || entry->action != ObfAction::kSkip || slot < 0 ||
            !s.slots[slot].skipped) {
          continue;
        }
        ++targeted;
        const Alarm& a = c.alarms[ve];
        const bool hit = std::any_of(
            a.evidence.begin(), a.evidence.end(),
            [&](const AlarmEvidence& ev) { return ev.planned_job == job; });
        if (hit) {
          ++alarmed;
        } else {
          out.Fail("seed " + std::to_string(seed) + " cycle " +
                   std::to_string(c.cycle) + ": injection at skipped " +
                   sc.ecus[ve].tasks[vt].name + "#" +
                   std::to_string(job.instance) + " not alarmed");
        }
      }
    }
    sc.attacker.enabled = false;
    const int n = RunExperiment(sc).AlarmCount();
    clean_alarms += n;
    if (n > 0) {
      out.Fail("seed " + std::to_string(seed) + ": " + std::to_string(n) +
               " alarms on clean traffic");
    }
  }
  if (targeted == 0) out.Fail("no injection ever hit an Obf1-skipped instance");
  const std::string counts = std::to_string(alarmed) + "/" +
                             std::to_string(targeted) +
                             " skipped-instance attacks alarmed, " +
                             std::to_string(silenced) +
                             " injections never reached the bus, " +
                             std::to_string(clean_alarms) +
                             " clean-run alarms over 20 seeds";
  out.detail = out.pass ? counts : out.detail + " (" + counts + ")";
  return out;
}

// 8. Attack-aware plan beats attack-unaware shuffling at every busload.
Outcome RandomizationTrend() {
  Outcome out;
  std::ostringstream table;
  for (double b : {0.25, 0.55, 0.75}) {
    Scenario sc = Table(b);
    sc.defense = DefenseMode::kHns;
    const Report hns = RunExperiment(sc);
    sc.defense = DefenseMode::kRandomize;
    const Report rnd = RunExperiment(sc);
    const double a = hns.TotalConditional();
    const double z = rnd.TotalRandomized();
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s%.2f: %.4f <= %.4f", b > 0.3 ? ", " : "",
                  b, a, z);
    table << buf;
    if (a > z) out.Fail(std::string("busload ") + buf);
    for (const CycleAspRow& row : rnd.asp) {
      if (row.asp_randomized < row.row.randomization_bound - 1e-12) {
        out.Fail("randomized slot below its bound at busload " +
                 std::to_string(b));
      }
    }
  }
  out.detail = out.pass ? table.str() : out.detail + " [" + table.str() + "]";
  return out;
}

// 9. Two compare runs write identical files.
Outcome Determinism() {
  Outcome out;
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() /
                        ("hns_acceptance_" + std::to_string(::getpid()));
  Scenario sc = Table(0.55);
  const std::vector<DefenseMode> modes{DefenseMode::kOff, DefenseMode::kHns,
                                       DefenseMode::kRandomize};
  std::vector<std::vector<fs::path>> written(2);
  for (int run = 0; run < 2; ++run) {
    const std::vector<Report> reports = Compare(sc, modes);
    for (std::size_t m = 0; m < reports.size(); ++m) {
      const auto files = EmitReport(
          reports[m], root / std::to_string(run) / ToString(modes[m]));
      written[run].insert(written[run].end(), files.begin(), files.end());
    }
  }
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  if (written[0].size() != written[1].size()) out.Fail("file sets differ");
  int compared = 0;
  for (std::size_t i = 0; out.pass && i < written[0].size(); ++i) {
    if (written[0][i].filename() != written[1][i].filename()) {
      out.Fail("file order differs");
    } else if (slurp(written[0][i]) != slurp(written[1][i])) {
      out.Fail(fs::relative(written[0][i], root).string() + " differs");
    }
    ++compared;
  }
  std::error_code ec;
  fs::remove_all(root, ec);
  if (out.pass) {
    out.detail = std::to_string(compared) + " files byte-identical";
  }
  return out;
}

struct Criterion {
  int number;
  const char* name;
  double limit_s;  // runtime budget
  std::function<Outcome()> check;
};

}  // namespace
}  // namespace hns

int main() {
  using namespace hns;
  const std::vector<Criterion> criteria{
      {1, "bus-off staging", 1.0, BusOffStaging},
      {2, "four-instance recon example", 1.0, FourInstanceExample},
      {3, "conditional ASP never above baseline", 60.0, ConditionalBelowBaseline},
      {4, "slot ASP against enumeration oracle", 60.0, AspOracle},
      {5, "skip limits and GUES on executed plans", 60.0, SkipSafety},
      {6, "CLF certificates sound", 60.0, ClfSoundness},
      {7, "detection of skipped-instance attacks", 120.0, Detection},
      {8, "attack-aware vs randomized ASP", 300.0, RandomizationTrend},
      {9, "compare output deterministic", 120.0, Determinism},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o.Fail(std::string("exception: ") + e.what());
    }
    const double s = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    if (o.pass && s > c.limit_s) {
      o.pass = false;
      o.detail += " (over the " + std::to_string(c.limit_s) + " s budget)";
    }
    std::printf("criterion %d: %s  %s: %s [%.2f s]\n", c.number,
                o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), s);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
