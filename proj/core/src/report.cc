#include "hns/report.h"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include <yaml-cpp/yaml.h>

#include "hns/trace_io.h"

namespace hns {

const char* Version() { return HNS_VERSION; }

namespace {

// Shortest text that reads back as the same double.
std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string Csv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void WriteAspCsv(const Report& report, std::ostream& out) {
  out << "cycle,victim,hyper_period,slot_index,instance,ct,n,tbi,asp,obf_rule,"
         "asp_conditional,randomization_bound,asp_randomized\n";
  for (const CycleAspRow& r : report.asp) {
    const SlotStats& s = r.row.stats;
    out << r.cycle << ',' << r.victim.ToHex() << ',' << s.hyper_period << ','
        << s.slot_index << ',' << s.instance << ',' << s.ct << ',' << s.n << ','
        << s.tbi << ',' << Num(r.row.asp) << ',' << ToString(r.row.rule) << ','
        << Num(r.row.asp_conditional) << ','
        << Num(r.row.randomization_bound) << ',' << Num(r.asp_randomized)
        << '\n';
  }
}

void WriteAlarmsCsv(const Report& report, std::ostream& out) {
  out << "cycle,ecu,time_us,bus_slot,observed_id,source,planned_job,"
         "planned_action\n";
  for (const AlarmRow& a : report.alarms) {
    const AlarmEvidence& e = a.evidence;
    const Schedule& s =
        report.cycles[a.cycle].schedules[report.scenario.Locate(e.observed_id).first];
    out << a.cycle << ',' << Csv(a.ecu) << ',' << e.time << ',' << e.bus_slot
        << ',' << e.observed_id.ToHex() << ',' << e.source << ','
        << Csv(s.tasks[e.planned_job.task].name + "#" +
               std::to_string(e.planned_job.instance))
        << ',' << ToString(e.planned_action) << '\n';
  }
}

void WriteTecCsv(const Report& report, std::ostream& out) {
  out << "cycle,hyper_period,time_us,victim_tec,victim_mode,attacker_tec,"
         "attacker_mode,collision\n";
  for (const TecRow& t : report.tec) {
    out << t.cycle << ',' << t.hyper_period << ',' << t.time << ','
        << t.victim_tec << ',' << ToString(t.victim_mode) << ','
        << t.attacker_tec << ',' << ToString(t.attacker_mode) << ','
        << t.collision << '\n';
  }
}

void WritePlanCsv(const Report& report, std::ostream& out) {
  out << "cycle,ecu,ecu_slot,task,instance,action,predecessor,group,reason\n";
  for (const PlanRow& p : report.plan) {
    out << p.cycle << ',' << Csv(p.ecu) << ',' << p.ecu_slot << ','
        << Csv(p.task) << ',' << p.instance << ',' << ToString(p.action) << ','
        << Csv(p.predecessor) << ',' << Csv(p.group) << ',' << Csv(p.reason)
        << '\n';
  }
}

void WriteSummaryCsv(const Report& report, std::ostream& out) {
  out << "cycle,victim,asp_total,asp_conditional_total,"
         "randomization_bound_total,asp_randomized_total,saturated,alarms,"
         "victim_tec,victim_mode,freq_none,freq_obf1,freq_obf2,freq_obf3\n";
  auto row = [&](const std::string& cycle, const CycleSummary& s) {
    out << cycle << ',' << s.victim.ToHex() << ',' << Num(s.asp_total) << ','
        << Num(s.asp_conditional_total) << ','
        << Num(s.randomization_bound_total) << ','
        << Num(s.asp_randomized_total) << ',' << (s.saturated ? 1 : 0) << ','
        << s.alarms << ',' << s.victim_tec << ',' << ToString(s.victim_mode);
    for (double f : s.rule_frequency) out << ',' << Num(f);
    out << '\n';
  };
  for (const CycleSummary& s : report.summary) {
    row(std::to_string(s.cycle), s);
  }
  // Totals per victim over every cycle.
  std::vector<CycleSummary> totals;
  for (const CycleSummary& s : report.summary) {
    auto it = std::find_if(totals.begin(), totals.end(),
                           [&](const CycleSummary& t) {
                             return t.victim == s.victim;
                           });
    if (it == totals.end()) {
      CycleSummary t;
      t.victim = s.victim;
      t.rule_frequency = {};
      totals.push_back(t);
      it = totals.end() - 1;
    }
    it->asp_total += s.asp_total;
    it->asp_conditional_total += s.asp_conditional_total;
    it->randomization_bound_total += s.randomization_bound_total;
    it->asp_randomized_total += s.asp_randomized_total;
    it->saturated = it->saturated || s.saturated;
    it->alarms += s.alarms;
    it->victim_tec = s.victim_tec;
    it->victim_mode = s.victim_mode;
  }
  for (CycleSummary& t : totals) {
    // Rule frequency over every decided row of the victim.
    int decided = 0;
    for (const CycleAspRow& a : report.asp) {
      if (a.victim != t.victim || a.row.stats.ct == 0 || a.row.stats.n == 0) {
        continue;
      }
      t.rule_frequency[static_cast<int>(a.row.rule)] += 1.0;
      ++decided;
    }
    if (decided > 0) {
      for (double& f : t.rule_frequency) f /= decided;
    }
    row("all", t);
  }
}

void WriteAttackCsv(const Report& report, std::ostream& out) {
  out << "cycle,hyper_period,targeted_instance,injected,collision,escalated\n";
  for (const AttackRow& a : report.attack) {
    out << a.cycle << ',' << a.hyper_period << ',' << a.targeted_instance
        << ',' << a.injected << ',' << a.collision << ','
        << (a.escalated ? 1 : 0) << '\n';
  }
}

void WriteScheduleCsv(const Report& report, std::ostream& out) {
  out << "cycle,ecu,slot,task,instance,start_us,end_us,release_us,"
         "deadline_us,skipped,reordered\n";
  for (const CycleRecord& c : report.cycles) {
    for (std::size_t e = 0; e < c.schedules.size(); ++e) {
      const std::string& ecu = report.scenario.ecus[e].name;
      for (const ScheduleSlot& s : c.schedules[e].slots) {
        if (s.idle()) continue;
        out << c.cycle << ',' << Csv(ecu) << ',' << s.index << ','
            << Csv(c.schedules[e].tasks[s.task].name) << ',' << s.instance
            << ',' << s.start << ',' << s.end << ',' << s.release << ','
            << s.deadline << ',' << (s.skipped ? 1 : 0) << ','
            << (s.reordered ? 1 : 0) << '\n';
      }
    }
  }
}

void WriteManifest(const Report& report, std::ostream& out) {
  YAML::Emitter m;
  m.SetDoublePrecision(17);
  m << YAML::BeginMap;
  m << YAML::Key << "artifact" << YAML::Value << "hide_n_seek";
  m << YAML::Key << "version" << YAML::Value << Version();
  m << YAML::Key << "seed" << YAML::Value << report.scenario.seed;
  m << YAML::Key << "source" << YAML::Value << report.scenario.source;
  m << YAML::Key << "periodic_load" << YAML::Value << report.periodic_load;
  m << YAML::Key << "measured_load" << YAML::Value << report.measured_load;
  m << YAML::Key << "aperiodic_frames" << YAML::Value
    << report.aperiodic_frames;
  m << YAML::Key << "alarms" << YAML::Value << report.AlarmCount();
  m << YAML::Key << "victim_bus_off" << YAML::Value << report.victim_bus_off;
  if (report.bus_off_time) {
    m << YAML::Key << "bus_off_time_us" << YAML::Value << *report.bus_off_time;
  }
  m << YAML::Key << "pending_at_horizon" << YAML::Value
    << report.trace.pending_at_horizon.size();
  m << YAML::Key << "suppressed_frames" << YAML::Value
    << report.trace.suppressed.size();
  m << YAML::Key << "scenario" << YAML::Value
    << YAML::Load(DescribeScenario(report.scenario));
  m << YAML::EndMap;
  out << m.c_str() << '\n';
}

std::vector<std::filesystem::path> EmitReport(
    const Report& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create " + dir.string() + ": " +
                             ec.message());
  }
  std::vector<std::filesystem::path> written;
  auto emit = [&](const char* name, auto&& writer) {
    const std::filesystem::path p = dir / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) {
      throw std::runtime_error("cannot open " + p.string() + ": " +
                               std::strerror(errno));
    }
    writer(out);
    out.flush();
    if (!out) {
      throw std::runtime_error("write failed for " + p.string() + ": " +
                               std::strerror(errno));
    }
    written.push_back(p);
  };
  emit("asp.csv", [&](std::ostream& o) { WriteAspCsv(report, o); });
  emit("alarms.csv", [&](std::ostream& o) { WriteAlarmsCsv(report, o); });
  emit("tec.csv", [&](std::ostream& o) { WriteTecCsv(report, o); });
  emit("plan.csv", [&](std::ostream& o) { WritePlanCsv(report, o); });
  emit("summary.csv", [&](std::ostream& o) { WriteSummaryCsv(report, o); });
  emit("attack.csv", [&](std::ostream& o) { WriteAttackCsv(report, o); });
  emit("schedule.csv", [&](std::ostream& o) { WriteScheduleCsv(report, o); });
  emit("trace.csv", [&](std::ostream& o) { WriteTraceCsv(report.trace, o); });
  emit("manifest.yaml", [&](std::ostream& o) { WriteManifest(report, o); });
  return written;
}

}  // namespace hns
