#include "hns/scenario.h"

#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "hns/error.h"

namespace hns {

const char* ToString(DefenseMode mode) {
  switch (mode) {
    case DefenseMode::kOff:
      return "off";
    case DefenseMode::kHns:
      return "hns";
    case DefenseMode::kRandomize:
      return "randomize";
  }
  return "?";
}

DefenseMode ParseDefenseMode(const std::string& text) {
  if (text == "off") return DefenseMode::kOff;
  if (text == "hns") return DefenseMode::kHns;
  if (text == "randomize") return DefenseMode::kRandomize;
  throw ScenarioError("defense must be off, hns or randomize, got '" + text +
                      "'");
}

Micros Scenario::CanHyperperiod() const {
  Micros h = 0;
  for (const EcuConfig& e : ecus) {
    for (const TaskSpec& t : e.tasks) {
      if (!t.transmits()) continue;
      h = h == 0 ? t.period : std::lcm(h, t.period);
    }
  }
  if (h == 0) throw ScenarioError("no task transmits on the bus");
  return h;
}

Micros Scenario::PeriodLength() const { return recon * CanHyperperiod(); }

double Scenario::PeriodicLoad() const {
  double load = 0.0;
  for (const EcuConfig& e : ecus) {
    for (const TaskSpec& t : e.tasks) {
      if (!t.transmits()) continue;
      load += static_cast<double>(FrameDuration(t.dlc, bitrate)) /
              static_cast<double>(t.period);
    }
  }
  return load;
}

std::pair<int, int> Scenario::Locate(MessageId id) const {
  for (std::size_t e = 0; e < ecus.size(); ++e) {
    for (std::size_t t = 0; t < ecus[e].tasks.size(); ++t) {
      if (ecus[e].tasks[t].msg_id == id) {
        return {static_cast<int>(e), static_cast<int>(t)};
      }
    }
  }
  throw LookupError("no task sends " + id.ToHex());
}

namespace {

int LineOf(const YAML::Node& node) {
  return node.Mark().is_null() ? 0 : node.Mark().line + 1;
}

[[noreturn]] void Fail(const YAML::Node& node, const std::string& what) {
  throw ScenarioError(what, LineOf(node));
}

void CheckKeys(const YAML::Node& node, const std::set<std::string>& allowed,
               const std::string& where) {
  if (!node.IsMap()) Fail(node, where + " must be a mapping");
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    if (allowed.count(key) == 0) {
      Fail(kv.first, "unknown field '" + key + "' in " + where);
    }
  }
}

template <typename T>
T As(const YAML::Node& node, const std::string& field) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    Fail(node, "field '" + field + "' has the wrong type");
  }
}

template <typename T>
T Required(const YAML::Node& parent, const std::string& field,
           const std::string& where) {
  const YAML::Node n = parent[field];
  if (!n) Fail(parent, "missing required field '" + field + "' in " + where);
  return As<T>(n, field);
}

template <typename T>
T Optional(const YAML::Node& parent, const std::string& field, T fallback) {
  const YAML::Node n = parent[field];
  if (!n) return fallback;
  return As<T>(n, field);
}

MessageId ParseId(const YAML::Node& node, const std::string& field) {
  try {
    return MessageId::Parse(node.as<std::string>());
  } catch (const std::exception&) {
    Fail(node, "field '" + field + "' is not a valid 11-bit id");
  }
}

Eigen::MatrixXd ParseMatrix(const YAML::Node& node, const std::string& field) {
  if (!node || !node.IsSequence() || node.size() == 0) {
    Fail(node, "matrix '" + field + "' must be a non-empty list of rows");
  }
  const std::size_t rows = node.size();
  std::size_t cols = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!node[r].IsSequence() || node[r].size() == 0) {
      Fail(node[r], "row " + std::to_string(r) + " of '" + field +
                        "' must be a non-empty list");
    }
    if (r == 0) cols = node[r].size();
    if (node[r].size() != cols) {
      Fail(node[r], "matrix '" + field + "' has ragged rows");
    }
  }
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      m(r, c) = As<double>(node[r][c], field);
    }
  }
  return m;
}

PlantModel ParsePlant(const YAML::Node& node, const std::string& name) {
  CheckKeys(node, {"A", "B", "C", "K", "L"}, "plant " + name);
  PlantModel p;
  p.A = ParseMatrix(node["A"], name + ".A");
  p.B = ParseMatrix(node["B"], name + ".B");
  p.C = ParseMatrix(node["C"], name + ".C");
  p.K = ParseMatrix(node["K"], name + ".K");
  p.L = ParseMatrix(node["L"], name + ".L");
  try {
    p.Validate();
  } catch (const DimensionError& e) {
    Fail(node, "plant " + name + ": " + e.what());
  }
  return p;
}

TaskSpec ParseTask(const YAML::Node& node, std::string* plant,
                   std::optional<int>* skip_override) {
  CheckKeys(node,
            {"name", "period_us", "wcet_us", "priority", "id", "dlc",
             "control", "plant", "skip_limit"},
            "task");
  TaskSpec t;
  t.name = Required<std::string>(node, "name", "task");
  t.period = Required<Micros>(node, "period_us", "task " + t.name);
  t.wcet = Required<Micros>(node, "wcet_us", "task " + t.name);
  t.ecu_priority = Optional<int>(node, "priority", 0);
  if (node["id"]) t.msg_id = ParseId(node["id"], "id");
  t.dlc = Optional<int>(node, "dlc", 8);
  t.is_control = Optional<bool>(node, "control", false);
  *plant = Optional<std::string>(node, "plant", "");
  if (node["skip_limit"]) {
    *skip_override = As<int>(node["skip_limit"], "skip_limit");
  }
  try {
    ValidateTask(t);
  } catch (const std::exception& e) {
    Fail(node, e.what());
  }
  if (t.is_control && plant->empty() && !*skip_override) {
    Fail(node, "control task " + t.name + " needs a plant or a skip_limit");
  }
  return t;
}

}  // namespace

Scenario ParseScenario(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ScenarioError(e.msg, e.mark.line + 1);
  }
  if (!root || !root.IsMap()) throw ScenarioError("scenario must be a mapping");
  CheckKeys(root,
            {"format", "version", "seed", "bitrate", "recon", "cycles",
             "busload", "jitter_us", "defense", "gamma", "max_skip_search",
             "policy", "attacker", "plants", "ecus"},
            "scenario");

  Scenario s;
  s.source = source;
  if (Required<std::string>(root, "format", "scenario") != "hns-scenario") {
    Fail(root["format"], "format must be 'hns-scenario'");
  }
  s.version = Required<int>(root, "version", "scenario");
  if (s.version != 1) Fail(root["version"], "unsupported version");
  s.seed = Required<std::uint64_t>(root, "seed", "scenario");
  s.bitrate = Optional<int>(root, "bitrate", s.bitrate);
  if (s.bitrate <= 0) Fail(root["bitrate"], "bitrate must be positive");
  s.recon = Optional<int>(root, "recon", s.recon);
  if (s.recon < 1) Fail(root["recon"], "recon must be at least 1");
  s.cycles = Optional<int>(root, "cycles", s.cycles);
  if (s.cycles < 1) Fail(root["cycles"], "cycles must be at least 1");
  s.busload = Optional<double>(root, "busload", s.busload);
  if (!(s.busload > 0.0 && s.busload < 1.0)) {
    Fail(root["busload"], "busload must lie in (0, 1)");
  }
  s.jitter_us = Optional<Micros>(root, "jitter_us", 0);
  if (s.jitter_us < 0) Fail(root["jitter_us"], "jitter_us must be >= 0");
  if (root["defense"]) {
    try {
      s.defense = ParseDefenseMode(root["defense"].as<std::string>());
    } catch (const ScenarioError& e) {
      Fail(root["defense"], e.what());
    }
  }
  s.gamma = Optional<double>(root, "gamma", s.gamma);
  if (!(s.gamma > 0.0 && s.gamma < 1.0)) {
    Fail(root["gamma"], "gamma must lie in (0, 1)");
  }
  s.max_skip_search = Optional<int>(root, "max_skip_search", s.max_skip_search);
  if (s.max_skip_search < 1) {
    Fail(root["max_skip_search"], "max_skip_search must be at least 1");
  }
  const std::string policy = Optional<std::string>(root, "policy", "edf");
  if (policy == "edf") {
    s.policy = SchedPolicy::kEdf;
  } else if (policy == "static") {
    s.policy = SchedPolicy::kStaticTable;
  } else {
    Fail(root["policy"], "policy must be edf or static");
  }

  if (const YAML::Node plants = root["plants"]) {
    if (!plants.IsMap()) Fail(plants, "plants must be a mapping");
    for (const auto& kv : plants) {
      const std::string name = kv.first.as<std::string>();
      s.plants[name] = ParsePlant(kv.second, name);
    }
  }

  const YAML::Node ecus = root["ecus"];
  if (!ecus || !ecus.IsSequence() || ecus.size() == 0) {
    Fail(ecus ? ecus : root, "ecus must be a non-empty list");
  }
  std::set<MessageId> ids;
  auto claim = [&](const YAML::Node& at, MessageId id) {
    if (!ids.insert(id).second) Fail(at, "id " + id.ToHex() + " used twice");
  };
  std::map<std::string, int> limit_cache;
  for (const YAML::Node& en : ecus) {
    CheckKeys(en, {"name", "defended", "tasks", "aperiodic"}, "ecu");
    EcuConfig ecu;
    ecu.name = Required<std::string>(en, "name", "ecu");
    ecu.defended = Optional<bool>(en, "defended", false);
    const YAML::Node tasks = en["tasks"];
    if (!tasks || !tasks.IsSequence() || tasks.size() == 0) {
      Fail(tasks ? tasks : en, "ecu " + ecu.name + " needs a task list");
    }
    for (const YAML::Node& tn : tasks) {
      std::string plant;
      std::optional<int> override_limit;
      TaskSpec t = ParseTask(tn, &plant, &override_limit);
      if (t.msg_id) claim(tn["id"], *t.msg_id);
      if (!plant.empty() && s.plants.count(plant) == 0) {
        Fail(tn["plant"], "unknown plant '" + plant + "'");
      }
      const int index = static_cast<int>(ecu.tasks.size());
      if (override_limit) {
        if (*override_limit < 0) Fail(tn["skip_limit"], "negative skip_limit");
        t.skip_limit = *override_limit;
        ecu.skip_limit_overrides[index] = *override_limit;
      } else if (t.is_control) {
        auto it = limit_cache.find(plant);
        if (it == limit_cache.end()) {
          try {
            const int limit =
                SkipLimit(s.plants.at(plant), s.gamma, s.max_skip_search);
            it = limit_cache.emplace(plant, limit).first;
          } catch (const UnstableBaselineError& e) {
            Fail(tn["plant"], "plant " + plant + ": " + e.what());
          }
        }
        t.skip_limit = it->second;
      }
      ecu.tasks.push_back(std::move(t));
      ecu.task_plants.push_back(plant);
    }
    if (const YAML::Node ap = en["aperiodic"]) {
      if (!ap.IsSequence()) Fail(ap, "aperiodic must be a list");
      for (const YAML::Node& a : ap) {
        CheckKeys(a, {"id", "dlc"}, "aperiodic entry");
        if (!a["id"]) Fail(a, "aperiodic entry needs an id");
        AperiodicSpec spec;
        spec.id = ParseId(a["id"], "id");
        spec.dlc = Optional<int>(a, "dlc", 8);
        if (spec.dlc < 0 || spec.dlc > 8) Fail(a, "dlc must be 0..8");
        claim(a["id"], spec.id);
        ecu.aperiodic.push_back(spec);
      }
    }
    try {
      BuildSchedule(ecu.tasks, 0, Hyperperiod(ecu.tasks), s.policy);
    } catch (const InfeasibleError& e) {
      Fail(en, "ecu " + ecu.name + ": " + e.what());
    }
    s.ecus.push_back(std::move(ecu));
  }

  if (const YAML::Node at = root["attacker"]) {
    CheckKeys(at, {"enabled", "victim", "start_cycle"}, "attacker");
    s.attacker.present = true;
    s.attacker.enabled = Optional<bool>(at, "enabled", true);
    if (!at["victim"]) Fail(at, "attacker needs a victim id");
    s.attacker.victim = ParseId(at["victim"], "victim");
    s.attacker.start_cycle = Optional<int>(at, "start_cycle", 1);
    if (s.attacker.start_cycle < 1) {
      Fail(at["start_cycle"], "start_cycle must be at least 1");
    }
    try {
      s.Locate(s.attacker.victim);
    } catch (const LookupError&) {
      Fail(at["victim"], "victim " + s.attacker.victim.ToHex() +
                             " is not sent by any periodic task");
    }
  }

  s.CanHyperperiod();
  if (s.PeriodicLoad() >= 1.0) {
    throw ScenarioError("periodic frames alone saturate the bus");
  }
  return s;
}

Scenario LoadScenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseScenario(buf.str(), path);
}

namespace {

void EmitMatrix(YAML::Emitter& out, const Eigen::MatrixXd& m) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << YAML::Flow << YAML::BeginSeq;
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << m(r, c);
    out << YAML::EndSeq;
  }
  out << YAML::EndSeq;
}

}  // namespace

std::string DescribeScenario(const Scenario& s) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "format" << YAML::Value << "hns-scenario";
  out << YAML::Key << "version" << YAML::Value << s.version;
  out << YAML::Key << "seed" << YAML::Value << s.seed;
  out << YAML::Key << "bitrate" << YAML::Value << s.bitrate;
  out << YAML::Key << "recon" << YAML::Value << s.recon;
  out << YAML::Key << "cycles" << YAML::Value << s.cycles;
  out << YAML::Key << "busload" << YAML::Value << s.busload;
  out << YAML::Key << "jitter_us" << YAML::Value << s.jitter_us;
  out << YAML::Key << "defense" << YAML::Value << ToString(s.defense);
  out << YAML::Key << "gamma" << YAML::Value << s.gamma;
  out << YAML::Key << "max_skip_search" << YAML::Value << s.max_skip_search;
  out << YAML::Key << "policy" << YAML::Value
      << (s.policy == SchedPolicy::kEdf ? "edf" : "static");
  if (s.attacker.present) {
    out << YAML::Key << "attacker" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "enabled" << YAML::Value << s.attacker.enabled;
    out << YAML::Key << "victim" << YAML::Value << s.attacker.victim.ToHex();
    out << YAML::Key << "start_cycle" << YAML::Value
        << s.attacker.start_cycle;
    out << YAML::EndMap;
  }

  out << YAML::Key << "plants" << YAML::Value << YAML::BeginMap;
  for (const auto& [name, p] : s.plants) {
    out << YAML::Key << name << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "A" << YAML::Value;
    EmitMatrix(out, p.A);
    out << YAML::Key << "B" << YAML::Value;
    EmitMatrix(out, p.B);
    out << YAML::Key << "C" << YAML::Value;
    EmitMatrix(out, p.C);
    out << YAML::Key << "K" << YAML::Value;
    EmitMatrix(out, p.K);
    out << YAML::Key << "L" << YAML::Value;
    EmitMatrix(out, p.L);
    out << YAML::EndMap;
  }
  out << YAML::EndMap;

  out << YAML::Key << "ecus" << YAML::Value << YAML::BeginSeq;
  for (const EcuConfig& e : s.ecus) {
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << e.name;
    out << YAML::Key << "defended" << YAML::Value << e.defended;
    out << YAML::Key << "tasks" << YAML::Value << YAML::BeginSeq;
    for (std::size_t i = 0; i < e.tasks.size(); ++i) {
      const TaskSpec& t = e.tasks[i];
      out << YAML::Flow << YAML::BeginMap;
      out << YAML::Key << "name" << YAML::Value << t.name;
      out << YAML::Key << "period_us" << YAML::Value << t.period;
      out << YAML::Key << "wcet_us" << YAML::Value << t.wcet;
      out << YAML::Key << "priority" << YAML::Value << t.ecu_priority;
      if (t.msg_id) out << YAML::Key << "id" << YAML::Value << t.msg_id->ToHex();
      out << YAML::Key << "dlc" << YAML::Value << t.dlc;
      out << YAML::Key << "control" << YAML::Value << t.is_control;
      if (!e.task_plants[i].empty()) {
        out << YAML::Key << "plant" << YAML::Value << e.task_plants[i];
      }
      if (t.is_control) {
        out << YAML::Key << "skip_limit" << YAML::Value << t.skip_limit;
      }
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::Key << "aperiodic" << YAML::Value << YAML::BeginSeq;
    for (const AperiodicSpec& a : e.aperiodic) {
      out << YAML::Flow << YAML::BeginMap;
      out << YAML::Key << "id" << YAML::Value << a.id.ToHex();
      out << YAML::Key << "dlc" << YAML::Value << a.dlc;
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace hns
