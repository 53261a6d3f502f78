#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hns/can_bus.h"
#include "hns/control_skip.h"
#include "hns/ecu_scheduler.h"

namespace hns {

enum class DefenseMode { kOff, kHns, kRandomize };

const char* ToString(DefenseMode mode);
// Throws ScenarioError for anything but off / hns / randomize.
DefenseMode ParseDefenseMode(const std::string& text);

struct AperiodicSpec {
  MessageId id;
  int dlc = 8;
};

struct EcuConfig {
  std::string name;
  std::vector<TaskSpec> tasks;
  // Plant name per task; empty for tasks without a control loop.
  std::vector<std::string> task_plants;
  // Explicit skip limits from the file, by task index.
  std::map<int, int> skip_limit_overrides;
  std::vector<AperiodicSpec> aperiodic;
  bool defended = false;
};

struct AttackerConfig {
  bool present = false;  // section given; victim names the analyzed id
  bool enabled = false;
  MessageId victim;
  int start_cycle = 1;
};

struct Scenario {
  int version = 1;
  std::uint64_t seed = 0;
  int bitrate = 250000;
  int recon = 3;
  int cycles = 4;
  double busload = 0.25;
  Micros jitter_us = 0;
  DefenseMode defense = DefenseMode::kOff;
  double gamma = 0.95;
  int max_skip_search = 6;
  SchedPolicy policy = SchedPolicy::kEdf;
  AttackerConfig attacker;
  std::map<std::string, PlantModel> plants;
  std::vector<EcuConfig> ecus;
  std::string source;  // file name or "<string>"

  // CAN hyper-period: least common multiple of every transmitting task.
  Micros CanHyperperiod() const;
  // Reconnaissance period length, recon * CanHyperperiod().
  Micros PeriodLength() const;
  // Fraction of bus time used by periodic frames.
  double PeriodicLoad() const;
  // ECU index and task index of a message id; throws LookupError.
  std::pair<int, int> Locate(MessageId id) const;
};

// Parses and validates a scenario document. Defaults are applied and skip
// limits are computed from the plants (unless overridden). Throws
// ScenarioError with the offending line where one is known.
Scenario ParseScenario(const std::string& text,
                       const std::string& source = "<string>");
Scenario LoadScenario(const std::string& path);

// Fully resolved scenario as a document in the input format, skip limits
// included. Parsing the result gives back the same scenario.
std::string DescribeScenario(const Scenario& scenario);

}  // namespace hns
