// hns: scenario runner for the CAN schedule obfuscation simulator.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hns/error.h"
#include "hns/experiment.h"
#include "hns/report.h"
#include "hns/scenario.h"

namespace {

constexpr int kOk = 0;
constexpr int kScenarioError = 1;
constexpr int kRuntimeError = 2;
constexpr int kCheckFailed = 3;

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string Fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void PrintLine(const std::string& label, const hns::Report& r) {
  std::cout << label << ": asp=" << Fmt(r.TotalAsp())
            << " conditional=" << Fmt(r.TotalConditional())
            << " randomized=" << Fmt(r.TotalRandomized())
            << " alarms=" << r.AlarmCount()
            << " bus_off=" << (r.victim_bus_off ? "yes" : "no")
            << " load=" << Fmt(r.measured_load) << '\n';
}

hns::Scenario Load(const std::string& path, std::optional<std::uint64_t> seed) {
  hns::Scenario s = hns::LoadScenario(path);
  if (seed) s.seed = *seed;
  return s;
}

// ASP the defense itself leaves behind.
double DefendedAsp(const hns::Report& r) {
  switch (r.scenario.defense) {
    case hns::DefenseMode::kHns:
      return r.TotalConditional();
    case hns::DefenseMode::kRandomize:
      return r.TotalRandomized();
    case hns::DefenseMode::kOff:
      break;
  }
  return r.TotalAsp();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CAN bus-off attack and schedule obfuscation simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", hns::Version());

  std::string scenario_path;
  std::string out_dir = "hns_out";
  std::optional<std::uint64_t> seed;
  std::string busloads = "0.25,0.55,0.75";
  std::string modes = "off,hns,randomize";
  bool check = false;

  auto* run = app.add_subcommand("run", "Run one scenario and write reports");
  run->add_option("scenario", scenario_path, "Scenario file")->required();
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--seed", seed, "Override the scenario seed");

  auto* sweep = app.add_subcommand("sweep", "Run a scenario at several busloads");
  sweep->add_option("scenario", scenario_path, "Scenario file")->required();
  sweep->add_option("--busload", busloads, "Comma-separated busload fractions");
  sweep->add_option("--out", out_dir, "Output directory");
  sweep->add_option("--seed", seed, "Override the scenario seed");
  sweep->add_flag("--check", check,
                  "Exit 3 unless hns beats randomization at every busload");

  auto* compare = app.add_subcommand("compare", "Run a scenario under several defenses");
  compare->add_option("scenario", scenario_path, "Scenario file")->required();
  compare->add_option("--modes", modes, "Comma-separated defense modes");
  compare->add_option("--out", out_dir, "Output directory");
  compare->add_option("--seed", seed, "Override the scenario seed");
  compare->add_flag("--check", check,
                    "Exit 3 unless hns ASP <= randomization ASP");

  auto* validate = app.add_subcommand("validate", "Check a scenario and print it resolved");
  validate->add_option("scenario", scenario_path, "Scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kScenarioError;
  }

  try {
    if (*validate) {
      const hns::Scenario s = hns::LoadScenario(scenario_path);
      std::cout << hns::DescribeScenario(s);
      std::cout << "# can hyper-period: " << s.CanHyperperiod() << " us\n"
                << "# periodic load: " << Fmt(s.PeriodicLoad()) << '\n';
      return kOk;
    }
    if (*run) {
      const hns::Report r = hns::RunExperiment(Load(scenario_path, seed));
      hns::EmitReport(r, out_dir);
      PrintLine(hns::ToString(r.scenario.defense), r);
      return kOk;
    }
    if (*sweep) {
      std::vector<double> loads;
      for (const std::string& b : SplitList(busloads)) {
        try {
          loads.push_back(std::stod(b));
        } catch (const std::exception&) {
          throw hns::ScenarioError("bad busload '" + b + "'");
        }
      }
      const hns::Scenario base = Load(scenario_path, seed);
      bool ok = true;
      for (double b : loads) {
        std::vector<hns::DefenseMode> ms{base.defense};
        if (check) ms = {hns::DefenseMode::kHns, hns::DefenseMode::kRandomize};
        hns::Scenario s = base;
        s.busload = b;
        const std::vector<hns::Report> reports = hns::Compare(s, ms);
        for (const hns::Report& r : reports) {
          const std::string label =
              "busload_" + Fmt(b).substr(0, 4) + "/" + hns::ToString(r.scenario.defense);
          hns::EmitReport(r, std::string(out_dir) + "/" + label);
          PrintLine(label, r);
        }
        if (check && DefendedAsp(reports[0]) > DefendedAsp(reports[1])) {
          std::cerr << "check failed at busload " << b << '\n';
          ok = false;
        }
      }
      return ok ? kOk : kCheckFailed;
    }
    if (*compare) {
      std::vector<hns::DefenseMode> ms;
      for (const std::string& m : SplitList(modes)) {
        ms.push_back(hns::ParseDefenseMode(m));
      }
      const std::vector<hns::Report> reports =
          hns::Compare(Load(scenario_path, seed), ms);
      std::optional<double> hns_asp;
      std::optional<double> rnd_asp;
      for (const hns::Report& r : reports) {
        const std::string label = hns::ToString(r.scenario.defense);
        hns::EmitReport(r, std::string(out_dir) + "/" + label);
        PrintLine(label, r);
        if (r.scenario.defense == hns::DefenseMode::kHns) hns_asp = DefendedAsp(r);
        if (r.scenario.defense == hns::DefenseMode::kRandomize) {
          rnd_asp = DefendedAsp(r);
        }
      }
      if (check) {
        if (!hns_asp || !rnd_asp) {
          throw hns::ScenarioError("--check needs both hns and randomize modes");
        }
        if (*hns_asp > *rnd_asp) {
          std::cerr << "check failed: hns " << *hns_asp << " > randomize "
                    << *rnd_asp << '\n';
          return kCheckFailed;
        }
      }
      return kOk;
    }
  } catch (const hns::ScenarioError& e) {
    std::cerr << scenario_path << ": " << e.what() << '\n';
    return kScenarioError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}
