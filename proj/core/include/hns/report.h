#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hns/experiment.h"

namespace hns {

// Column layouts, stable across versions of the artifact.
void WriteAspCsv(const Report& report, std::ostream& out);
void WriteAlarmsCsv(const Report& report, std::ostream& out);
void WriteTecCsv(const Report& report, std::ostream& out);
void WritePlanCsv(const Report& report, std::ostream& out);
void WriteSummaryCsv(const Report& report, std::ostream& out);
void WriteAttackCsv(const Report& report, std::ostream& out);
void WriteScheduleCsv(const Report& report, std::ostream& out);
// Resolved scenario, seed, version and headline numbers.
void WriteManifest(const Report& report, std::ostream& out);

// Writes asp.csv, alarms.csv, tec.csv, plan.csv, summary.csv, attack.csv,
// schedule.csv, trace.csv and manifest.yaml into `dir`, creating it if
// needed. Returns the paths written. I/O failures throw std::runtime_error
// carrying the system message.
std::vector<std::filesystem::path> EmitReport(const Report& report,
                                              const std::filesystem::path& dir);

// Library version string.
const char* Version();

}  // namespace hns
