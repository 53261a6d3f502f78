#include "hns/trace_io.h"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hns/error.h"

namespace hns {

namespace {

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) {
      cell.pop_back();
    }
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

ErrorMode ParseMode(const std::string& s, int line) {
  if (s == "ErrorActive") return ErrorMode::kErrorActive;
  if (s == "ErrorPassive") return ErrorMode::kErrorPassive;
  if (s == "BusOff") return ErrorMode::kBusOff;
  throw ScenarioError("unknown node mode '" + s + "'", line);
}

}  // namespace

void WriteTraceCsv(const BusTrace& trace, std::ostream& out) {
  out << "time_us,kind,id_hex,dlc,source,tec_after,mode_after\n";
  for (const BusEvent& e : trace.events) {
    if (e.kind == EventKind::kIdle) {
      out << e.time << ",Idle,,,,,\n";
      continue;
    }
    out << e.time << ',';
    if (e.kind == EventKind::kTxError) {
      out << (e.passive_flag ? "TxError(passive)" : "TxError(active)");
    } else {
      out << ToString(e.kind);
    }
    out << ',' << e.frame.id.ToHex() << ',' << e.frame.dlc() << ','
        << e.source << ',' << e.tec_after << ',' << ToString(e.mode_after)
        << '\n';
  }
}

BusTrace ReadTraceCsv(std::istream& in, int bitrate) {
  BusTrace trace;
  trace.bitrate = bitrate;
  std::string line;
  int line_no = 0;
  Micros last_end = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("time_us", 0) == 0) continue;
    }
    const std::vector<std::string> c = SplitCsv(line);
    if (c.size() < 7) {
      throw ScenarioError("trace row needs 7 columns", line_no);
    }
    if (c[1] == "Idle") continue;
    BusEvent e;
    try {
      e.time = std::stoll(c[0]);
      e.frame.id = MessageId::Parse(c[2]);
      e.frame.payload.assign(std::stoi(c[3]), 0);
      e.source = std::stoi(c[4]);
      e.frame.source = e.source;
      e.tec_after = std::stoi(c[5]);
    } catch (const ScenarioError&) {
      throw;
    } catch (const std::exception& ex) {
      throw ScenarioError(std::string("bad trace row: ") + ex.what(), line_no);
    }
    e.mode_after = ParseMode(c[6], line_no);
    if (c[1] == "TxSuccess") {
      e.kind = EventKind::kTxSuccess;
    } else if (c[1] == "TxError(active)" || c[1] == "TxError") {
      e.kind = EventKind::kTxError;
    } else if (c[1] == "TxError(passive)") {
      e.kind = EventKind::kTxError;
      e.passive_flag = true;
    } else if (c[1] == "ArbitrationLoss") {
      e.kind = EventKind::kArbitrationLoss;
    } else {
      throw ScenarioError("unknown event kind '" + c[1] + "'", line_no);
    }
    if (!trace.events.empty() && e.time < trace.events.back().time) {
      throw ScenarioError("trace rows out of time order", line_no);
    }
    if (e.kind == EventKind::kArbitrationLoss) {
      e.end = e.time;
    } else {
      e.end = e.time + FrameDuration(e.frame, bitrate);
      if (e.time > last_end) {
        BusEvent idle;
        idle.time = last_end;
        idle.end = e.time;
        idle.kind = EventKind::kIdle;
        trace.events.push_back(idle);
      }
      last_end = std::max(last_end, e.end);
    }
    trace.events.push_back(std::move(e));
  }
  trace.horizon = last_end;
  return trace;
}

}  // namespace hns
