#pragma once

#include <iosfwd>

#include "hns/can_bus.h"

namespace hns {

// Bus trace CSV: time_us,kind,id_hex,dlc,source,tec_after,mode_after.
// Idle rows carry empty id/dlc/source columns.
void WriteTraceCsv(const BusTrace& trace, std::ostream& out);

// Reads the format written by WriteTraceCsv. Payload bytes are not part of
// the format and come back zero-filled. Frame end times are recomputed from
// `bitrate`, and idle gaps are rebuilt from the timing, so hand-written
// traces may omit Idle rows.
BusTrace ReadTraceCsv(std::istream& in, int bitrate);

}  // namespace hns
