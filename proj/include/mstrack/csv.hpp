#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "mstrack/simulator.hpp"

namespace mstrack {

/// Episode trace: one row per (t, target), sensor columns repeated on each row.
std::vector<std::string> episode_columns(int d, int sensors);
void write_episode_csv(std::ostream& out, const RunResult& run);

std::vector<std::string> summary_columns();
void write_summary_csv(std::ostream& out, const McSummary& summary);

/// 17 significant digits, enough for doubles to round-trip.
std::string format_number(double value);

}  // namespace mstrack
