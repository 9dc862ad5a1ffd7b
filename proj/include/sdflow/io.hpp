#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdflow/monitors.hpp"
#include "sdflow/solver.hpp"

namespace sdflow {

/// `step,t,area,...,smallness_ok,eta_r1,...,eta_rk`.
std::string csv_header(std::size_t eta_count);

/// One CSV line (no newline); doubles with 17 significant digits, flags as 0/1.
std::string csv_row(const DiagnosticsRecord& record);

void write_csv(std::ostream& out, std::span<const DiagnosticsRecord> records, std::size_t eta_count);

/// Parses a diagnostics table. Eta samples get the given radii when their
/// count matches, radius 0 otherwise. Throws FormatError.
std::vector<DiagnosticsRecord> parse_csv(std::string_view text, std::span<const double> radii = {});
std::vector<DiagnosticsRecord> read_csv_file(const std::string& path, std::span<const double> radii = {});

/// "step_%08d.off"
std::string snapshot_name(long step);

/// Snapshots found in a run directory, ordered by step. Times are taken from
/// the matching records; a snapshot without a record is an error.
std::vector<Snapshot> load_snapshots(const std::string& directory, std::span<const DiagnosticsRecord> records);

std::string read_text_file(const std::string& path);

} // namespace sdflow
