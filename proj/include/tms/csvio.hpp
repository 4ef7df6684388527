#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tms/macro.hpp"
#include "tms/micro.hpp"
#include "tms/resolved.hpp"
#include "tms/study.hpp"

namespace tms {

// Shortest representation that round-trips the exact double value.
std::string format_double(double x);

// RFC-4180-style quoting: fields containing comma, quote or newline are
// wrapped in quotes with embedded quotes doubled.
std::string csv_quote(std::string_view field);

// FNV-1a, used to fingerprint resolved configurations in metadata files.
std::uint64_t fnv1a(std::string_view data);

// CSV bodies. Leading '#' lines carry header metadata; data rows are
// deterministic for identical inputs (timestamps never appear here).
std::string micro_solution_csv(const MicroSolution& sol);
std::string macro_trajectory_csv(const MacroTrajectory& traj);
std::string resolved_trajectory_csv(const ResolvedTrajectory& traj);
std::string sweep_csv(const SweepResult& result);
std::string tolp_csv(const std::vector<TolpRow>& rows);

std::string fit_report(const FitResult& fit);
std::string summary_kv(const std::map<std::string, std::string>& entries);

// Parse a sweep CSV (as written by sweep_csv) back into fit samples.
std::vector<FitSample> read_sweep_samples(const std::filesystem::path& file);

void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace tms
