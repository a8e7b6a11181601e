#pragma once
// Report files written into an output directory:
//
//   manifest.json            tool version, seed, full config, timestamp
//   results.csv              one row per image x annotation count     (kl)
//   summary.csv              median and mean per annotation count     (kl)
//   kl_vs_annotations.csv    long format for plotting                 (kl)
//   kl_vs_budget.csv         aggregated KL per budget and speedup     (budget)
//
// Only the manifest carries a timestamp; the tables are a pure function of
// (dataset, config, seed).

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cleverlabel/experiment.hpp"

namespace cleverlabel {

std::string_view tool_version() noexcept;

std::string format_results_table(const Report& report);
std::string format_summary_table(const Report& report);
std::string format_kl_vs_annotations(const Report& report);
std::string format_kl_vs_budget(const Report& report);
std::string format_manifest(const Report& report, const std::vector<std::string>& files,
                            const std::string& timestamp);

// Returns the written paths, manifest last. `timestamp` defaults to now (UTC).
std::vector<std::filesystem::path> emit_report(const Report& report, const std::filesystem::path& dir,
                                               const std::optional<std::string>& timestamp = std::nullopt);

}  // namespace cleverlabel
