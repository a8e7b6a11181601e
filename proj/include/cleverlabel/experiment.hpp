#pragma once
// Seeded experiment orchestration.
//
// Every stochastic step draws from substream(seed, image_id, index), so a
// run is fully determined by (dataset, config, seed) and does not depend on
// how images are spread over worker threads.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cleverlabel/calibration.hpp"
#include "cleverlabel/correction.hpp"
#include "cleverlabel/io.hpp"
#include "cleverlabel/metrics.hpp"
#include "cleverlabel/spa.hpp"

namespace cleverlabel {

enum class CalibrationMethod { Banded, TwoProposal };

std::string_view to_string(CalibrationMethod m);
CalibrationMethod parse_calibration_method(std::string_view name);

struct ExperimentConfig {
    std::optional<std::uint64_t> seed;
    std::filesystem::path dataset;
    std::optional<std::string> proposal_column;

    Strategy strategy = Strategy::AcceptGt;
    SimulationParams simulation;  // `repetitions` is taken from annotation_counts
    std::vector<std::uint64_t> annotation_counts = {5, 10, 20, 50};

    CorrectionParams correction;
    CleverLabelOptions clever;

    // Transition matrix file; estimated from the dataset ground truth if unset.
    std::optional<std::filesystem::path> transitions;
    std::size_t transition_images = 100;
    std::size_t transition_annotations = 10;

    std::vector<std::string> metrics = {"kl", "budget"};
    std::vector<double> speedups = {1.0, 2.5, 10.0};
    double initial_supervision = 1.0;
    double pct_annotated = 1.0;
    Aggregation aggregation = Aggregation::Median;

    std::vector<Strategy> comparison_strategies = {kAllStrategies.begin(), kAllStrategies.end()};
    std::size_t comparison_repetitions = 3;

    BandedOptions banded;
    TwoProposalOptions two_proposal;

    std::size_t threads = 1;
    std::filesystem::path output = "cleverlabel-out";

    bool wants_metric(std::string_view name) const;
    // Parameter invariants; with `check_files`, also that referenced files exist.
    void validate(bool check_files = true) const;
    std::uint64_t require_seed() const;
};

// Accepts a config document or a run manifest (its "config" member).
// Relative paths resolve against `base_dir`. Unknown keys, strategies or
// metrics are errors.
ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& cfg);

// "cleverlabel": the configured correction; "biased": normalized raw counts.
inline constexpr std::string_view kMethodBiased = "biased";
inline constexpr std::string_view kMethodCorrected = "cleverlabel";

struct ImageResult {
    std::string image_id;
    std::uint64_t annotations = 0;
    ClassIndex proposal = 0;
    bool proposal_from_column = false;
    double kl_biased = 0.0;
    double kl_corrected = 0.0;
};

struct AggregateRow {
    std::uint64_t annotations = 0;
    std::string method;
    std::size_t images = 0;
    double median = 0.0;
    double mean = 0.0;
};

struct BudgetRow {
    std::string method;
    std::uint64_t annotations = 0;
    double speedup = 1.0;
    double budget = 0.0;
    double kl = 0.0;  // aggregated per config.aggregation
};

struct Report {
    ExperimentConfig config;
    std::string dataset_name;
    std::vector<std::string> class_names;
    std::size_t num_images = 0;
    std::string transition_source;
    std::vector<ImageResult> results;  // annotation-count major, dataset order within
    std::vector<AggregateRow> aggregates;
    std::vector<BudgetRow> budget;
};

// Resolves the blending matrix: the config file if given, otherwise an
// estimate from the dataset ground truth on substream (seed, "transition-matrix").
std::pair<TransitionMatrix, std::string> resolve_transitions(const ExperimentConfig& cfg, const Dataset& ds);

Report run_simulation_experiment(const ExperimentConfig& cfg);
Report run_simulation_experiment(const ExperimentConfig& cfg, const Dataset& ds);

// N' = p.repetitions simulated annotations per image as an acceptance log.
// Proposals come from the dataset column, falling back to the ground-truth argmax.
std::vector<LogEntry> simulate_log(const Dataset& ds, Strategy strategy, const SimulationParams& p,
                                   std::uint64_t seed);

// Repairs a biased acceptance log, one label per image in first-seen order.
// Each image must carry a single proposal.
std::vector<std::pair<std::string, LabelDistribution>> correct_log(std::size_t num_classes,
                                                                   const std::vector<LogEntry>& log,
                                                                   const TransitionMatrix* transitions,
                                                                   const CorrectionParams& p,
                                                                   const CleverLabelOptions& options);

struct StrategyRow {
    Strategy strategy = Strategy::AcceptGt;
    SodSummary sod;
};

struct StrategyComparison {
    std::size_t records = 0;
    std::size_t repetitions = 0;
    std::vector<StrategyRow> rows;  // ranked by mean normalized SOD, ascending
};

StrategyComparison run_strategy_comparison(const ExperimentConfig& cfg, const Dataset& ds,
                                           const std::vector<LogEntry>& log);
StrategyComparison run_strategy_comparison(const ExperimentConfig& cfg, const std::filesystem::path& log_path);
std::string format_strategy_table(const StrategyComparison& table);

struct CalibrationReport {
    CalibrationMethod method = CalibrationMethod::Banded;
    double delta = 0.0;
    std::size_t log_entries = 0;
    std::optional<BandedEstimate> banded;
    std::optional<TwoProposalEstimate> two_proposal;
};

CalibrationReport run_calibration(const ExperimentConfig& cfg, const Dataset& ds, const std::vector<LogEntry>& log,
                                  CalibrationMethod method);
CalibrationReport run_calibration(const ExperimentConfig& cfg, const std::filesystem::path& log_path,
                                  CalibrationMethod method);
std::string format_calibration_report(const CalibrationReport& report);

}  // namespace cleverlabel
