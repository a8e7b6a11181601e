#pragma once
// File formats.
//
//   dataset.json          metadata: class names, delta, upper_bound, mu and
//                         relative paths of the tables below
//   gt csv                image_id,p_0,...,p_{K-1}[,<proposal column>]
//   annotations csv       image_id,annotator_idx,class
//   acceptance log csv    image_id,proposal_class,annotated_class
//   transition json       class names, rows, optional recorded metadata
//
// Tables are UTF-8, comma separated, with a header line. Classes in tables
// may be given by name or by 0-based index. Writers emit a canonical form,
// so saving a canonical file reproduces it byte for byte.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cleverlabel/calibration.hpp"
#include "cleverlabel/core.hpp"

namespace cleverlabel {

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

// Reads a whole file; throws Error when it cannot be opened.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

struct ImageRecord {
    std::string image_id;
    LabelDistribution gt;
    bool gt_from_file = true;  // false: averaged from `annotations`
    std::optional<AnnotationSet> annotations;
    std::optional<ClassIndex> proposal;
};

struct LogEntry {
    std::string image_id;
    ClassIndex proposal = 0;
    ClassIndex annotated = 0;

    friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

struct Dataset {
    std::string name;
    DatasetMeta meta;
    std::vector<ImageRecord> images;
    std::vector<LogEntry> acceptance_log;
    std::string proposal_column = "proposal";

    const ImageRecord* find(std::string_view image_id) const;
    std::vector<LabelDistribution> ground_truths() const;
};

// `proposal_column` overrides the column named in the dataset file.
Dataset load_dataset(const std::filesystem::path& path,
                     const std::optional<std::string>& proposal_column = std::nullopt);

// Writes dataset.json at `path` and its tables beside it (gt.csv,
// annotations.csv, acceptance.csv, skipping empty ones).
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

// Class token: a class name, or else a 0-based index.
ClassIndex parse_class(const DatasetMeta& meta, std::string_view token);

std::vector<LogEntry> load_acceptance_log(const std::filesystem::path& path, const DatasetMeta& meta);
std::vector<LogEntry> parse_acceptance_log(std::string_view text, const DatasetMeta& meta,
                                           std::string_view source = "<log>");
std::string format_acceptance_log(const std::vector<LogEntry>& entries, const DatasetMeta& meta);
void save_acceptance_log(const std::vector<LogEntry>& entries, const DatasetMeta& meta,
                         const std::filesystem::path& path);

// Joins log entries with the dataset ground truth. Throws if an image is unknown.
std::vector<AcceptanceRecord> to_acceptance_records(const Dataset& dataset, const std::vector<LogEntry>& log);

// Groups the log per image; images shown exactly two distinct proposals
// become records (first-seen proposal is proposal_a). Others are skipped.
std::vector<TwoProposalRecord> to_two_proposal_records(std::size_t num_classes, const std::vector<LogEntry>& log);

// Writes corrected or simulated labels in the gt table format.
std::string format_gt_table(const std::vector<std::pair<std::string, LabelDistribution>>& rows,
                            std::size_t num_classes);

struct TransitionMatrixDocument {
    std::string name;
    std::vector<std::string> class_names;
    // Values as stored; published matrices are rounded to three decimals.
    std::vector<std::vector<double>> rows;
    std::optional<double> blend_only_kl;  // recorded metadata, not used

    // Rows renormalized; each raw row must sum to 1 within `tolerance`.
    TransitionMatrix matrix(double tolerance = kPublishedRowTolerance) const;

    static TransitionMatrixDocument from_matrix(const TransitionMatrix& m, std::vector<std::string> class_names,
                                                std::string name = {});

    friend bool operator==(const TransitionMatrixDocument&, const TransitionMatrixDocument&) = default;

    static constexpr double kPublishedRowTolerance = 0.01;
};

TransitionMatrixDocument parse_transition_matrix(std::string_view text, std::string_view source = "<matrix>");
TransitionMatrixDocument load_transition_matrix(const std::filesystem::path& path);
std::string format_transition_matrix(const TransitionMatrixDocument& doc);
void save_transition_matrix(const TransitionMatrixDocument& doc, const std::filesystem::path& path);

}  // namespace cleverlabel
