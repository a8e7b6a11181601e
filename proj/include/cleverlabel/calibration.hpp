#pragma once
// Estimation of the acceptance offset delta from proposal-guided annotations.
//
// Inverting A = delta + (0.99 - delta) * p for delta gives
//     delta = (A - 0.99 * p) / (1 - p).

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cleverlabel/aggregate.hpp"
#include "cleverlabel/core.hpp"

namespace cleverlabel {

struct AcceptanceRecord {
    std::string image_id;
    ClassIndex proposal = 0;
    ClassIndex annotated = 0;
    LabelDistribution gt;
};

// The same image annotated once with proposal_a and once with proposal_b.
struct TwoProposalRecord {
    std::string image_id;
    ClassIndex proposal_a = 0;
    ClassIndex proposal_b = 0;
    AnnotationSet annotations_a;
    AnnotationSet annotations_b;
};

inline constexpr double kCalibrationUpperBound = 0.99;

// Unclamped. Throws when p_gt == 1 (zero denominator).
double delta_from_acceptance(double acceptance, double p_gt, double upper_bound = kCalibrationUpperBound);

struct BandedOptions {
    double band_low = 0.2;   // exclusive
    double band_high = 0.4;  // inclusive
    std::size_t n_target = 20;  // 0 = use every in-band image
    double rescale = 1.3;
    // The rescale compensates an underestimation seen when the study
    // annotator knew the ground truth; it is only applied when set.
    bool author_annotated = false;
    Aggregation aggregation = Aggregation::Mean;
    double upper_bound = kCalibrationUpperBound;
};

struct BandedEstimate {
    double delta = 0.0;
    double raw_delta = 0.0;  // aggregated before clamping and rescale
    std::size_t images_used = 0;
    std::size_t records_used = 0;
    std::size_t records_in_band = 0;
    std::size_t records_total = 0;
};

// Records are grouped by (image_id, proposal); each in-band group gives one
// per-image delta from its acceptance fraction. Throws
// InsufficientDataError when no record lies in the band.
BandedEstimate estimate_delta_banded(const std::vector<AcceptanceRecord>& records, const BandedOptions& opts = {});

struct TwoProposalOptions {
    double threshold = 0.8;  // candidates >= threshold are discarded
    double upper_bound = kCalibrationUpperBound;
};

struct DeltaCandidate {
    std::string image_id;
    double value = 0.0;
    enum class Source { AllAccepted, NoneAccepted, Closed } source = Source::Closed;
};

// One candidate per record, or nothing if the closed form is not finite.
std::optional<DeltaCandidate> two_proposal_candidate(const TwoProposalRecord& record,
                                                     double upper_bound = kCalibrationUpperBound);

struct TwoProposalEstimate {
    double delta = 0.0;
    std::size_t records = 0;
    std::size_t candidates = 0;      // finite candidates
    std::size_t survivors = 0;       // below threshold
    std::size_t corner_cases = 0;
    std::vector<DeltaCandidate> kept;
};

// Median of the candidates below the threshold. Throws
// InsufficientDataError("estimator degenerate") when none survive.
TwoProposalEstimate estimate_delta_two_proposals(const std::vector<TwoProposalRecord>& records,
                                                 const TwoProposalOptions& opts = {});

}  // namespace cleverlabel
