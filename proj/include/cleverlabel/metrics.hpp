#pragma once
// Label-quality and annotation-cost metrics.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "cleverlabel/aggregate.hpp"
#include "cleverlabel/calibration.hpp"
#include "cleverlabel/core.hpp"
#include "cleverlabel/rng.hpp"
#include "cleverlabel/spa.hpp"

namespace cleverlabel {

inline constexpr double kKlEpsilon = 1e-8;

// KL(gt || est). est is floored at epsilon and renormalized when the floor
// raised any entry; terms with gt[k] == 0 contribute nothing.
double kl_divergence(const LabelDistribution& gt, const LabelDistribution& est, double epsilon = kKlEpsilon);

inline constexpr std::size_t kNumBins = 6;

// Bins: {0}, (0,0.2], (0.2,0.4], (0.4,0.6], (0.6,0.8], (0.8,1].
std::size_t bin_index(double p);

class BinMatrix {
public:
    using Cells = std::array<std::array<std::uint64_t, kNumBins>, kNumBins>;

    void add(std::size_t proposed_bin, std::size_t annotated_bin, std::uint64_t n = 1);
    std::uint64_t at(std::size_t proposed_bin, std::size_t annotated_bin) const;
    std::uint64_t total() const noexcept { return total_; }
    const Cells& cells() const noexcept { return cells_; }

    // Each non-empty row divided by its sum; empty rows stay zero.
    std::array<std::array<double, kNumBins>, kNumBins> row_normalized() const;

    friend bool operator==(const BinMatrix&, const BinMatrix&) = default;

private:
    Cells cells_{};
    std::uint64_t total_ = 0;
};

// Row: bin of gt[proposal]; column: bin of gt[annotated]. Throws on empty input.
BinMatrix build_bin_matrix(const std::vector<AcceptanceRecord>& records);

// Half the summed absolute cell differences: the number of differently
// binned images. With `normalized`, divided by the total of `real`.
double sod(const BinMatrix& real, const BinMatrix& simulated, bool normalized = false);

struct BudgetParams {
    double initial_supervision = 1.0;
    double pct_annotated = 1.0;
    double annotations_per_image = 1.0;
    double speedup = 1.0;

    void validate() const;
};

// initial_supervision + pct_annotated * annotations_per_image / speedup
double budget(const BudgetParams& p);

struct SodSummary {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation over repetitions
    std::vector<double> values;
};

// Produces the annotated class for record `index` of a repetition.
using AnnotationSimulator =
    std::function<ClassIndex(const AcceptanceRecord& record, std::size_t index, Rng& rng)>;

// One simulated annotation per real record (so both matrices have equal
// totals), normalized SOD against the real matrix, repeated with distinct
// substreams keyed by (seed, image_id, repetition, occurrence).
SodSummary compare_simulator(const std::vector<AcceptanceRecord>& real, const AnnotationSimulator& simulate,
                             std::size_t repetitions, std::uint64_t seed);

SodSummary compare_strategies(const std::vector<AcceptanceRecord>& real, Strategy strategy,
                              const SimulationParams& p, std::size_t repetitions, std::uint64_t seed);

}  // namespace cleverlabel
