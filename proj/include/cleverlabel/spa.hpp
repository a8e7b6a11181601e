#pragma once
// Simulated proposal acceptance and the alternative annotator strategies it
// is compared against.
//
// An annotator shown proposal rho accepts it with probability
//     A = delta + (upper_bound - delta) * gt[rho]
// and otherwise picks one of the remaining classes in proportion to gt.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "cleverlabel/core.hpp"
#include "cleverlabel/rng.hpp"

namespace cleverlabel {

enum class Strategy {
    AcceptGt,         // ACCEPT+GT, the reference model
    AcceptLikely,     // ACCEPT+LIKELY
    TwoAcceptGt,      // 2*ACCEPT+GT
    TwoAcceptRandom,  // 2*ACCEPT+RANDOM
    Random,
    Gt,
    Likely,
};

inline constexpr std::array<Strategy, 7> kAllStrategies = {
    Strategy::AcceptGt, Strategy::AcceptLikely, Strategy::TwoAcceptGt, Strategy::TwoAcceptRandom,
    Strategy::Random,   Strategy::Gt,           Strategy::Likely,
};

std::string_view to_string(Strategy s);
// Accepts the canonical names (ACCEPT_GT, TWO_ACCEPT_RANDOM, ...) as well as
// the "+"/"2*" spellings (ACCEPT+GT, 2*ACCEPT+RANDOM), case-insensitively.
Strategy parse_strategy(std::string_view name);

// What to return when a proposal carrying all of the ground-truth mass is
// rejected and no other class has positive probability.
enum class RejectFallback {
    FirstClass,   // lowest non-proposal index, as the reference listing does
    RandomClass,  // uniform over non-proposal classes
};

std::string_view to_string(RejectFallback f);
RejectFallback parse_reject_fallback(std::string_view name);

struct SimulationParams {
    double delta = 0.1;
    double upper_bound = 0.99;
    std::uint64_t repetitions = 1;
    RejectFallback reject_fallback = RejectFallback::FirstClass;

    void validate() const;
};

double acceptance_probability(double gt_of_proposal, double delta, double upper_bound) noexcept;
double acceptance_probability(const LabelDistribution& gt, ClassIndex proposal, const SimulationParams& p);

// The reject branch: samples k != proposal with probability
// gt[k] / (1 - gt[proposal]). Exposed so the branch can be exercised directly.
ClassIndex sample_rejected_class(const LabelDistribution& gt, ClassIndex proposal,
                                 RejectFallback fallback, Rng& rng);

ClassIndex simulate_annotation(const LabelDistribution& gt, ClassIndex proposal,
                               const SimulationParams& p, Rng& rng);

// p.repetitions independent simulate_annotation draws.
AnnotationSet simulate_annotation_set(const LabelDistribution& gt, ClassIndex proposal,
                                      const SimulationParams& p, Rng& rng);

ClassIndex simulate_with_strategy(Strategy strategy, const LabelDistribution& gt, ClassIndex proposal,
                                  const SimulationParams& p, Rng& rng);

AnnotationSet simulate_strategy_set(Strategy strategy, const LabelDistribution& gt, ClassIndex proposal,
                                    const SimulationParams& p, Rng& rng);

}  // namespace cleverlabel
