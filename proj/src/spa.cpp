#include "cleverlabel/spa.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace cleverlabel {

namespace {

std::string canonical_name(std::string_view name) {
    std::string out;
    out.reserve(name.size() + 4);
    for (std::size_t i = 0; i < name.size(); ++i) {
        const char c = name[i];
        if (c == '2' && i + 1 < name.size() && name[i + 1] == '*') {
            out += "TWO_";
            ++i;
        } else if (c == '+' || c == '-' || c == ' ' || c == '_') {
            if (!out.empty() && out.back() != '_') {
                out += '_';
            }
        } else {
            out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        }
    }
    return out;
}

void check_proposal(const LabelDistribution& gt, ClassIndex proposal) {
    if (proposal >= gt.size()) {
        throw Error("proposal class index out of range");
    }
}

ClassIndex uniform_other_class(std::size_t num_classes, ClassIndex excluded, Rng& rng) {
    ClassIndex k = rng.uniform_index(num_classes - 1);
    return k >= excluded ? k + 1 : k;
}

ClassIndex argmax_excluding(const LabelDistribution& gt, ClassIndex excluded) {
    ClassIndex best = excluded == 0 ? 1 : 0;
    for (ClassIndex k = best + 1; k < gt.size(); ++k) {
        if (k != excluded && gt[k] > gt[best]) {
            best = k;
        }
    }
    return best;
}

bool offset_accept(const LabelDistribution& gt, ClassIndex cls, const SimulationParams& p, Rng& rng) {
    return rng.uniform() <= acceptance_probability(gt[cls], p.delta, p.upper_bound);
}

}  // namespace

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::AcceptGt: return "ACCEPT_GT";
        case Strategy::AcceptLikely: return "ACCEPT_LIKELY";
        case Strategy::TwoAcceptGt: return "TWO_ACCEPT_GT";
        case Strategy::TwoAcceptRandom: return "TWO_ACCEPT_RANDOM";
        case Strategy::Random: return "RANDOM";
        case Strategy::Gt: return "GT";
        case Strategy::Likely: return "LIKELY";
    }
    throw Error("unknown strategy tag");
}

Strategy parse_strategy(std::string_view name) {
    const std::string key = canonical_name(name);
    for (Strategy s : kAllStrategies) {
        if (to_string(s) == key) {
            return s;
        }
    }
    throw Error("unknown strategy '" + std::string(name) + "'");
}

std::string_view to_string(RejectFallback f) {
    switch (f) {
        case RejectFallback::FirstClass: return "first";
        case RejectFallback::RandomClass: return "random";
    }
    throw Error("unknown reject fallback");
}

RejectFallback parse_reject_fallback(std::string_view name) {
    if (name == "first") return RejectFallback::FirstClass;
    if (name == "random") return RejectFallback::RandomClass;
    throw Error("unknown reject fallback '" + std::string(name) + "' (expected first|random)");
}

void SimulationParams::validate() const {
    if (!(upper_bound < 1.0 && upper_bound > 0.0)) {
        throw Error("simulation upper_bound must lie in (0,1)");
    }
    if (!(delta >= 0.0 && delta <= upper_bound)) {
        throw Error("simulation delta must lie in [0, upper_bound]");
    }
    if (repetitions < 1) {
        throw Error("simulation needs at least one repetition");
    }
}

double acceptance_probability(double gt_of_proposal, double delta, double upper_bound) noexcept {
    return delta + (upper_bound - delta) * gt_of_proposal;
}

double acceptance_probability(const LabelDistribution& gt, ClassIndex proposal, const SimulationParams& p) {
    check_proposal(gt, proposal);
    return acceptance_probability(gt[proposal], p.delta, p.upper_bound);
}

ClassIndex sample_rejected_class(const LabelDistribution& gt, ClassIndex proposal,
                                 RejectFallback fallback, Rng& rng) {
    check_proposal(gt, proposal);
    double remaining = 0.0;
    for (ClassIndex k = 0; k < gt.size(); ++k) {
        if (k != proposal) {
            remaining += gt[k];
        }
    }
    if (!(remaining > 0.0)) {
        // The proposal holds all mass but was rejected anyway.
        if (fallback == RejectFallback::RandomClass) {
            return uniform_other_class(gt.size(), proposal, rng);
        }
        return proposal == 0 ? 1 : 0;
    }
    const double target = rng.uniform() * remaining;
    double cumulative = 0.0;
    ClassIndex last_positive = proposal;
    for (ClassIndex k = 0; k < gt.size(); ++k) {
        if (k == proposal || gt[k] <= 0.0) {
            continue;
        }
        cumulative += gt[k];
        last_positive = k;
        if (target < cumulative) {
            return k;
        }
    }
    return last_positive;
}

ClassIndex simulate_annotation(const LabelDistribution& gt, ClassIndex proposal,
                               const SimulationParams& p, Rng& rng) {
    check_proposal(gt, proposal);
    if (offset_accept(gt, proposal, p, rng)) {
        return proposal;
    }
    return sample_rejected_class(gt, proposal, p.reject_fallback, rng);
}

AnnotationSet simulate_annotation_set(const LabelDistribution& gt, ClassIndex proposal,
                                      const SimulationParams& p, Rng& rng) {
    return simulate_strategy_set(Strategy::AcceptGt, gt, proposal, p, rng);
}

ClassIndex simulate_with_strategy(Strategy strategy, const LabelDistribution& gt, ClassIndex proposal,
                                  const SimulationParams& p, Rng& rng) {
    check_proposal(gt, proposal);
    switch (strategy) {
        case Strategy::Random:
            return rng.uniform_index(gt.size());
        case Strategy::Gt:
            return sample_class(gt, rng);
        case Strategy::Likely:
            return argmax_class(gt);
        case Strategy::AcceptGt:
            return simulate_annotation(gt, proposal, p, rng);
        case Strategy::AcceptLikely:
            if (offset_accept(gt, proposal, p, rng)) {
                return proposal;
            }
            return argmax_excluding(gt, proposal);
        case Strategy::TwoAcceptGt:
        case Strategy::TwoAcceptRandom: {
            if (offset_accept(gt, proposal, p, rng)) {
                return proposal;
            }
            const ClassIndex likely = argmax_class(gt);
            if (likely != proposal && offset_accept(gt, likely, p, rng)) {
                return likely;
            }
            if (strategy == Strategy::TwoAcceptGt) {
                return sample_rejected_class(gt, proposal, p.reject_fallback, rng);
            }
            return uniform_other_class(gt.size(), proposal, rng);
        }
    }
    throw Error("unknown strategy tag");
}

AnnotationSet simulate_strategy_set(Strategy strategy, const LabelDistribution& gt, ClassIndex proposal,
                                    const SimulationParams& p, Rng& rng) {
    if (p.repetitions < 1) {
        throw Error("simulation needs at least one repetition");
    }
    AnnotationSet set(gt.size());
    for (std::uint64_t i = 0; i < p.repetitions; ++i) {
        set.add(simulate_with_strategy(strategy, gt, proposal, p, rng));
    }
    return set;
}

}  // namespace cleverlabel
