#include "cleverlabel/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <utility>

#include "cleverlabel/metrics.hpp"

namespace cleverlabel {

double delta_from_acceptance(double acceptance, double p_gt, double upper_bound) {
    if (p_gt >= 1.0) {
        throw Error("delta undefined, zero denominator (ground truth of proposal is 1)");
    }
    return (acceptance - upper_bound * p_gt) / (1.0 - p_gt);
}

namespace {

struct ImageGroup {
    double p_gt = 0.0;
    std::size_t accepted = 0;
    std::size_t total = 0;
};

std::string occupancy_summary(const std::vector<AcceptanceRecord>& records) {
    // Counts of gt[proposal] in the six uncertainty bins.
    std::size_t bins[6] = {0, 0, 0, 0, 0, 0};
    for (const auto& r : records) {
        ++bins[bin_index(r.gt.at(r.proposal))];
    }
    std::ostringstream out;
    out << "{0: " << bins[0] << ", (0,0.2]: " << bins[1] << ", (0.2,0.4]: " << bins[2]
        << ", (0.4,0.6]: " << bins[3] << ", (0.6,0.8]: " << bins[4] << ", (0.8,1]: " << bins[5] << "}";
    return out.str();
}

}  // namespace

BandedEstimate estimate_delta_banded(const std::vector<AcceptanceRecord>& records, const BandedOptions& opts) {
    BandedEstimate est;
    est.records_total = records.size();

    // Keyed by (image, proposal); `groups` keeps first-appearance order.
    std::map<std::pair<std::string, ClassIndex>, std::size_t> index;
    std::vector<ImageGroup> groups;
    for (const auto& r : records) {
        if (r.proposal >= r.gt.size() || r.annotated >= r.gt.size()) {
            throw Error("acceptance record '" + r.image_id + "': class index out of range");
        }
        const double p = r.gt[r.proposal];
        if (!(p > opts.band_low && p <= opts.band_high)) {
            continue;
        }
        ++est.records_in_band;
        auto [it, inserted] = index.try_emplace({r.image_id, r.proposal}, groups.size());
        if (inserted) {
            groups.push_back({p, 0, 0});
        }
        ImageGroup& g = groups[it->second];
        ++g.total;
        if (r.annotated == r.proposal) {
            ++g.accepted;
        }
    }

    if (groups.empty()) {
        std::ostringstream msg;
        msg << "insufficient calibration data: 0 of " << records.size() << " records have ground truth of the"
            << " proposal in (" << opts.band_low << ", " << opts.band_high << "]; band occupancy "
            << occupancy_summary(records);
        throw InsufficientDataError(msg.str());
    }
    if (opts.n_target > 0 && groups.size() > opts.n_target) {
        groups.resize(opts.n_target);
    }

    std::vector<double> per_image;
    per_image.reserve(groups.size());
    for (const auto& g : groups) {
        const double acceptance = static_cast<double>(g.accepted) / static_cast<double>(g.total);
        per_image.push_back(delta_from_acceptance(acceptance, g.p_gt, opts.upper_bound));
        est.records_used += g.total;
    }
    est.images_used = per_image.size();
    est.raw_delta = aggregate_scores(per_image, opts.aggregation);

    double delta = std::clamp(est.raw_delta, 0.0, 1.0);
    if (opts.author_annotated) {
        delta = std::clamp(delta * opts.rescale, 0.0, 1.0);
    }
    est.delta = delta;
    return est;
}

std::optional<DeltaCandidate> two_proposal_candidate(const TwoProposalRecord& record, double upper_bound) {
    const AnnotationSet& a = record.annotations_a;
    const AnnotationSet& b = record.annotations_b;
    const ClassIndex rho = record.proposal_a;
    const ClassIndex rho2 = record.proposal_b;
    const std::size_t k_count = a.num_classes();
    if (b.num_classes() != k_count || rho >= k_count || rho2 >= k_count) {
        throw Error("two-proposal record '" + record.image_id + "': inconsistent classes");
    }
    if (rho == rho2) {
        throw Error("two-proposal record '" + record.image_id + "': proposals must differ");
    }
    if (a.total() == 0 || b.total() == 0) {
        return std::nullopt;
    }

    const double n_a = static_cast<double>(a.total());
    const double n_b = static_cast<double>(b.total());
    const double accept_a = static_cast<double>(a.count(rho)) / n_a;
    const double accept_b = static_cast<double>(b.count(rho2)) / n_b;

    using Source = DeltaCandidate::Source;
    // Corner cases: a fully accepted proposal means the other one has zero
    // ground truth, so its acceptance rate is delta itself.
    if (accept_a == 1.0) return DeltaCandidate{record.image_id, accept_b, Source::AllAccepted};
    if (accept_a == 0.0) return DeltaCandidate{record.image_id, 0.0, Source::NoneAccepted};
    if (accept_b == 1.0) return DeltaCandidate{record.image_id, accept_a, Source::AllAccepted};
    if (accept_b == 0.0) return DeltaCandidate{record.image_id, 0.0, Source::NoneAccepted};

    // D = C_{rho'}: share of rho' among the rejections of rho.
    // D' = C'_{rho}: share of rho among the rejections of rho'.
    const double rejected_a = n_a - static_cast<double>(a.count(rho));
    const double rejected_b = n_b - static_cast<double>(b.count(rho2));
    const double d = static_cast<double>(a.count(rho2)) / rejected_a;
    const double d2 = static_cast<double>(b.count(rho)) / rejected_b;
    const double denom = 1.0 - d * d2;
    if (denom <= 0.0) {
        // Both proposals cover all rejections: P(rho) + P(rho') = 1, so
        // A + A' = delta + upper_bound.
        const double delta = accept_a + accept_b - upper_bound;
        return DeltaCandidate{record.image_id, delta, Source::Closed};
    }
    // With u = P(rho), v = P(rho'): D = v / (1 - u) and D' = u / (1 - v).
    const double p_rho = d2 * (1.0 - d) / denom;
    const double p_not_rho = 1.0 - p_rho;
    if (!(p_not_rho > 0.0)) {
        return std::nullopt;
    }
    const double delta = (accept_a - upper_bound * p_rho) / p_not_rho;
    if (!std::isfinite(delta)) {
        return std::nullopt;
    }
    return DeltaCandidate{record.image_id, delta, Source::Closed};
}

TwoProposalEstimate estimate_delta_two_proposals(const std::vector<TwoProposalRecord>& records,
                                                 const TwoProposalOptions& opts) {
    if (records.empty()) {
        throw InsufficientDataError("insufficient calibration data: no two-proposal records");
    }
    TwoProposalEstimate est;
    est.records = records.size();
    std::vector<double> values;
    for (const auto& r : records) {
        auto cand = two_proposal_candidate(r, opts.upper_bound);
        if (!cand) {
            continue;
        }
        ++est.candidates;
        if (cand->source != DeltaCandidate::Source::Closed) {
            ++est.corner_cases;
        }
        if (cand->value >= opts.threshold) {
            continue;
        }
        values.push_back(cand->value);
        est.kept.push_back(std::move(*cand));
    }
    est.survivors = values.size();
    if (values.empty()) {
        std::ostringstream msg;
        msg << "estimator degenerate: " << est.candidates << " finite candidates from " << est.records
            << " records, none below threshold " << opts.threshold;
        throw InsufficientDataError(msg.str());
    }
    est.delta = median_of(values);
    return est;
}

}  // namespace cleverlabel
