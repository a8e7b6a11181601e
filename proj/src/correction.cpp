#include "cleverlabel/correction.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <string>

namespace cleverlabel {

void CorrectionParams::validate() const {
    if (!(delta < upper_bound)) {
        throw Error("correction delta must be below upper_bound");
    }
    if (!(delta >= 0.0 && upper_bound <= 1.0)) {
        throw Error("correction delta and upper_bound must lie in [0,1]");
    }
    if (!(mu >= 0.0 && mu <= 1.0)) {
        throw Error("blend weight mu must lie in [0,1]");
    }
}

std::string_view to_string(BlendInput b) {
    return b == BlendInput::Corrected ? "corrected" : "biased";
}

BlendInput parse_blend_input(std::string_view name) {
    if (name == "corrected") return BlendInput::Corrected;
    if (name == "biased") return BlendInput::Biased;
    throw Error("unknown cb-input '" + std::string(name) + "' (expected corrected|biased)");
}

LabelDistribution bias_correct(const AnnotationSet& annotations, ClassIndex proposal, const CorrectionParams& p) {
    p.validate();
    if (proposal >= annotations.num_classes()) {
        throw Error("bias_correct: proposal class index out of range");
    }
    if (annotations.total() == 0) {
        throw Error("bias_correct: no annotations");
    }
    const double n = static_cast<double>(annotations.total());
    const double accepted = static_cast<double>(annotations.count(proposal));

    const double b = std::clamp((accepted / n - p.delta) / (p.upper_bound - p.delta), 0.0, 1.0);
    const double m = std::max(1.0, n - accepted);

    std::vector<double> out;
    out.reserve(annotations.num_classes());
    for (std::uint64_t c : annotations.counts()) {
        out.push_back(static_cast<double>(c) / m * (1.0 - b));
    }
    out[proposal] = b;
    return LabelDistribution(std::move(out));
}

LabelDistribution blend_with_row(const LabelDistribution& d, const TransitionMatrix& t, ClassIndex row, double mu) {
    if (t.size() != d.size()) {
        throw Error("transition matrix size does not match label size");
    }
    if (!(mu >= 0.0 && mu <= 1.0)) {
        throw Error("blend weight mu must lie in [0,1]");
    }
    const LabelDistribution& prior = t.row(row);
    std::vector<double> out(d.size());
    for (ClassIndex k = 0; k < d.size(); ++k) {
        out[k] = mu * d[k] + (1.0 - mu) * prior[k];
    }
    return LabelDistribution(std::move(out));
}

LabelDistribution blend_with_class_distribution(const LabelDistribution& d, const TransitionMatrix& t, double mu) {
    return blend_with_row(d, t, argmax_class(d), mu);
}

LabelDistribution clever_label(const AnnotationSet& annotations, ClassIndex proposal, const TransitionMatrix& t,
                               const CorrectionParams& p, const CleverLabelOptions& options) {
    LabelDistribution base = options.bias_correction ? bias_correct(annotations, proposal, p)
                                                     : soft_gt_from_annotations(annotations);
    if (!options.class_blending) {
        return base;
    }
    ClassIndex row = argmax_class(base);
    if (options.blend_input == BlendInput::Biased) {
        std::vector<double> raw(annotations.counts().begin(), annotations.counts().end());
        row = argmax_class(raw);
    }
    return blend_with_row(base, t, row, p.mu);
}

TransitionEstimate estimate_transition_rows(std::span<const LabelDistribution> gts, std::size_t n_images,
                                            std::size_t n_annos, Rng& rng) {
    if (gts.empty()) {
        throw InsufficientDataError("transition estimation needs at least one image");
    }
    if (n_images == 0 || n_annos == 0) {
        throw Error("transition estimation needs n_images > 0 and n_annos > 0");
    }
    const std::size_t k = gts.front().size();
    for (const auto& g : gts) {
        if (g.size() != k) {
            throw Error("transition estimation: inconsistent class counts");
        }
    }

    std::vector<std::size_t> order(gts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t take = std::min(n_images, gts.size());
    if (take < gts.size()) {
        // Partial Fisher-Yates: the first `take` slots become a uniform sample.
        for (std::size_t i = 0; i < take; ++i) {
            const std::size_t j = i + rng.uniform_index(gts.size() - i);
            std::swap(order[i], order[j]);
        }
        order.resize(take);
    }

    std::vector<std::vector<double>> sums(k, std::vector<double>(k, 0.0));
    std::vector<std::size_t> assigned(k, 0);
    std::vector<double> empirical(k);
    for (std::size_t idx : order) {
        std::fill(empirical.begin(), empirical.end(), 0.0);
        for (std::size_t a = 0; a < n_annos; ++a) {
            empirical[sample_class(gts[idx], rng)] += 1.0;
        }
        for (double& v : empirical) {
            v /= static_cast<double>(n_annos);
        }
        const ClassIndex row = argmax_class(empirical);
        for (std::size_t c = 0; c < k; ++c) {
            sums[row][c] += empirical[c];
        }
        ++assigned[row];
    }

    TransitionEstimate est;
    est.images_per_row = assigned;
    est.rows.resize(k);
    for (std::size_t r = 0; r < k; ++r) {
        if (assigned[r] > 0) {
            est.rows[r] = normalize(sums[r]);
        }
    }
    return est;
}

TransitionMatrix estimate_transition_matrix(std::span<const LabelDistribution> gts, std::size_t n_images,
                                            std::size_t n_annos, Rng& rng) {
    TransitionEstimate est = estimate_transition_rows(gts, n_images, n_annos, rng);
    std::vector<LabelDistribution> rows;
    rows.reserve(est.rows.size());
    std::vector<std::size_t> missing;
    for (std::size_t r = 0; r < est.rows.size(); ++r) {
        if (est.rows[r]) {
            rows.push_back(*est.rows[r]);
        } else {
            missing.push_back(r);
        }
    }
    if (!missing.empty()) {
        std::ostringstream msg;
        msg << "uncovered class in transition estimation: no sampled image has majority class";
        for (std::size_t r : missing) {
            msg << ' ' << r;
        }
        msg << " (raise n_images)";
        throw InsufficientDataError(msg.str());
    }
    return TransitionMatrix(std::move(rows));
}

}  // namespace cleverlabel
