#include "cleverlabel/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cleverlabel/rng.hpp"

namespace cleverlabel {

LabelDistribution::LabelDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.size() < 2) {
        throw Error("label distribution needs at least two classes");
    }
    double sum = 0.0;
    for (double p : probs_) {
        if (!std::isfinite(p) || p < 0.0 || p > 1.0 + kRenormalizeTolerance) {
            std::ostringstream msg;
            msg << "label distribution entry out of [0,1]: " << p;
            throw Error(msg.str());
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > kRenormalizeTolerance) {
        std::ostringstream msg;
        msg << "non-normalizable label distribution (sum " << sum << ")";
        throw Error(msg.str());
    }
    // Leave exactly normalized vectors bit-identical.
    if (std::abs(sum - 1.0) > 1e-12) {
        for (double& p : probs_) {
            p = std::min(1.0, p / sum);
        }
    }
}

LabelDistribution LabelDistribution::uniform(std::size_t num_classes) {
    return LabelDistribution(std::vector<double>(num_classes, 1.0 / static_cast<double>(num_classes)));
}

LabelDistribution LabelDistribution::one_hot(std::size_t num_classes, ClassIndex cls) {
    if (cls >= num_classes) {
        throw Error("one_hot: class index out of range");
    }
    std::vector<double> p(num_classes, 0.0);
    p[cls] = 1.0;
    return LabelDistribution(std::move(p));
}

AnnotationSet::AnnotationSet(std::vector<std::uint64_t> counts) : counts_(std::move(counts)) {
    total_ = std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

AnnotationSet AnnotationSet::from_labels(std::size_t num_classes, std::span<const ClassIndex> labels) {
    AnnotationSet set(num_classes);
    for (ClassIndex c : labels) {
        set.add(c);
    }
    return set;
}

void AnnotationSet::add(ClassIndex cls, std::uint64_t n) {
    if (cls >= counts_.size()) {
        throw Error("annotation class index out of range");
    }
    counts_[cls] += n;
    total_ += n;
}

TransitionMatrix::TransitionMatrix(std::vector<LabelDistribution> rows) : rows_(std::move(rows)) {
    if (rows_.size() < 2) {
        throw Error("transition matrix needs at least two rows");
    }
    for (const auto& r : rows_) {
        if (r.size() != rows_.size()) {
            throw Error("transition matrix must be square");
        }
    }
}

TransitionMatrix TransitionMatrix::identity(std::size_t num_classes) {
    std::vector<LabelDistribution> rows;
    rows.reserve(num_classes);
    for (std::size_t k = 0; k < num_classes; ++k) {
        rows.push_back(LabelDistribution::one_hot(num_classes, k));
    }
    return TransitionMatrix(std::move(rows));
}

ClassIndex DatasetMeta::class_index(const std::string& name) const {
    const auto it = std::find(class_names.begin(), class_names.end(), name);
    if (it == class_names.end()) {
        throw Error("unknown class name '" + name + "'");
    }
    return static_cast<ClassIndex>(it - class_names.begin());
}

void DatasetMeta::validate() const {
    if (class_names.size() < 2) {
        throw Error("dataset needs at least two classes");
    }
    for (std::size_t i = 0; i < class_names.size(); ++i) {
        for (std::size_t j = i + 1; j < class_names.size(); ++j) {
            if (class_names[i] == class_names[j]) {
                throw Error("duplicate class name '" + class_names[i] + "'");
            }
        }
    }
    if (!(upper_bound > 0.0 && upper_bound < 1.0)) {
        throw Error("upper_bound must lie in (0,1)");
    }
    if (!(delta >= 0.0 && delta <= upper_bound)) {
        throw Error("delta must lie in [0, upper_bound]");
    }
    if (!(mu >= 0.0 && mu <= 1.0)) {
        throw Error("mu must lie in [0,1]");
    }
}

LabelDistribution normalize(std::span<const double> weights) {
    double sum = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) {
            throw Error("degenerate distribution: negative or non-finite weight");
        }
        sum += w;
    }
    if (!(sum > 0.0)) {
        throw Error("degenerate distribution: all weights are zero");
    }
    std::vector<double> p(weights.begin(), weights.end());
    for (double& v : p) {
        v /= sum;
    }
    return LabelDistribution(std::move(p));
}

LabelDistribution soft_gt_from_annotations(const AnnotationSet& annotations) {
    if (annotations.total() == 0) {
        throw Error("soft ground truth needs at least one annotation");
    }
    const double n = static_cast<double>(annotations.total());
    std::vector<double> p;
    p.reserve(annotations.num_classes());
    for (std::uint64_t c : annotations.counts()) {
        p.push_back(static_cast<double>(c) / n);
    }
    return LabelDistribution(std::move(p));
}

ClassIndex argmax_class(std::span<const double> probs) {
    if (probs.empty()) {
        throw Error("argmax of empty vector");
    }
    ClassIndex best = 0;
    for (ClassIndex k = 1; k < probs.size(); ++k) {
        if (probs[k] > probs[best]) {
            best = k;
        }
    }
    return best;
}

ClassIndex sample_class(const LabelDistribution& d, Rng& rng) {
    const double r = rng.uniform();
    double cumulative = 0.0;
    ClassIndex last_positive = 0;
    for (ClassIndex k = 0; k < d.size(); ++k) {
        if (d[k] <= 0.0) {
            continue;
        }
        cumulative += d[k];
        last_positive = k;
        if (r < cumulative) {
            return k;
        }
    }
    // r landed in the rounding gap above the accumulated sum.
    return last_positive;
}

}  // namespace cleverlabel
