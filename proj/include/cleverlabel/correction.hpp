#pragma once
// Label repair for proposal-biased annotation counts.
//
// bias_correct inverts the acceptance model: the proposal share of the
// counts gives B = clamp((|M|/N - delta) / (upper_bound - delta), 0, 1), the
// non-proposal counts give the conditional distribution C_k, and the
// repaired label is 1[k == rho] * B + C_k * (1 - B).
//
// blend_with_class_distribution mixes a label with the transition-matrix
// row of its most likely class: mu * d + (1 - mu) * c(k_hat, .).

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cleverlabel/core.hpp"
#include "cleverlabel/rng.hpp"

namespace cleverlabel {

struct CorrectionParams {
    double delta = 0.1;
    double upper_bound = 0.99;
    double mu = 0.75;

    void validate() const;
};

// Which distribution supplies k_hat for blending when both stages run.
enum class BlendInput {
    Corrected,  // argmax of the bias-corrected label
    Biased,     // argmax of the raw (biased) normalized counts
};

std::string_view to_string(BlendInput b);
BlendInput parse_blend_input(std::string_view name);

struct CleverLabelOptions {
    bool bias_correction = true;
    bool class_blending = true;
    BlendInput blend_input = BlendInput::Corrected;
};

LabelDistribution bias_correct(const AnnotationSet& annotations, ClassIndex proposal, const CorrectionParams& p);

LabelDistribution blend_with_class_distribution(const LabelDistribution& d, const TransitionMatrix& t, double mu);

// Blend with an explicitly chosen transition row.
LabelDistribution blend_with_row(const LabelDistribution& d, const TransitionMatrix& t, ClassIndex row, double mu);

LabelDistribution clever_label(const AnnotationSet& annotations, ClassIndex proposal, const TransitionMatrix& t,
                               const CorrectionParams& p, const CleverLabelOptions& options = {});

struct TransitionEstimate {
    // Empty for classes no sampled image was assigned to.
    std::vector<std::optional<LabelDistribution>> rows;
    std::vector<std::size_t> images_per_row;
};

// Samples min(n_images, gts.size()) distinct images, draws n_annos
// annotations from each one's ground truth and assigns the image to the
// argmax of its empirical distribution. Row k is the renormalized mean of the
// empirical distributions assigned to k.
TransitionEstimate estimate_transition_rows(std::span<const LabelDistribution> gts, std::size_t n_images,
                                            std::size_t n_annos, Rng& rng);

// Same estimate, but every class must be covered; throws
// InsufficientDataError("uncovered class ...") otherwise.
TransitionMatrix estimate_transition_matrix(std::span<const LabelDistribution> gts, std::size_t n_images,
                                            std::size_t n_annos, Rng& rng);

}  // namespace cleverlabel
