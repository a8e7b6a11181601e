#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "cleverlabel/correction.hpp"
#include "cleverlabel/io.hpp"
#include "cleverlabel/metrics.hpp"
#include "cleverlabel/spa.hpp"
#include "oracles.hpp"

using namespace cleverlabel;

namespace {

TransitionMatrix micebone() {
    return load_transition_matrix(CLEVERLABEL_DATA_DIR "/transitions/micebone.json").matrix();
}

void expect_near(const LabelDistribution& d, const std::vector<double>& want, double tol) {
    ASSERT_EQ(d.size(), want.size());
    for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(d[k], want[k], tol) << "class " << k;
}

}  // namespace

TEST(BiasCorrect, Unanimous) {
    EXPECT_EQ(bias_correct(AnnotationSet({10, 0, 0}), 0, {}), LabelDistribution::one_hot(3, 0));
}

TEST(BiasCorrect, OffsetOnly) {
    expect_near(bias_correct(AnnotationSet({1, 9, 0}), 0, {}), {0, 1, 0}, 1e-15);
}

TEST(BiasCorrect, NoNonProposalCounts) {
    // B clamps to 1 and m = max(1, 0) keeps the other entries at 0.
    expect_near(bias_correct(AnnotationSet({0, 4, 0}), 1, {}), {0, 1, 0}, 1e-15);
}

TEST(BiasCorrect, Errors) {
    EXPECT_THROW(bias_correct(AnnotationSet({1, 2}), 2, {}), Error);
    EXPECT_THROW(bias_correct(AnnotationSet(2), 0, {}), Error);
    CorrectionParams bad;
    bad.delta = 0.99;
    EXPECT_THROW(bias_correct(AnnotationSet({1, 2}), 0, bad), Error);
}

TEST(BiasCorrect, MatchesOracle) {
    std::mt19937_64 gen(21);
    CorrectionParams p;
    for (int t = 0; t < 1000; ++t) {
        std::vector<std::uint64_t> counts(2 + t % 7);
        for (auto& c : counts) c = gen() % 20;
        counts[t % counts.size()] += 1;
        const std::size_t rho = gen() % counts.size();
        p.delta = (gen() % 50) / 100.0;
        const auto got = bias_correct(AnnotationSet(counts), rho, p);
        const auto want = oracle::bias_correct(counts, rho, p.delta);
        double s = 0;
        for (std::size_t k = 0; k < counts.size(); ++k) {
            EXPECT_NEAR(got[k], want[k] / std::accumulate(want.begin(), want.end(), 0.0), 1e-12);
            EXPECT_GE(got[k], 0.0);
            s += got[k];
        }
        EXPECT_NEAR(s, 1.0, 1e-9);
    }
}

TEST(BiasCorrect, InvertsSimulation) {
    const LabelDistribution gt{0.6, 0.3, 0.1};
    SimulationParams sim;
    sim.delta = 0.2;
    sim.repetitions = 100000;
    CorrectionParams corr;
    corr.delta = 0.2;
    Rng rng(22);
    const auto counts = simulate_annotation_set(gt, 0, sim, rng);
    EXPECT_LE(oracle::l1(bias_correct(counts, 0, corr).values(), gt.values()), 0.02);
}

TEST(BiasCorrect, ExpectedCountsInvertExactly) {
    // Feeding the expected biased label as (scaled) counts recovers gt.
    std::mt19937_64 gen(23);
    for (int t = 0; t < 200; ++t) {
        const auto gt = oracle::random_distribution(2 + t % 6, gen);
        const std::size_t rho = t % gt.size();
        const double delta = (t % 5) * 0.1;
        const auto e = oracle::biased_expectation(gt, rho, delta);
        std::vector<std::uint64_t> counts;
        for (double x : e) counts.push_back(static_cast<std::uint64_t>(std::llround(x * 1e9)));
        CorrectionParams p;
        p.delta = delta;
        const auto got = bias_correct(AnnotationSet(counts), rho, p);
        for (std::size_t k = 0; k < gt.size(); ++k) EXPECT_NEAR(got[k], gt[k], 1e-6);
    }
}

TEST(Blend, Identity) {
    const LabelDistribution d{0.6, 0.3, 0.1};
    const auto t = micebone();
    EXPECT_EQ(blend_with_class_distribution(d, t, 1.0), d);
    expect_near(blend_with_class_distribution(d, t, 0.0), t.row(0).values(), 1e-15);
}

TEST(Blend, MiceBoneRow) {
    expect_near(blend_with_class_distribution(LabelDistribution{0.6, 0.3, 0.1}, micebone(), 0.75),
                {0.63175, 0.270, 0.09825}, 1e-12);
}

TEST(Blend, Errors) {
    EXPECT_THROW(blend_with_class_distribution(LabelDistribution{0.5, 0.5}, micebone(), 0.75), Error);
    EXPECT_THROW(blend_with_class_distribution(LabelDistribution{0.6, 0.3, 0.1}, micebone(), 1.5), Error);
}

TEST(Blend, PreservesArgmaxOnPublishedMatrices) {
    std::mt19937_64 gen(24);
    for (const char* name : {"benthic", "cifar10h", "micebone", "plankton", "synthetic", "pig", "treeversity1",
                             "treeversity6", "qualitymri", "turkey"}) {
        const auto t =
            load_transition_matrix(std::string(CLEVERLABEL_DATA_DIR "/transitions/") + name + ".json").matrix();
        for (int i = 0; i < 200; ++i) {
            const LabelDistribution d(oracle::random_distribution(t.size(), gen));
            for (double mu : {0.5, 0.75, 1.0}) {
                EXPECT_EQ(argmax_class(blend_with_class_distribution(d, t, mu)), argmax_class(d)) << name;
            }
        }
    }
}

TEST(CleverLabel, NearIdentity) {
    CorrectionParams p;
    p.delta = 0.0;
    p.upper_bound = 1.0 - 1e-12;
    p.mu = 1.0;
    const AnnotationSet a({3, 5, 2});
    expect_near(clever_label(a, 1, micebone(), p), {0.3, 0.5, 0.2}, 1e-9);
}

TEST(CleverLabel, Composition) {
    CorrectionParams p;
    expect_near(clever_label(AnnotationSet({1, 9, 0}), 0, TransitionMatrix::identity(3), p), {0, 1, 0}, 1e-15);
}

TEST(CleverLabel, MuOneIsBiasCorrect) {
    std::mt19937_64 gen(25);
    CorrectionParams p;
    p.mu = 1.0;
    const auto t = micebone();
    for (int i = 0; i < 200; ++i) {
        const AnnotationSet a({gen() % 10, gen() % 10, gen() % 10 + 1});
        const std::size_t rho = gen() % 3;
        EXPECT_EQ(clever_label(a, rho, t, p), bias_correct(a, rho, p));
    }
}

TEST(CleverLabel, StageToggles) {
    const AnnotationSet a({6, 3, 1});
    const auto t = micebone();
    CorrectionParams p;
    CleverLabelOptions none{false, false, BlendInput::Corrected};
    EXPECT_EQ(clever_label(a, 0, t, p, none), soft_gt_from_annotations(a));
    CleverLabelOptions bc_only{true, false, BlendInput::Corrected};
    EXPECT_EQ(clever_label(a, 0, t, p, bc_only), bias_correct(a, 0, p));
    CleverLabelOptions cb_only{false, true, BlendInput::Corrected};
    EXPECT_EQ(clever_label(a, 0, t, p, cb_only), blend_with_class_distribution(soft_gt_from_annotations(a), t, p.mu));
}

TEST(CleverLabel, BlendInputSelectsRow) {
    // Raw argmax is class 0 (the proposal); after correction class 1 leads.
    const AnnotationSet a({5, 4, 1});
    CorrectionParams p;
    p.delta = 0.4;
    const auto t = micebone();
    const auto corrected = bias_correct(a, 0, p);
    ASSERT_EQ(argmax_class(corrected), 1u);
    CleverLabelOptions opts;
    EXPECT_EQ(clever_label(a, 0, t, p, opts), blend_with_row(corrected, t, 1, p.mu));
    opts.blend_input = BlendInput::Biased;
    EXPECT_EQ(clever_label(a, 0, t, p, opts), blend_with_row(corrected, t, 0, p.mu));
    EXPECT_EQ(parse_blend_input("biased"), BlendInput::Biased);
    EXPECT_THROW(parse_blend_input("raw"), Error);
}

TEST(CleverLabel, BcImprovesOverBiasedCounts) {
    const LabelDistribution gt{0.5, 0.4, 0.1};
    SimulationParams sim;
    sim.repetitions = 50;
    CorrectionParams corr;
    const auto t = micebone();
    double kl_bc = 0, kl_raw = 0;
    std::vector<double> mean_bc(3), mean_raw(3);
    const int trials = 2000;
    for (int i = 0; i < trials; ++i) {
        Rng rng = substream(26, "trial", i);
        const auto counts = simulate_annotation_set(gt, 0, sim, rng);
        const auto bc = clever_label(counts, 0, t, corr, {true, false, BlendInput::Corrected});
        const auto raw = soft_gt_from_annotations(counts);
        kl_bc += kl_divergence(gt, bc);
        kl_raw += kl_divergence(gt, raw);
        for (std::size_t k = 0; k < 3; ++k) {
            mean_bc[k] += bc[k] / trials;
            mean_raw[k] += raw[k] / trials;
        }
    }
    EXPECT_LT(kl_bc, kl_raw);
    EXPECT_LT(oracle::l1(mean_bc, {0.5, 0.4, 0.1}), 0.01);
    EXPECT_GT(oracle::l1(mean_raw, {0.5, 0.4, 0.1}), 0.05);
}

TEST(Transitions, OneHotGivesIdentity) {
    std::vector<LabelDistribution> gts;
    for (std::size_t k = 0; k < 4; ++k) gts.push_back(LabelDistribution::one_hot(4, k));
    Rng rng(27);
    EXPECT_EQ(estimate_transition_matrix(gts, 100, 10, rng), TransitionMatrix::identity(4));
}

TEST(Transitions, SingleRowRecovered) {
    const LabelDistribution r{0.9, 0.06, 0.04};
    const std::vector<LabelDistribution> gts(300, r);
    Rng rng(28);
    const auto est = estimate_transition_rows(gts, 100, 10, rng);
    std::size_t populated = 0, images = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        images += est.images_per_row[k];
        if (!est.rows[k]) continue;
        ++populated;
        if (est.images_per_row[k] < 10) continue;
        for (std::size_t j = 0; j < 3; ++j) EXPECT_LE(std::abs((*est.rows[k])[j] - r[j]), 0.05) << k << "," << j;
    }
    EXPECT_EQ(images, 100u);
    EXPECT_GE(populated, 1u);
    Rng again(28);
    EXPECT_THROW(estimate_transition_matrix(gts, 100, 10, again), InsufficientDataError);
}

TEST(Transitions, DeterministicAndBounded) {
    std::mt19937_64 gen(29);
    std::vector<LabelDistribution> gts;
    for (int i = 0; i < 50; ++i) {
        auto v = oracle::random_distribution(3, gen);
        v[i % 3] += 3.0;
        gts.push_back(normalize(v));
    }
    Rng a(30), b(30);
    const auto ta = estimate_transition_matrix(gts, 100, 10, a);
    EXPECT_EQ(ta, estimate_transition_matrix(gts, 100, 10, b));
    std::vector<LabelDistribution> empty;
    EXPECT_THROW(estimate_transition_matrix(empty, 100, 10, a), InsufficientDataError);
    EXPECT_THROW(estimate_transition_matrix(gts, 0, 10, a), Error);
}
