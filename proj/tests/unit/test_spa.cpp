#include <gtest/gtest.h>

#include <random>
#include <set>

#include "cleverlabel/spa.hpp"
#include "oracles.hpp"

using namespace cleverlabel;

TEST(Acceptance, Examples) {
    SimulationParams p;
    EXPECT_DOUBLE_EQ(acceptance_probability(LabelDistribution{1.0, 0.0}, 0, p), 0.99);
    EXPECT_DOUBLE_EQ(acceptance_probability(LabelDistribution{0.0, 1.0}, 0, p), 0.1);
    EXPECT_NEAR(acceptance_probability(LabelDistribution{0.5, 0.5}, 0, p), 0.545, 1e-15);
    EXPECT_THROW(acceptance_probability(LabelDistribution{0.5, 0.5}, 2, p), Error);
}

TEST(Acceptance, WithinBounds) {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(0.0, 0.99);
    for (int i = 0; i < 1000; ++i) {
        const double delta = u(gen);
        const double g = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
        const double a = acceptance_probability(g, delta, 0.99);
        EXPECT_GE(a, delta);
        EXPECT_LE(a, 0.99);
        EXPECT_NEAR(a, oracle::acceptance(g, delta), 1e-15);
    }
}

TEST(SimulationParams, Validation) {
    SimulationParams p;
    p.delta = 0.995;
    EXPECT_THROW(p.validate(), Error);
    p.delta = 0.1;
    p.upper_bound = 1.0;
    EXPECT_THROW(p.validate(), Error);
    p.upper_bound = 0.99;
    p.delta = -0.1;
    EXPECT_THROW(p.validate(), Error);
}

TEST(RejectBranch, FirstClassFallback) {
    Rng rng(4);
    const LabelDistribution gt{1.0, 0.0, 0.0};
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(sample_rejected_class(gt, 0, RejectFallback::FirstClass, rng), 1u);
    }
    const LabelDistribution last{0.0, 0.0, 1.0};
    EXPECT_EQ(sample_rejected_class(last, 2, RejectFallback::FirstClass, rng), 0u);
}

TEST(RejectBranch, RandomFallback) {
    Rng rng(4);
    const LabelDistribution gt{1.0, 0.0, 0.0};
    std::set<ClassIndex> seen;
    for (int i = 0; i < 200; ++i) seen.insert(sample_rejected_class(gt, 0, RejectFallback::RandomClass, rng));
    EXPECT_EQ(seen, (std::set<ClassIndex>{1, 2}));
}

TEST(RejectBranch, RemainderOneHot) {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        EXPECT_EQ(sample_rejected_class(LabelDistribution{0.5, 0.5}, 0, RejectFallback::FirstClass, rng), 1u);
    }
    SimulationParams p;
    p.delta = 0.0;
    int ones = 0;
    for (int i = 0; i < 1000; ++i) ones += simulate_annotation(LabelDistribution{0.5, 0.5}, 0, p, rng) == 1;
    EXPECT_GT(ones, 0);
}

TEST(RejectBranch, ConditionalDistribution) {
    const std::vector<double> gt = {0.2, 0.5, 0.25, 0.05};
    Rng rng(6);
    std::vector<double> observed(4);
    for (int i = 0; i < 100000; ++i) {
        observed[sample_rejected_class(LabelDistribution(gt), 1, RejectFallback::FirstClass, rng)] += 1;
    }
    EXPECT_EQ(observed[1], 0.0);
    const std::vector<double> expected = {0.2 / 0.5, 0.0, 0.25 / 0.5, 0.05 / 0.5};
    EXPECT_GT(oracle::chi_square_pvalue(observed, expected), 0.001);
}

TEST(SimulateAnnotation, ProposalFrequency) {
    SimulationParams p;
    Rng rng(7);
    const int n = 100000;
    int hits = 0;
    for (int i = 0; i < n; ++i) hits += simulate_annotation(LabelDistribution{0.6, 0.3, 0.1}, 0, p, rng) == 0;
    EXPECT_NEAR(hits / double(n), 0.634, 0.005);
}

TEST(SimulateAnnotation, ZeroOffsetZeroMassMatchesGt) {
    SimulationParams p;
    p.delta = 0.0;
    const std::vector<double> gt = {0.0, 0.3, 0.7};
    Rng rng(8);
    std::vector<double> observed(3);
    for (int i = 0; i < 100000; ++i) observed[simulate_annotation(LabelDistribution(gt), 0, p, rng)] += 1;
    EXPECT_EQ(observed[0], 0.0);
    EXPECT_GT(oracle::chi_square_pvalue(observed, gt), 0.001);
}

TEST(SimulateAnnotationSet, SingleDraw) {
    SimulationParams p;
    p.repetitions = 1;
    Rng rng(9);
    const auto set = simulate_annotation_set(LabelDistribution{0.2, 0.3, 0.5}, 1, p, rng);
    EXPECT_EQ(set.total(), 1u);
    int nonzero = 0;
    for (auto c : set.counts()) nonzero += c > 0;
    EXPECT_EQ(nonzero, 1);
}

TEST(SimulateAnnotationSet, CertainProposal) {
    SimulationParams p;
    p.repetitions = 100000;
    Rng rng(10);
    const auto set = simulate_annotation_set(LabelDistribution{1.0, 0.0}, 0, p, rng);
    EXPECT_EQ(set.total(), p.repetitions);
    EXPECT_NEAR(set.count(0) / double(p.repetitions), 0.99, 0.001);
}

TEST(SimulateAnnotationSet, Deterministic) {
    SimulationParams p;
    p.repetitions = 500;
    const LabelDistribution gt{0.2, 0.3, 0.5};
    Rng a = substream(42, "img-7", 3);
    Rng b = substream(42, "img-7", 3);
    EXPECT_EQ(simulate_annotation_set(gt, 1, p, a), simulate_annotation_set(gt, 1, p, b));
    EXPECT_THROW(
        {
            p.repetitions = 0;
            simulate_annotation_set(gt, 1, p, a);
        },
        Error);
}

TEST(Strategy, Names) {
    for (Strategy s : kAllStrategies) EXPECT_EQ(parse_strategy(to_string(s)), s);
    EXPECT_EQ(parse_strategy("ACCEPT+GT"), Strategy::AcceptGt);
    EXPECT_EQ(parse_strategy("2*ACCEPT+RANDOM"), Strategy::TwoAcceptRandom);
    EXPECT_EQ(parse_strategy("two_accept_gt"), Strategy::TwoAcceptGt);
    EXPECT_THROW(parse_strategy("ACCEPT_SOMETIMES"), Error);
    EXPECT_EQ(parse_reject_fallback("random"), RejectFallback::RandomClass);
    EXPECT_THROW(parse_reject_fallback("last"), Error);
}

TEST(Strategy, Likely) {
    SimulationParams p;
    Rng rng(11);
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(simulate_with_strategy(Strategy::Likely, LabelDistribution{0.2, 0.8}, 0, p, rng), 1u);
    }
}

TEST(Strategy, RandomUniform) {
    SimulationParams p;
    Rng rng(12);
    const int n = 100000;
    std::vector<double> counts(4);
    for (int i = 0; i < n; ++i) {
        counts[simulate_with_strategy(Strategy::Random, LabelDistribution{1.0, 0.0, 0.0, 0.0}, 0, p, rng)] += 1;
    }
    for (double c : counts) EXPECT_NEAR(c / n, 0.25, 0.005);
}

TEST(Strategy, GtMatchesSampling) {
    SimulationParams p;
    const std::vector<double> gt = {0.1, 0.6, 0.3};
    Rng rng(13);
    std::vector<double> observed(3);
    for (int i = 0; i < 100000; ++i) observed[simulate_with_strategy(Strategy::Gt, LabelDistribution(gt), 0, p, rng)] += 1;
    EXPECT_GT(oracle::chi_square_pvalue(observed, gt), 0.001);
}

TEST(Strategy, AcceptLikelyRejectsToRemainingArgmax) {
    SimulationParams p;
    p.delta = 0.0;
    Rng rng(14);
    // gt[2] = 0.2 so the proposal is accepted with probability 0.198; every
    // other outcome must be the argmax of the remaining classes.
    const int n = 100000;
    int other = 0, accepted = 0;
    for (int i = 0; i < n; ++i) {
        const auto k = simulate_with_strategy(Strategy::AcceptLikely, LabelDistribution{0.5, 0.3, 0.2}, 2, p, rng);
        ASSERT_NE(k, 1u);
        (k == 2 ? accepted : other)++;
    }
    EXPECT_NEAR(accepted / double(n), oracle::acceptance(0.2, 0.0), oracle::binomial_bound(0.198, n));
}

TEST(Strategy, TwoAcceptSecondTest) {
    // gt=(0.1,0.7,0.2), proposal 0: P(0) = A0, P(1) = (1-A0)*A1, the rest
    // goes to the fallback (GT over non-proposal classes, or uniform).
    const std::vector<double> gt = {0.1, 0.7, 0.2};
    SimulationParams p;
    const double a0 = oracle::acceptance(0.1, p.delta);
    const double a1 = oracle::acceptance(0.7, p.delta);
    const double rest = (1 - a0) * (1 - a1);
    const int n = 200000;
    {
        Rng rng(15);
        std::vector<double> observed(3);
        for (int i = 0; i < n; ++i) {
            observed[simulate_with_strategy(Strategy::TwoAcceptGt, LabelDistribution(gt), 0, p, rng)] += 1;
        }
        const std::vector<double> expected = {a0, (1 - a0) * a1 + rest * 0.7 / 0.9, rest * 0.2 / 0.9};
        EXPECT_GT(oracle::chi_square_pvalue(observed, expected), 0.001);
    }
    {
        Rng rng(16);
        std::vector<double> observed(3);
        for (int i = 0; i < n; ++i) {
            observed[simulate_with_strategy(Strategy::TwoAcceptRandom, LabelDistribution(gt), 0, p, rng)] += 1;
        }
        const std::vector<double> expected = {a0, (1 - a0) * a1 + rest * 0.5, rest * 0.5};
        EXPECT_GT(oracle::chi_square_pvalue(observed, expected), 0.001);
    }
}

TEST(Strategy, TwoAcceptSkipsSecondTestForArgmaxProposal) {
    // The proposal is already the most likely class, so 2*ACCEPT+GT reduces to ACCEPT+GT.
    const std::vector<double> gt = {0.6, 0.3, 0.1};
    SimulationParams p;
    Rng rng(17);
    std::vector<double> observed(3);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        observed[simulate_with_strategy(Strategy::TwoAcceptGt, LabelDistribution(gt), 0, p, rng)] += 1;
    }
    const double a = oracle::acceptance(0.6, p.delta);
    EXPECT_GT(oracle::chi_square_pvalue(observed, {a, (1 - a) * 0.75, (1 - a) * 0.25}), 0.001);
}

TEST(Strategy, SubstreamsIndependentOfOrder) {
    SimulationParams p;
    p.repetitions = 50;
    const LabelDistribution gt{0.2, 0.3, 0.5};
    std::vector<AnnotationSet> forward, backward(5, AnnotationSet(3));
    for (int i = 0; i < 5; ++i) {
        Rng rng = substream(7, "img" + std::to_string(i), 50);
        forward.push_back(simulate_annotation_set(gt, 0, p, rng));
    }
    for (int i = 4; i >= 0; --i) {
        Rng rng = substream(7, "img" + std::to_string(i), 50);
        backward[i] = simulate_annotation_set(gt, 0, p, rng);
    }
    EXPECT_EQ(forward, backward);
}
