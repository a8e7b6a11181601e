#include "cleverlabel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

namespace cleverlabel {

std::string_view to_string(Aggregation a) {
    return a == Aggregation::Mean ? "mean" : "median";
}

Aggregation parse_aggregation(std::string_view name) {
    if (name == "mean") return Aggregation::Mean;
    if (name == "median") return Aggregation::Median;
    throw Error("unknown aggregation '" + std::string(name) + "' (expected median|mean)");
}

double mean_of(std::span<const double> values) {
    if (values.empty()) {
        throw Error("cannot aggregate an empty list");
    }
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double median_of(std::span<const double> values) {
    if (values.empty()) {
        throw Error("cannot aggregate an empty list");
    }
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) {
        return v[n / 2];
    }
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double sample_stddev(std::span<const double> values) {
    if (values.size() < 2) {
        return 0.0;
    }
    // Shifted by the first value so identical inputs give exactly 0.
    const double shift = values[0];
    double sum = 0.0;
    for (double v : values) {
        sum += v - shift;
    }
    const double m = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) {
        ss += (v - shift - m) * (v - shift - m);
    }
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double aggregate_scores(std::span<const double> values, Aggregation mode) {
    return mode == Aggregation::Mean ? mean_of(values) : median_of(values);
}

double kl_divergence(const LabelDistribution& gt, const LabelDistribution& est, double epsilon) {
    if (gt.size() != est.size()) {
        throw Error("kl_divergence: dimension mismatch");
    }
    std::vector<double> q(est.values());
    bool raised = false;
    for (double& v : q) {
        if (v < epsilon) {
            v = epsilon;
            raised = true;
        }
    }
    if (raised) {
        const double total = std::accumulate(q.begin(), q.end(), 0.0);
        for (double& v : q) {
            v /= total;
        }
    }
    double kl = 0.0;
    for (std::size_t k = 0; k < gt.size(); ++k) {
        if (gt[k] > 0.0) {
            kl += gt[k] * std::log(gt[k] / q[k]);
        }
    }
    return std::max(0.0, kl);
}

std::size_t bin_index(double p) {
    constexpr double slack = 1e-12;
    if (!(p >= -slack && p <= 1.0 + slack)) {
        throw Error("bin_index: probability outside [0,1]");
    }
    if (p <= slack) return 0;
    if (p <= 0.2 + slack) return 1;
    if (p <= 0.4 + slack) return 2;
    if (p <= 0.6 + slack) return 3;
    if (p <= 0.8 + slack) return 4;
    return 5;
}

void BinMatrix::add(std::size_t proposed_bin, std::size_t annotated_bin, std::uint64_t n) {
    cells_.at(proposed_bin).at(annotated_bin) += n;
    total_ += n;
}

std::uint64_t BinMatrix::at(std::size_t proposed_bin, std::size_t annotated_bin) const {
    return cells_.at(proposed_bin).at(annotated_bin);
}

std::array<std::array<double, kNumBins>, kNumBins> BinMatrix::row_normalized() const {
    std::array<std::array<double, kNumBins>, kNumBins> out{};
    for (std::size_t r = 0; r < kNumBins; ++r) {
        const std::uint64_t row_total = std::accumulate(cells_[r].begin(), cells_[r].end(), std::uint64_t{0});
        if (row_total == 0) {
            continue;
        }
        for (std::size_t c = 0; c < kNumBins; ++c) {
            out[r][c] = static_cast<double>(cells_[r][c]) / static_cast<double>(row_total);
        }
    }
    return out;
}

BinMatrix build_bin_matrix(const std::vector<AcceptanceRecord>& records) {
    if (records.empty()) {
        throw Error("build_bin_matrix: no records");
    }
    BinMatrix m;
    for (const auto& r : records) {
        m.add(bin_index(r.gt.at(r.proposal)), bin_index(r.gt.at(r.annotated)));
    }
    return m;
}

double sod(const BinMatrix& real, const BinMatrix& simulated, bool normalized) {
    std::uint64_t diff = 0;
    for (std::size_t r = 0; r < kNumBins; ++r) {
        for (std::size_t c = 0; c < kNumBins; ++c) {
            const std::uint64_t a = real.at(r, c);
            const std::uint64_t b = simulated.at(r, c);
            diff += a > b ? a - b : b - a;
        }
    }
    const double half = 0.5 * static_cast<double>(diff);
    if (!normalized) {
        return half;
    }
    if (real.total() == 0) {
        throw Error("normalized SOD of an empty reference matrix");
    }
    return half / static_cast<double>(real.total());
}

void BudgetParams::validate() const {
    if (!(initial_supervision >= 0.0 && initial_supervision <= 1.0)) {
        throw Error("initial supervision must lie in [0,1]");
    }
    if (!(pct_annotated >= 0.0 && pct_annotated <= 1.0)) {
        throw Error("percentage annotated must lie in [0,1]");
    }
    if (!(annotations_per_image >= 0.0)) {
        throw Error("annotations per image must be non-negative");
    }
    if (!(speedup >= 1.0)) {
        throw Error("speedup must be at least 1");
    }
}

double budget(const BudgetParams& p) {
    p.validate();
    return p.initial_supervision + p.pct_annotated * p.annotations_per_image / p.speedup;
}

SodSummary compare_simulator(const std::vector<AcceptanceRecord>& real, const AnnotationSimulator& simulate,
                             std::size_t repetitions, std::uint64_t seed) {
    if (repetitions == 0) {
        throw Error("compare needs at least one repetition");
    }
    const BinMatrix reference = build_bin_matrix(real);

    std::vector<std::uint64_t> occurrence(real.size());
    std::unordered_map<std::string, std::uint64_t> seen;
    for (std::size_t i = 0; i < real.size(); ++i) {
        occurrence[i] = seen[real[i].image_id]++;
    }

    SodSummary out;
    out.values.reserve(repetitions);
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
        BinMatrix simulated;
        for (std::size_t i = 0; i < real.size(); ++i) {
            const AcceptanceRecord& r = real[i];
            Rng rng = substream(seed, r.image_id, (static_cast<std::uint64_t>(rep) << 32) | occurrence[i]);
            const ClassIndex annotated = simulate(r, i, rng);
            simulated.add(bin_index(r.gt.at(r.proposal)), bin_index(r.gt.at(annotated)));
        }
        out.values.push_back(sod(reference, simulated, true));
    }
    out.mean = mean_of(out.values);
    out.stddev = sample_stddev(out.values);
    return out;
}

SodSummary compare_strategies(const std::vector<AcceptanceRecord>& real, Strategy strategy,
                              const SimulationParams& p, std::size_t repetitions, std::uint64_t seed) {
    p.validate();
    auto simulate = [&](const AcceptanceRecord& r, std::size_t, Rng& rng) {
        return simulate_with_strategy(strategy, r.gt, r.proposal, p, rng);
    };
    return compare_simulator(real, simulate, repetitions, seed);
}

}  // namespace cleverlabel
