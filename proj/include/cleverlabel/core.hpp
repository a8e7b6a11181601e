#pragma once
// Domain types shared by every cleverlabel module.
//
// A LabelDistribution is a soft label: a probability vector over K classes.
// An AnnotationSet tallies one-hot annotations of a single image.
// Class indices are 0-based; names map onto indices via DatasetMeta order.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cleverlabel {

using ClassIndex = std::size_t;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input files or documents.
class ParseError : public Error {
public:
    using Error::Error;
};

// Estimators that cannot produce a value from the data they were given.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

inline constexpr double kSumTolerance = 1e-9;
// Inputs whose sum deviates from 1 by at most this much are renormalized.
inline constexpr double kRenormalizeTolerance = 1e-6;

class LabelDistribution {
public:
    // Validates entries in [0,1] and sum 1 within kRenormalizeTolerance;
    // throws Error otherwise.
    explicit LabelDistribution(std::vector<double> probs);
    LabelDistribution(std::initializer_list<double> probs)
        : LabelDistribution(std::vector<double>(probs)) {}

    static LabelDistribution uniform(std::size_t num_classes);
    static LabelDistribution one_hot(std::size_t num_classes, ClassIndex cls);

    std::size_t size() const noexcept { return probs_.size(); }
    double operator[](ClassIndex k) const { return probs_[k]; }
    double at(ClassIndex k) const { return probs_.at(k); }
    std::span<const double> probs() const noexcept { return probs_; }
    const std::vector<double>& values() const noexcept { return probs_; }

    friend bool operator==(const LabelDistribution&, const LabelDistribution&) = default;

private:
    std::vector<double> probs_;
};

class AnnotationSet {
public:
    explicit AnnotationSet(std::size_t num_classes) : counts_(num_classes, 0) {}
    explicit AnnotationSet(std::vector<std::uint64_t> counts);

    static AnnotationSet from_labels(std::size_t num_classes, std::span<const ClassIndex> labels);

    void add(ClassIndex cls, std::uint64_t n = 1);

    std::size_t num_classes() const noexcept { return counts_.size(); }
    std::uint64_t total() const noexcept { return total_; }
    std::uint64_t count(ClassIndex k) const { return counts_.at(k); }
    std::span<const std::uint64_t> counts() const noexcept { return counts_; }

    friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;

private:
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

// Row k-hat holds c(k-hat, .), the distribution of annotated classes for
// images whose most likely class is k-hat.
class TransitionMatrix {
public:
    explicit TransitionMatrix(std::vector<LabelDistribution> rows);

    static TransitionMatrix identity(std::size_t num_classes);

    std::size_t size() const noexcept { return rows_.size(); }
    const LabelDistribution& row(ClassIndex k) const { return rows_.at(k); }
    const std::vector<LabelDistribution>& rows() const noexcept { return rows_; }

    friend bool operator==(const TransitionMatrix&, const TransitionMatrix&) = default;

private:
    std::vector<LabelDistribution> rows_;
};

struct DatasetMeta {
    std::vector<std::string> class_names;
    double delta = 0.1;
    double upper_bound = 0.99;
    double mu = 0.75;

    std::size_t num_classes() const noexcept { return class_names.size(); }
    // Index of a class name; throws Error if unknown.
    ClassIndex class_index(const std::string& name) const;
    void validate() const;
};

// Throws "degenerate distribution" on negative, non-finite or all-zero input.
LabelDistribution normalize(std::span<const double> weights);

LabelDistribution soft_gt_from_annotations(const AnnotationSet& annotations);

// Lowest index wins on ties.
ClassIndex argmax_class(std::span<const double> probs);
inline ClassIndex argmax_class(const LabelDistribution& d) { return argmax_class(d.probs()); }

class Rng;
ClassIndex sample_class(const LabelDistribution& d, Rng& rng);

}  // namespace cleverlabel
