#pragma once

#include <span>
#include <string_view>

namespace cleverlabel {

enum class Aggregation { Mean, Median };

std::string_view to_string(Aggregation a);
Aggregation parse_aggregation(std::string_view name);

// Median uses the midpoint of the two central values for even sizes.
// Throws Error on empty input.
double aggregate_scores(std::span<const double> values, Aggregation mode);

double mean_of(std::span<const double> values);
double median_of(std::span<const double> values);
// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_stddev(std::span<const double> values);

}  // namespace cleverlabel
