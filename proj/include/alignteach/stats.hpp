#pragma once

#include <span>
#include <vector>

namespace alignteach::stats {

double mean(std::span<const double> xs);

// Sample standard error of the mean (n - 1 denominator); 0 for n < 2.
double standard_error(std::span<const double> xs);

// Throws degenerate_input when either input has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

// Fractional ranks, ties get the average rank (1-based).
std::vector<double> average_ranks(std::span<const double> xs);

double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace alignteach::stats
