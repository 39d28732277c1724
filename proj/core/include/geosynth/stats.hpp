#pragma once

#include <span>
#include <vector>

namespace geosynth::stats {

double normal_cdf(double x);
/// Inverse of normal_cdf on (0, 1); returns -inf/+inf at the ends.
double normal_quantile(double p);

double mean(std::span<const double> v);
/// Type-7 (linear interpolation) quantile of unsorted data.
double quantile(std::vector<double> v, double q);
/// Same, for data already sorted ascending.
double quantile_sorted(std::span<const double> sorted, double q);
double median(std::vector<double> v);

/// 1-based average ranks (ties share the mean rank).
std::vector<double> average_ranks(std::span<const double> v);

}  // namespace geosynth::stats
