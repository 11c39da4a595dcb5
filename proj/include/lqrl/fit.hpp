#pragma once

#include <span>

namespace lqrl {

/// Ordinary least-squares slope of y against x.
double ols_slope(std::span<const double> x, std::span<const double> y);

/// OLS slope of log y against log x. Throws std::invalid_argument on
/// non-positive data or fewer than two points.
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace lqrl
