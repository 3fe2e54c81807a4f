#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace smrkit {

// Least-squares cubic fit: returns c with y ~ c[0] + c[1]x + c[2]x^2 + c[3]x^3.
// Requires at least 4 points with 4 distinct x values.
std::array<double, 4> cubic_fit(std::span<const double> x,
                                std::span<const double> y);

double polyval(std::span<const double> coeffs, double x);

// Antiderivative evaluated at x (constant term zero).
double polyint(std::span<const double> coeffs, double x);

double pearson_correlation(std::span<const double> x, std::span<const double> y);

// Spearman rank correlation with average ranks on ties. `defined` is false
// when either input is constant.
double spearman_correlation(std::span<const double> x,
                            std::span<const double> y, bool& defined);

// Solves the n x n system a*x = b in place via Gaussian elimination with
// partial pivoting. a is row-major.
std::vector<double> solve_linear_system(std::vector<double> a,
                                        std::vector<double> b, std::size_t n);

}  // namespace smrkit
