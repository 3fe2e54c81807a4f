#include "smrkit/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace smrkit {

std::vector<double> solve_linear_system(std::vector<double> a,
                                        std::vector<double> b, std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t row = col + 1; row < n; ++row) {
      if (std::abs(a[row * n + col]) > std::abs(a[pivot * n + col])) {
        pivot = row;
      }
    }
    if (std::abs(a[pivot * n + col]) < 1e-300) {
      throw std::runtime_error("singular system in polynomial fit");
    }
    if (pivot != col) {
      for (std::size_t k = 0; k < n; ++k) {
        std::swap(a[col * n + k], a[pivot * n + k]);
      }
      std::swap(b[col], b[pivot]);
    }
    for (std::size_t row = col + 1; row < n; ++row) {
      const double factor = a[row * n + col] / a[col * n + col];
      for (std::size_t k = col; k < n; ++k) {
        a[row * n + k] -= factor * a[col * n + k];
      }
      b[row] -= factor * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t row = n; row-- > 0;) {
    double sum = b[row];
    for (std::size_t k = row + 1; k < n; ++k) {
      sum -= a[row * n + k] * x[k];
    }
    x[row] = sum / a[row * n + row];
  }
  return x;
}

std::array<double, 4> cubic_fit(std::span<const double> x,
                                std::span<const double> y) {
  if (x.size() != y.size()) {
    throw std::runtime_error("cubic fit requires matched x/y lengths");
  }
  const std::set<double> distinct(x.begin(), x.end());
  if (distinct.size() < 4) {
    throw std::runtime_error(
        "cubic fit requires at least 4 distinct x values, got " +
        std::to_string(distinct.size()));
  }
  // Normal equations for the degree-3 Vandermonde design matrix.
  std::array<double, 7> power_sums{};
  std::array<double, 4> moment{};
  for (std::size_t i = 0; i < x.size(); ++i) {
    double xp = 1;
    for (int p = 0; p <= 6; ++p) {
      power_sums[p] += xp;
      if (p <= 3) moment[p] += xp * y[i];
      xp *= x[i];
    }
  }
  std::vector<double> a(16);
  std::vector<double> b(4);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) a[r * 4 + c] = power_sums[r + c];
    b[r] = moment[r];
  }
  const std::vector<double> solution = solve_linear_system(std::move(a),
                                                           std::move(b), 4);
  return {solution[0], solution[1], solution[2], solution[3]};
}

double polyval(std::span<const double> coeffs, double x) {
  double value = 0;
  for (std::size_t i = coeffs.size(); i-- > 0;) {
    value = value * x + coeffs[i];
  }
  return value;
}

double polyint(std::span<const double> coeffs, double x) {
  double value = 0;
  for (std::size_t i = coeffs.size(); i-- > 0;) {
    value = value * x + coeffs[i] / static_cast<double>(i + 1);
  }
  return value * x;
}

double pearson_correlation(std::span<const double> x,
                           std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::runtime_error("correlation requires >= 2 matched samples");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0;
  double my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0;
  double sxx = 0;
  double syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size(), 0.0);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_correlation(std::span<const double> x,
                            std::span<const double> y, bool& defined) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::runtime_error("correlation requires >= 2 matched samples");
  }
  const bool x_const = std::all_of(x.begin(), x.end(),
                                   [&](double v) { return v == x[0]; });
  const bool y_const = std::all_of(y.begin(), y.end(),
                                   [&](double v) { return v == y[0]; });
  if (x_const || y_const) {
    defined = false;
    return 0.0;
  }
  defined = true;
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  return pearson_correlation(rx, ry);
}

}  // namespace smrkit
