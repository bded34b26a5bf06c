#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "dmnls/grid_spectral.hpp"

namespace dmnls::test {

inline GridPtr default_grid() { return SpatialGrid::make(512, 16.0 * std::numbers::pi); }

// Smooth random field: random low-order Hermite-like coefficients under a
// Gaussian envelope, so it is resolved on default_grid().
inline ComplexField random_field(const GridPtr& grid, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform(-3.0, 3.0);
  const double center = uniform(rng);
  const double width = 1.0 + 0.5 * std::abs(normal(rng));
  Complex c[4];
  for (auto& z : c) z = {normal(rng), normal(rng)};
  ComplexField f(grid);
  for (std::size_t j = 0; j < grid->n(); ++j) {
    const double y = (grid->x(j) - center) / width;
    f[j] = (c[0] + y * (c[1] + y * (c[2] + y * c[3]))) * std::exp(-0.5 * y * y);
  }
  return f;
}

inline double max_abs_diff(const ComplexField& a, const ComplexField& b) {
  double worst = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) worst = std::max(worst, std::abs(a[j] - b[j]));
  return worst;
}

}  // namespace dmnls::test
