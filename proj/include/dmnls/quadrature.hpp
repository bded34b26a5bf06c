#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace dmnls {

/// Nodes and weights on [0, 1].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  int order = 0;

  std::size_t size() const { return nodes.size(); }
};

/// n-point Gauss-Legendre rule mapped to [0, 1]. Nodes come from Newton
/// iteration on P_n started at the Chebyshev-like guesses cos(pi (i-1/4)/(n+1/2)).
inline QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre needs n >= 1");
  QuadratureRule rule;
  rule.order = 2 * n - 1;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // Recompute the derivative at the converged root for the weight.
    {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    // z is the i-th largest root on [-1, 1].
    rule.nodes[n - 1 - i] = 0.5 * (1.0 + z);
    rule.nodes[i] = 0.5 * (1.0 - z);
    rule.weights[n - 1 - i] = 0.5 * w;
    rule.weights[i] = 0.5 * w;
  }
  return rule;
}

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
inline constexpr std::array<double, 8> kronrod_nodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kronrod_weights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for kronrod_nodes[1], [3], [5], [7].
inline constexpr std::array<double, 4> gauss7_weights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class Value, class Fn>
void kronrod_panel(Fn& f, double a, double b, Value& kronrod, Value& gauss, int& evals) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  Value fc = f(c);
  ++evals;
  kronrod = fc * (kronrod_weights[7] * h);
  gauss = fc * (gauss7_weights[3] * h);
  for (int i = 0; i < 7; ++i) {
    Value sum = f(c - h * kronrod_nodes[i]);
    sum += f(c + h * kronrod_nodes[i]);
    evals += 2;
    kronrod += sum * (kronrod_weights[i] * h);
    if (i % 2 == 1) gauss += sum * (gauss7_weights[i / 2] * h);
  }
}

template <class Value, class Fn, class Norm>
Value adaptive_kronrod(Fn& f, double a, double b, double tol, Norm& norm, int depth,
                       int& evals) {
  Value kronrod, gauss;
  kronrod_panel(f, a, b, kronrod, gauss, evals);
  Value diff = kronrod;
  diff -= gauss;
  if (norm(diff) <= tol || depth >= 30) return kronrod;
  const double c = 0.5 * (a + b);
  Value left = adaptive_kronrod<Value>(f, a, c, 0.5 * tol, norm, depth + 1, evals);
  left += adaptive_kronrod<Value>(f, c, b, 0.5 * tol, norm, depth + 1, evals);
  return left;
}

}  // namespace detail

/// Adaptive Gauss-Kronrod (7/15) integral of f over [a, b]. Value must support
/// copy, +=, -= and multiplication by double; norm measures the G7/K15
/// difference used as the local error estimate.
template <class Value, class Fn, class Norm>
Value integrate_adaptive(Fn&& f, double a, double b, double tol, Norm&& norm,
                         int* evaluations = nullptr) {
  int evals = 0;
  Value result = detail::adaptive_kronrod<Value>(f, a, b, tol, norm, 0, evals);
  if (evaluations) *evaluations += evals;
  return result;
}

template <class Fn>
double integrate_adaptive(Fn&& f, double a, double b, double tol = 1e-13) {
  auto norm = [](double x) { return std::abs(x); };
  return integrate_adaptive<double>(f, a, b, tol, norm);
}

}  // namespace dmnls
