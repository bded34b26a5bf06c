#pragma once

// Periodic 1-D grid, discrete Fourier transforms and the norms used to
// measure solutions.
//
// Transform convention. With x_j = -L/2 + j*dx and xi_k = 2*pi*k/L (k in
// standard DFT order, Nyquist mode assigned +pi*n/L), the forward transform
// is the rectangle-rule approximation of the unitary Fourier integral
//
//   fhat(xi_k) = dx / sqrt(2*pi) * sum_j exp(-i*xi_k*x_j) f(x_j)
//
// and the inverse uses d(xi) = 2*pi/L in the same way.  Both sums are exact
// inverses of each other on the lattice and Parseval reads
// sum |f|^2 dx == sum |fhat|^2 d(xi).

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmnls/errors.hpp"

namespace dmnls {

using Complex = std::complex<double>;

/// Uniform periodic grid on [-L/2, L/2) and its dual frequency lattice.
class SpatialGrid {
 public:
  SpatialGrid(std::size_t n, double length) : n_(n), length_(length) {
    if (n < 8 || !std::has_single_bit(n)) {
      throw std::invalid_argument("grid size must be a power of two >= 8, got " +
                                  std::to_string(n));
    }
    if (!(length > 0.0) || !std::isfinite(length)) {
      throw std::invalid_argument("grid length must be positive and finite");
    }
    dx_ = length_ / static_cast<double>(n_);
    positions_.resize(n_);
    frequencies_.resize(n_);
    const double dxi = 2.0 * std::numbers::pi / length_;
    const auto half = static_cast<std::ptrdiff_t>(n_ / 2);
    for (std::size_t j = 0; j < n_; ++j) {
      positions_[j] = -0.5 * length_ + static_cast<double>(j) * dx_;
      auto k = static_cast<std::ptrdiff_t>(j);
      if (k > half) k -= static_cast<std::ptrdiff_t>(n_);
      frequencies_[j] = dxi * static_cast<double>(k);
    }
  }

  static std::shared_ptr<const SpatialGrid> make(std::size_t n, double length) {
    return std::make_shared<const SpatialGrid>(n, length);
  }

  std::size_t n() const { return n_; }
  double length() const { return length_; }
  double dx() const { return dx_; }
  double dxi() const { return 2.0 * std::numbers::pi / length_; }
  double x(std::size_t j) const { return positions_[j]; }
  std::span<const double> positions() const { return positions_; }
  std::span<const double> frequencies() const { return frequencies_; }

  friend bool operator==(const SpatialGrid& a, const SpatialGrid& b) {
    return a.n_ == b.n_ && a.length_ == b.length_;
  }

 private:
  std::size_t n_;
  double length_;
  double dx_;
  std::vector<double> positions_;
  std::vector<double> frequencies_;
};

using GridPtr = std::shared_ptr<const SpatialGrid>;

struct PhysicalDomain {};
struct FrequencyDomain {};

/// Complex samples on a grid. The tag distinguishes physical-space samples
/// from their transform; arithmetic is only defined within one domain. Real
/// selects the working precision (double or long double).
template <class Domain, class Real = double>
class GridFunction {
 public:
  using real_type = Real;
  using value_type = std::complex<Real>;

  GridFunction() = default;

  explicit GridFunction(GridPtr grid) : grid_(std::move(grid)) {
    if (!grid_) throw std::invalid_argument("null grid");
    values_.assign(grid_->n(), value_type{});
  }

  GridFunction(GridPtr grid, std::vector<value_type> values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    if (!grid_) throw std::invalid_argument("null grid");
    if (values_.size() != grid_->n()) {
      throw std::invalid_argument("sample count does not match grid size");
    }
  }

  /// Precision conversion.
  template <class Other>
  explicit GridFunction(const GridFunction<Domain, Other>& other) : grid_(other.grid_ptr()) {
    values_.reserve(other.size());
    for (const auto& z : other.values()) values_.emplace_back(z.real(), z.imag());
  }

  const SpatialGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::size_t size() const { return values_.size(); }

  std::span<value_type> values() { return values_; }
  std::span<const value_type> values() const { return values_; }
  value_type& operator[](std::size_t j) { return values_[j]; }
  const value_type& operator[](std::size_t j) const { return values_[j]; }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](const value_type& z) {
      return std::isfinite(z.real()) && std::isfinite(z.imag());
    });
  }

  GridFunction& operator+=(const GridFunction& other) {
    check_same_grid(other);
    for (std::size_t j = 0; j < values_.size(); ++j) values_[j] += other.values_[j];
    return *this;
  }
  GridFunction& operator-=(const GridFunction& other) {
    check_same_grid(other);
    for (std::size_t j = 0; j < values_.size(); ++j) values_[j] -= other.values_[j];
    return *this;
  }
  GridFunction& operator*=(value_type c) {
    for (auto& z : values_) z *= c;
    return *this;
  }

  /// this += c * other
  GridFunction& axpy(value_type c, const GridFunction& other) {
    check_same_grid(other);
    for (std::size_t j = 0; j < values_.size(); ++j) values_[j] += c * other.values_[j];
    return *this;
  }

  friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
  friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
  friend GridFunction operator*(value_type c, GridFunction a) { return a *= c; }
  friend GridFunction operator*(GridFunction a, value_type c) { return a *= c; }

 private:
  void check_same_grid(const GridFunction& other) const {
    if (grid_ != other.grid_ && !(*grid_ == *other.grid_)) {
      throw std::invalid_argument("grid mismatch");
    }
  }

  GridPtr grid_;
  std::vector<value_type> values_;
};

template <class Real>
using Field = GridFunction<PhysicalDomain, Real>;
template <class Real>
using Spectrum = GridFunction<FrequencyDomain, Real>;

using ComplexField = Field<double>;
using SpectralField = Spectrum<double>;

namespace detail {

template <class Real>
struct Fftw;

template <>
struct Fftw<double> {
  using plan = fftw_plan;
  using complex = fftw_complex;
  static plan make(int n, complex* in, complex* out, int sign, unsigned flags) {
    return fftw_plan_dft_1d(n, in, out, sign, flags);
  }
  static void execute(plan p, complex* in, complex* out) { fftw_execute_dft(p, in, out); }
  static void destroy(plan p) { fftw_destroy_plan(p); }
};

template <>
struct Fftw<long double> {
  using plan = fftwl_plan;
  using complex = fftwl_complex;
  static plan make(int n, complex* in, complex* out, int sign, unsigned flags) {
    return fftwl_plan_dft_1d(n, in, out, sign, flags);
  }
  static void execute(plan p, complex* in, complex* out) { fftwl_execute_dft(p, in, out); }
  static void destroy(plan p) { fftwl_destroy_plan(p); }
};

// FFTW plans per transform length. Planning is serialized; execution through
// the new-array interface is thread-safe. FFTW_ESTIMATE keeps the chosen
// algorithm, and hence the bits of every result, independent of timing.
template <class Real>
class FftPlans {
  using Api = Fftw<Real>;
  using C = std::complex<Real>;

 public:
  explicit FftPlans(std::size_t n) : n_(n) {
    std::vector<C> a(n), b(n);
    auto* in = reinterpret_cast<typename Api::complex*>(a.data());
    auto* out = reinterpret_cast<typename Api::complex*>(b.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    const int len = static_cast<int>(n);
    forward_ = Api::make(len, in, out, FFTW_FORWARD, flags);
    backward_ = Api::make(len, in, out, FFTW_BACKWARD, flags);
  }
  ~FftPlans() {
    Api::destroy(forward_);
    Api::destroy(backward_);
  }
  FftPlans(const FftPlans&) = delete;
  FftPlans& operator=(const FftPlans&) = delete;

  // Unnormalized: out_k = sum_j exp(-2 pi i jk/n) in_j.
  void forward(std::span<const C> in, std::span<C> out) const { execute(forward_, in, out); }
  // Unnormalized: out_j = sum_k exp(+2 pi i jk/n) in_k.
  void backward(std::span<const C> in, std::span<C> out) const { execute(backward_, in, out); }

 private:
  void execute(typename Api::plan plan, std::span<const C> in, std::span<C> out) const {
    if (in.size() != n_ || out.size() != n_ || in.data() == out.data()) {
      throw std::logic_error("fft buffers must be distinct and of plan length");
    }
    Api::execute(plan, reinterpret_cast<typename Api::complex*>(const_cast<C*>(in.data())),
                 reinterpret_cast<typename Api::complex*>(out.data()));
  }

  std::size_t n_;
  typename Api::plan forward_{};
  typename Api::plan backward_{};
};

template <class Real = double>
const FftPlans<Real>& fft_plans(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, std::unique_ptr<FftPlans<Real>>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<FftPlans<Real>>(n);
  return *slot;
}

}  // namespace detail

template <class Real>
Spectrum<Real> dft_forward(const Field<Real>& f) {
  const auto& g = f.grid();
  Spectrum<Real> out(f.grid_ptr());
  detail::fft_plans<Real>(g.n()).forward(f.values(), out.values());
  // exp(-i xi_k x_0) = (-1)^k for x_0 = -L/2 and n even.
  const Real scale = g.dx() / std::sqrt(2 * std::numbers::pi_v<Real>);
  for (std::size_t k = 0; k < g.n(); ++k) out[k] *= (k % 2 == 0) ? scale : -scale;
  return out;
}

template <class Real>
Field<Real> dft_inverse(const Spectrum<Real>& fhat) {
  const auto& g = fhat.grid();
  std::vector<std::complex<Real>> shifted(fhat.values().begin(), fhat.values().end());
  const Real scale = g.dxi() / std::sqrt(2 * std::numbers::pi_v<Real>);
  for (std::size_t k = 0; k < g.n(); ++k) shifted[k] *= (k % 2 == 0) ? scale : -scale;
  Field<Real> out(fhat.grid_ptr());
  detail::fft_plans<Real>(g.n()).backward(shifted, out.values());
  return out;
}

/// Applies the Fourier multiplier symbol(xi) to f. The sign and
/// normalization factors of dft_forward/dft_inverse cancel and are skipped.
template <class Real, class Symbol>
Field<Real> apply_multiplier(const Field<Real>& f, Symbol&& symbol) {
  const auto& g = f.grid();
  const auto& plans = detail::fft_plans<Real>(g.n());
  std::vector<std::complex<Real>> spectrum(g.n());
  plans.forward(f.values(), spectrum);
  const Real inv_n = Real(1) / static_cast<Real>(g.n());
  const auto xi = g.frequencies();
  for (std::size_t k = 0; k < g.n(); ++k) {
    spectrum[k] *= std::complex<Real>(symbol(xi[k])) * inv_n;
  }
  Field<Real> out(f.grid_ptr());
  plans.backward(spectrum, out.values());
  return out;
}

/// z e^{i theta}, rescaled so |result| = |z| to rounding. A plain complex
/// product biases the modulus by about half an ulp, which accumulates over
/// long runs of unimodular multipliers.
template <class Real>
std::complex<Real> rotate(std::complex<Real> z, Real theta) {
  const Real c = std::cos(theta), s = std::sin(theta);
  const Real re = z.real() * c - z.imag() * s;
  const Real im = z.real() * s + z.imag() * c;
  const Real before = std::norm(z);
  const Real after = re * re + im * im;
  if (!(after > 0)) return {re, im};
  // First-order correction; a scale factor near 1 would itself be quantized.
  const Real correction = (before - after) / (2 * after);
  return {re + re * correction, im + im * correction};
}

/// Applies the unimodular multiplier exp(i phase(xi)) to f.
template <class Real, class Phase>
Field<Real> apply_phase(const Field<Real>& f, Phase&& phase) {
  const auto& g = f.grid();
  const auto& plans = detail::fft_plans<Real>(g.n());
  std::vector<std::complex<Real>> spectrum(g.n());
  plans.forward(f.values(), spectrum);
  const Real inv_n = Real(1) / static_cast<Real>(g.n());
  const auto xi = g.frequencies();
  for (std::size_t k = 0; k < g.n(); ++k) {
    spectrum[k] = rotate(spectrum[k], static_cast<Real>(phase(xi[k]))) * inv_n;
  }
  Field<Real> out(f.grid_ptr());
  plans.backward(spectrum, out.values());
  return out;
}

template <class Real>
Real l2_norm(const Field<Real>& f) {
  Real sum = 0;
  for (const auto& z : f.values()) sum += std::norm(z);
  return std::sqrt(sum * f.grid().dx());
}

/// L2 norm of a spectrum, integrated over the frequency lattice.
template <class Real>
Real l2_norm(const Spectrum<Real>& fhat) {
  Real sum = 0;
  for (const auto& z : fhat.values()) sum += std::norm(z);
  return std::sqrt(sum * fhat.grid().dxi());
}

template <class Real>
Real h1_norm(const Spectrum<Real>& fhat) {
  const auto xi = fhat.grid().frequencies();
  Real sum = 0;
  for (std::size_t k = 0; k < xi.size(); ++k) {
    sum += (1 + Real(xi[k]) * xi[k]) * std::norm(fhat[k]);
  }
  return std::sqrt(sum * fhat.grid().dxi());
}

template <class Real>
Real h1_norm(const Field<Real>& f) {
  return h1_norm(dft_forward(f));
}

/// ||d/dx f||_{L2}^2, evaluated spectrally.
template <class Real>
Real gradient_norm_squared(const Field<Real>& f) {
  const auto fhat = dft_forward(f);
  const auto xi = f.grid().frequencies();
  Real sum = 0;
  for (std::size_t k = 0; k < xi.size(); ++k) sum += Real(xi[k]) * xi[k] * std::norm(fhat[k]);
  return sum * f.grid().dxi();
}

/// Rectangle-rule L^p norm; p = infinity gives the sample maximum.
template <class Real>
Real lp_norm(const Field<Real>& f, double p) {
  if (std::isinf(p) && p > 0) {
    Real m = 0;
    for (const auto& z : f.values()) m = std::max(m, std::abs(z));
    return m;
  }
  if (!(p >= 1.0)) throw std::invalid_argument("lp_norm requires p >= 1");
  Real sum = 0;
  for (const auto& z : f.values()) sum += std::pow(std::abs(z), Real(p));
  return std::pow(sum * f.grid().dx(), Real(1) / Real(p));
}

/// Fraction of the H^1 weight carried by modes with |k| > n/3. Large values
/// mean the field is not resolved by the grid.
template <class Real>
double spectral_tail_fraction(const Field<Real>& f) {
  const auto fhat = dft_forward(f);
  const auto& g = f.grid();
  const auto xi = g.frequencies();
  const double cutoff = (2.0 / 3.0) * std::abs(xi[g.n() / 2]);
  Real total = 0, tail = 0;
  for (std::size_t k = 0; k < g.n(); ++k) {
    const Real w = (1 + Real(xi[k]) * xi[k]) * std::norm(fhat[k]);
    total += w;
    if (std::abs(xi[k]) > cutoff) tail += w;
  }
  return total > 0 ? static_cast<double>(tail / total) : 0.0;
}

struct DiagnosticRecord {
  double t = 0.0;
  double mass = 0.0;  // ||.||_{L2}^2
  double h1 = 0.0;
  double energy = 0.0;
};

/// Which unknown a trajectory stores: u of the full equation, v of the
/// transformed equation, or v of the averaged equation.
enum class Frame { lab, transformed, averaged };

template <class Real = double>
struct BasicTrajectory {
  Frame frame = Frame::lab;
  std::vector<double> times;
  std::vector<Field<Real>> snapshots;
  std::vector<DiagnosticRecord> diagnostics;

  void push(double t, Field<Real> field, const DiagnosticRecord& record) {
    if (!times.empty() && !(t > times.back())) {
      throw std::invalid_argument("trajectory times must be strictly increasing");
    }
    if (!snapshots.empty() && !(field.grid() == snapshots.front().grid())) {
      throw std::invalid_argument("trajectory snapshots must share one grid");
    }
    times.push_back(t);
    snapshots.push_back(std::move(field));
    diagnostics.push_back(record);
  }

  std::size_t size() const { return times.size(); }
};

using Trajectory = BasicTrajectory<double>;

/// Space-time norm (int ||u(t)||_{L^p}^q dt)^{1/q}, trapezoid rule over the
/// snapshot times; q = infinity gives the maximum over snapshots.
template <class Real>
double mixed_norm(const BasicTrajectory<Real>& tr, double p, double q) {
  if (tr.snapshots.empty()) throw std::invalid_argument("empty trajectory");
  if (std::isinf(q) && q > 0) {
    double m = 0.0;
    for (const auto& s : tr.snapshots) m = std::max(m, static_cast<double>(lp_norm(s, p)));
    return m;
  }
  if (!(q >= 1.0)) throw std::invalid_argument("mixed_norm requires q >= 1");
  if (tr.size() < 2) {
    throw std::invalid_argument("mixed_norm with finite q needs at least two snapshots");
  }
  double sum = 0.0;
  double prev = std::pow(static_cast<double>(lp_norm(tr.snapshots[0], p)), q);
  for (std::size_t i = 1; i < tr.size(); ++i) {
    const double cur = std::pow(static_cast<double>(lp_norm(tr.snapshots[i], p)), q);
    sum += 0.5 * (prev + cur) * (tr.times[i] - tr.times[i - 1]);
    prev = cur;
  }
  return std::pow(sum, 1.0 / q);
}

/// amplitude * exp(-(x-center)^2 / (2 width^2)) * exp(i chirp (x-center)^2)
///
/// Throws DomainTooSmall unless the envelope has decayed below 1e-14 at the
/// nearest domain edge, so periodic wrap-around stays invisible.
template <class Real = double>
Field<Real> gaussian_profile(const GridPtr& grid, double amplitude, double width,
                             double center = 0.0, double chirp = 0.0) {
  if (!(amplitude >= 0.0)) throw std::invalid_argument("amplitude must be >= 0");
  if (!(width > 0.0)) throw std::invalid_argument("width must be > 0");
  Field<Real> out(grid);
  if (amplitude == 0.0) return out;
  const double half = 0.5 * grid->length();
  const double edge = std::min(center + half, half - center);
  if (!(edge > 0.0) || std::exp(-edge * edge / (2.0 * width * width)) > 1e-14) {
    throw DomainTooSmall("gaussian of width " + std::to_string(width) +
                         " does not decay below 1e-14 inside a domain of length " +
                         std::to_string(grid->length()));
  }
  for (std::size_t j = 0; j < grid->n(); ++j) {
    const Real y = Real(grid->x(j)) - Real(center);
    out[j] = Real(amplitude) * std::exp(-y * y / (2 * Real(width) * Real(width))) *
             std::polar(Real(1), Real(chirp) * y * y);
  }
  return out;
}

}  // namespace dmnls
