#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "dyneq/error.hpp"
#include "dyneq/fft.hpp"

namespace dyneq {

using Complex = std::complex<double>;
using RealField = std::vector<double>;

// Simulation units. Defaults are all one.
struct PhysicalConstants {
  double hbar = 1.0;
  double G = 1.0;
  double m1 = 1.0;
  double m2 = 1.0;

  void validate() const {
    if (!(hbar > 0.0) || !(G > 0.0) || !(m1 > 0.0) || !(m2 > 0.0))
      throw PreconditionError("physical constants must be strictly positive");
  }
};

// Uniform periodic grid of n cells on [-L/2, L/2); samples sit at cell
// centres x_k = -L/2 + (k + 1/2) dx, so the grid is symmetric about 0.
class SpatialGrid {
 public:
  SpatialGrid() = default;
  SpatialGrid(std::size_t n_points, double length)
      : n_(n_points), length_(length), spacing_(length / n_points) {}

  std::size_t size() const noexcept { return n_; }
  double length() const noexcept { return length_; }
  double spacing() const noexcept { return spacing_; }

  double coordinate(std::size_t k) const noexcept {
    return -0.5 * length_ + (static_cast<double>(k) + 0.5) * spacing_;
  }

  RealField coordinates() const {
    RealField x(n_);
    for (std::size_t k = 0; k < n_; ++k) x[k] = coordinate(k);
    return x;
  }

  // Angular wavenumbers in FFT order.
  RealField wavenumbers() const {
    RealField k(n_);
    const double dk = 2.0 * std::numbers::pi / length_;
    const auto n = static_cast<long>(n_);
    for (long j = 0; j < n; ++j) {
      const long m = j <= (n - 1) / 2 ? j : j - n;
      k[static_cast<std::size_t>(j)] = dk * static_cast<double>(m);
    }
    return k;
  }

  // Fractional cell index of x (cell centres are integers).
  double fractional_index(double x) const noexcept {
    return (x + 0.5 * length_) / spacing_ - 0.5;
  }

  std::size_t nearest_index(double x) const noexcept {
    const double f = std::round(fractional_index(x));
    const auto n = static_cast<long>(n_);
    long i = static_cast<long>(f) % n;
    if (i < 0) i += n;
    return static_cast<std::size_t>(i);
  }

  bool contains(double x) const noexcept {
    return x > -0.5 * length_ && x < 0.5 * length_;
  }

  friend bool operator==(const SpatialGrid& a, const SpatialGrid& b) {
    return a.n_ == b.n_ && a.length_ == b.length_;
  }

 private:
  std::size_t n_ = 0;
  double length_ = 0.0;
  double spacing_ = 0.0;
};

inline SpatialGrid make_grid(std::size_t n_points, double length) {
  if (n_points < 8)
    throw PreconditionError("grid needs at least 8 points, got " +
                            std::to_string(n_points));
  if (!(length > 0.0) || !std::isfinite(length))
    throw PreconditionError("grid length must be positive and finite");
  return SpatialGrid(n_points, length);
}

// Complex amplitudes sampled on a grid, units length^(-1/2).
struct ComplexField {
  SpatialGrid grid;
  std::vector<Complex> values;

  ComplexField() = default;
  explicit ComplexField(const SpatialGrid& g)
      : grid(g), values(g.size(), Complex{0.0, 0.0}) {}
  ComplexField(const SpatialGrid& g, std::vector<Complex> v)
      : grid(g), values(std::move(v)) {
    if (values.size() != grid.size())
      throw PreconditionError("field size does not match grid");
  }

  std::size_t size() const noexcept { return values.size(); }
  Complex& operator[](std::size_t k) { return values[k]; }
  const Complex& operator[](std::size_t k) const { return values[k]; }

  bool finite() const {
    return std::all_of(values.begin(), values.end(), [](const Complex& z) {
      return std::isfinite(z.real()) && std::isfinite(z.imag());
    });
  }
};

inline void require_same_grid(const SpatialGrid& a, const SpatialGrid& b) {
  if (!(a == b)) throw PreconditionError("fields live on different grids");
}

// sum |psi_k|^2 dx
inline double norm(const ComplexField& psi) {
  double s = 0.0;
  for (const auto& z : psi.values) s += std::norm(z);
  return s * psi.grid.spacing();
}

inline RealField density(const ComplexField& psi) {
  RealField rho(psi.size());
  for (std::size_t k = 0; k < psi.size(); ++k) rho[k] = std::norm(psi[k]);
  return rho;
}

inline ComplexField normalize(ComplexField psi) {
  const double n = norm(psi);
  if (!(n > 0.0) || !std::isfinite(n))
    throw DegenerateStateError("cannot normalize a field with zero norm");
  const double scale = 1.0 / std::sqrt(n);
  for (auto& z : psi.values) z *= scale;
  return psi;
}

// Gaussian envelope exp(-(x-c)^2 / (2 sigma^2)) e^{i phase0} e^{i k x},
// renormalized numerically to unit norm. The analytic prefactor
// (2 pi sigma^2)^(-1/4) does not normalize this exponent, so it is not used.
inline ComplexField make_gaussian(const SpatialGrid& grid, double center,
                                  double sigma, double phase0,
                                  double wavenumber = 0.0) {
  if (!(sigma > 4.0 * grid.spacing()))
    throw PreconditionError("gaussian width is not resolved by the grid");
  if (!(std::abs(center) + 5.0 * sigma < 0.5 * grid.length()))
    throw PreconditionError("gaussian packet overlaps the domain boundary");
  ComplexField psi(grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double x = grid.coordinate(k);
    const double u = (x - center) / sigma;
    psi[k] = std::exp(-0.5 * u * u) *
             std::polar(1.0, phase0 + wavenumber * (x - center));
  }
  return normalize(std::move(psi));
}

inline double mean_position(const ComplexField& psi) {
  double m0 = 0.0, m1 = 0.0;
  for (std::size_t k = 0; k < psi.size(); ++k) {
    const double p = std::norm(psi[k]);
    m0 += p;
    m1 += p * psi.grid.coordinate(k);
  }
  return m1 / m0;
}

// sqrt(2 * variance of |psi|^2); equals sigma for the Gaussian above.
inline double packet_width(const ComplexField& psi) {
  const double mu = mean_position(psi);
  double m0 = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < psi.size(); ++k) {
    const double p = std::norm(psi[k]);
    const double d = psi.grid.coordinate(k) - mu;
    m0 += p;
    m2 += p * d * d;
  }
  return std::sqrt(2.0 * m2 / m0);
}

// Fraction of total probability held by the outer 5% of cells on each side.
inline double boundary_density_fraction(const ComplexField& psi) {
  const std::size_t n = psi.size();
  const std::size_t edge = std::max<std::size_t>(1, n / 20);
  double edge_sum = 0.0, total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double p = std::norm(psi[k]);
    total += p;
    if (k < edge || k >= n - edge) edge_sum += p;
  }
  return total > 0.0 ? edge_sum / total : 0.0;
}

enum class DerivativeScheme { spectral, finite_difference };

namespace detail {

template <typename T>
std::vector<T> central_difference(const std::vector<T>& f, double h,
                                  int order) {
  const std::size_t n = f.size();
  std::vector<T> d(n);
  for (std::size_t k = 0; k < n; ++k) {
    const T& left = f[(k + n - 1) % n];
    const T& right = f[(k + 1) % n];
    d[k] = order == 1 ? (right - left) / (2.0 * h)
                      : (right - 2.0 * f[k] + left) / (h * h);
  }
  return d;
}

}  // namespace detail

inline ComplexField spatial_derivative(
    const ComplexField& psi, int order,
    DerivativeScheme scheme = DerivativeScheme::spectral) {
  if (order != 1 && order != 2)
    throw PreconditionError("derivative order must be 1 or 2");
  if (scheme == DerivativeScheme::finite_difference)
    return ComplexField(psi.grid, detail::central_difference(
                                      psi.values, psi.grid.spacing(), order));

  const std::size_t n = psi.size();
  const RealField k = psi.grid.wavenumbers();
  ComplexField out = psi;
  FourierTransform fft(n);
  fft.forward(out.values);
  for (std::size_t j = 0; j < n; ++j) {
    if (order == 1) {
      // The Nyquist mode has no odd partner; drop it.
      const bool nyquist = n % 2 == 0 && j == n / 2;
      out[j] *= nyquist ? Complex{0.0, 0.0} : Complex{0.0, k[j]};
    } else {
      out[j] *= -k[j] * k[j];
    }
  }
  fft.backward(out.values);
  return out;
}

inline RealField spatial_derivative(const RealField& f, const SpatialGrid& grid,
                                    int order) {
  return detail::central_difference(f, grid.spacing(), order);
}

// Amplitude/phase representation psi = r exp(i s / hbar). The phase action s
// is unwrapped left to right across the valid cells only.
struct PolarField {
  SpatialGrid grid;
  RealField amplitude;
  RealField phase_action;
  std::vector<bool> valid;

  std::size_t valid_count() const {
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true));
  }
};

inline PolarField polar_decompose(const ComplexField& psi, double r_min,
                                  double hbar = 1.0) {
  if (!psi.finite()) throw PreconditionError("field contains NaN or Inf");
  if (!(r_min > 0.0)) throw PreconditionError("r_min must be positive");
  const std::size_t n = psi.size();
  PolarField out{psi.grid, RealField(n), RealField(n, 0.0),
                 std::vector<bool>(n, false)};
  bool have_previous = false;
  double previous_phase = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double r = std::abs(psi[k]);
    out.amplitude[k] = r;
    if (r < r_min) continue;
    out.valid[k] = true;
    double phase = std::arg(psi[k]);
    if (have_previous) {
      const double two_pi = 2.0 * std::numbers::pi;
      phase += two_pi * std::round((previous_phase - phase) / two_pi);
    }
    previous_phase = phase;
    have_previous = true;
    out.phase_action[k] = hbar * phase;
  }
  if (!have_previous)
    throw DegenerateStateError("every cell is below r_min");
  return out;
}

// Default validity threshold: 1e-6 of the peak amplitude.
inline double default_r_min(const ComplexField& psi) {
  double peak = 0.0;
  for (const auto& z : psi.values) peak = std::max(peak, std::abs(z));
  return 1e-6 * peak;
}

// Strang-split propagator for
//   i hbar dpsi/dt = -hbar^2/(2m) psi'' + V psi,   then   psi *= exp(A dt)
// where V is the phase potential and A the amplitude source. Holds the
// kinetic phase table and an FFT work buffer; not safe for concurrent use.
class SplitStepper {
 public:
  SplitStepper(const SpatialGrid& grid, double mass, double dt,
               const PhysicalConstants& constants)
      : grid_(grid), dt_(dt), hbar_(constants.hbar), fft_(grid.size()),
        kinetic_(grid.size()) {
    if (!(dt >= 0.0)) throw PreconditionError("dt must be non-negative");
    if (!(mass > 0.0)) throw PreconditionError("mass must be positive");
    const RealField k = grid.wavenumbers();
    for (std::size_t j = 0; j < k.size(); ++j)
      kinetic_[j] = std::polar(1.0, -hbar_ * k[j] * k[j] * dt / (2.0 * mass));
  }

  double dt() const noexcept { return dt_; }
  const SpatialGrid& grid() const noexcept { return grid_; }

  ComplexField step(ComplexField psi, std::span<const double> phase_potential,
                    std::span<const double> amplitude_source) const {
    require_same_grid(psi.grid, grid_);
    const std::size_t n = psi.size();
    if (phase_potential.size() != n || amplitude_source.size() != n)
      throw PreconditionError("potential fields do not match the grid");
    if (dt_ == 0.0) return psi;

    const double half = -0.5 * dt_ / hbar_;
    for (std::size_t k = 0; k < n; ++k)
      psi[k] *= std::polar(1.0, half * phase_potential[k]);
    fft_.forward(psi.values);
    for (std::size_t j = 0; j < n; ++j) psi[j] *= kinetic_[j];
    fft_.backward(psi.values);
    for (std::size_t k = 0; k < n; ++k)
      psi[k] *= std::polar(std::exp(amplitude_source[k] * dt_),
                           half * phase_potential[k]);
    return psi;
  }

 private:
  SpatialGrid grid_;
  double dt_;
  double hbar_;
  mutable FourierTransform fft_;
  std::vector<Complex> kinetic_;
};

// One split-operator step. Builds a fresh propagator; loops should hold a
// SplitStepper instead.
inline ComplexField evolve_step(const ComplexField& psi,
                                std::span<const double> phase_potential,
                                std::span<const double> amplitude_source,
                                double mass, double dt,
                                const PhysicalConstants& constants) {
  if (!(dt >= 0.0)) throw PreconditionError("dt must be non-negative");
  if (dt == 0.0) return psi;
  return SplitStepper(psi.grid, mass, dt, constants)
      .step(psi, phase_potential, amplitude_source);
}

// Four-point Lagrange interpolation on the periodic grid.
template <typename T>
T cubic_interpolate(std::span<const T> values, const SpatialGrid& grid,
                    double x) {
  const auto n = static_cast<long>(values.size());
  const double f = grid.fractional_index(x);
  const long i0 = static_cast<long>(std::floor(f));
  const double u = f - static_cast<double>(i0);
  const double w[4] = {
      -u * (u - 1.0) * (u - 2.0) / 6.0,
      (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
      -(u + 1.0) * u * (u - 2.0) / 2.0,
      (u + 1.0) * u * (u - 1.0) / 6.0,
  };
  T acc{};
  for (int j = 0; j < 4; ++j) {
    long idx = (i0 - 1 + j) % n;
    if (idx < 0) idx += n;
    acc += w[j] * values[static_cast<std::size_t>(idx)];
  }
  return acc;
}

inline Complex interpolate(const ComplexField& psi, double x) {
  return cubic_interpolate<Complex>(psi.values, psi.grid, x);
}

inline double interpolate(const RealField& f, const SpatialGrid& grid,
                          double x) {
  return cubic_interpolate<double>(f, grid, x);
}

}  // namespace dyneq
