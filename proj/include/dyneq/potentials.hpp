#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "dyneq/error.hpp"
#include "dyneq/numerics.hpp"

namespace dyneq {

// Newtonian coupling with Plummer softening: 1/|d| -> 1/sqrt(d^2 + eps^2).
struct GravityParams {
  PhysicalConstants constants;
  double softening = 0.0;

  double coupling() const {
    return constants.G * constants.m1 * constants.m2;
  }

  void validate() const {
    constants.validate();
    if (!(softening >= 0.0) || !std::isfinite(softening))
      throw PreconditionError("softening must be finite and non-negative");
  }
};

// Overall sign of the first-order feedback field. `plus` keeps the
// tabulated +G m1 m2 prefactor; `minus` is the sign that direct
// differentiation of -G m1 m2/|x - x2| with respect to x2 produces.
enum class FeedbackSign { plus, minus };

// `printed` evaluates the tabulated closed form of the second-order field;
// `analytic` is the true second x2-derivative of the softened potential.
enum class SecondOrderVariant { printed, analytic };

inline double sign_factor(FeedbackSign s) {
  return s == FeedbackSign::plus ? 1.0 : -1.0;
}

namespace detail {

inline double softened_distance(double d, double eps) {
  const double r = std::sqrt(d * d + eps * eps);
  if (r == 0.0)
    throw SingularEvaluationError(
        "gravitational kernel evaluated at zero separation without softening");
  return r;
}

// u / |u|^3
inline double first_kernel(double u, double eps) {
  const double r = softened_distance(u, eps);
  return u / (r * r * r);
}

// -(2u^2 - eps^2) / r^5 : d^2/dx2^2 of -1/r(x - x2)
inline double second_kernel_analytic(double u, double eps) {
  const double r = softened_distance(u, eps);
  const double r2 = r * r;
  return -(2.0 * u * u - eps * eps) / (r2 * r2 * r);
}

// (3u^3 - |u|) / |u|^6
inline double second_kernel_printed(double u, double eps) {
  const double r = softened_distance(u, eps);
  const double r3 = r * r * r;
  return (3.0 * u * u * u - r) / (r3 * r3);
}

}  // namespace detail

// V_k = -G m1 m2 / |x_k - other|
inline RealField conditional_potential(const SpatialGrid& grid,
                                       double other_position,
                                       const GravityParams& params) {
  const double g = params.coupling();
  RealField v(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k)
    v[k] = -g / detail::softened_distance(grid.coordinate(k) - other_position,
                                          params.softening);
  return v;
}

inline double relative_conditional_potential(double x1, double x2,
                                             const GravityParams& params) {
  return -params.coupling() /
         detail::softened_distance(x1 - x2, params.softening);
}

// First-order field felt by the particle at `own`, sourced by `other`:
//   G m1 m2 [ (x - other)/|x - other|^3 - (own - other)/|own - other|^3 ]
// It vanishes at x = own.
inline RealField feedback_first(const SpatialGrid& grid, double own,
                                double other, const GravityParams& params,
                                FeedbackSign sign = FeedbackSign::plus) {
  const double g = sign_factor(sign) * params.coupling();
  const double eps = params.softening;
  const double reference = detail::first_kernel(own - other, eps);
  RealField f(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k)
    f[k] = g * (detail::first_kernel(grid.coordinate(k) - other, eps) -
                reference);
  return f;
}

inline RealField feedback_second(
    const SpatialGrid& grid, double own, double other,
    const GravityParams& params,
    SecondOrderVariant variant = SecondOrderVariant::analytic) {
  const double g = params.coupling();
  const double eps = params.softening;
  const auto kernel = variant == SecondOrderVariant::analytic
                          ? detail::second_kernel_analytic
                          : detail::second_kernel_printed;
  const double reference = kernel(own - other, eps);
  RealField f(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k)
    f[k] = g * (kernel(grid.coordinate(k) - other, eps) - reference);
  return f;
}

// Running time-integrals of the two feedback fields over one interaction
// window. Inactive accumulators hold empty (all-zero) integrals.
struct FeedbackAccumulator {
  RealField integral_first;
  RealField integral_second;
  double window_elapsed = 0.0;
  bool active = false;

  static FeedbackAccumulator activated(const SpatialGrid& grid) {
    return {RealField(grid.size(), 0.0), RealField(grid.size(), 0.0), 0.0,
            true};
  }

  bool saturated(double tau_cap) const { return window_elapsed >= tau_cap; }

  double first_at(const SpatialGrid& grid, double x) const {
    return active ? interpolate(integral_first, grid, x) : 0.0;
  }
  double second_at(const SpatialGrid& grid, double x) const {
    return active ? interpolate(integral_second, grid, x) : 0.0;
  }
};

// Rectangle-rule accumulation; holds once window_elapsed reaches tau_cap.
inline FeedbackAccumulator accumulate_feedback(
    FeedbackAccumulator acc, std::span<const double> f1,
    std::span<const double> f2, double dt,
    double tau_cap = std::numeric_limits<double>::infinity()) {
  if (!acc.active)
    throw PreconditionError("accumulate_feedback on an inactive accumulator");
  if (!(dt > 0.0)) throw PreconditionError("dt must be positive");
  if (f1.size() != acc.integral_first.size() ||
      f2.size() != acc.integral_second.size())
    throw PreconditionError("feedback field size does not match accumulator");
  if (acc.saturated(tau_cap)) return acc;
  for (std::size_t k = 0; k < f1.size(); ++k) {
    acc.integral_first[k] += f1[k] * dt;
    acc.integral_second[k] += f2[k] * dt;
  }
  acc.window_elapsed += dt;
  return acc;
}

inline FeedbackAccumulator reset_feedback(const FeedbackAccumulator&) {
  return {};
}

}  // namespace dyneq
