#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dyneq/error.hpp"
#include "dyneq/numerics.hpp"

namespace dyneq {

struct ParticleState {
  double position = 0.0;
  double velocity = 0.0;
  double mass = 1.0;
  int label = 1;
};

// Guidance velocity (hbar/m) Im(psi'/psi) at x, with psi and psi'
// cubic-interpolated from the grid. `derivative` is psi' on the same grid.
inline double bohmian_velocity(const ComplexField& psi,
                               const ComplexField& derivative, double x,
                               double mass, const PhysicalConstants& constants,
                               double r_min) {
  const Complex value = interpolate(psi, x);
  if (std::abs(value) < r_min)
    throw NodeProximityError("guidance velocity undefined near a node at x=" +
                             std::to_string(x));
  const Complex slope = interpolate(derivative, x);
  return constants.hbar / mass * std::imag(slope / value);
}

inline double bohmian_velocity(const ComplexField& psi, double x, double mass,
                               const PhysicalConstants& constants) {
  return bohmian_velocity(psi, spatial_derivative(psi, 1), x, mass, constants,
                          default_r_min(psi));
}

// Explicit Euler position update.
inline ParticleState advance_position(ParticleState state, double v,
                                      double dt) {
  if (!(dt > 0.0)) throw PreconditionError("dt must be positive");
  state.velocity = v;
  state.position += v * dt;
  return state;
}

// J = (hbar/m) Im(conj(psi) psi')
inline RealField probability_current(const ComplexField& psi, double mass,
                                     const PhysicalConstants& constants) {
  const ComplexField d = spatial_derivative(psi, 1);
  RealField j(psi.size());
  for (std::size_t k = 0; k < psi.size(); ++k)
    j[k] = constants.hbar / mass * std::imag(std::conj(psi[k]) * d[k]);
  return j;
}

// Nearest-neighbour jump probabilities for one time step.
struct JumpKernel {
  RealField left;
  RealField stay;
  RealField right;

  std::size_t size() const noexcept { return stay.size(); }
};

// Minimal-jump kernel: probability flows only along the direction of the
// face current J_{k+1/2} = (J_k + J_{k+1})/2, so that
//   P_k(t+dt) = P_k - dt/dx (J_{k+1/2} - J_{k-1/2}).
// Cells with density below `density_floor` (relative to the peak) never jump.
inline JumpKernel vink_kernel(const ComplexField& psi, double mass, double dt,
                              const PhysicalConstants& constants,
                              double density_floor = 1e-12) {
  if (!(dt > 0.0)) throw PreconditionError("dt must be positive");
  const std::size_t n = psi.size();
  const RealField current = probability_current(psi, mass, constants);
  const RealField rho = density(psi);
  double peak = 0.0;
  for (double p : rho) peak = std::max(peak, p);
  const double floor = density_floor * peak;
  const double dx = psi.grid.spacing();

  JumpKernel kernel{RealField(n, 0.0), RealField(n, 1.0), RealField(n, 0.0)};
  for (std::size_t k = 0; k < n; ++k) {
    if (rho[k] < floor || rho[k] <= 0.0) continue;
    const double face_right = 0.5 * (current[k] + current[(k + 1) % n]);
    const double face_left = 0.5 * (current[(k + n - 1) % n] + current[k]);
    const double scale = dt / (rho[k] * dx);
    const double pr = std::max(0.0, face_right) * scale;
    const double pl = std::max(0.0, -face_left) * scale;
    if (pl + pr > 1.0)
      throw ProbabilityOverflowError(
          "jump probability exceeds one at cell " + std::to_string(k) +
              "; reduce dt",
          k);
    kernel.right[k] = pr;
    kernel.left[k] = pl;
    kernel.stay[k] = 1.0 - pl - pr;
  }
  return kernel;
}

// Uniform double in [0, 1) from the top 53 bits; identical on every
// platform, unlike std::uniform_real_distribution.
inline double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Next lattice site for a walker at `site` (periodic).
inline std::size_t sample_jump(const JumpKernel& kernel, std::size_t site,
                               std::mt19937_64& rng) {
  const std::size_t n = kernel.size();
  if (site >= n) throw PreconditionError("site index out of range");
  const double u = uniform_unit(rng);
  if (u < kernel.left[site]) return (site + n - 1) % n;
  if (u < kernel.left[site] + kernel.stay[site]) return site;
  return (site + 1) % n;
}

// Draws a lattice site with probability proportional to |psi_k|^2.
inline std::size_t sample_site(const ComplexField& psi, std::mt19937_64& rng) {
  double total = 0.0;
  for (const auto& z : psi.values) total += std::norm(z);
  double target = uniform_unit(rng) * total;
  for (std::size_t k = 0; k < psi.size(); ++k) {
    target -= std::norm(psi[k]);
    if (target < 0.0) return k;
  }
  return psi.size() - 1;
}

}  // namespace dyneq
