#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "dyneq/nash.hpp"
#include "dyneq/numerics.hpp"
#include "dyneq/potentials.hpp"
#include "dyneq/trajectories.hpp"

// Self-contained numerical experiments shared by the CLI and the tests.
namespace dyneq::checks {

// ---- second-order feedback versus finite differences of the first ----

struct FeedbackSample {
  double x, own, other;
};

struct FeedbackOracleReport {
  double softening = 0.0;
  std::size_t samples = 0;
  double max_relative_error = 0.0;  // analytic vs finite difference
  double max_printed_gap = 0.0;     // |printed - analytic|
  double max_printed_relative_gap = 0.0;
};

// Scalar F1 (minus sign, i.e. the true x2-derivative of the potential
// difference) at one point.
inline double first_order_point(const FeedbackSample& s,
                                const GravityParams& p) {
  const double eps = p.softening;
  return -p.coupling() * (detail::first_kernel(s.x - s.other, eps) -
                          detail::first_kernel(s.own - s.other, eps));
}

inline double second_order_point(const FeedbackSample& s,
                                 const GravityParams& p,
                                 SecondOrderVariant variant) {
  const auto kernel = variant == SecondOrderVariant::analytic
                          ? detail::second_kernel_analytic
                          : detail::second_kernel_printed;
  const double eps = p.softening;
  return p.coupling() *
         (kernel(s.x - s.other, eps) - kernel(s.own - s.other, eps));
}

// Points with x and own within `spread` of other.
inline std::vector<FeedbackSample> feedback_samples(std::size_t count,
                                                    std::uint64_t seed,
                                                    double spread = 5.0) {
  std::mt19937_64 rng(seed);
  const auto u = [&](double lo, double hi) {
    return lo + (hi - lo) * uniform_unit(rng);
  };
  std::vector<FeedbackSample> out(count);
  for (auto& s : out) {
    s.other = u(-10.0, 10.0);
    s.x = s.other + u(-spread, spread);
    s.own = s.other + u(-spread, spread);
  }
  return out;
}

// Relative error is measured against the size of the two terms being
// differenced, |k(x - x2)| + |k(x1 - x2)|, so that near-cancellations do
// not inflate it. The step is h times the local length scale
// sqrt(min(u^2, w^2) + eps^2), which keeps the truncation error uniform when
// a sample sits close to the other particle.
inline FeedbackOracleReport feedback_oracle(
    const GravityParams& params, const std::vector<FeedbackSample>& samples,
    double h_rel = 1e-4) {
  FeedbackOracleReport r;
  r.softening = params.softening;
  r.samples = samples.size();
  const double eps = params.softening;
  for (const auto& s : samples) {
    const double u = s.x - s.other, w = s.own - s.other;
    const double h = h_rel * std::sqrt(std::min(u * u, w * w) + eps * eps);
    FeedbackSample up = s, down = s;
    up.other += h;
    down.other -= h;
    const double fd = (first_order_point(up, params) -
                       first_order_point(down, params)) /
                      (2.0 * h);
    const double analytic =
        second_order_point(s, params, SecondOrderVariant::analytic);
    const double printed =
        second_order_point(s, params, SecondOrderVariant::printed);
    const double scale =
        params.coupling() *
        (std::abs(detail::second_kernel_analytic(s.x - s.other, eps)) +
         std::abs(detail::second_kernel_analytic(s.own - s.other, eps)));
    r.max_relative_error =
        std::max(r.max_relative_error, std::abs(fd - analytic) / scale);
    r.max_printed_gap = std::max(r.max_printed_gap, std::abs(printed - analytic));
    r.max_printed_relative_gap =
        std::max(r.max_printed_relative_gap, std::abs(printed - analytic) / scale);
  }
  return r;
}

// ---- lattice walkers against the evolving density ----

struct EquivarianceConfig {
  std::size_t n_points = 1000;
  double length = 100.0;
  double sigma = 1.0;
  double wavenumber = 2.0;
  double dt = 0.01;
  double total_time = 2.0;
  std::size_t walkers = 10000;
  std::size_t bins = 50;
  std::uint64_t seed = 1;
  PhysicalConstants constants;
};

struct EquivarianceReport {
  double total_variation = 0.0;
  double walker_mean = 0.0;
  double density_mean = 0.0;
  std::size_t steps = 0;
  std::vector<double> bin_edges;
  std::vector<double> walker_histogram;   // fractions
  std::vector<double> density_histogram;  // probabilities
};

// Free Gaussian evolved by the split stepper while an ensemble sampled from
// |psi_0|^2 follows the minimal-jump kernel. Walkers sit on lattice sites,
// so the density is binned over exactly the same sites.
inline EquivarianceReport vink_equivariance(const EquivarianceConfig& cfg) {
  const SpatialGrid grid = make_grid(cfg.n_points, cfg.length);
  const double mass = cfg.constants.m1;
  ComplexField psi = make_gaussian(grid, 0.0, cfg.sigma, 0.0, cfg.wavenumber);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> sites(cfg.walkers);
  for (auto& s : sites) s = sample_site(psi, rng);

  const SplitStepper stepper(grid, mass, cfg.dt, cfg.constants);
  const RealField zero(grid.size(), 0.0);
  const auto steps =
      static_cast<std::size_t>(std::llround(cfg.total_time / cfg.dt));
  for (std::size_t i = 0; i < steps; ++i) {
    const JumpKernel kernel = vink_kernel(psi, mass, cfg.dt, cfg.constants);
    for (auto& s : sites) s = sample_jump(kernel, s, rng);
    psi = stepper.step(psi, zero, zero);
  }

  EquivarianceReport r;
  r.steps = steps;
  const RealField rho = density(psi);
  const double dx = grid.spacing();
  double mean = 0.0, second = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double x = grid.coordinate(k);
    mean += x * rho[k] * dx;
    second += x * x * rho[k] * dx;
  }
  const double spread = std::sqrt(std::max(0.0, second - mean * mean));
  r.density_mean = mean;
  const double lo = mean - 5.0 * spread, hi = mean + 5.0 * spread;
  const double width = (hi - lo) / static_cast<double>(cfg.bins);
  const auto bin_of = [&](std::size_t site) {
    const double b = std::floor((grid.coordinate(site) - lo) / width);
    return static_cast<std::size_t>(
        std::clamp(b, 0.0, static_cast<double>(cfg.bins - 1)));
  };
  r.bin_edges.resize(cfg.bins + 1);
  for (std::size_t b = 0; b <= cfg.bins; ++b)
    r.bin_edges[b] = lo + width * static_cast<double>(b);
  r.walker_histogram.assign(cfg.bins, 0.0);
  r.density_histogram.assign(cfg.bins, 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) total += rho[k];
  for (std::size_t k = 0; k < grid.size(); ++k)
    r.density_histogram[bin_of(k)] += rho[k] / total;
  const double w = 1.0 / static_cast<double>(cfg.walkers);
  for (std::size_t s : sites) {
    r.walker_histogram[bin_of(s)] += w;
    r.walker_mean += grid.coordinate(s) * w;
  }
  for (std::size_t b = 0; b < cfg.bins; ++b)
    r.total_variation +=
        0.5 * std::abs(r.walker_histogram[b] - r.density_histogram[b]);
  return r;
}

// ---- Nash fixed-point suite on random nonnegative games ----

inline nash::BimatrixGame random_game(Eigen::Index rows, Eigen::Index cols,
                                      std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 10.0);
  nash::Matrix a(rows, cols), b(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      a(i, j) = u(rng);
      b(i, j) = u(rng);
    }
  return nash::BimatrixGame(a, b);
}

struct NashSuiteReport {
  std::size_t games = 0;
  std::size_t equilibria = 0;
  std::size_t empty_enumerations = 0;
  std::size_t not_fixed = 0;       // enumerated but moved by the map
  std::size_t not_best_reply = 0;  // enumerated but fails the support check
  double max_fixed_point_residual = 0.0;
  std::size_t searches_converged = 0;
  std::size_t searches_rejected = 0;  // converged yet fails the support check
};

// Alternates 2x2 and 3x3 games.
inline NashSuiteReport nash_suite(std::size_t count, std::uint64_t seed,
                                  double tol = 1e-8) {
  std::mt19937_64 rng(seed);
  NashSuiteReport r;
  for (std::size_t k = 0; k < count; ++k) {
    const Eigen::Index n = k % 2 == 0 ? 2 : 3;
    const nash::BimatrixGame g = random_game(n, n, rng);
    ++r.games;
    const auto en = nash::enumerate_equilibria_small(g, tol);
    if (en.equilibria.empty()) ++r.empty_enumerations;
    for (const auto& e : en.equilibria) {
      ++r.equilibria;
      const double res = nash::max_abs_difference(nash::advantage_step(e, g), e);
      r.max_fixed_point_residual = std::max(r.max_fixed_point_residual, res);
      if (!(res <= tol)) ++r.not_fixed;
      if (!nash::best_response_check(e, g, tol).both()) ++r.not_best_reply;
    }
    nash::SearchOptions opt;
    opt.tol = tol;
    opt.max_iter = 20000;
    const auto s = nash::find_equilibrium(g, opt);
    if (s.status == nash::SearchStatus::converged) {
      ++r.searches_converged;
      if (!nash::best_response_check(s.profile, g, 1e-6).both())
        ++r.searches_rejected;
    }
  }
  return r;
}

inline bool passed(const NashSuiteReport& r) {
  return r.games > 0 && r.empty_enumerations == 0 && r.not_fixed == 0 &&
         r.not_best_reply == 0 && r.searches_rejected == 0;
}

}  // namespace dyneq::checks
