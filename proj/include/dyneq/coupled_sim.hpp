#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dyneq/error.hpp"
#include "dyneq/numerics.hpp"
#include "dyneq/potentials.hpp"
#include "dyneq/trajectories.hpp"

// Two gravitating particles, each carried by its own conditional wave
// function. While the packets overlap, first- and second-order feedback
// fields are accumulated: the first-order integral drives the amplitude of
// the other particle's wave, the second-order integral shifts its phase.
// A velocity controller acts on the particle separation according to the
// sign and size of the two coupling residuals.
namespace dyneq {

enum class TrajectoryMode { guidance, vink };
// How a controller impulse combines with the guided motion of that step.
enum class ImpulseMode { supplement, replace };
enum class UpdateOrder { simultaneous, sequential };

struct SimulationConfig {
  std::size_t n_points = 1000;
  double length = 100.0;
  double dt = 0.01;
  double total_time = 1000.0;
  PhysicalConstants constants;

  double separation = 10.0;  // a; particles start at -a/2 and +a/2
  double sigma = 5.0;
  double phase1 = 0.0;
  double phase2 = 0.0;
  double speed = 0.05;  // initial |v|, carried as a plane-wave phase
  // +1 / -1 fixes a direction; 0 draws it from the seed.
  int direction1 = 1;
  int direction2 = -1;

  double softening = 5.0;
  double overlap_threshold = 0.01;  // infinity disables interaction
  double impulse_gain = 1.0;
  double dead_band = 1e-6;
  double tau_cap = 0.01;

  FeedbackSign feedback_sign = FeedbackSign::plus;
  SecondOrderVariant f2_variant = SecondOrderVariant::analytic;
  TrajectoryMode mode = TrajectoryMode::guidance;
  ImpulseMode impulse_mode = ImpulseMode::supplement;
  UpdateOrder update_order = UpdateOrder::simultaneous;

  double norm_lower = 0.1;
  double norm_upper = 10.0;
  bool continuity_diagnostics = false;
  std::uint64_t seed = 1;

  std::size_t steps() const {
    return static_cast<std::size_t>(std::llround(total_time / dt));
  }

  GravityParams gravity() const { return {constants, softening}; }

  bool interactions_enabled() const { return std::isfinite(overlap_threshold); }
};

struct StepRecord {
  double t = 0.0;
  double x1 = 0.0, x2 = 0.0;
  double v1 = 0.0, v2 = 0.0;
  double norm1 = 1.0, norm2 = 1.0;
  double residual_first = 0.0;
  double residual_second = 0.0;
  double net_gain = 0.0;
  double overlap = 0.0;
  double distance = 0.0;
  double continuity_residual = 0.0;
  bool interacting = false;
  bool impulse = false;
};

struct RunRecord {
  SimulationConfig config;
  int direction1 = 1;
  int direction2 = -1;
  std::vector<StepRecord> steps;
  std::string abort_status;  // empty on success
  std::size_t node_retries = 0;
  std::optional<double> boundary_flag_time;
  std::optional<double> first_interaction_time;
  std::optional<double> first_impulse_time;
  double continuity_residual_max = 0.0;

  bool aborted() const { return !abort_status.empty(); }
};

// Normalized overlap of the moduli, integral |psi1||psi2| dx / sqrt(N1 N2),
// which lies in [0, 1] and equals the plain integral for unit-norm fields.
inline double overlap_indicator(const ComplexField& psi1,
                                const ComplexField& psi2) {
  require_same_grid(psi1.grid, psi2.grid);
  double s = 0.0;
  for (std::size_t k = 0; k < psi1.size(); ++k)
    s += std::abs(psi1[k]) * std::abs(psi2[k]);
  const double dx = psi1.grid.spacing();
  const double denom = std::sqrt(norm(psi1) * norm(psi2));
  if (!(denom > 0.0)) return 0.0;
  return std::clamp(s * dx / denom, 0.0, 1.0);
}

struct EffectiveFields {
  RealField phase_potential;
  RealField amplitude_source;
};

// Potentials for one particle's wave function:
//   phase     V[x, X_other] - hbar/(2 m_other) * int F2 dt
//   amplitude (1/hbar) dX_other/dt * int F1 dt
inline EffectiveFields effective_fields(const SpatialGrid& grid,
                                        double other_position,
                                        const FeedbackAccumulator& acc,
                                        double other_velocity,
                                        double other_mass,
                                        const GravityParams& params) {
  EffectiveFields out{conditional_potential(grid, other_position, params),
                      RealField(grid.size(), 0.0)};
  if (!acc.active) return out;
  const double hbar = params.constants.hbar;
  const double phase_scale = -hbar / (2.0 * other_mass);
  const double amp_scale = other_velocity / hbar;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out.phase_potential[k] += phase_scale * acc.integral_second[k];
    out.amplitude_source[k] = amp_scale * acc.integral_first[k];
  }
  return out;
}

// (r1/hbar) v2 I1(X1) + (r2/hbar) v1 I2(X2), first-order integrals.
inline double coupling_residual_first(const SpatialGrid& grid,
                                      const FeedbackAccumulator& acc1,
                                      const FeedbackAccumulator& acc2,
                                      const ParticleState& p1,
                                      const ParticleState& p2, double r1,
                                      double r2,
                                      const PhysicalConstants& constants) {
  const double i1 = acc1.first_at(grid, p1.position);
  const double i2 = acc2.first_at(grid, p2.position);
  return (r1 / constants.hbar) * p2.velocity * i1 +
         (r2 / constants.hbar) * p1.velocity * i2;
}

// hbar/(2 m2) I1(X1) + hbar/(2 m1) I2(X2), second-order integrals.
inline double coupling_residual_second(const SpatialGrid& grid,
                                       const FeedbackAccumulator& acc1,
                                       const FeedbackAccumulator& acc2,
                                       const ParticleState& p1,
                                       const ParticleState& p2,
                                       const PhysicalConstants& constants) {
  const double i1 = acc1.second_at(grid, p1.position);
  const double i2 = acc2.second_at(grid, p2.position);
  return constants.hbar / (2.0 * p2.mass) * i1 +
         constants.hbar / (2.0 * p1.mass) * i2;
}

// Inside the dead band nothing happens. Otherwise the separation velocity
// changes by gain * |residual_second|, split equally and oppositely between
// the particles: opening the gap when residual_first > 0, closing it when
// residual_first < 0.
inline std::pair<ParticleState, ParticleState> stable_strategy_step(
    double residual_first, double residual_second, ParticleState p1,
    ParticleState p2, double gain, double dead_band) {
  if (!(gain > 0.0)) throw PreconditionError("impulse gain must be positive");
  if (std::abs(residual_first) <= dead_band) return {p1, p2};
  const double magnitude = gain * std::abs(residual_second);
  const double opening = residual_first > 0.0 ? 1.0 : -1.0;
  const double outward = p2.position >= p1.position ? 1.0 : -1.0;
  const double half = 0.5 * magnitude * opening * outward;
  p1.velocity -= half;
  p2.velocity += half;
  return {p1, p2};
}

// Pointwise residual of the continuity equation with feedback source,
//   d(r^2)/dt + (1/m) d/dx(r^2 ds/dx) - (2 r^2/hbar) v_other I1,
// forward difference in time, spatial terms averaged over both time levels,
// fourth-order differences in space. Zero outside the validity mask.
inline RealField continuity_residual(const PolarField& before,
                                     const PolarField& after,
                                     const FeedbackAccumulator& acc,
                                     double other_velocity, double mass,
                                     const PhysicalConstants& constants,
                                     double dt) {
  require_same_grid(before.grid, after.grid);
  if (!(dt > 0.0)) throw PreconditionError("dt must be positive");
  const std::size_t n = before.grid.size();
  const double h = before.grid.spacing();
  const auto flux_divergence = [&](const PolarField& p) {
    // r^2 s' / m, then its derivative; needs two valid neighbours each side.
    RealField flux(n, 0.0), div(n, 0.0);
    std::vector<bool> flux_ok(n, false);
    for (std::size_t k = 2; k + 2 < n; ++k) {
      bool ok = true;
      for (std::size_t j = k - 2; j <= k + 2; ++j) ok = ok && p.valid[j];
      if (!ok) continue;
      const auto& s = p.phase_action;
      const double ds = (-s[k + 2] + 8.0 * s[k + 1] - 8.0 * s[k - 1] + s[k - 2]) /
                        (12.0 * h);
      flux[k] = p.amplitude[k] * p.amplitude[k] * ds / mass;
      flux_ok[k] = true;
    }
    std::vector<bool> ok(n, false);
    for (std::size_t k = 2; k + 2 < n; ++k) {
      bool all = true;
      for (std::size_t j = k - 2; j <= k + 2; ++j) all = all && flux_ok[j];
      if (!all) continue;
      div[k] = (-flux[k + 2] + 8.0 * flux[k + 1] - 8.0 * flux[k - 1] +
                flux[k - 2]) /
               (12.0 * h);
      ok[k] = true;
    }
    return std::pair{div, ok};
  };
  const auto [div0, ok0] = flux_divergence(before);
  const auto [div1, ok1] = flux_divergence(after);
  RealField res(n, 0.0);
  const double source_scale = 2.0 * other_velocity / constants.hbar;
  for (std::size_t k = 0; k < n; ++k) {
    if (!ok0[k] || !ok1[k]) continue;
    const double rho0 = before.amplitude[k] * before.amplitude[k];
    const double rho1 = after.amplitude[k] * after.amplitude[k];
    const double source =
        acc.active ? source_scale * acc.integral_first[k] * 0.5 * (rho0 + rho1)
                   : 0.0;
    res[k] = (rho1 - rho0) / dt + 0.5 * (div0[k] + div1[k]) - source;
  }
  return res;
}

inline double max_abs(const RealField& f) {
  double m = 0.0;
  for (double v : f) m = std::max(m, std::abs(v));
  return m;
}

// Forward-difference derivative of norm1 + norm2; one entry shorter than
// the inputs.
inline std::vector<double> net_gain(const std::vector<double>& norms1,
                                    const std::vector<double>& norms2,
                                    double dt) {
  if (norms1.size() != norms2.size())
    throw PreconditionError("norm series have different lengths");
  if (!(dt > 0.0)) throw PreconditionError("dt must be positive");
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < norms1.size(); ++i)
    out.push_back(((norms1[i + 1] + norms2[i + 1]) - (norms1[i] + norms2[i])) /
                  dt);
  return out;
}

inline const SimulationConfig& validated(const SimulationConfig& c) {
  const auto fail = [](const char* key, const std::string& what) {
    throw ConfigError(key, what);
  };
  if (c.n_points < 8) fail("n_points", "must be at least 8");
  if (!(c.length > 0.0) || !std::isfinite(c.length))
    fail("length", "must be positive");
  if (!(c.dt > 0.0) || !std::isfinite(c.dt)) fail("dt", "must be positive");
  if (!(c.total_time > 0.0) || !std::isfinite(c.total_time))
    fail("total_time", "must be positive");
  if (std::abs(static_cast<double>(c.steps()) * c.dt - c.total_time) >
      1e-9 * c.total_time)
    fail("total_time", "must be an integer multiple of dt");
  if (!(c.constants.hbar > 0.0)) fail("hbar", "must be positive");
  if (!(c.constants.G > 0.0)) fail("G", "must be positive");
  if (!(c.constants.m1 > 0.0)) fail("m1", "must be positive");
  if (!(c.constants.m2 > 0.0)) fail("m2", "must be positive");
  if (!(c.separation > 0.0)) fail("separation", "must be positive");
  if (!(c.sigma > 4.0 * c.length / static_cast<double>(c.n_points)))
    fail("sigma", "must exceed four grid spacings");
  if (!(0.5 * c.separation + 5.0 * c.sigma < 0.5 * c.length))
    fail("sigma", "packets must fit inside the domain");
  if (!(c.speed >= 0.0) || !std::isfinite(c.speed))
    fail("speed", "must be finite and non-negative");
  if (c.direction1 < -1 || c.direction1 > 1)
    fail("direction1", "must be -1, 0 (random) or 1");
  if (c.direction2 < -1 || c.direction2 > 1)
    fail("direction2", "must be -1, 0 (random) or 1");
  if (!(c.softening > 0.0) || !std::isfinite(c.softening))
    fail("softening", "must be positive (trajectories may cross)");
  if (!(c.overlap_threshold >= 0.0)) fail("overlap_threshold", "must be >= 0");
  if (!(c.impulse_gain > 0.0)) fail("impulse_gain", "must be positive");
  if (!(c.dead_band > 0.0)) fail("dead_band", "must be positive");
  if (!(c.tau_cap > 0.0)) fail("tau_cap", "must be positive");
  if (!(c.norm_lower > 0.0 && c.norm_lower < 1.0))
    fail("norm_lower", "must lie in (0, 1)");
  if (!(c.norm_upper > 1.0)) fail("norm_upper", "must exceed 1");
  return c;
}

// Stepwise driver for one run. The loop per step:
//   1. overlap test; open or close the interaction window
//   2. accumulate both particles' feedback fields while open
//   3. evolve each wave function under its effective fields
//   4. move each particle (guidance velocity or lattice jump)
//   5. coupling residuals and the separation controller
//   6. diagnostics
class CoupledSimulation {
 public:
  explicit CoupledSimulation(const SimulationConfig& config)
      : config_(validated(config)),
        grid_(make_grid(config.n_points, config.length)),
        gravity_(config.gravity()),
        rng_(config.seed),
        stepper1_(grid_, config.constants.m1, config.dt, config.constants),
        stepper2_(grid_, config.constants.m2, config.dt, config.constants) {
    record_.config = config_;
    // Direction draws come first on the stream so they depend on the seed
    // alone.
    const auto draw = [&](int fixed) {
      if (fixed != 0) return fixed;
      return (rng_() >> 63) != 0 ? 1 : -1;
    };
    record_.direction1 = draw(config_.direction1);
    record_.direction2 = draw(config_.direction2);

    const auto& c = config_.constants;
    p1_ = {-0.5 * config_.separation, 0.0, c.m1, 1};
    p2_ = {0.5 * config_.separation, 0.0, c.m2, 2};
    if (config_.mode == TrajectoryMode::vink) {
      p1_.position = grid_.coordinate(grid_.nearest_index(p1_.position));
      p2_.position = grid_.coordinate(grid_.nearest_index(p2_.position));
    }
    const double k1 = c.m1 * config_.speed * record_.direction1 / c.hbar;
    const double k2 = c.m2 * config_.speed * record_.direction2 / c.hbar;
    psi1_ = make_gaussian(grid_, p1_.position, config_.sigma, config_.phase1, k1);
    psi2_ = make_gaussian(grid_, p2_.position, config_.sigma, config_.phase2, k2);
    p1_.velocity = guidance(psi1_, p1_, p1_.velocity);
    p2_.velocity = guidance(psi2_, p2_, p2_.velocity);
    norm1_ = norm(psi1_);
    norm2_ = norm(psi2_);
    record_.steps.reserve(config_.steps());
  }

  const SpatialGrid& grid() const noexcept { return grid_; }
  const ComplexField& psi1() const noexcept { return psi1_; }
  const ComplexField& psi2() const noexcept { return psi2_; }
  const ParticleState& particle1() const noexcept { return p1_; }
  const ParticleState& particle2() const noexcept { return p2_; }
  const FeedbackAccumulator& accumulator1() const noexcept { return acc1_; }
  const FeedbackAccumulator& accumulator2() const noexcept { return acc2_; }
  const RunRecord& record() const noexcept { return record_; }
  RunRecord take_record() { return std::move(record_); }
  double time() const noexcept {
    return static_cast<double>(step_index_) * config_.dt;
  }
  bool finished() const {
    return record_.aborted() || step_index_ >= config_.steps();
  }

  // Advances one step. Returns false once the run is complete or aborted.
  bool step() {
    if (finished()) return false;
    const double dt = config_.dt;
    const double t_next = static_cast<double>(step_index_ + 1) * dt;
    StepRecord row;
    row.t = t_next;

    // 1. interaction window
    row.overlap = overlap_indicator(psi1_, psi2_);
    row.interacting = config_.interactions_enabled() &&
                      row.overlap > config_.overlap_threshold;
    if (row.interacting && !acc1_.active) {
      acc1_ = FeedbackAccumulator::activated(grid_);
      acc2_ = FeedbackAccumulator::activated(grid_);
      if (!record_.first_interaction_time)
        record_.first_interaction_time = time();
    } else if (!row.interacting && acc1_.active) {
      acc1_ = reset_feedback(acc1_);
      acc2_ = reset_feedback(acc2_);
    }

    // 2. feedback accumulation at the current positions
    if (acc1_.active) {
      const double x1 = p1_.position, x2 = p2_.position;
      acc1_ = accumulate_feedback(
          std::move(acc1_),
          feedback_first(grid_, x1, x2, gravity_, config_.feedback_sign),
          feedback_second(grid_, x1, x2, gravity_, config_.f2_variant), dt,
          config_.tau_cap);
      acc2_ = accumulate_feedback(
          std::move(acc2_),
          feedback_first(grid_, x2, x1, gravity_, config_.feedback_sign),
          feedback_second(grid_, x2, x1, gravity_, config_.f2_variant), dt,
          config_.tau_cap);
    }

    // 3-4. waves and particles
    const ComplexField psi1_before = psi1_;
    const ComplexField psi2_before = psi2_;
    const ParticleState p1_before = p1_;
    const ParticleState p2_before = p2_;
    if (config_.update_order == UpdateOrder::simultaneous) {
      psi1_ = evolve(psi1_, stepper1_, acc1_, p2_before);
      psi2_ = evolve(psi2_, stepper2_, acc2_, p1_before);
      p1_ = move(psi1_before, psi1_, p1_before);
      p2_ = move(psi2_before, psi2_, p2_before);
    } else if (leads_with_first()) {
      psi1_ = evolve(psi1_, stepper1_, acc1_, p2_);
      p1_ = move(psi1_before, psi1_, p1_);
      psi2_ = evolve(psi2_, stepper2_, acc2_, p1_);
      p2_ = move(psi2_before, psi2_, p2_);
    } else {
      psi2_ = evolve(psi2_, stepper2_, acc2_, p1_);
      p2_ = move(psi2_before, psi2_, p2_);
      psi1_ = evolve(psi1_, stepper1_, acc1_, p2_);
      p1_ = move(psi1_before, psi1_, p1_);
    }

    // 5. coupling residuals and controller
    const double r1 = std::abs(interpolate(psi1_, p1_.position));
    const double r2 = std::abs(interpolate(psi2_, p2_.position));
    const auto& c = config_.constants;
    row.residual_first =
        coupling_residual_first(grid_, acc1_, acc2_, p1_, p2_, r1, r2, c);
    row.residual_second =
        coupling_residual_second(grid_, acc1_, acc2_, p1_, p2_, c);
    const auto [q1, q2] =
        stable_strategy_step(row.residual_first, row.residual_second, p1_, p2_,
                             config_.impulse_gain, config_.dead_band);
    const double dv1 = q1.velocity - p1_.velocity;
    const double dv2 = q2.velocity - p2_.velocity;
    if (dv1 != 0.0 || dv2 != 0.0) {
      row.impulse = true;
      if (!record_.first_impulse_time) record_.first_impulse_time = t_next;
      if (config_.impulse_mode == ImpulseMode::supplement) {
        p1_.position += dv1 * dt;
        p2_.position += dv2 * dt;
        p1_.velocity = q1.velocity;
        p2_.velocity = q2.velocity;
      } else {
        p1_.position = p1_before.position + dv1 * dt;
        p2_.position = p2_before.position + dv2 * dt;
        p1_.velocity = dv1;
        p2_.velocity = dv2;
      }
    }

    // 6. diagnostics
    const double n1 = norm(psi1_), n2 = norm(psi2_);
    row.x1 = p1_.position;
    row.x2 = p2_.position;
    row.v1 = p1_.velocity;
    row.v2 = p2_.velocity;
    row.norm1 = n1;
    row.norm2 = n2;
    row.net_gain = ((n1 + n2) - (norm1_ + norm2_)) / dt;
    row.distance = std::abs(p2_.position - p1_.position);
    norm1_ = n1;
    norm2_ = n2;
    if (config_.continuity_diagnostics) {
      const double rmin = default_r_min(psi1_before);
      const RealField res = continuity_residual(
          polar_decompose(psi1_before, rmin, c.hbar),
          polar_decompose(psi1_, rmin, c.hbar), acc1_, p2_before.velocity,
          c.m1, c, dt);
      row.continuity_residual = max_abs(res);
      record_.continuity_residual_max =
          std::max(record_.continuity_residual_max, row.continuity_residual);
    }
    if (!record_.boundary_flag_time &&
        std::max(boundary_density_fraction(psi1_),
                 boundary_density_fraction(psi2_)) > 1e-6)
      record_.boundary_flag_time = t_next;

    record_.steps.push_back(row);
    ++step_index_;

    if (!std::isfinite(n1) || !std::isfinite(n2) || n1 > config_.norm_upper ||
        n2 > config_.norm_upper || n1 < config_.norm_lower ||
        n2 < config_.norm_lower) {
      record_.abort_status = "norm out of bounds at t=" + std::to_string(t_next);
    } else if (!grid_.contains(p1_.position) || !grid_.contains(p2_.position)) {
      record_.abort_status =
          "particle left the domain at t=" + std::to_string(t_next);
    }
    return !finished();
  }

  void run() {
    while (step()) {
    }
  }

 private:
  // In sequential order the particle initially moving in +x updates first;
  // ties go to particle 1.
  bool leads_with_first() const {
    return !(record_.direction1 < 0 && record_.direction2 > 0);
  }

  ComplexField evolve(const ComplexField& psi, const SplitStepper& stepper,
                      const FeedbackAccumulator& acc,
                      const ParticleState& other) const {
    const EffectiveFields f = effective_fields(
        grid_, other.position, acc, other.velocity, other.mass, gravity_);
    return stepper.step(psi, f.phase_potential, f.amplitude_source);
  }

  double guidance(const ComplexField& psi, const ParticleState& p,
                  double fallback) {
    try {
      return bohmian_velocity(psi, spatial_derivative(psi, 1), p.position,
                              p.mass, config_.constants, default_r_min(psi));
    } catch (const NodeProximityError&) {
      ++record_.node_retries;
      return fallback;
    }
  }

  ParticleState move(const ComplexField& before, const ComplexField& after,
                     const ParticleState& p) {
    const double dt = config_.dt;
    if (config_.mode == TrajectoryMode::guidance)
      return advance_position(p, guidance(after, p, p.velocity), dt);
    const JumpKernel kernel = vink_kernel(before, p.mass, dt, config_.constants);
    const std::size_t site = grid_.nearest_index(p.position);
    const std::size_t next = sample_jump(kernel, site, rng_);
    const auto n = static_cast<long>(grid_.size());
    long jump = static_cast<long>(next) - static_cast<long>(site);
    if (jump > 1) jump -= n;
    if (jump < -1) jump += n;
    return advance_position(p, static_cast<double>(jump) * grid_.spacing() / dt,
                            dt);
  }

  SimulationConfig config_;
  SpatialGrid grid_;
  GravityParams gravity_;
  std::mt19937_64 rng_;
  SplitStepper stepper1_;
  SplitStepper stepper2_;
  ComplexField psi1_, psi2_;
  ParticleState p1_, p2_;
  FeedbackAccumulator acc1_, acc2_;
  double norm1_ = 1.0, norm2_ = 1.0;
  std::size_t step_index_ = 0;
  RunRecord record_;
};

inline RunRecord run_coupled(const SimulationConfig& config) {
  CoupledSimulation sim(config);
  sim.run();
  return sim.take_record();
}

// The same configuration with the interaction window never opening.
inline SimulationConfig decoupled(SimulationConfig config) {
  config.overlap_threshold = std::numeric_limits<double>::infinity();
  return config;
}

}  // namespace dyneq
