#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "dyneq/error.hpp"

// Phase-accumulation entanglement witness for two particles, each split into
// a left and a right branch. Branch pair (i, j) picks up the phase
// gamma / d_ij; the resulting two-qubit state is scored with
//   W = |<sigma_x (x) sigma_z> + <sigma_y (x) sigma_y>|,
// which is at most 1 on separable states.
namespace dyneq::witness {

// Phases of the |LL>, |LR>, |RL>, |RR> branches.
struct BranchPhases {
  double ll = 0.0;
  double lr = 0.0;
  double rl = 0.0;
  double rr = 0.0;
};

struct WitnessConfig {
  double delta_x_wide = 0.25;
  double delta_x_split = 0.1;
  std::vector<double> gamma_values{0.05, 0.1, 0.2};
  double r_min = 0.4;
  double r_max = 3.0;
  std::size_t r_count = 261;
  // Smallest admissible branch distance.
  double distance_floor = 1e-9;

  std::vector<double> separations() const {
    std::vector<double> r(r_count);
    for (std::size_t i = 0; i < r_count; ++i)
      r[i] = r_count == 1 ? r_min
                          : r_min + (r_max - r_min) * static_cast<double>(i) /
                                        static_cast<double>(r_count - 1);
    return r;
  }

  void validate() const {
    for (double g : gamma_values)
      if (!(g > 0.0) || !std::isfinite(g))
        throw PreconditionError("gamma values must be positive");
    if (gamma_values.empty()) throw PreconditionError("no gamma values");
    if (r_count == 0) throw PreconditionError("empty separation range");
    if (!(r_min > 0.0) || !(r_max >= r_min))
      throw PreconditionError("separation range must be positive");
    if (!(r_min - delta_x_wide - delta_x_split > distance_floor))
      throw PreconditionError(
          "separation range reaches a zero branch distance");
  }
};

inline constexpr double kThreshold = 1.0;

// phi_ij = gamma / d_ij with d_LL = d_RR = R, d_LR = R + dx + ddx,
// d_RL = R - dx - ddx.
inline BranchPhases branch_phases(double r, double gamma,
                                  const WitnessConfig& cfg) {
  const double offset = cfg.delta_x_wide + cfg.delta_x_split;
  const std::array<double, 4> d{r, r + offset, r - offset, r};
  for (double di : d)
    if (!(di > cfg.distance_floor))
      throw PreconditionError("nonpositive branch distance at R=" +
                              std::to_string(r));
  return {gamma / d[0], gamma / d[1], gamma / d[2], gamma / d[3]};
}

// Closed form of <XZ> + <YY> for the equal-weight branch state.
inline double witness_value(const BranchPhases& p) {
  const double xz = 0.5 * (std::cos(p.rl - p.ll) - std::cos(p.rr - p.lr));
  const double yy = 0.5 * (std::cos(p.lr - p.rl) - std::cos(p.ll - p.rr));
  return std::abs(xz + yy);
}

using WitnessFunction = std::function<double(const BranchPhases&)>;

struct WitnessCurve {
  double gamma = 0.0;
  std::vector<double> separation;
  std::vector<double> value;

  double max_value() const {
    double m = 0.0;
    for (double w : value) m = std::max(m, w);
    return m;
  }
  std::size_t exceedance_count(double threshold = kThreshold) const {
    std::size_t c = 0;
    for (double w : value) c += w > threshold ? 1 : 0;
    return c;
  }
};

inline std::vector<WitnessCurve> sweep_witness(
    const WitnessConfig& cfg, const WitnessFunction& witness = witness_value) {
  cfg.validate();
  const std::vector<double> rs = cfg.separations();
  std::vector<WitnessCurve> curves;
  for (double gamma : cfg.gamma_values) {
    WitnessCurve c{gamma, rs, {}};
    c.value.reserve(rs.size());
    for (double r : rs) c.value.push_back(witness(branch_phases(r, gamma, cfg)));
    curves.push_back(std::move(c));
  }
  return curves;
}

}  // namespace dyneq::witness
