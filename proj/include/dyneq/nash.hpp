#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dyneq/error.hpp"

// Two-player bimatrix games, the better-response ("advantage") map whose
// fixed points are exactly the Nash equilibria, and a support-enumeration
// solver for small games.
namespace dyneq::nash {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Player { one, two };

// Probability vector on the simplex.
class MixedStrategy {
 public:
  static constexpr double kSumTolerance = 1e-12;

  MixedStrategy() = default;
  explicit MixedStrategy(Vector p) : p_(std::move(p)) {
    if (p_.size() == 0) throw PreconditionError("empty mixed strategy");
    for (Eigen::Index i = 0; i < p_.size(); ++i)
      if (!(p_[i] >= 0.0))
        throw PreconditionError("mixed strategy has a negative component");
    if (std::abs(p_.sum() - 1.0) > kSumTolerance)
      throw PreconditionError("mixed strategy does not sum to one");
  }
  MixedStrategy(std::initializer_list<double> p)
      : MixedStrategy(Eigen::Map<const Vector>(p.begin(),
                                               static_cast<Eigen::Index>(p.size()))) {}

  static MixedStrategy uniform(Eigen::Index n) {
    return MixedStrategy(Vector::Constant(n, 1.0 / static_cast<double>(n)));
  }
  static MixedStrategy pure(Eigen::Index n, Eigen::Index action) {
    Vector p = Vector::Zero(n);
    p[action] = 1.0;
    return MixedStrategy(p);
  }

  const Vector& probabilities() const noexcept { return p_; }
  Eigen::Index size() const noexcept { return p_.size(); }
  double operator[](Eigen::Index i) const { return p_[i]; }

 private:
  Vector p_;
};

struct StrategyProfile {
  MixedStrategy row;     // player one
  MixedStrategy column;  // player two

  const MixedStrategy& of(Player p) const {
    return p == Player::one ? row : column;
  }
};

inline double max_abs_difference(const StrategyProfile& a,
                                 const StrategyProfile& b) {
  return std::max(
      (a.row.probabilities() - b.row.probabilities()).cwiseAbs().maxCoeff(),
      (a.column.probabilities() - b.column.probabilities())
          .cwiseAbs()
          .maxCoeff());
}

// Payoffs A (row player) and B (column player), both m x n and nonnegative.
class BimatrixGame {
 public:
  BimatrixGame(Matrix a, Matrix b) : a_(std::move(a)), b_(std::move(b)) {
    if (a_.rows() == 0 || a_.cols() == 0)
      throw PreconditionError("payoff matrices must be non-empty");
    if (a_.rows() != b_.rows() || a_.cols() != b_.cols())
      throw PreconditionError("payoff matrices have different shapes");
    if (a_.minCoeff() < 0.0 || b_.minCoeff() < 0.0)
      throw PreconditionError("payoffs must be nonnegative");
  }

  // Adds to each matrix the constant that makes its smallest entry zero
  // (only when negative entries are present).
  static BimatrixGame shifted_nonnegative(Matrix a, Matrix b) {
    if (const double lo = a.minCoeff(); lo < 0.0) a.array() -= lo;
    if (const double lo = b.minCoeff(); lo < 0.0) b.array() -= lo;
    return BimatrixGame(std::move(a), std::move(b));
  }

  const Matrix& payoff_a() const noexcept { return a_; }
  const Matrix& payoff_b() const noexcept { return b_; }
  const Matrix& payoff(Player p) const { return p == Player::one ? a_ : b_; }
  Eigen::Index rows() const noexcept { return a_.rows(); }
  Eigen::Index cols() const noexcept { return a_.cols(); }
  Eigen::Index actions(Player p) const {
    return p == Player::one ? rows() : cols();
  }

 private:
  Matrix a_;
  Matrix b_;
};

namespace detail {

inline void check_dimensions(const StrategyProfile& s, const BimatrixGame& g) {
  if (s.row.size() != g.rows() || s.column.size() != g.cols())
    throw PreconditionError("strategy profile does not match game dimensions");
}

}  // namespace detail

// Payoff of each pure action of `player` against the opponent's mixture:
// A y for player one, B^T x for player two.
inline Vector action_payoffs(const StrategyProfile& s, const BimatrixGame& g,
                             Player player) {
  detail::check_dimensions(s, g);
  return player == Player::one
             ? Vector(g.payoff_a() * s.column.probabilities())
             : Vector(g.payoff_b().transpose() * s.row.probabilities());
}

inline double expected_utility(const StrategyProfile& s, const BimatrixGame& g,
                               Player player) {
  return s.of(player).probabilities().dot(action_payoffs(s, g, player));
}

// max{0, u(pure action, opponent) - u(profile)}
inline double gain(const StrategyProfile& s, const BimatrixGame& g,
                   Player player, Eigen::Index action) {
  if (action < 0 || action >= g.actions(player))
    throw PreconditionError("action index out of range");
  const Vector payoffs = action_payoffs(s, g, player);
  return std::max(0.0,
                  payoffs[action] - s.of(player).probabilities().dot(payoffs));
}

inline Vector gains(const StrategyProfile& s, const BimatrixGame& g,
                    Player player) {
  const Vector payoffs = action_payoffs(s, g, player);
  const double current = s.of(player).probabilities().dot(payoffs);
  return (payoffs.array() - current).cwiseMax(0.0).matrix();
}

inline double max_gain(const StrategyProfile& s, const BimatrixGame& g) {
  return std::max(gains(s, g, Player::one).maxCoeff(),
                  gains(s, g, Player::two).maxCoeff());
}

namespace detail {

inline MixedStrategy advantage_update(const MixedStrategy& current,
                                      const Vector& gain) {
  Vector next = current.probabilities() + gain;
  next /= next.sum();
  // Renormalize once more so the sum is exact to rounding.
  next /= next.sum();
  return MixedStrategy(next);
}

}  // namespace detail

// s'[a] = (s[a] + Gain(s, a)) / sum_k (s[k] + Gain(s, k)), per player.
inline StrategyProfile advantage_step(const StrategyProfile& s,
                                      const BimatrixGame& g) {
  detail::check_dimensions(s, g);
  return {detail::advantage_update(s.row, gains(s, g, Player::one)),
          detail::advantage_update(s.column, gains(s, g, Player::two))};
}

namespace detail {

inline std::vector<std::vector<Eigen::Index>> nonempty_subsets(
    Eigen::Index n) {
  std::vector<std::vector<Eigen::Index>> out;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<Eigen::Index> subset;
    for (Eigen::Index i = 0; i < n; ++i)
      if (mask & (1u << i)) subset.push_back(i);
    out.push_back(std::move(subset));
  }
  return out;
}

// Mixture q on `support` (length n) making every action in `rows` of
// `payoff` (rows x n) equally good; nullopt if inconsistent or negative.
struct IndifferenceSolution {
  Vector mixture;
  bool unique = true;
};

inline std::optional<IndifferenceSolution> solve_indifference(
    const Matrix& payoff, const std::vector<Eigen::Index>& rows,
    const std::vector<Eigen::Index>& support, Eigen::Index n, double tol) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = static_cast<Eigen::Index>(support.size());
  // Unknowns: q_support (c) and the common value v.
  Matrix m = Matrix::Zero(r + 1, c + 1);
  Vector rhs = Vector::Zero(r + 1);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = payoff(rows[i], support[j]);
    m(i, c) = -1.0;
  }
  m.row(r).head(c).setOnes();
  rhs[r] = 1.0;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(m);
  cod.setThreshold(1e-12);
  const Vector sol = cod.solve(rhs);
  if ((m * sol - rhs).cwiseAbs().maxCoeff() > tol) return std::nullopt;
  Vector q = Vector::Zero(n);
  for (Eigen::Index j = 0; j < c; ++j) {
    if (sol[j] < -tol) return std::nullopt;
    q[support[j]] = std::max(0.0, sol[j]);
  }
  const double total = q.sum();
  if (!(total > 0.0)) return std::nullopt;
  return IndifferenceSolution{q / total, cod.rank() == c + 1};
}

}  // namespace detail

enum class SearchStatus { converged, cycle, max_iterations };

inline const char* to_string(SearchStatus s) {
  switch (s) {
    case SearchStatus::converged: return "converged";
    case SearchStatus::cycle: return "cycle";
    case SearchStatus::max_iterations: return "max_iterations";
  }
  return "unknown";
}

struct SearchResult {
  StrategyProfile profile;
  SearchStatus status = SearchStatus::max_iterations;
  long iterations = 0;
  double max_gain = 0.0;
  bool polished = false;  // accepted from a support solve, not the map
};

struct SearchOptions {
  double tol = 1e-6;
  long max_iter = 100000;
  double damping = 1.0;
  // Distance under which a non-adjacent earlier iterate counts as revisited.
  double revisit_tol = 1e-10;
  std::size_t history = 256;
  // Every polish_every iterations the current support (entries above
  // polish_support) is solved exactly; the result is kept only if its max
  // gain is below tol. 0 disables.
  long polish_every = 50;
  double polish_support = 1e-3;
};

namespace detail {

inline std::vector<Eigen::Index> support_of(const MixedStrategy& x,
                                            double threshold) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x[i] > threshold) out.push_back(i);
  return out;
}

// Equilibrium candidate with the supports of s, if the indifference systems
// on those supports have a nonnegative solution.
inline std::optional<StrategyProfile> polish_on_support(
    const StrategyProfile& s, const BimatrixGame& g, double threshold) {
  const auto rows = support_of(s.row, threshold);
  const auto cols = support_of(s.column, threshold);
  if (rows.empty() || cols.empty()) return std::nullopt;
  const double tol = 1e-10;
  const auto y = solve_indifference(g.payoff_a(), rows, cols, g.cols(), tol);
  if (!y) return std::nullopt;
  const Matrix bt = g.payoff_b().transpose();
  const auto x = solve_indifference(bt, cols, rows, g.rows(), tol);
  if (!x) return std::nullopt;
  return StrategyProfile{MixedStrategy(x->mixture), MixedStrategy(y->mixture)};
}

}  // namespace detail

// Damped fixed-point iteration s <- (1-d) s + d Adv(s). The advantage map is
// not a contraction, so a revisited profile is reported as a cycle instead of
// iterating forever.
inline SearchResult find_equilibrium(const BimatrixGame& g,
                                     const StrategyProfile& start,
                                     const SearchOptions& opt = {}) {
  if (!(opt.damping > 0.0 && opt.damping <= 1.0))
    throw PreconditionError("damping must lie in (0, 1]");
  detail::check_dimensions(start, g);
  SearchResult result{start, SearchStatus::max_iterations, 0, 0.0};
  std::deque<StrategyProfile> history;
  StrategyProfile s = start;
  for (long it = 0; it <= opt.max_iter; ++it) {
    const double mg = max_gain(s, g);
    result = {s, SearchStatus::max_iterations, it, mg};
    if (mg < opt.tol) {
      result.status = SearchStatus::converged;
      return result;
    }
    if (it == opt.max_iter) break;
    if (opt.polish_every > 0 && it > 0 && it % opt.polish_every == 0) {
      if (const auto p = detail::polish_on_support(s, g, opt.polish_support)) {
        const double pg = max_gain(*p, g);
        if (pg < opt.tol)
          return {*p, SearchStatus::converged, it, pg, true};
      }
    }
    // Skip the immediate predecessor: slow monotone convergence produces
    // tiny consecutive steps that are not cycles.
    for (std::size_t h = 0; h + 1 < history.size(); ++h) {
      if (max_abs_difference(history[h], s) < opt.revisit_tol) {
        result.status = SearchStatus::cycle;
        return result;
      }
    }
    history.push_back(s);
    if (history.size() > opt.history) history.pop_front();

    const StrategyProfile adv = advantage_step(s, g);
    const double d = opt.damping;
    Vector x = (1.0 - d) * s.row.probabilities() + d * adv.row.probabilities();
    Vector y =
        (1.0 - d) * s.column.probabilities() + d * adv.column.probabilities();
    s = {MixedStrategy(x / x.sum()), MixedStrategy(y / y.sum())};
  }
  return result;
}

inline SearchResult find_equilibrium(const BimatrixGame& g,
                                     const SearchOptions& opt = {}) {
  return find_equilibrium(
      g,
      {MixedStrategy::uniform(g.rows()), MixedStrategy::uniform(g.cols())},
      opt);
}

struct BestResponse {
  bool player_one = false;
  bool player_two = false;
  bool both() const noexcept { return player_one && player_two; }
};

// Support condition: every action played with probability > support_tol
// earns within `tol` of the best pure payoff.
inline BestResponse best_response_check(const StrategyProfile& s,
                                        const BimatrixGame& g, double tol,
                                        double support_tol = 1e-9) {
  const auto check = [&](Player p) {
    const Vector payoffs = action_payoffs(s, g, p);
    const double best = payoffs.maxCoeff();
    const Vector& x = s.of(p).probabilities();
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (x[i] > support_tol && payoffs[i] < best - tol) return false;
    return true;
  };
  return {check(Player::one), check(Player::two)};
}

struct Enumeration {
  std::vector<StrategyProfile> equilibria;
  // Set when some support pair admits a continuum of solutions; the
  // reported profile for that pair is one representative point.
  bool degenerate = false;
};

// All equilibria of a game with at most 3 actions per player, by
// enumerating support pairs and solving the indifference systems.
inline Enumeration enumerate_equilibria_small(const BimatrixGame& g,
                                              double tol = 1e-8) {
  if (g.rows() > 3 || g.cols() > 3)
    throw PreconditionError("support enumeration limited to 3x3 games");
  Enumeration out;
  const Matrix bt = g.payoff_b().transpose();
  for (const auto& rows : detail::nonempty_subsets(g.rows())) {
    for (const auto& cols : detail::nonempty_subsets(g.cols())) {
      // y on `cols` makes player one indifferent over `rows`; x on `rows`
      // makes player two indifferent over `cols`.
      const auto y = detail::solve_indifference(g.payoff_a(), rows, cols,
                                                g.cols(), tol);
      if (!y) continue;
      const auto x =
          detail::solve_indifference(bt, cols, rows, g.rows(), tol);
      if (!x) continue;
      const StrategyProfile candidate{MixedStrategy(x->mixture),
                                      MixedStrategy(y->mixture)};
      if (!best_response_check(candidate, g, tol, tol).both()) continue;
      const bool duplicate = std::any_of(
          out.equilibria.begin(), out.equilibria.end(),
          [&](const StrategyProfile& e) {
            return max_abs_difference(e, candidate) < 1e-6;
          });
      if (duplicate) continue;
      if (!x->unique || !y->unique) out.degenerate = true;
      out.equilibria.push_back(candidate);
    }
  }
  return out;
}

// Game file: rows of whitespace-separated reals for A, a blank line, then
// the rows of B. Lines starting with '#' are ignored.
inline BimatrixGame read_game(std::istream& in) {
  std::vector<std::vector<std::vector<double>>> blocks(1);
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first != std::string::npos && line[first] == '#') continue;
    if (first == std::string::npos) {
      if (!blocks.back().empty()) blocks.emplace_back();
      continue;
    }
    std::istringstream row(line);
    std::vector<double> values;
    std::string token;
    while (row >> token) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(token, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != token.size())
        throw PreconditionError("game file: not a number: '" + token + "'");
      values.push_back(v);
    }
    blocks.back().push_back(std::move(values));
  }
  if (!blocks.empty() && blocks.back().empty()) blocks.pop_back();
  if (blocks.size() != 2)
    throw PreconditionError(
        "game file must hold exactly two matrices separated by a blank line");
  const auto to_matrix = [](const std::vector<std::vector<double>>& rows) {
    const auto m = static_cast<Eigen::Index>(rows.size());
    const auto n = static_cast<Eigen::Index>(rows.front().size());
    Matrix out(m, n);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (static_cast<Eigen::Index>(rows[i].size()) != n)
        throw PreconditionError("game file: ragged payoff matrix");
      for (Eigen::Index j = 0; j < n; ++j) out(i, j) = rows[i][j];
    }
    return out;
  };
  return BimatrixGame(to_matrix(blocks[0]), to_matrix(blocks[1]));
}

}  // namespace dyneq::nash
