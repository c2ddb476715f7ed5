#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "dyneq/checks.hpp"
#include "dyneq/nash.hpp"

namespace {

using namespace dyneq::nash;

BimatrixGame matching_pennies() {
  Matrix a(2, 2), b(2, 2);
  a << 1, -1, -1, 1;
  b << -1, 1, 1, -1;
  return BimatrixGame::shifted_nonnegative(a, b);
}

BimatrixGame prisoners_dilemma() {
  Matrix a(2, 2), b(2, 2);
  a << 3, 0, 5, 1;
  b << 3, 5, 0, 1;
  return BimatrixGame(a, b);
}

BimatrixGame coordination() {
  Matrix a(2, 2);
  a << 2, 0, 0, 1;
  return BimatrixGame(a, a);
}

StrategyProfile uniform2() {
  return {MixedStrategy::uniform(2), MixedStrategy::uniform(2)};
}

StrategyProfile pure2(Eigen::Index i, Eigen::Index j) {
  return {MixedStrategy::pure(2, i), MixedStrategy::pure(2, j)};
}

TEST(MixedStrategy, Invariants) {
  EXPECT_THROW(MixedStrategy({0.5, 0.6}), dyneq::PreconditionError);
  EXPECT_THROW(MixedStrategy({1.1, -0.1}), dyneq::PreconditionError);
  EXPECT_NEAR(MixedStrategy::uniform(3).probabilities().sum(), 1.0, 1e-15);
  EXPECT_EQ(MixedStrategy::pure(3, 2)[2], 1.0);
}

TEST(Game, RejectsNegativeAndMismatched) {
  Matrix a(2, 2), b(2, 3);
  a << 1, -1, 0, 0;
  b.setZero();
  EXPECT_THROW(BimatrixGame(a, a), dyneq::PreconditionError);
  a.setOnes();
  EXPECT_THROW(BimatrixGame(a, b), dyneq::PreconditionError);
  const auto g = matching_pennies();
  EXPECT_EQ(g.payoff_a().minCoeff(), 0.0);
  EXPECT_EQ(g.payoff_a().maxCoeff(), 2.0);
}

TEST(Utility, PureProfileIsEntry) {
  const auto g = prisoners_dilemma();
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) {
      EXPECT_EQ(expected_utility(pure2(i, j), g, Player::one), g.payoff_a()(i, j));
      EXPECT_EQ(expected_utility(pure2(i, j), g, Player::two), g.payoff_b()(i, j));
    }
}

TEST(Utility, UniformOnIdentity) {
  const Matrix id = Matrix::Identity(2, 2);
  EXPECT_DOUBLE_EQ(
      expected_utility(uniform2(), BimatrixGame(id, id), Player::one), 0.5);
}

TEST(Utility, LinearInOwnStrategy) {
  std::mt19937_64 rng(5);
  const auto g = dyneq::checks::random_game(3, 3, rng);
  const MixedStrategy y{0.2, 0.5, 0.3};
  const MixedStrategy x1{0.6, 0.4, 0.0}, x2{0.1, 0.1, 0.8};
  const MixedStrategy mix{0.25 * 0.6 + 0.75 * 0.1, 0.25 * 0.4 + 0.75 * 0.1,
                          0.75 * 0.8};
  const double u1 = expected_utility({x1, y}, g, Player::one);
  const double u2 = expected_utility({x2, y}, g, Player::one);
  EXPECT_NEAR(expected_utility({mix, y}, g, Player::one), 0.25 * u1 + 0.75 * u2,
              1e-12);
}

TEST(Gain, MatchingPenniesDeviation) {
  // Both on action 1: player two wins 2 by switching.
  const auto g = matching_pennies();
  EXPECT_EQ(gain(pure2(0, 0), g, Player::two, 1), 2.0);
  EXPECT_EQ(gain(pure2(0, 0), g, Player::one, 1), 0.0);
  EXPECT_THROW(gain(pure2(0, 0), g, Player::one, 2), dyneq::PreconditionError);
}

TEST(Gain, ZeroAtPureEquilibrium) {
  const auto g = prisoners_dilemma();
  EXPECT_EQ(max_gain(pure2(1, 1), g), 0.0);
}

TEST(Gain, ShiftInvariant) {
  std::mt19937_64 rng(9);
  const auto g = dyneq::checks::random_game(3, 2, rng);
  const BimatrixGame h((g.payoff_a().array() + 4.0).matrix(), g.payoff_b());
  const StrategyProfile s{MixedStrategy{0.2, 0.3, 0.5}, MixedStrategy{0.7, 0.3}};
  for (Eigen::Index a = 0; a < 3; ++a)
    EXPECT_NEAR(gain(s, g, Player::one, a), gain(s, h, Player::one, a), 1e-12);
  EXPECT_LT(max_abs_difference(advantage_step(s, g), advantage_step(s, h)),
            1e-12);
}

TEST(Advantage, EquilibriumIsFixed) {
  const auto g = matching_pennies();
  EXPECT_LT(max_abs_difference(advantage_step(uniform2(), g), uniform2()), 1e-12);
  const auto pd = prisoners_dilemma();
  EXPECT_EQ(max_abs_difference(advantage_step(pure2(1, 1), pd), pure2(1, 1)), 0.0);
}

TEST(Advantage, MassMovesTowardGainingAction) {
  const auto g = prisoners_dilemma();
  const StrategyProfile s = uniform2();
  const auto next = advantage_step(s, g);
  EXPECT_GT(next.row[1], s.row[1]);
  EXPECT_GT(next.column[1], s.column[1]);
  EXPECT_NEAR(next.row.probabilities().sum(), 1.0, 1e-12);
}

TEST(Advantage, BoundaryProfilesStayOnSimplex) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 20; ++k) {
    const auto g = dyneq::checks::random_game(3, 3, rng);
    for (Eigen::Index i = 0; i < 3; ++i) {
      const StrategyProfile s{MixedStrategy::pure(3, i), MixedStrategy{0.5, 0.5, 0.0}};
      const auto n = advantage_step(s, g);
      EXPECT_GE(n.row.probabilities().minCoeff(), 0.0);
      EXPECT_NEAR(n.column.probabilities().sum(), 1.0, 1e-12);
    }
  }
}

TEST(Search, PrisonersDilemmaPure) {
  const auto r = find_equilibrium(prisoners_dilemma(), SearchOptions{1e-8});
  ASSERT_EQ(r.status, SearchStatus::converged);
  EXPECT_LT(max_abs_difference(r.profile, pure2(1, 1)), 1e-8);
  EXPECT_LT(r.max_gain, 1e-8);
}

TEST(Search, MatchingPenniesDamped) {
  SearchOptions opt;
  opt.damping = 0.1;
  const auto r = find_equilibrium(matching_pennies(), opt);
  ASSERT_EQ(r.status, SearchStatus::converged);
  EXPECT_LT(max_abs_difference(r.profile, uniform2()), 1e-3);
  // Off-centre start as well.
  const auto off = find_equilibrium(
      matching_pennies(), {MixedStrategy{0.7, 0.3}, MixedStrategy{0.4, 0.6}}, opt);
  ASSERT_EQ(off.status, SearchStatus::converged);
  EXPECT_LT(max_abs_difference(off.profile, uniform2()), 1e-3);
}

TEST(Search, PlainIterationCyclesOnMatchingPennies) {
  SearchOptions opt;
  opt.polish_every = 0;
  const auto r = find_equilibrium(
      matching_pennies(), {MixedStrategy{0.7, 0.3}, MixedStrategy{0.4, 0.6}}, opt);
  EXPECT_EQ(r.status, SearchStatus::cycle);
  EXPECT_GT(r.max_gain, opt.tol);
}

TEST(Search, CoordinationFromPerturbedUniform) {
  const auto g = coordination();
  const auto r =
      find_equilibrium(g, {MixedStrategy{0.55, 0.45}, MixedStrategy{0.52, 0.48}});
  ASSERT_EQ(r.status, SearchStatus::converged);
  EXPECT_TRUE(best_response_check(r.profile, g, 1e-6).both());
  const auto en = enumerate_equilibria_small(g);
  EXPECT_EQ(en.equilibria.size(), 3u);
}

TEST(Search, MaxIterationsIsReported) {
  SearchOptions opt;
  opt.max_iter = 3;
  opt.polish_every = 0;
  const auto r = find_equilibrium(prisoners_dilemma(), opt);
  EXPECT_EQ(r.status, SearchStatus::max_iterations);
  EXPECT_EQ(r.iterations, 3);
  EXPECT_THROW(find_equilibrium(prisoners_dilemma(), SearchOptions{1e-6, 10, 0.0}),
               dyneq::PreconditionError);
}

TEST(BestResponse, Cases) {
  EXPECT_TRUE(best_response_check(pure2(1, 1), prisoners_dilemma(), 1e-12).both());
  EXPECT_TRUE(best_response_check(uniform2(), matching_pennies(), 1e-12).both());
  const auto r = best_response_check(pure2(0, 1), prisoners_dilemma(), 1e-12);
  EXPECT_FALSE(r.player_one);
  EXPECT_TRUE(r.player_two);
}

TEST(Enumeration, KnownGames) {
  const auto mp = enumerate_equilibria_small(matching_pennies());
  ASSERT_EQ(mp.equilibria.size(), 1u);
  EXPECT_LT(max_abs_difference(mp.equilibria[0], uniform2()), 1e-12);
  const auto pd = enumerate_equilibria_small(prisoners_dilemma());
  ASSERT_EQ(pd.equilibria.size(), 1u);
  EXPECT_EQ(max_abs_difference(pd.equilibria[0], pure2(1, 1)), 0.0);
  Matrix one(1, 1);
  one << 3.0;
  const auto triv = enumerate_equilibria_small(BimatrixGame(one, one));
  ASSERT_EQ(triv.equilibria.size(), 1u);
  EXPECT_EQ(triv.equilibria[0].row[0], 1.0);
}

TEST(Enumeration, DegenerateGameIsFlagged) {
  const Matrix z = Matrix::Ones(2, 2);
  const auto en = enumerate_equilibria_small(BimatrixGame(z, z));
  EXPECT_TRUE(en.degenerate);
  EXPECT_FALSE(en.equilibria.empty());
  EXPECT_THROW(enumerate_equilibria_small(BimatrixGame(Matrix::Ones(4, 2),
                                                       Matrix::Ones(4, 2))),
               dyneq::PreconditionError);
}

TEST(Enumeration, RandomGamesAreFixedPoints) {
  const auto r = dyneq::checks::nash_suite(60, 17);
  EXPECT_EQ(r.empty_enumerations, 0u);
  EXPECT_EQ(r.not_fixed, 0u);
  EXPECT_EQ(r.not_best_reply, 0u);
  EXPECT_EQ(r.searches_rejected, 0u);
  EXPECT_LE(r.max_fixed_point_residual, 1e-8);
}

TEST(GameFile, ReadsTwoMatrices) {
  std::istringstream in("# pd\n3 0\n5 1\n\n3 5\n0 1\n");
  const auto g = read_game(in);
  EXPECT_EQ(g.payoff_a()(1, 0), 5.0);
  EXPECT_EQ(g.payoff_b()(0, 1), 5.0);
  std::istringstream bad("1 2\n3\n\n1 2\n3 4\n");
  EXPECT_THROW(read_game(bad), dyneq::PreconditionError);
  std::istringstream one("1 2\n");
  EXPECT_THROW(read_game(one), dyneq::PreconditionError);
  std::istringstream nan("1 x\n\n1 2\n");
  EXPECT_THROW(read_game(nan), dyneq::PreconditionError);
}

}  // namespace
