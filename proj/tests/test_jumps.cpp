// Copyright 2026 The qndsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qnd/jumps.hpp"
#include "test_support.hpp"

namespace {

using namespace qnd;
using qnd::testing::basis_state;
using qnd::testing::binomial_pmf;
using qnd::testing::psi_state;
using qnd::testing::qd2;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvariantFailure;
}

CycleConfig make_cycle(double lambda1, double lambda2, std::size_t m, const ComplexMatrix& h) {
  CycleConfig cfg;
  cfg.lambda1 = lambda1;
  cfg.lambda2 = lambda2;
  cfg.measurements = m;
  cfg.hamiltonian = h;
  cfg.model = std::make_shared<const NonDemolitionModel>(qd2());
  return cfg;
}

TEST(Cycles, NdLimitHasNoJumps) {
  const CycleConfig cfg = make_cycle(0.01, 1.0, 100, ComplexMatrix::Zero(2, 2));
  const CycleRun run = run_cycles(cfg, basis_state(0), 100, 3);
  ASSERT_EQ(run.jumps.cycles.size(), 100u);
  ASSERT_EQ(run.record.protocol.size(), 10000u);
  for (const auto& c : run.jumps.cycles) {
    EXPECT_EQ(c.nu_hat, 0u);
    EXPECT_NEAR(c.max_weight, 1.0, 1e-12);
    EXPECT_NEAR(c.block_distance, 0.0, 1e-12);
  }
}

TEST(Cycles, FullFlipAlternates) {
  // exp(-i (pi/2) sigma_x) = -i sigma_x swaps the projector ranges every cycle.
  const CycleConfig cfg = make_cycle(0.0, std::numbers::pi / 2, 50, pauli_x());
  const CycleRun run = run_cycles(cfg, basis_state(0), 200, 4);
  std::size_t agree = 0;
  for (const auto& c : run.jumps.cycles) agree += c.nu_hat == c.cycle % 2;
  // Per-cycle estimator error is P(Bin(50, 0.3) > 25) < 1e-3.
  EXPECT_GE(agree, 196u);
}

TEST(Cycles, DeterministicAndEstimatesMatchCounts) {
  const CycleConfig cfg = make_cycle(0.01, 1.0, 20, ComplexMatrix(0.3 * pauli_x()));
  const CycleRun a = run_cycles(cfg, psi_state(), 30, 9), b = run_cycles(cfg, psi_state(), 30, 9);
  EXPECT_EQ(a.record.protocol, b.record.protocol);
  const NonDemolitionModel m = qd2();
  for (std::size_t i = 0; i < a.jumps.cycles.size(); ++i) {
    EXPECT_EQ(a.jumps.cycles[i].nu_hat, b.jumps.cycles[i].nu_hat);
    const FrequencyTable t = empirical_frequencies(a.record.protocol, i * 20, (i + 1) * 20, 2);
    const EstimatorResult e = estimate_fact(t, m);
    EXPECT_EQ(a.jumps.cycles[i].nu_hat, e.nu_hat);
    EXPECT_EQ(a.jumps.cycles[i].tie, e.tie);
  }
  EXPECT_NEAR(a.record.log_prob, protocol_log_probability(build_cycle_dynamics(cfg), psi_state(), a.record.protocol),
              1e-9);
  EXPECT_EQ(code_of([&] { run_cycles(cfg, psi_state(), 0, 1); }), ErrorCode::InvalidConfig);
}

TEST(Cycles, TiesFlaggedForEvenBursts) {
  const CycleConfig cfg = make_cycle(0.0, 1.0, 2, ComplexMatrix(0.5 * pauli_x()));
  const CycleRun run = run_cycles(cfg, psi_state(), 200, 5);
  std::size_t ties = 0;
  for (const auto& c : run.jumps.cycles) ties += c.tie;
  // One L and one R in a burst of two happens with probability 2 * 0.3 * 0.7.
  EXPECT_GT(ties, 50u);
  const MarkovComparison mc = markov_from_run(run.jumps, cfg, 1);
  EXPECT_GT(mc.censored_transitions, 0u);
  EXPECT_EQ(mc.resolved_transitions + mc.censored_transitions, 199u);
  EXPECT_EQ(static_cast<std::size_t>(mc.counts.sum()), mc.resolved_transitions);
}

TEST(Closeness, NdLimitPasses) {
  const CycleConfig cfg = make_cycle(0.01, 1.0, 50, ComplexMatrix::Zero(2, 2));
  const ClosenessReport rep = closeness_check(cfg, psi_state(), 200, 0.05, 11);
  EXPECT_EQ(rep.cycles, 200u);
  EXPECT_GE(rep.fraction, 0.95);
  EXPECT_TRUE(rep.passes);
}

TEST(Closeness, SmallBurstFailsAndFractionGrowsWithM) {
  double prev = -1.0;
  for (std::size_t m : {1u, 5u, 20u, 50u}) {
    double pooled = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed)
      pooled += closeness_check(make_cycle(0.0, 1.0, m, ComplexMatrix(0.5 * pauli_x())), psi_state(), 100, 0.05, seed)
                    .fraction;
    pooled /= 5.0;
    if (m == 1) EXPECT_LT(pooled, 0.95);
    EXPECT_GE(pooled, prev - 0.02) << "M = " << m;
    prev = pooled;
  }
  EXPECT_EQ(code_of([] {
              closeness_check(make_cycle(0.0, 1.0, 2, ComplexMatrix::Zero(2, 2)), psi_state(), 5, 0.0, 1);
            }),
            ErrorCode::InvalidConfig);
}

TEST(Closeness, CloseCriterion) {
  CycleEstimate c;
  c.max_weight = 0.96;
  c.block_distance = 0.04;
  EXPECT_TRUE(cycle_is_close(c, 0.05));
  c.block_distance = 0.06;
  EXPECT_FALSE(cycle_is_close(c, 0.05));
  c.block_distance = 0.0;
  c.max_weight = 0.94;
  EXPECT_FALSE(cycle_is_close(c, 0.05));
}

TEST(Markov, TheoreticalMatrixExamples) {
  const ProjectorFamily pf = qnd::testing::qd2_projectors();
  const RealMatrix half = theoretical_transition_matrix(pf, ComplexMatrix(0.5 * pauli_x()), std::numbers::pi / 2);
  EXPECT_NEAR(half(0, 1), 0.5, 1e-15);
  EXPECT_NEAR(half(1, 0), 0.5, 1e-15);
  const RealMatrix id = theoretical_transition_matrix(pf, ComplexMatrix::Zero(2, 2), 1.0);
  EXPECT_EQ(id, RealMatrix::Identity(2, 2));
  for (double w : {0.3, 1.0, 2.7}) {
    const RealMatrix t = theoretical_transition_matrix(pf, ComplexMatrix(0.5 * w * pauli_x()), 1.0);
    EXPECT_NEAR(t(0, 1), std::pow(std::sin(w / 2), 2), 1e-14);
    EXPECT_LE((t.rowwise().sum() - RealVector::Ones(2)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Markov, RowStochasticAndBasisInvariant) {
  Philox4x32 rng(41, 0);
  for (int trial = 0; trial < 20; ++trial) {
    // dim 4 with facts of rank 1, 1, 2 in a random basis.
    const ComplexMatrix v = qnd::testing::random_unitary(rng, 4);
    std::vector<ComplexMatrix> ps(3, ComplexMatrix::Zero(4, 4));
    ps[0](0, 0) = 1.0;
    ps[1](1, 1) = 1.0;
    ps[2](2, 2) = ps[2](3, 3) = 1.0;
    ComplexMatrix h = qnd::testing::random_density(rng, 4) * 3.0;
    const ProjectorFamily base({"a", "b", "c"}, ps);
    std::vector<ComplexMatrix> rot;
    for (const auto& p : ps) rot.push_back(v * p * v.adjoint());
    const ProjectorFamily rotated({"a", "b", "c"}, rot);
    const RealMatrix t0 = theoretical_transition_matrix(base, h, 0.7);
    const RealMatrix t1 = theoretical_transition_matrix(rotated, ComplexMatrix(v * h * v.adjoint()), 0.7);
    EXPECT_LE((t0 - t1).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((t0.rowwise().sum() - RealVector::Ones(3)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GE(t0.minCoeff(), -1e-15);
  }
}

TEST(Markov, NdLimitIsIdentity) {
  const CycleConfig cfg = make_cycle(0.01, 1.0, 50, ComplexMatrix::Zero(2, 2));
  const CycleRun run = run_cycles(cfg, psi_state(), 400, 12);
  const MarkovComparison mc = markov_from_run(run.jumps, cfg);
  const double fail = 1.0 - closeness_from_run(run.jumps, 0.05).fraction;
  EXPECT_LE(mc.empirical(0, 1), fail + 1e-12);
  EXPECT_LE(mc.empirical(1, 0), fail + 1e-12);
  EXPECT_EQ(mc.theoretical, RealMatrix::Identity(2, 2));
}

TEST(Markov, FullFlipIsPermutation) {
  const CycleConfig cfg = make_cycle(0.0, std::numbers::pi / 2, 50, pauli_x());
  const MarkovComparison mc = markov_limit_comparison(cfg, psi_state(), 400, 13);
  EXPECT_NEAR(mc.theoretical(0, 1), 1.0, 1e-14);
  for (Eigen::Index a = 0; a < 2; ++a) {
    const double n = mc.counts.row(a).sum();
    const double p = mc.empirical(a, 1 - a);
    // 4 sigma binomial with the estimator error rate (< 1e-3) as the variance floor.
    EXPECT_NEAR(p, 1.0, 4.0 * std::sqrt(1e-3 / n) + 1.0 / n);
  }
}

TEST(Markov, InsufficientTransitions) {
  const CycleConfig cfg = make_cycle(0.01, 1.0, 10, ComplexMatrix::Zero(2, 2));
  EXPECT_EQ(code_of([&] { markov_limit_comparison(cfg, psi_state(), 50, 1); }),
            ErrorCode::InsufficientResolvedCycles);
}

// Window classification probability per fact, exact for conditionally i.i.d. outcomes.
double window_prob(std::size_t r, double p, std::size_t alpha, double eps) {
  const double means[2] = {0.3, 0.7};
  double q = 0.0;
  for (std::size_t n = 0; n <= r; ++n) {
    const double f = double(n) / double(r);
    const bool in0 = std::abs(f - means[0]) < eps, in1 = std::abs(f - means[1]) < eps;
    if ((alpha == 0 && in0 && !in1) || (alpha == 1 && in1 && !in0)) q += binomial_pmf(int(r), int(n), p);
  }
  return q;
}

TEST(Histories, ExactMatchesConditionalOracle) {
  const StepDynamics dyn = nd_dynamics(qd2());
  HistoryOptions opt;
  opt.r = 8;
  opt.p = 2;
  opt.epsilon = 0.17;
  const HistoryReport rep = history_sets_probability(dyn, psi_state(), opt);
  EXPECT_TRUE(rep.exact);
  const double w[2] = {0.4, 0.6}, p_l[2] = {0.3, 0.7};
  double covered = 0.0;
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b) {
      double mass = 0.0;
      for (int nu = 0; nu < 2; ++nu)
        mass += w[nu] * window_prob(8, p_l[nu], a, 0.17) * window_prob(8, p_l[nu], b, 0.17);
      covered += mass;
      const auto it = rep.masses.find({a, b});
      const double got = it == rep.masses.end() ? 0.0 : it->second;
      EXPECT_NEAR(got, mass, 1e-13) << a << b;
    }
  EXPECT_NEAR(rep.covered, covered, 1e-13);
  EXPECT_NEAR(rep.covered + rep.uncovered, 1.0, 1e-12);
  // Constant histories dominate, weighted toward the Born weights.
  EXPECT_GT(rep.masses.at({0, 0}), rep.masses.at({0, 1}));
  EXPECT_GT(rep.masses.at({1, 1}), rep.masses.at({0, 0}));
}

TEST(Histories, ConcentratesOnBornWeights) {
  const StepDynamics dyn = nd_dynamics(qd2());
  HistoryOptions opt;
  opt.r = 200;
  opt.p = 3;
  opt.method = HistoryMethod::MonteCarlo;
  opt.samples = 4000;
  opt.seed = 21;
  const HistoryReport rep = history_sets_probability(dyn, psi_state(), opt);
  EXPECT_FALSE(rep.exact);
  EXPECT_NEAR(rep.epsilon, std::pow(200.0, -1.0 / 3.0), 1e-15);
  const double m0 = rep.masses.count({0, 0, 0}) ? rep.masses.at({0, 0, 0}) : 0.0;
  const double m1 = rep.masses.count({1, 1, 1}) ? rep.masses.at({1, 1, 1}) : 0.0;
  EXPECT_NEAR(m0, 0.4, 4.0 * std::sqrt(0.24 / 4000.0) + rep.uncovered);
  EXPECT_NEAR(m1, 0.6, 4.0 * std::sqrt(0.24 / 4000.0) + rep.uncovered);
  double total = 0.0;
  for (const auto& [h, m] : rep.masses) total += m;
  EXPECT_NEAR(total, 1.0 - rep.uncovered, 1e-12);
}

TEST(Histories, WideEpsilonIsAmbiguous) {
  HistoryOptions opt;
  opt.r = 4;
  opt.p = 2;
  opt.epsilon = 1.0;
  const HistoryReport rep = history_sets_probability(nd_dynamics(qd2()), psi_state(), opt);
  EXPECT_TRUE(rep.masses.empty());
  EXPECT_NEAR(rep.uncovered, 1.0, 1e-12);
}

TEST(Histories, UncoveredGrowsAtMostLinearlyInP) {
  const StepDynamics dyn = nd_dynamics(qd2());
  HistoryOptions opt;
  opt.r = 10;
  opt.epsilon = 0.25;
  opt.p = 1;
  const double base = history_sets_probability(dyn, psi_state(), opt).uncovered;
  EXPECT_GT(base, 0.0);
  opt.p = 2;
  EXPECT_LE(history_sets_probability(dyn, psi_state(), opt).uncovered, 2.0 * base + 1e-12);
  opt.method = HistoryMethod::MonteCarlo;
  opt.samples = 20000;
  opt.seed = 3;
  for (std::size_t p : {4u, 8u}) {
    opt.p = p;
    const HistoryReport rep = history_sets_probability(dyn, psi_state(), opt);
    EXPECT_LE(rep.uncovered, double(p) * base + 4.0 * *rep.uncovered_se) << "p = " << p;
  }
}

TEST(Histories, MonteCarloAgreesWithExact) {
  const StepDynamics dyn = build_hamiltonian_perturbation(qd2(), {ComplexMatrix(0.02 * pauli_x())});
  HistoryOptions opt;
  opt.r = 8;
  opt.p = 2;
  opt.epsilon = 0.17;
  const HistoryReport exact = history_sets_probability(dyn, psi_state(), opt);
  opt.method = HistoryMethod::MonteCarlo;
  opt.samples = 20000;
  opt.seed = 8;
  const HistoryReport mc = history_sets_probability(dyn, psi_state(), opt);
  EXPECT_NEAR(mc.uncovered, exact.uncovered, 4.0 * *mc.uncovered_se);
}

TEST(Histories, Errors) {
  HistoryOptions opt;
  opt.r = 11;
  opt.p = 2;
  opt.method = HistoryMethod::Exact;
  opt.budget = 1u << 20;
  EXPECT_EQ(code_of([&] { history_sets_probability(nd_dynamics(qd2()), psi_state(), opt); }), ErrorCode::TooLarge);
  EXPECT_EQ(code_of([&] { history_sets_probability(constant_dynamics(qd2().channel()), psi_state(), opt); }),
            ErrorCode::NoReference);
}

}  // namespace
