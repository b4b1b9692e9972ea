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
#include <map>

#include <unsupported/Eigen/MatrixFunctions>

#include "qnd/trajectories.hpp"
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

// Conditionally i.i.d. oracle for QD2 started from diag(w0, w1).
double qd2_mixture_probability(const Protocol& p, double w0) {
  std::size_t n_l = 0;
  for (auto xi : p) n_l += xi == 0;
  const double n_r = static_cast<double>(p.size() - n_l);
  return w0 * std::pow(0.3, n_l) * std::pow(0.7, n_r) + (1 - w0) * std::pow(0.7, n_l) * std::pow(0.3, n_r);
}

// Direct Kraus recursion rho -> C_xi U rho U^dag C_xi^dag.
double brute_probability(const ComplexMatrix& u, const ComplexMatrix& rho0, const Protocol& p) {
  const ComplexMatrix c[2] = {qnd::testing::qd2_amplitudes().row(0).asDiagonal(),
                              qnd::testing::qd2_amplitudes().row(1).asDiagonal()};
  ComplexMatrix rho = rho0;
  for (auto xi : p) rho = c[xi] * u * rho * u.adjoint() * c[xi].adjoint();
  return std::real(rho.trace());
}

Protocol from_bits(std::size_t bits, std::size_t k) {
  Protocol p(k);
  for (std::size_t j = 0; j < k; ++j) p[j] = (bits >> j) & 1u;
  return p;
}

TEST(ProtocolProbability, Examples) {
  const StepDynamics dyn = nd_dynamics(qd2());
  EXPECT_NEAR(protocol_log_probability(dyn, psi_state(), Protocol{0}), std::log(0.54), 1e-14);
  EXPECT_NEAR(protocol_log_probability(dyn, basis_state(0), Protocol{0, 0}), 2 * std::log(0.3), 1e-14);
}

TEST(ProtocolProbability, MatchesMixtureOracle) {
  const StepDynamics dyn = nd_dynamics(qd2());
  for (std::size_t bits = 0; bits < 256; ++bits) {
    const Protocol p = from_bits(bits, 8);
    EXPECT_NEAR(std::exp(protocol_log_probability(dyn, psi_state(), p)), qd2_mixture_probability(p, 0.4), 1e-15);
  }
}

TEST(ProtocolProbability, PerturbedMatchesKrausRecursion) {
  const ComplexMatrix h = 0.2 * pauli_x();
  const StepDynamics dyn = build_hamiltonian_perturbation(qd2(), {h});
  const ComplexMatrix u = (Complex(0, -1) * h).exp();
  for (std::size_t bits = 0; bits < 64; ++bits) {
    const Protocol p = from_bits(bits, 6);
    EXPECT_NEAR(protocol_log_probability(dyn, psi_state(), p),
                std::log(brute_probability(u, psi_state().matrix(), p)), 1e-12);
  }
}

TEST(ProtocolProbability, Normalization) {
  const StepDynamics nd = nd_dynamics(qd2());
  const StepDynamics pert = build_hamiltonian_perturbation(qd2(), {ComplexMatrix(0.1 * pauli_x())});
  for (const StepDynamics* dyn : {&nd, &pert})
    for (std::size_t k = 1; k <= 8; ++k) {
      double total = 0.0;
      for (std::size_t bits = 0; bits < (1u << k); ++bits)
        total += std::exp(protocol_log_probability(*dyn, psi_state(), from_bits(bits, k)));
      EXPECT_NEAR(total, 1.0, 1e-10);
    }
}

TEST(ProtocolProbability, ZeroWeightIsMinusInfinity) {
  ComplexMatrix sharp(2, 2);
  sharp << 1.0, 0.0, 0.0, 1.0;
  const NonDemolitionModel m =
      build_nd_model(qnd::testing::qd2_projectors(), OutcomeAlphabet({"L", "R"}), sharp);
  const double lp = protocol_log_probability(nd_dynamics(m), basis_state(0), Protocol{1});
  EXPECT_TRUE(std::isinf(lp) && lp < 0);
}

TEST(ProtocolProbability, ConditionalIidFactorization) {
  const StepDynamics dyn = nd_dynamics(qd2());
  for (std::size_t bits = 0; bits < 128; ++bits) {
    const Protocol p = from_bits(bits, 7);
    EXPECT_NEAR(std::exp(protocol_log_probability(dyn, basis_state(1), p)), qd2_mixture_probability(p, 0.0), 1e-12);
  }
}

TEST(Consistency, MarginalResiduals) {
  EXPECT_LE(marginal_consistency_check(nd_dynamics(qd2()), psi_state(), 6), 1e-12);
  const StepDynamics pert = build_hamiltonian_perturbation(qd2(), {ComplexMatrix(0.2 * pauli_x())});
  EXPECT_LE(marginal_consistency_check(pert, psi_state(), 6), 1e-12);
  // Kraus set summing to 0.9 identity: the first-level deficit is 0.1.
  const ComplexMatrix k = ComplexMatrix::Identity(2, 2) * std::sqrt(0.45);
  const KrausFamily broken =
      KrausFamily::unchecked(OutcomeAlphabet({"L", "R"}), {OutcomeMap::from_kraus({k}), OutcomeMap::from_kraus({k})});
  EXPECT_NEAR(marginal_consistency_check(constant_dynamics(broken), psi_state(), 4), 0.1, 1e-12);
}

TEST(Consistency, TooLarge) {
  EXPECT_EQ(code_of([] { marginal_consistency_check(nd_dynamics(qd2()), psi_state(), 21); }), ErrorCode::TooLarge);
}

TEST(Exchangeability, NdAndPerturbed) {
  EXPECT_LE(exchangeability_check(nd_dynamics(qd2()), psi_state(), 4), 1e-12);
  EXPECT_EQ(exchangeability_check(nd_dynamics(qd2()), psi_state(), 1), 0.0);
  const StepDynamics pert = build_hamiltonian_perturbation(qd2(), {ComplexMatrix(0.2 * pauli_x())});
  const double dev = exchangeability_check(pert, psi_state(), 4);
  // Independent evaluation: LR vs RL at k = 2.
  const ComplexMatrix u = (Complex(0, -0.2) * pauli_x()).exp();
  const double lr = brute_probability(u, psi_state().matrix(), {0, 1});
  const double rl = brute_probability(u, psi_state().matrix(), {1, 0});
  EXPECT_GT(std::abs(lr - rl), 1e-4);
  EXPECT_GT(dev, 1e-6);
  EXPECT_NEAR(exchangeability_check(pert, psi_state(), 2), std::abs(lr - rl), 1e-14);
}

TEST(Enumerate, VisitsPrefixesInPreorder) {
  std::vector<Protocol> seen;
  double leaf_mass = 0.0;
  enumerate_protocols(nd_dynamics(qd2()), psi_state().matrix(), 3,
                      [&](std::span<const std::size_t> prefix, const ComplexMatrix& sigma) {
                        seen.emplace_back(prefix.begin(), prefix.end());
                        if (prefix.size() == 3) leaf_mass += std::real(sigma.trace());
                      });
  ASSERT_EQ(seen.size(), 15u);
  EXPECT_TRUE(seen[0].empty());
  EXPECT_EQ(seen[1], Protocol({0}));
  EXPECT_EQ(seen[2], Protocol({0, 0}));
  EXPECT_EQ(seen[3], Protocol({0, 0, 0}));
  EXPECT_EQ(seen[4], Protocol({0, 0, 1}));
  EXPECT_NEAR(leaf_mass, 1.0, 1e-14);
  EXPECT_EQ(code_of([] {
              enumerate_protocols(nd_dynamics(qd2()), psi_state().matrix(), 5,
                                  [](std::span<const std::size_t>, const ComplexMatrix&) {}, 16);
            }),
            ErrorCode::TooLarge);
}

TEST(Sampler, FixedPointState) {
  const StepDynamics dyn = nd_dynamics(qd2());
  const TrajectoryRecord rec = sample_trajectory(dyn, basis_state(0), 20000, 5, 0, {true, 100});
  std::size_t n_l = 0;
  for (auto xi : rec.protocol) n_l += xi == 0;
  const double f = static_cast<double>(n_l) / 20000.0;
  EXPECT_NEAR(f, 0.3, 4.0 * std::sqrt(0.21 / 20000.0));
  for (const auto& s : rec.states) EXPECT_LT(op_norm(ComplexMatrix(s.matrix() - basis_state(0).matrix())), 1e-12);
}

TEST(Sampler, LengthOneAndErrors) {
  const StepDynamics dyn = nd_dynamics(qd2());
  const TrajectoryRecord rec = sample_trajectory(dyn, psi_state(), 1, 9, 3);
  ASSERT_EQ(rec.protocol.size(), 1u);
  EXPECT_NEAR(rec.log_prob, std::log(rec.protocol[0] == 0 ? 0.54 : 0.46), 1e-14);
  EXPECT_EQ(code_of([&] { sample_trajectory(dyn, psi_state(), 0, 9, 3); }), ErrorCode::InvalidConfig);
  const KrausFamily dead = KrausFamily::unchecked(
      OutcomeAlphabet({"L", "R"}), {OutcomeMap::from_kraus({ComplexMatrix(ComplexMatrix::Zero(2, 2))}),
                                    OutcomeMap::from_kraus({ComplexMatrix(ComplexMatrix::Zero(2, 2))})});
  EXPECT_EQ(code_of([&] { sample_trajectory(constant_dynamics(dead), psi_state(), 3, 1, 0); }),
            ErrorCode::WeightUnderflow);
}

TEST(Sampler, DeterministicPerStream) {
  const StepDynamics dyn = build_hamiltonian_perturbation(qd2(), {ComplexMatrix(0.05 * pauli_x())});
  const TrajectoryRecord a = sample_trajectory(dyn, psi_state(), 500, 77, 4);
  const TrajectoryRecord b = sample_trajectory(dyn, psi_state(), 500, 77, 4);
  const TrajectoryRecord c = sample_trajectory(dyn, psi_state(), 500, 77, 5);
  EXPECT_EQ(a.protocol, b.protocol);
  EXPECT_EQ(a.log_prob, b.log_prob);
  EXPECT_NE(a.protocol, c.protocol);
  EXPECT_NEAR(a.log_prob, protocol_log_probability(dyn, psi_state(), a.protocol), 1e-9);
}

TEST(Sampler, StateStorageStride) {
  const StepDynamics dyn = nd_dynamics(qd2());
  const TrajectoryRecord rec = sample_trajectory(dyn, psi_state(), 10, 1, 0, {true, 4});
  EXPECT_EQ(rec.state_steps, (std::vector<std::size_t>{0, 4, 8, 10}));
  const TrajectoryRecord dflt = sample_trajectory(dyn, psi_state(), 1024, 1, 0, {true, 0});
  EXPECT_EQ(dflt.state_steps.size(), 257u);
  EXPECT_EQ(dflt.state_steps[1], 4u);
  for (const auto& s : dflt.states) {
    EXPECT_NEAR(std::real(s.matrix().trace()), 1.0, 1e-12);
    EXPECT_LT(hermiticity_residual(s.matrix()), 1e-14);
  }
  EXPECT_TRUE(sample_trajectory(dyn, psi_state(), 10, 1, 0).states.empty());
}

TEST(Sampler, AgreesWithMeasureOnShortProtocols) {
  const StepDynamics dyn = build_hamiltonian_perturbation(qd2(), {ComplexMatrix(0.2 * pauli_x())});
  const std::size_t n = 100000, k = 4;
  std::map<Protocol, std::size_t> counts;
  TrajectoryOptions opt;
  for (std::size_t s = 0; s < n; ++s) ++counts[sample_trajectory(dyn, psi_state(), k, 31, s, opt).protocol];
  double chi2 = 0.0;
  for (std::size_t bits = 0; bits < 16; ++bits) {
    const Protocol p = from_bits(bits, k);
    const double prob = std::exp(protocol_log_probability(dyn, psi_state(), p));
    const double expected = prob * static_cast<double>(n);
    const double observed = static_cast<double>(counts[p]);
    EXPECT_LE(std::abs(observed - expected), 4.0 * std::sqrt(expected * (1 - prob))) << "protocol " << bits;
    chi2 += (observed - expected) * (observed - expected) / expected;
  }
  // chi-square with 15 dof at p = 0.001
  EXPECT_LT(chi2, 37.70);
}

TEST(Sampler, FactWeightsAreMartingales) {
  // E[Tr(Pi_0 rho_k)] = Tr(Pi_0 rho_0) for ND dynamics.
  const StepDynamics dyn = nd_dynamics(qd2());
  const std::size_t n = 20000;
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    TrajectorySampler t(dyn, psi_state(), 8, s);
    for (int j = 0; j < 10; ++j) t.step();
    const double w = std::real(t.state()(0, 0));
    sum += w;
    sum2 += w * w;
  }
  const double mean = sum / n, se = std::sqrt((sum2 / n - mean * mean) / n);
  EXPECT_NEAR(mean, 0.4, 4.0 * se);
}

TEST(Frequencies, Examples) {
  const OutcomeAlphabet ab({"L", "R"});
  const Protocol p = ab.parse("LLRL");
  const FrequencyTable all = empirical_frequencies(p, 0, 4, 2);
  EXPECT_DOUBLE_EQ(all.freqs[0], 0.75);
  EXPECT_EQ(all.counts, (std::vector<std::size_t>{3, 1}));
  const FrequencyTable tail = empirical_frequencies(p, 2, 4, 2);
  EXPECT_DOUBLE_EQ(tail.freqs[0], 0.5);
  EXPECT_DOUBLE_EQ(tail.freqs.sum(), 1.0);
  EXPECT_EQ(code_of([&] { empirical_frequencies(p, 2, 2, 2); }), ErrorCode::BadWindow);
  EXPECT_EQ(code_of([&] { empirical_frequencies(p, 0, 5, 2); }), ErrorCode::BadWindow);
}

TEST(Frequencies, ConvergeConditionalOnFact) {
  const StepDynamics dyn = nd_dynamics(qd2());
  for (std::size_t k : {100u, 400u, 1600u}) {
    double mean_dev = 0.0;
    for (std::size_t s = 0; s < 1000; ++s) {
      const TrajectoryRecord rec = sample_trajectory(dyn, basis_state(1), k, 12, s);
      mean_dev += std::abs(empirical_frequencies(rec.protocol, 0, k, 2).freqs[0] - 0.7);
    }
    EXPECT_LE(mean_dev / 1000.0, 2.0 / std::sqrt(static_cast<double>(k)));
  }
}

TEST(Fluctuations, Examples) {
  const std::vector<double> flat{0.3, 0.3, 0.3};
  for (double v : fluctuation_series(flat, 0.3).values) EXPECT_EQ(v, 0.0);
  const std::vector<double> f{0.5};
  const std::vector<std::size_t> ks{4};
  const FluctuationSeries s = fluctuation_series(f, 0.3, ks);
  EXPECT_NEAR(s.values[0], 0.4, 1e-15);
  const std::vector<double> seq{1.0, 0.5, 2.0 / 3.0};
  const FluctuationSeries d = fluctuation_series(seq, 0.5);
  EXPECT_EQ(d.ks, (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_NEAR(d.values[2], std::sqrt(3.0) / 6.0, 1e-15);
}

TEST(Fluctuations, ConditionalVariance) {
  const StepDynamics dyn = nd_dynamics(qd2());
  const std::size_t n = 10000, k = 100;
  std::vector<double> phi;
  for (std::size_t s = 0; s < n; ++s) {
    const TrajectoryRecord rec = sample_trajectory(dyn, basis_state(0), k, 13, s);
    const std::vector<double> f{empirical_frequencies(rec.protocol, 0, k, 2).freqs[0]};
    const std::vector<std::size_t> ks{k};
    phi.push_back(fluctuation_series(f, 0.3, ks).values[0]);
  }
  double m = 0.0;
  for (double v : phi) m += v;
  m /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double v : phi) {
    m2 += (v - m) * (v - m);
    m4 += std::pow(v - m, 4);
  }
  m2 /= n;
  m4 /= n;
  const double se = std::sqrt((m4 - m2 * m2) / n);
  EXPECT_NEAR(m2, 0.21, 3.0 * se);
}

TEST(Clt, MatchesBinomialOracle) {
  const StepDynamics dyn = nd_dynamics(qd2());
  const std::size_t k = 200;
  CltOptions opt;
  opt.mean = 0.3;
  opt.samples = 4000;
  opt.seed = 17;
  const CltDiagnostic d = clt_diagnostic(dyn, basis_state(0), k, opt);
  for (std::size_t i = 0; i < d.h.size(); ++i) {
    if (d.h[i] == 0.0) {
      EXPECT_EQ(d.F[i], 0.0);
      continue;
    }
    double mgf = 0.0;
    for (int j = 0; j <= static_cast<int>(k); ++j)
      mgf += binomial_pmf(static_cast<int>(k), j, 0.3) *
             std::exp(d.h[i] * std::sqrt(double(k)) * (double(j) / double(k) - 0.3));
    EXPECT_NEAR(d.F[i], std::log(mgf), 4.0 * d.F_se[i]) << "h = " << d.h[i];
  }
  EXPECT_NEAR(d.d1, 0.0, 4.0 * d.d1_se);
  EXPECT_NEAR(d.d2, 0.21, 4.0 * d.d2_se);
  EXPECT_NEAR(d.var_phi, 0.21, 4.0 * d.var_phi_se);
  EXPECT_EQ(d.phi.size(), 4000u);
}

TEST(Clt, GridValidation) {
  CltOptions opt;
  opt.h_grid = {-2.0, 0.0, 2.0};
  EXPECT_EQ(code_of([&] { clt_diagnostic(nd_dynamics(qd2()), basis_state(0), 10, opt); }), ErrorCode::InvalidConfig);
}

TEST(Format, TrajectoryLine) {
  TrajectoryRecord rec;
  rec.protocol = {0, 1, 1};
  rec.log_prob = std::log(0.1);
  rec.seed = 42;
  rec.stream = 7;
  EXPECT_EQ(format_trajectory_line(rec, OutcomeAlphabet({"L", "R"})), "LRR\t-2.3025850929940455\t42\t7");
}

}  // namespace
