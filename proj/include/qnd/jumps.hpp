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

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "qnd/channels.hpp"
#include "qnd/inference.hpp"
#include "qnd/trajectories.hpp"

namespace qnd {

struct CycleEstimate {
  std::size_t cycle = 0;
  std::size_t nu_hat = 0;
  bool tie = false;
  double max_weight = 0.0;      ///< max_nu Tr(Pi_nu rho)
  double block_distance = 0.0;  ///< min_nu ||rho - Pi_nu rho Pi_nu||_1
};

struct JumpTrajectory {
  std::vector<CycleEstimate> cycles;
};

struct CycleRun {
  JumpTrajectory jumps;
  TrajectoryRecord record;
};

/// Simulates n_cycles bursts and estimates the fact from each burst's outcomes;
/// closeness is measured on the post-burst state.
CycleRun run_cycles(const CycleConfig& config, const DensityMatrix& rho0, std::size_t n_cycles, std::uint64_t seed,
                    std::uint64_t stream = 0);

struct ClosenessReport {
  std::size_t cycles = 0;
  std::size_t satisfied = 0;
  double fraction = 0.0;
  double epsilon = 0.0;
  bool passes = false;  ///< fraction >= 1 - epsilon
};

bool cycle_is_close(const CycleEstimate& c, double epsilon);

ClosenessReport closeness_from_run(const JumpTrajectory& jumps, double epsilon);

ClosenessReport closeness_check(const CycleConfig& config, const DensityMatrix& rho0, std::size_t n_cycles,
                                double epsilon, std::uint64_t seed);

struct MarkovComparison {
  RealMatrix counts;     ///< facts x facts transition tallies
  RealMatrix empirical;  ///< row-normalized counts (zero rows stay zero)
  RealMatrix theoretical;
  double max_abs_deviation = 0.0;  ///< over rows with at least one count
  std::size_t resolved_transitions = 0;
  std::size_t censored_transitions = 0;
};

/// T(nu, nu') = Tr(Pi_nu e^{i t H} Pi_nu' e^{-i t H}) / Tr Pi_nu.
RealMatrix theoretical_transition_matrix(const ProjectorFamily& projectors, const ComplexMatrix& hamiltonian, double t);

/// Tallies transitions of an existing run.
MarkovComparison markov_from_run(const JumpTrajectory& jumps, const CycleConfig& config,
                                 std::size_t min_transitions = 100);

/// Transitions between consecutive non-tie cycle estimates.
MarkovComparison markov_limit_comparison(const CycleConfig& config, const DensityMatrix& rho0, std::size_t n_cycles,
                                         std::uint64_t seed, std::size_t min_transitions = 100);

enum class HistoryMethod { Auto, Exact, MonteCarlo };

struct HistoryOptions {
  std::size_t r = 10;
  std::size_t p = 2;
  std::optional<double> epsilon;  ///< default r^{-1/3}
  std::size_t outcome = 0;        ///< tracked outcome
  HistoryMethod method = HistoryMethod::Auto;
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
  std::size_t budget = std::size_t{1} << 20;
};

struct HistoryReport {
  std::size_t r = 0;
  std::size_t p = 0;
  double epsilon = 0.0;
  bool exact = true;
  std::map<std::vector<std::size_t>, double> masses;
  double covered = 0.0;
  double uncovered = 0.0;  ///< delta-hat
  std::optional<double> uncovered_se;
};

/// Classifies p consecutive windows of length r by |f - m_alpha| < epsilon;
/// ambiguous or unmatched windows leave the protocol uncovered.
HistoryReport history_sets_probability(const StepDynamics& dyn, const DensityMatrix& rho0,
                                       const HistoryOptions& options);

}  // namespace qnd
