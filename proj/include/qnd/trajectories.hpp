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
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qnd/channels.hpp"
#include "qnd/rng.hpp"

namespace qnd {

/// Outcome indices into the dynamics' alphabet.
using Protocol = std::vector<std::size_t>;

struct TrajectoryOptions {
  bool store_states = false;
  /// 0 selects max(1, length / 256).
  std::size_t stride = 0;
};

struct TrajectoryRecord {
  Protocol protocol;
  double log_prob = 0.0;
  /// Step index k of each stored state (0 is rho0).
  std::vector<std::size_t> state_steps;
  std::vector<DensityMatrix> states;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

/// Step-wise generalized Born-rule sampler with a normalized conditional state.
class TrajectorySampler {
 public:
  TrajectorySampler(const StepDynamics& dyn, const DensityMatrix& rho0, std::uint64_t seed, std::uint64_t stream);

  /// Draws xi_{k+1}, updates the state and returns the outcome.
  std::size_t step();

  const ComplexMatrix& state() const { return state_; }
  const Protocol& protocol() const { return protocol_; }
  double log_prob() const { return log_prob_; }
  std::size_t steps_taken() const { return protocol_.size(); }

 private:
  const StepDynamics* dyn_;
  ComplexMatrix state_;
  Protocol protocol_;
  double log_prob_ = 0.0;
  Philox4x32 rng_;
  std::vector<double> weights_;
};

TrajectoryRecord sample_trajectory(const StepDynamics& dyn, const DensityMatrix& rho0, std::size_t length,
                                   std::uint64_t seed, std::uint64_t stream, const TrajectoryOptions& options = {});

/// Natural log of mu(xi_1..xi_k); -infinity when some step has zero weight.
double protocol_log_probability(const StepDynamics& dyn, const DensityMatrix& rho0, std::span<const std::size_t> protocol);

/// Visits every protocol prefix of length 0..depth in depth-first preorder
/// with its unnormalized conditional operator. Throws TooLarge when
/// |alphabet|^depth exceeds `budget`.
using PrefixVisitor = std::function<void(std::span<const std::size_t> prefix, const ComplexMatrix& sigma)>;
void enumerate_protocols(const StepDynamics& dyn, const ComplexMatrix& rho0, std::size_t depth,
                         const PrefixVisitor& visit, std::size_t budget = std::size_t{1} << 20);

/// Worst |sum_xi mu(prefix, xi) - mu(prefix)| over all prefixes shorter than k_max.
double marginal_consistency_check(const StepDynamics& dyn, const DensityMatrix& rho0, std::size_t k_max);

/// Worst |mu(xi_pi) - mu(xi)| over length-k protocols and permutations pi.
double exchangeability_check(const StepDynamics& dyn, const DensityMatrix& rho0, std::size_t k);

struct FrequencyTable {
  std::size_t l = 0;
  std::size_t k = 0;
  std::vector<std::size_t> counts;
  RealVector freqs;
};

/// Counts over the window xi_{l+1}..xi_k.
FrequencyTable empirical_frequencies(std::span<const std::size_t> protocol, std::size_t l, std::size_t k,
                                     std::size_t num_outcomes);

struct FluctuationSeries {
  double mean = 0.0;
  std::vector<std::size_t> ks;
  std::vector<double> values;
};

/// phi^{(k)} = sqrt(k) (f^{(k)} - m). With `ks` empty, freqs[i] is taken at k = i + 1.
FluctuationSeries fluctuation_series(std::span<const double> freqs, double mean,
                                     std::span<const std::size_t> ks = {});

struct CltOptions {
  std::size_t outcome = 0;  ///< tracked outcome alpha
  double mean = 0.0;        ///< m_alpha
  std::vector<double> h_grid{-0.2, -0.1, 0.0, 0.1, 0.2};
  std::size_t samples = 2000;
  std::uint64_t seed = 0;
};

struct CltDiagnostic {
  std::vector<double> h;
  std::vector<double> F;
  std::vector<double> F_se;
  double step = 0.0;  ///< finite-difference spacing
  double d1 = 0.0, d1_se = 0.0;
  double d2 = 0.0, d2_se = 0.0;
  double d3 = 0.0;
  /// Exact derivatives at 0 of the empirical cumulant generating function.
  double mean_phi = 0.0, mean_phi_se = 0.0;
  double var_phi = 0.0, var_phi_se = 0.0;
  std::vector<double> phi;
};

/// Monte-Carlo F(h) = log E[exp(h phi^{(k)})] with delta-method errors.
CltDiagnostic clt_diagnostic(const StepDynamics& dyn, const DensityMatrix& rho0, std::size_t k,
                             const CltOptions& options);

/// "protocol<TAB>log_prob<TAB>seed<TAB>stream".
std::string format_trajectory_line(const TrajectoryRecord& record, const OutcomeAlphabet& alphabet);

}  // namespace qnd
