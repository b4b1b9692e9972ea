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

#include "qnd/jumps.hpp"

#include <cmath>

namespace qnd {

namespace {

CycleEstimate measure_cycle(std::size_t cycle, const EstimatorResult& est, const ComplexMatrix& rho,
                            const ProjectorFamily& projectors) {
  CycleEstimate c;
  c.cycle = cycle;
  c.nu_hat = est.nu_hat;
  c.tie = est.tie;
  c.max_weight = projectors.weights(rho).maxCoeff();
  c.block_distance = std::numeric_limits<double>::infinity();
  for (const auto& pi : projectors.projectors())
    c.block_distance = std::min(c.block_distance, trace_norm(ComplexMatrix(rho - pi * rho * pi)));
  return c;
}

// Returns the fact index of a window, or nullopt when unmatched or ambiguous.
std::optional<std::size_t> classify(double f, const std::vector<double>& means, double epsilon) {
  std::optional<std::size_t> hit;
  for (std::size_t a = 0; a < means.size(); ++a)
    if (std::abs(f - means[a]) < epsilon) {
      if (hit) return std::nullopt;
      hit = a;
    }
  return hit;
}

}  // namespace

CycleRun run_cycles(const CycleConfig& config, const DensityMatrix& rho0, std::size_t n_cycles, std::uint64_t seed,
                    std::uint64_t stream) {
  if (n_cycles < 1) throw Error(ErrorCode::InvalidConfig, "need at least one cycle");
  const StepDynamics dyn = build_cycle_dynamics(config);
  const NonDemolitionModel& model = *config.model;
  EstimatorCache estimator(model);
  TrajectorySampler sampler(dyn, rho0, seed, stream);
  const std::size_t m = config.measurements;

  CycleRun run;
  std::vector<std::size_t> counts(model.num_outcomes());
  for (std::size_t cycle = 0; cycle < n_cycles; ++cycle) {
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t j = 0; j < m; ++j) ++counts[sampler.step()];
    run.jumps.cycles.push_back(measure_cycle(cycle, estimator(counts), sampler.state(), model.projectors()));
  }
  run.record.protocol = sampler.protocol();
  run.record.log_prob = sampler.log_prob();
  run.record.seed = seed;
  run.record.stream = stream;
  return run;
}

bool cycle_is_close(const CycleEstimate& c, double epsilon) {
  return c.max_weight >= 1.0 - epsilon && c.block_distance <= epsilon;
}

ClosenessReport closeness_from_run(const JumpTrajectory& jumps, double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw Error(ErrorCode::InvalidConfig, "epsilon must lie in (0, 1]");
  ClosenessReport out;
  out.cycles = jumps.cycles.size();
  out.epsilon = epsilon;
  for (const auto& c : jumps.cycles)
    if (cycle_is_close(c, epsilon)) ++out.satisfied;
  out.fraction = out.cycles ? static_cast<double>(out.satisfied) / static_cast<double>(out.cycles) : 0.0;
  out.passes = out.fraction >= 1.0 - epsilon;
  return out;
}

ClosenessReport closeness_check(const CycleConfig& config, const DensityMatrix& rho0, std::size_t n_cycles,
                                double epsilon, std::uint64_t seed) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw Error(ErrorCode::InvalidConfig, "epsilon must lie in (0, 1]");
  return closeness_from_run(run_cycles(config, rho0, n_cycles, seed).jumps, epsilon);
}

RealMatrix theoretical_transition_matrix(const ProjectorFamily& projectors, const ComplexMatrix& hamiltonian, double t) {
  const ComplexMatrix u = matrix_exponential_unitary(hamiltonian, t);
  const auto n = static_cast<Eigen::Index>(projectors.size());
  RealMatrix out(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const ComplexMatrix& pa = projectors[static_cast<std::size_t>(a)];
    const double rank = std::real(pa.trace());
    for (Eigen::Index b = 0; b < n; ++b) {
      const ComplexMatrix rotated = u.adjoint() * projectors[static_cast<std::size_t>(b)] * u;
      out(a, b) = std::real((pa * rotated * pa).trace()) / rank;
    }
  }
  return out;
}

MarkovComparison markov_from_run(const JumpTrajectory& jumps, const CycleConfig& config,
                                 std::size_t min_transitions) {
  const auto n = static_cast<Eigen::Index>(config.model->num_facts());
  MarkovComparison out;
  out.counts = RealMatrix::Zero(n, n);
  const auto& cycles = jumps.cycles;
  for (std::size_t i = 1; i < cycles.size(); ++i) {
    if (cycles[i - 1].tie || cycles[i].tie) {
      ++out.censored_transitions;
      continue;
    }
    out.counts(static_cast<Eigen::Index>(cycles[i - 1].nu_hat), static_cast<Eigen::Index>(cycles[i].nu_hat)) += 1.0;
    ++out.resolved_transitions;
  }
  out.theoretical = theoretical_transition_matrix(config.model->projectors(), config.hamiltonian, config.lambda2);
  out.empirical = RealMatrix::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const double row = out.counts.row(a).sum();
    if (row == 0.0) continue;
    out.empirical.row(a) = out.counts.row(a) / row;
    out.max_abs_deviation =
        std::max(out.max_abs_deviation, (out.empirical.row(a) - out.theoretical.row(a)).cwiseAbs().maxCoeff());
  }
  if (out.resolved_transitions < min_transitions)
    throw Error(ErrorCode::InsufficientResolvedCycles,
                std::to_string(out.resolved_transitions) + " resolved transitions, need " + std::to_string(min_transitions));
  return out;
}

MarkovComparison markov_limit_comparison(const CycleConfig& config, const DensityMatrix& rho0, std::size_t n_cycles,
                                         std::uint64_t seed, std::size_t min_transitions) {
  return markov_from_run(run_cycles(config, rho0, n_cycles, seed).jumps, config, min_transitions);
}

HistoryReport history_sets_probability(const StepDynamics& dyn, const DensityMatrix& rho0,
                                       const HistoryOptions& options) {
  if (!dyn.reference()) throw Error(ErrorCode::NoReference, "history sets need a reference model");
  if (options.r < 1 || options.p < 1) throw Error(ErrorCode::InvalidConfig, "need r >= 1 and p >= 1");
  const NonDemolitionModel& model = *dyn.reference();
  if (options.outcome >= model.num_outcomes()) throw Error(ErrorCode::UnknownOutcome, "tracked outcome out of range");

  HistoryReport out;
  out.r = options.r;
  out.p = options.p;
  out.epsilon = options.epsilon.value_or(std::pow(static_cast<double>(options.r), -1.0 / 3.0));
  std::vector<double> means;
  for (std::size_t a = 0; a < model.num_facts(); ++a)
    means.push_back(model.cond_probs()(static_cast<Eigen::Index>(options.outcome), static_cast<Eigen::Index>(a)));

  const std::size_t length = options.r * options.p;
  auto history_of = [&](std::span<const std::size_t> protocol) -> std::optional<std::vector<std::size_t>> {
    std::vector<std::size_t> history;
    for (std::size_t w = 0; w < options.p; ++w) {
      std::size_t hits = 0;
      for (std::size_t j = w * options.r; j < (w + 1) * options.r; ++j)
        if (protocol[j] == options.outcome) ++hits;
      const auto alpha = classify(static_cast<double>(hits) / static_cast<double>(options.r), means, out.epsilon);
      if (!alpha) return std::nullopt;
      history.push_back(*alpha);
    }
    return history;
  };

  bool exact = options.method == HistoryMethod::Exact;
  if (options.method == HistoryMethod::Auto) {
    double leaves = 1.0;
    for (std::size_t i = 0; i < length; ++i) leaves *= static_cast<double>(model.num_outcomes());
    exact = leaves <= static_cast<double>(options.budget);
  }
  out.exact = exact;

  if (exact) {
    double total = 0.0;
    enumerate_protocols(
        dyn, rho0.matrix(), length,
        [&](std::span<const std::size_t> prefix, const ComplexMatrix& sigma) {
          if (prefix.size() != length) return;
          const double mass = std::real(sigma.trace());
          total += mass;
          if (auto h = history_of(prefix)) {
            out.masses[*h] += mass;
            out.covered += mass;
          }
        },
        options.budget);
    out.uncovered = total - out.covered;
    return out;
  }

  if (options.samples < 2) throw Error(ErrorCode::InvalidConfig, "Monte Carlo needs at least two samples");
  std::size_t uncovered = 0;
  const double weight = 1.0 / static_cast<double>(options.samples);
  for (std::size_t s = 0; s < options.samples; ++s) {
    TrajectorySampler sampler(dyn, rho0, options.seed, s);
    for (std::size_t j = 0; j < length; ++j) sampler.step();
    if (auto h = history_of(sampler.protocol()))
      out.masses[*h] += weight;
    else
      ++uncovered;
  }
  const double n = static_cast<double>(options.samples);
  out.uncovered = static_cast<double>(uncovered) / n;
  out.covered = 1.0 - out.uncovered;
  out.uncovered_se = std::sqrt(out.uncovered * (1.0 - out.uncovered) / n);
  return out;
}

}  // namespace qnd
