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

#include "qnd/trajectories.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace qnd {

namespace {

std::size_t checked_power(std::size_t base, std::size_t exponent, std::size_t budget) {
  std::size_t out = 1;
  for (std::size_t i = 0; i < exponent; ++i) {
    if (out > budget / std::max<std::size_t>(base, 1))
      throw Error(ErrorCode::TooLarge, std::to_string(base) + "^" + std::to_string(exponent) + " protocols exceed budget");
    out *= base;
  }
  if (out > budget) throw Error(ErrorCode::TooLarge, "protocol count exceeds budget");
  return out;
}

void enumerate_from(const StepDynamics& dyn, std::vector<std::size_t>& prefix, const ComplexMatrix& sigma,
                    std::size_t depth, const PrefixVisitor& visit) {
  visit(prefix, sigma);
  if (prefix.size() == depth) return;
  const KrausFamily& family = dyn.at(prefix.size() + 1, prefix);
  for (std::size_t xi = 0; xi < family.size(); ++xi) {
    const ComplexMatrix child = family[xi].apply(sigma);
    prefix.push_back(xi);
    enumerate_from(dyn, prefix, child, depth, visit);
    prefix.pop_back();
  }
}

}  // namespace

TrajectorySampler::TrajectorySampler(const StepDynamics& dyn, const DensityMatrix& rho0, std::uint64_t seed,
                                     std::uint64_t stream)
    : dyn_(&dyn), state_(rho0.matrix()), rng_(seed, stream) {
  if (rho0.dim() != dyn.dim()) throw Error(ErrorCode::InvalidConfig, "initial state dimension mismatch");
}

std::size_t TrajectorySampler::step() {
  const KrausFamily& family = dyn_->at(protocol_.size() + 1, protocol_);
  weights_.resize(family.size());
  bool alive = false;
  for (std::size_t xi = 0; xi < family.size(); ++xi) {
    weights_[xi] = std::max(0.0, family[xi].weight(state_));
    alive = alive || weights_[xi] >= 1e-15;
  }
  if (!alive) throw Error(ErrorCode::WeightUnderflow, "all outcome weights below 1e-15 at step " +
                                                          std::to_string(protocol_.size() + 1));
  const double u = rng_.uniform();
  std::size_t chosen = family.size();
  double cumulative = 0.0;
  for (std::size_t xi = 0; xi < family.size(); ++xi) {
    if (weights_[xi] <= 0.0) continue;
    cumulative += weights_[xi];
    chosen = xi;
    if (u < cumulative) break;
  }
  ComplexMatrix image = family[chosen].apply(state_);
  const double w = std::real(image.trace());
  state_ = (image + image.adjoint()) / (2.0 * w);
  log_prob_ += std::log(w);
  protocol_.push_back(chosen);
  return chosen;
}

TrajectoryRecord sample_trajectory(const StepDynamics& dyn, const DensityMatrix& rho0, std::size_t length,
                                   std::uint64_t seed, std::uint64_t stream, const TrajectoryOptions& options) {
  if (length < 1) throw Error(ErrorCode::InvalidConfig, "trajectory length must be at least 1");
  TrajectorySampler sampler(dyn, rho0, seed, stream);
  TrajectoryRecord record;
  record.seed = seed;
  record.stream = stream;
  const std::size_t stride = options.stride > 0 ? options.stride : std::max<std::size_t>(1, length / 256);
  if (options.store_states) {
    record.state_steps.push_back(0);
    record.states.push_back(rho0);
  }
  for (std::size_t k = 1; k <= length; ++k) {
    sampler.step();
    if (options.store_states && (k % stride == 0 || k == length)) {
      record.state_steps.push_back(k);
      record.states.push_back(validate_density(sampler.state()));
    }
  }
  record.protocol = sampler.protocol();
  record.log_prob = sampler.log_prob();
  return record;
}

double protocol_log_probability(const StepDynamics& dyn, const DensityMatrix& rho0,
                                std::span<const std::size_t> protocol) {
  if (protocol.empty()) throw Error(ErrorCode::InvalidConfig, "protocol must be non-empty");
  ComplexMatrix state = rho0.matrix();
  double log_prob = 0.0;
  for (std::size_t k = 0; k < protocol.size(); ++k) {
    const KrausFamily& family = dyn.at(k + 1, protocol.first(k));
    if (protocol[k] >= family.size()) throw Error(ErrorCode::UnknownOutcome, "outcome index out of range");
    const ComplexMatrix image = family[protocol[k]].apply(state);
    const double w = std::real(image.trace());
    if (!(w > 0.0)) return -std::numeric_limits<double>::infinity();
    log_prob += std::log(w);
    state = (image + image.adjoint()) / (2.0 * w);
  }
  return log_prob;
}

void enumerate_protocols(const StepDynamics& dyn, const ComplexMatrix& rho0, std::size_t depth,
                         const PrefixVisitor& visit, std::size_t budget) {
  checked_power(dyn.alphabet().size(), depth, budget);
  std::vector<std::size_t> prefix;
  prefix.reserve(depth);
  enumerate_from(dyn, prefix, rho0, depth, visit);
}

double marginal_consistency_check(const StepDynamics& dyn, const DensityMatrix& rho0, std::size_t k_max) {
  checked_power(dyn.alphabet().size(), k_max, std::size_t{1} << 20);
  double worst = 0.0;
  std::vector<std::size_t> prefix;
  std::function<double(const ComplexMatrix&)> visit = [&](const ComplexMatrix& sigma) {
    const double mass = std::real(sigma.trace());
    if (prefix.size() == k_max) return mass;
    const KrausFamily& family = dyn.at(prefix.size() + 1, prefix);
    double children = 0.0;
    for (std::size_t xi = 0; xi < family.size(); ++xi) {
      prefix.push_back(xi);
      children += visit(family[xi].apply(sigma));
      prefix.pop_back();
    }
    worst = std::max(worst, std::abs(children - mass));
    return mass;
  };
  visit(rho0.matrix());
  return worst;
}

double exchangeability_check(const StepDynamics& dyn, const DensityMatrix& rho0, std::size_t k) {
  // Permutations of a protocol are exactly the protocols with the same counts.
  std::map<std::vector<std::size_t>, std::pair<double, double>> classes;
  const std::size_t n = dyn.alphabet().size();
  enumerate_protocols(dyn, rho0.matrix(), k, [&](std::span<const std::size_t> prefix, const ComplexMatrix& sigma) {
    if (prefix.size() != k) return;
    std::vector<std::size_t> counts(n, 0);
    for (std::size_t xi : prefix) ++counts[xi];
    const double mu = std::real(sigma.trace());
    auto [it, inserted] = classes.try_emplace(std::move(counts), mu, mu);
    if (!inserted) {
      it->second.first = std::min(it->second.first, mu);
      it->second.second = std::max(it->second.second, mu);
    }
  });
  double worst = 0.0;
  for (const auto& [counts, range] : classes) worst = std::max(worst, range.second - range.first);
  return worst;
}

FrequencyTable empirical_frequencies(std::span<const std::size_t> protocol, std::size_t l, std::size_t k,
                                     std::size_t num_outcomes) {
  if (!(l < k) || k > protocol.size())
    throw Error(ErrorCode::BadWindow, "window (" + std::to_string(l) + ", " + std::to_string(k) +
                                          ") invalid for length " + std::to_string(protocol.size()));
  FrequencyTable table;
  table.l = l;
  table.k = k;
  table.counts.assign(num_outcomes, 0);
  for (std::size_t j = l; j < k; ++j) {
    if (protocol[j] >= num_outcomes) throw Error(ErrorCode::UnknownOutcome, "outcome index out of range");
    ++table.counts[protocol[j]];
  }
  table.freqs.resize(static_cast<Eigen::Index>(num_outcomes));
  for (std::size_t xi = 0; xi < num_outcomes; ++xi)
    table.freqs[static_cast<Eigen::Index>(xi)] =
        static_cast<double>(table.counts[xi]) / static_cast<double>(k - l);
  return table;
}

FluctuationSeries fluctuation_series(std::span<const double> freqs, double mean, std::span<const std::size_t> ks) {
  if (!(mean >= 0.0 && mean <= 1.0)) throw Error(ErrorCode::InvalidConfig, "reference mean must lie in [0, 1]");
  if (!ks.empty() && ks.size() != freqs.size())
    throw Error(ErrorCode::InvalidConfig, "frequency and index sequences differ in length");
  FluctuationSeries series;
  series.mean = mean;
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    const std::size_t k = ks.empty() ? i + 1 : ks[i];
    series.ks.push_back(k);
    series.values.push_back(std::sqrt(static_cast<double>(k)) * (freqs[i] - mean));
  }
  return series;
}

CltDiagnostic clt_diagnostic(const StepDynamics& dyn, const DensityMatrix& rho0, std::size_t k,
                             const CltOptions& options) {
  if (k < 1 || options.samples < 2) throw Error(ErrorCode::InvalidConfig, "need k >= 1 and at least two samples");
  double step = 0.0;
  for (double h : options.h_grid) {
    if (std::abs(h) > 1.0) throw Error(ErrorCode::InvalidConfig, "h grid must lie in [-1, 1]");
    if (h > 0.0 && (step == 0.0 || h < step)) step = h;
  }
  if (step == 0.0) step = 0.1;

  CltDiagnostic out;
  out.step = step;
  const double root_k = std::sqrt(static_cast<double>(k));
  out.phi.reserve(options.samples);
  for (std::size_t s = 0; s < options.samples; ++s) {
    TrajectorySampler sampler(dyn, rho0, options.seed, s);
    std::size_t hits = 0;
    for (std::size_t j = 0; j < k; ++j)
      if (sampler.step() == options.outcome) ++hits;
    out.phi.push_back(root_k * (static_cast<double>(hits) / static_cast<double>(k) - options.mean));
  }
  const auto n = static_cast<double>(options.samples);

  // Returns F(h) and the per-sample influence terms e^{h phi_i}/m(h) - 1.
  auto cgf = [&](double h, std::vector<double>* influence) {
    double m = 0.0;
    for (double p : out.phi) m += std::exp(h * p);
    m /= n;
    if (influence) {
      influence->resize(out.phi.size());
      for (std::size_t i = 0; i < out.phi.size(); ++i) (*influence)[i] = std::exp(h * out.phi[i]) / m - 1.0;
    }
    return std::log(m);
  };
  auto stderr_of = [&](const std::vector<double>& terms) {
    double mean = 0.0;
    for (double t : terms) mean += t;
    mean /= n;
    double ss = 0.0;
    for (double t : terms) ss += (t - mean) * (t - mean);
    return std::sqrt(ss / (n - 1.0) / n);
  };

  std::vector<double> infl;
  for (double h : options.h_grid) {
    out.h.push_back(h);
    out.F.push_back(h == 0.0 ? 0.0 : cgf(h, &infl));
    out.F_se.push_back(h == 0.0 ? 0.0 : stderr_of(infl));
  }

  std::vector<double> plus, minus;
  const double f_plus = cgf(step, &plus);
  const double f_minus = cgf(-step, &minus);
  const double f_plus2 = cgf(2.0 * step, nullptr);
  const double f_minus2 = cgf(-2.0 * step, nullptr);
  out.d1 = (f_plus - f_minus) / (2.0 * step);
  out.d2 = (f_plus + f_minus) / (step * step);
  out.d3 = (f_plus2 - 2.0 * f_plus + 2.0 * f_minus - f_minus2) / (2.0 * step * step * step);
  std::vector<double> t1(plus.size()), t2(plus.size());
  for (std::size_t i = 0; i < plus.size(); ++i) {
    t1[i] = (plus[i] - minus[i]) / (2.0 * step);
    t2[i] = (plus[i] + minus[i]) / (step * step);
  }
  out.d1_se = stderr_of(t1);
  out.d2_se = stderr_of(t2);

  double m1 = 0.0;
  for (double p : out.phi) m1 += p;
  m1 /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double p : out.phi) {
    const double c = (p - m1) * (p - m1);
    m2 += c;
    m4 += c * c;
  }
  m2 /= n;
  m4 /= n;
  out.mean_phi = m1;
  out.mean_phi_se = std::sqrt(m2 / n);
  out.var_phi = m2;
  out.var_phi_se = std::sqrt(std::max(0.0, m4 - m2 * m2) / n);
  return out;
}

std::string format_trajectory_line(const TrajectoryRecord& record, const OutcomeAlphabet& alphabet) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.17g", record.log_prob);
  return alphabet.format(record.protocol) + "\t" + buffer + "\t" + std::to_string(record.seed) + "\t" +
         std::to_string(record.stream);
}

}  // namespace qnd
