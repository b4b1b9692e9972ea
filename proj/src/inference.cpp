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

#include "qnd/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qnd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double stderr_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
}

double projector_weight(const ComplexMatrix& pi, const ComplexMatrix& rho) {
  return pi.transpose().cwiseProduct(rho).sum().real();
}

}  // namespace

double relative_entropy(const RealVector& p, const RealVector& q) {
  if (p.size() != q.size()) throw Error(ErrorCode::InvalidConfig, "distributions differ in support size");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return kInf;
    sum += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(sum, 0.0);
}

double binary_relative_entropy(double x, double y) {
  RealVector p(2), q(2);
  p << x, 1.0 - x;
  q << y, 1.0 - y;
  return relative_entropy(p, q);
}

EstimatorResult estimate_fact(const RealVector& freqs, const NonDemolitionModel& model) {
  if (static_cast<std::size_t>(freqs.size()) != model.num_outcomes())
    throw Error(ErrorCode::InvalidConfig, "frequency table does not match the model alphabet");
  EstimatorResult out;
  out.scores.resize(static_cast<Eigen::Index>(model.num_facts()));
  double best = kInf;
  for (std::size_t nu = 0; nu < model.num_facts(); ++nu) {
    const double s = relative_entropy(freqs, model.conditional(nu));
    out.scores[static_cast<Eigen::Index>(nu)] = s;
    best = std::min(best, s);
  }
  if (best == kInf) throw Error(ErrorCode::FactsUnidentifiable, "every fact has infinite relative entropy");
  std::size_t near = 0;
  bool chosen = false;
  for (std::size_t nu = 0; nu < model.num_facts(); ++nu)
    if (out.scores[static_cast<Eigen::Index>(nu)] - best <= 1e-12) {
      if (!chosen) out.nu_hat = nu;
      chosen = true;
      ++near;
    }
  out.tie = near > 1;
  return out;
}

EstimatorResult estimate_fact(const FrequencyTable& table, const NonDemolitionModel& model) {
  return estimate_fact(table.freqs, model);
}

const EstimatorResult& EstimatorCache::operator()(const std::vector<std::size_t>& counts) {
  auto it = cache_.find(counts);
  if (it != cache_.end()) return it->second;
  std::size_t total = 0;
  for (std::size_t c : counts) total += c;
  RealVector freqs(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t i = 0; i < counts.size(); ++i)
    freqs[static_cast<Eigen::Index>(i)] = static_cast<double>(counts[i]) / static_cast<double>(total);
  return cache_.emplace(counts, estimate_fact(freqs, *model_)).first->second;
}

// ---------------------------------------------------------------------------
// Error probability

ErrorProbabilityReport error_probability(const StepDynamics& dyn, const DensityMatrix& rho0, std::size_t k,
                                         std::size_t r, const ErrorProbabilityOptions& options) {
  if (!dyn.reference()) throw Error(ErrorCode::NoReference, "error probability needs a reference model");
  if (r < 1) throw Error(ErrorCode::BadWindow, "window length r must be at least 1");
  const NonDemolitionModel& model = *dyn.reference();
  const std::size_t n_facts = model.num_facts();
  const std::size_t n_out = model.num_outcomes();
  const auto& pis = model.projectors().projectors();
  EstimatorCache estimator(model);

  ErrorProbabilityReport report;
  report.k = k;
  report.r = r;
  report.method = options.method;
  report.epsilon = RealVector::Zero(static_cast<Eigen::Index>(n_facts));
  report.selection = RealVector::Zero(static_cast<Eigen::Index>(n_facts));
  report.prior = RealVector::Zero(static_cast<Eigen::Index>(n_facts));

  if (options.method == ErrorMethod::Exact) {
    std::vector<std::size_t> counts(n_out);
    enumerate_protocols(
        dyn, rho0.matrix(), k + r,
        [&](std::span<const std::size_t> prefix, const ComplexMatrix& sigma) {
          if (prefix.size() == k)
            for (std::size_t nu = 0; nu < n_facts; ++nu)
              report.prior[static_cast<Eigen::Index>(nu)] += projector_weight(pis[nu], sigma);
          if (prefix.size() != k + r) return;
          std::fill(counts.begin(), counts.end(), 0);
          for (std::size_t j = k; j < k + r; ++j) ++counts[prefix[j]];
          const EstimatorResult& est = estimator(counts);
          const double mass = std::real(sigma.trace());
          const auto nu = static_cast<Eigen::Index>(est.nu_hat);
          report.selection[nu] += mass;
          report.epsilon[nu] += mass - projector_weight(pis[est.nu_hat], sigma);
          if (est.tie) report.tie_mass += mass;
        },
        options.budget);
    report.total = report.epsilon.sum();
    return report;
  }

  if (options.samples < 2) throw Error(ErrorCode::InvalidConfig, "Monte Carlo needs at least two samples");
  std::vector<std::vector<double>> eps(n_facts), sel(n_facts), prior(n_facts);
  std::vector<double> total;
  std::size_t ties = 0;
  std::vector<std::size_t> counts(n_out);
  for (std::size_t s = 0; s < options.samples; ++s) {
    TrajectorySampler sampler(dyn, rho0, options.seed, s);
    for (std::size_t j = 0; j < k; ++j) sampler.step();
    for (std::size_t nu = 0; nu < n_facts; ++nu) prior[nu].push_back(projector_weight(pis[nu], sampler.state()));
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t j = 0; j < r; ++j) ++counts[sampler.step()];
    const EstimatorResult& est = estimator(counts);
    if (est.tie) ++ties;
    const double miss = 1.0 - projector_weight(pis[est.nu_hat], sampler.state());
    for (std::size_t nu = 0; nu < n_facts; ++nu) {
      eps[nu].push_back(nu == est.nu_hat ? miss : 0.0);
      sel[nu].push_back(nu == est.nu_hat ? 1.0 : 0.0);
    }
    total.push_back(miss);
  }
  RealVector se(static_cast<Eigen::Index>(n_facts));
  for (std::size_t nu = 0; nu < n_facts; ++nu) {
    const auto i = static_cast<Eigen::Index>(nu);
    report.epsilon[i] = mean_of(eps[nu]);
    se[i] = stderr_of(eps[nu]);
    report.selection[i] = mean_of(sel[nu]);
    report.prior[i] = mean_of(prior[nu]);
  }
  report.epsilon_se = se;
  report.total = mean_of(total);
  report.total_se = stderr_of(total);
  report.tie_mass = static_cast<double>(ties) / static_cast<double>(options.samples);
  return report;
}

WindowErrorBounds window_error_bounds(const AssumptionConstants& constants, double C, double a, std::size_t /*k*/,
                                     std::size_t r) {
  if (!(C > 0.0) || !(a > 0.0 && a < 1.0)) throw Error(ErrorCode::InvalidConfig, "need C > 0 and a in (0, 1)");
  WindowErrorBounds out;
  out.nd_term = C * std::pow(a, static_cast<double>(r));
  if (constants.d1 > 0.0) {
    const double d = constants.d;
    if (!(d > 0.0 && d < 1.0))
      throw Error(ErrorCode::DegenerateD, "perturbation term needs 0 < d < 1, got d = " + std::to_string(d));
    out.perturbation_term = constants.d1 * std::pow(d, -static_cast<double>(r) - 1.0) / (1.0 / d - 1.0);
  }
  out.nd_selection = 2.0 * out.nd_term;
  out.selection = out.nd_selection + out.perturbation_term;
  out.nd_error = out.nd_term;
  out.error = out.nd_term + out.perturbation_term;
  return out;
}

// ---------------------------------------------------------------------------
// Sanov certificate

double tv_complement_rate(const RealVector& p, double radius) {
  // The cheapest way to move TV mass `radius` is to shift it uniformly from
  // one subset onto its complement; the binary KL of that shift is tight.
  const auto n = static_cast<std::size_t>(p.size());
  if (n > 20) throw Error(ErrorCode::TooLarge, "alphabet too large for subset enumeration");
  double best = kInf;
  for (std::size_t mask = 1; mask + 1 < (std::size_t{1} << n); ++mask) {
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (std::size_t{1} << i)) mass += p[static_cast<Eigen::Index>(i)];
    if (mass + radius > 1.0 + 1e-15) continue;
    best = std::min(best, binary_relative_entropy(std::min(1.0, mass + radius), mass));
  }
  return best;
}

SanovCertificate sanov_certificate(const NonDemolitionModel& model, std::size_t nu, const SanovOptions& options) {
  if (nu >= model.num_facts()) throw Error(ErrorCode::InvalidConfig, "fact index out of range");
  SanovCertificate out;
  out.nu = nu;
  out.kappa_tv = kInf;
  out.i_min = kInf;
  for (std::size_t a = 0; a < model.num_facts(); ++a)
    for (std::size_t b = 0; b < model.num_facts(); ++b) {
      if (a == b) continue;
      out.kappa_tv = std::min(out.kappa_tv, total_variation(model.conditional(a), model.conditional(b)));
      out.i_min = std::min(out.i_min, relative_entropy(model.conditional(b), model.conditional(a)));
    }
  if (model.num_facts() < 2) out.kappa_tv = 1.0;
  out.radius = options.radius.value_or(out.kappa_tv / 3.0);
  if (!(out.radius > 0.0) || 2.0 * out.radius >= out.kappa_tv)
    throw Error(ErrorCode::NeighborhoodsOverlap, "TV balls of radius " + std::to_string(out.radius) +
                                                     " are not disjoint (kappa_TV = " + std::to_string(out.kappa_tv) + ")");

  const RealVector p = model.conditional(nu);
  const std::size_t n_out = model.num_outcomes();
  Philox4x32 rng(options.seed, nu);
  std::vector<std::size_t> counts(n_out);
  RealVector freqs(static_cast<Eigen::Index>(n_out));
  for (std::size_t r : options.r_grid) {
    if (r < 1) throw Error(ErrorCode::InvalidConfig, "r grid entries must be positive");
    std::size_t hits = 0;
    for (std::size_t s = 0; s < options.samples; ++s) {
      std::fill(counts.begin(), counts.end(), 0);
      for (std::size_t j = 0; j < r; ++j) {
        const double u = rng.uniform();
        double cumulative = 0.0;
        std::size_t xi = n_out - 1;
        for (std::size_t c = 0; c < n_out; ++c) {
          cumulative += p[static_cast<Eigen::Index>(c)];
          if (u < cumulative) {
            xi = c;
            break;
          }
        }
        ++counts[xi];
      }
      for (std::size_t c = 0; c < n_out; ++c)
        freqs[static_cast<Eigen::Index>(c)] = static_cast<double>(counts[c]) / static_cast<double>(r);
      if (total_variation(freqs, p) >= out.radius - 1e-12) ++hits;
    }
    out.r.push_back(r);
    out.hits.push_back(hits);
    out.exceedance.push_back(static_cast<double>(hits) / static_cast<double>(options.samples));
  }

  // Weighted least squares of log(exceedance) on r, excluding r = 1.
  const auto n = static_cast<double>(options.samples);
  double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t points = 0;
  for (std::size_t i = 0; i < out.r.size(); ++i) {
    if (out.r[i] <= 1 || out.hits[i] == 0) continue;
    const double ph = out.exceedance[i];
    const double var = std::max((1.0 - ph) / (n * ph), 1.0 / (n * n));
    const double w = 1.0 / var;
    const double x = static_cast<double>(out.r[i]);
    const double y = std::log(ph);
    sw += w;
    sx += w * x;
    sy += w * y;
    sxx += w * x * x;
    sxy += w * x * y;
    ++points;
  }
  out.complement_rate = tv_complement_rate(p, out.radius);
  const double det = sw * sxx - sx * sx;
  if (points >= 2 && det > 0.0) {
    const double slope = (sw * sxy - sx * sy) / det;
    out.fitted = true;
    out.rate = -slope;
    out.rate_se = std::sqrt(sw / det);
    out.C = std::exp((sy - slope * sx) / sw);
    out.a = std::exp(slope);
    out.passes = out.rate >= out.complement_rate / 2.0 - 2.0 * out.rate_se;
  }
  return out;
}

std::pair<double, double> uniform_sanov_constants(const std::vector<SanovCertificate>& certificates) {
  double C = 0.0, a = 0.0;
  for (const auto& c : certificates) {
    if (!c.fitted) throw Error(ErrorCode::InvalidConfig, "certificate for fact " + std::to_string(c.nu) + " has no fit");
    C = std::max(C, c.C);
    a = std::max(a, c.a);
  }
  return {C, a};
}

// ---------------------------------------------------------------------------
// de Finetti, purification, Born rule

DeFinettiDecomposition definetti_decompose(const NonDemolitionModel& model, const DensityMatrix& rho0) {
  if (rho0.dim() != model.dim()) throw Error(ErrorCode::InvalidConfig, "initial state dimension mismatch");
  DeFinettiDecomposition out;
  out.weights = model.projectors().weights(rho0.matrix());
  out.components = model.cond_probs();
  return out;
}

double definetti_mixture_residual(const NonDemolitionModel& model, const DensityMatrix& rho0, std::size_t max_length) {
  const DeFinettiDecomposition dec = definetti_decompose(model, rho0);
  const StepDynamics dyn = nd_dynamics(model);
  double worst = 0.0;
  enumerate_protocols(dyn, rho0.matrix(), max_length, [&](std::span<const std::size_t> prefix, const ComplexMatrix& sigma) {
    if (prefix.empty()) return;
    double mixture = 0.0;
    for (Eigen::Index nu = 0; nu < dec.weights.size(); ++nu) {
      double product = dec.weights[nu];
      for (std::size_t xi : prefix) product *= dec.components(static_cast<Eigen::Index>(xi), nu);
      mixture += product;
    }
    worst = std::max(worst, std::abs(mixture - std::real(sigma.trace())));
  });
  return worst;
}

RealMatrix bhattacharyya_coefficients(const NonDemolitionModel& model) {
  const RealMatrix mags = model.amplitudes().cwiseAbs();
  return mags.transpose() * mags;
}

PurificationReport purification_analysis(const TrajectoryRecord& record, const NonDemolitionModel& model) {
  if (record.states.empty()) throw Error(ErrorCode::NoStates, "trajectory carries no stored states");
  if (record.state_steps.front() != 0)
    throw Error(ErrorCode::InvalidConfig, "first stored state must be the initial state");
  const auto& pis = model.projectors().projectors();
  const std::size_t n_facts = model.num_facts();

  PurificationReport out;
  out.steps = record.state_steps;
  out.delta = bhattacharyya_coefficients(model);
  for (std::size_t a = 0; a < n_facts; ++a)
    for (std::size_t b = a + 1; b < n_facts; ++b) out.pairs.emplace_back(a, b);
  out.offdiag.resize(static_cast<Eigen::Index>(record.states.size()), static_cast<Eigen::Index>(out.pairs.size()));
  for (std::size_t s = 0; s < record.states.size(); ++s)
    for (std::size_t p = 0; p < out.pairs.size(); ++p) {
      const auto [a, b] = out.pairs[p];
      out.offdiag(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(p)) =
          trace_norm(ComplexMatrix(pis[a] * record.states[s].matrix() * pis[b]));
    }

  const RealVector final_weights = model.projectors().weights(record.states.back().matrix());
  Eigen::Index best = 0;
  out.theta_weight = final_weights.maxCoeff(&best);
  if (out.theta_weight < kThetaThreshold) return out;
  out.theta = static_cast<std::size_t>(best);

  const ComplexMatrix& pi = pis[*out.theta];
  const ComplexMatrix& rho0 = record.states.front().matrix();
  const ComplexMatrix projected = pi * rho0 * pi;
  const double mass = std::real(projected.trace());
  if (!(mass > 0.0)) return out;
  const ComplexMatrix target = projected / mass;
  for (const auto& state : record.states) out.distance.push_back(trace_norm(ComplexMatrix(state.matrix() - target)));
  out.final_distance = out.distance.back();
  return out;
}

std::pair<double, double> wilson_interval(std::size_t hits, std::size_t n, double z) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double phat = static_cast<double>(hits) / nn;
  const double z2 = z * z;
  const double centre = (phat + z2 / (2.0 * nn)) / (1.0 + z2 / nn);
  const double half = z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / (1.0 + z2 / nn);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

BornRuleReport born_rule_check(const StepDynamics& dyn, const DensityMatrix& rho0, const NonDemolitionModel& model,
                               std::size_t trajectories, std::size_t length, std::uint64_t seed, double z) {
  BornRuleReport out;
  out.trajectories = trajectories;
  out.length = length;
  if (trajectories == 0) return out;
  const std::size_t n_facts = model.num_facts();
  out.counts.assign(n_facts, 0);
  for (std::size_t s = 0; s < trajectories; ++s) {
    TrajectorySampler sampler(dyn, rho0, seed, s);
    for (std::size_t j = 0; j < length; ++j) sampler.step();
    const RealVector w = model.projectors().weights(sampler.state());
    Eigen::Index best = 0;
    if (w.maxCoeff(&best) >= kThetaThreshold)
      ++out.counts[static_cast<std::size_t>(best)];
    else
      ++out.unresolved;
  }
  out.expected = model.projectors().weights(rho0.matrix());
  out.frequency.resize(static_cast<Eigen::Index>(n_facts));
  out.lower.resize(static_cast<Eigen::Index>(n_facts));
  out.upper.resize(static_cast<Eigen::Index>(n_facts));
  for (std::size_t nu = 0; nu < n_facts; ++nu) {
    const auto i = static_cast<Eigen::Index>(nu);
    out.frequency[i] = static_cast<double>(out.counts[nu]) / static_cast<double>(trajectories);
    const auto [lo, hi] = wilson_interval(out.counts[nu], trajectories, z);
    out.lower[i] = lo;
    out.upper[i] = hi;
    out.consistent = out.consistent && out.expected[i] >= lo && out.expected[i] <= hi;
  }
  return out;
}

LevelSetCheck level_sets_disjoint(const NonDemolitionModel& model, double epsilon) {
  LevelSetCheck out;
  out.kappa = kInf;
  for (std::size_t a = 0; a < model.num_facts(); ++a)
    for (std::size_t b = a + 1; b < model.num_facts(); ++b)
      out.kappa = std::min(out.kappa, (model.conditional(a) - model.conditional(b)).cwiseAbs().maxCoeff());
  out.disjoint = epsilon < out.kappa / 2.0;
  return out;
}

}  // namespace qnd
