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
#include <limits>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "qnd/channels.hpp"
#include "qnd/trajectories.hpp"

namespace qnd {

/// I_q(p) = sum p ln(p/q); +infinity when p puts mass where q has none.
double relative_entropy(const RealVector& p, const RealVector& q);

struct EstimatorResult {
  std::size_t nu_hat = 0;
  RealVector scores;  ///< I_{p_nu}(empirical) per fact
  bool tie = false;
};

/// argmin_nu I_{p_nu}(freqs), lowest fact index among scores within 1e-12 of the minimum.
EstimatorResult estimate_fact(const RealVector& freqs, const NonDemolitionModel& model);
EstimatorResult estimate_fact(const FrequencyTable& table, const NonDemolitionModel& model);

/// Memoized estimator keyed by window counts.
class EstimatorCache {
 public:
  explicit EstimatorCache(const NonDemolitionModel& model) : model_(&model) {}
  const EstimatorResult& operator()(const std::vector<std::size_t>& counts);

 private:
  const NonDemolitionModel* model_;
  std::map<std::vector<std::size_t>, EstimatorResult> cache_;
};

enum class ErrorMethod { Exact, MonteCarlo };

struct ErrorProbabilityOptions {
  ErrorMethod method = ErrorMethod::Exact;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  std::size_t budget = std::size_t{1} << 20;
};

struct ErrorProbabilityReport {
  std::size_t k = 0;
  std::size_t r = 0;
  ErrorMethod method = ErrorMethod::Exact;
  RealVector epsilon;                    ///< per fact
  std::optional<RealVector> epsilon_se;  ///< Monte Carlo only
  double total = 0.0;                    ///< sum over facts
  std::optional<double> total_se;
  RealVector selection;  ///< mu(estimator = nu)
  RealVector prior;      ///< E Tr(Pi_nu rho^{(k)})
  double tie_mass = 0.0;
};

/// Misassignment mass of the window estimator on (k, k+r] against the
/// reference model attached to `dyn`.
ErrorProbabilityReport error_probability(const StepDynamics& dyn, const DensityMatrix& rho0, std::size_t k,
                                         std::size_t r, const ErrorProbabilityOptions& options = {});

struct WindowErrorBounds {
  double nd_term = 0.0;            ///< C a^r
  double perturbation_term = 0.0;  ///< d1 d^{-r-1} / (d^{-1} - 1)
  double nd_selection = 0.0;       ///< 2 C a^r
  double selection = 0.0;          ///< 2 C a^r + perturbation
  double nd_error = 0.0;           ///< C a^r
  double error = 0.0;              ///< C a^r + perturbation
};

WindowErrorBounds window_error_bounds(const AssumptionConstants& constants, double C, double a, std::size_t k,
                                     std::size_t r);

struct SanovOptions {
  std::vector<std::size_t> r_grid{1, 10, 20, 40, 60, 80};
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
  std::optional<double> radius;  ///< TV radius; default kappa_TV / 3
};

struct SanovCertificate {
  std::size_t nu = 0;
  double radius = 0.0;
  double kappa_tv = 0.0;
  std::vector<std::size_t> r;
  std::vector<std::size_t> hits;
  std::vector<double> exceedance;
  bool fitted = false;
  double C = 0.0;
  double a = 1.0;
  double rate = 0.0;
  double rate_se = 0.0;
  double complement_rate = 0.0;  ///< I_{p_nu}(U_nu^c)
  double i_min = 0.0;            ///< min over nu != nu' of I_{p_nu}(p_nu')
  bool passes = false;           ///< rate >= complement_rate / 2 - 2 rate_se
};

/// Exceedance of the TV ball around p_nu by i.i.d. frequencies, with a
/// weighted log-linear fit over r > 1.
SanovCertificate sanov_certificate(const NonDemolitionModel& model, std::size_t nu, const SanovOptions& options = {});

/// inf { I_p(q) : TV(q, p) >= radius }, exact.
double tv_complement_rate(const RealVector& p, double radius);

/// Binary relative entropy kl(x || y).
double binary_relative_entropy(double x, double y);

/// Uniform (C, a) over facts: componentwise maxima of fitted certificates.
std::pair<double, double> uniform_sanov_constants(const std::vector<SanovCertificate>& certificates);

struct DeFinettiDecomposition {
  RealVector weights;     ///< Tr(Pi_nu rho0)
  RealMatrix components;  ///< outcomes x facts, p(xi|nu)
};

DeFinettiDecomposition definetti_decompose(const NonDemolitionModel& model, const DensityMatrix& rho0);

/// Largest |mixture(xi) - mu(xi)| over all protocols of length 1..max_length.
double definetti_mixture_residual(const NonDemolitionModel& model, const DensityMatrix& rho0, std::size_t max_length);

/// delta_{nu nu'} = sum_xi |c_xi(nu)| |c_xi(nu')|.
RealMatrix bhattacharyya_coefficients(const NonDemolitionModel& model);

struct PurificationReport {
  std::vector<std::size_t> steps;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  ///< nu < nu'
  RealMatrix offdiag;  ///< steps x pairs, ||Pi_nu rho Pi_nu'||_1
  std::optional<std::size_t> theta;
  double theta_weight = 0.0;  ///< max_nu Tr(Pi_nu rho_final)
  std::vector<double> distance;  ///< per step, to Pi_theta rho0 Pi_theta / Tr; empty when unresolved
  double final_distance = std::numeric_limits<double>::quiet_NaN();
  RealMatrix delta;
};

inline constexpr double kThetaThreshold = 0.99;

/// Needs a record with stored states; the first stored state must be step 0.
PurificationReport purification_analysis(const TrajectoryRecord& record, const NonDemolitionModel& model);

struct BornRuleReport {
  std::size_t trajectories = 0;
  std::size_t length = 0;
  std::vector<std::size_t> counts;
  std::size_t unresolved = 0;
  RealVector frequency;
  RealVector lower;
  RealVector upper;
  RealVector expected;
  bool consistent = true;  ///< every expected weight inside its interval
};

/// Wilson score interval.
std::pair<double, double> wilson_interval(std::size_t hits, std::size_t n, double z);

BornRuleReport born_rule_check(const StepDynamics& dyn, const DensityMatrix& rho0, const NonDemolitionModel& model,
                               std::size_t trajectories, std::size_t length, std::uint64_t seed, double z = 3.0);

struct LevelSetCheck {
  double kappa = 0.0;  ///< min over nu != nu' of max_xi |p(xi|nu) - p(xi|nu')|
  bool disjoint = false;
};

/// Windows within `epsilon` (sup norm) of two facts cannot exist iff epsilon < kappa / 2.
LevelSetCheck level_sets_disjoint(const NonDemolitionModel& model, double epsilon);

}  // namespace qnd
