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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qnd/qcore.hpp"

namespace qnd {

/// Ordered, duplicate-free list of outcome symbols.
class OutcomeAlphabet {
 public:
  OutcomeAlphabet() = default;
  explicit OutcomeAlphabet(std::vector<std::string> labels);

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& operator[](std::size_t xi) const { return labels_[xi]; }
  std::size_t index_of(const std::string& label) const;

  /// Single-character alphabets render protocols as plain strings ("LLRL");
  /// otherwise symbols are comma separated.
  std::string format(std::span<const std::size_t> protocol) const;
  std::vector<std::size_t> parse(const std::string& text) const;

  bool operator==(const OutcomeAlphabet&) const = default;

 private:
  std::vector<std::string> labels_;
};

/// One outcome-indexed linear map Phi_xi acting on trace-class operators,
/// stored either as Kraus operators (rho -> sum_a A rho A^dagger) or as a
/// dim^2 x dim^2 superoperator acting on column-major vec(rho).
class OutcomeMap {
 public:
  static OutcomeMap from_kraus(std::vector<ComplexMatrix> operators);
  static OutcomeMap from_superoperator(ComplexMatrix superoperator);

  Eigen::Index dim() const { return dim_; }
  bool is_kraus() const { return superoperator_.size() == 0; }
  const std::vector<ComplexMatrix>& kraus() const { return kraus_; }

  ComplexMatrix apply(const ComplexMatrix& rho) const;
  /// Heisenberg-picture dual: Tr(X Phi[rho]) = Tr(Phi_*[X] rho).
  ComplexMatrix apply_dual(const ComplexMatrix& x) const;
  ComplexMatrix superoperator() const;
  /// Phi_*[1], cached at construction.
  const ComplexMatrix& unital_image() const { return unital_image_; }
  /// Tr Phi[rho] computed through the cached unital image.
  double weight(const ComplexMatrix& rho) const;

  /// rho -> Phi[U rho U^dagger].
  OutcomeMap after_unitary(const ComplexMatrix& u) const;
  /// rho -> U Phi[rho] U^dagger.
  OutcomeMap before_unitary(const ComplexMatrix& u) const;

 private:
  OutcomeMap() = default;
  void finish();

  Eigen::Index dim_ = 0;
  std::vector<ComplexMatrix> kraus_;
  ComplexMatrix superoperator_;
  ComplexMatrix unital_image_;
};

/// Outcome-indexed family {Phi_xi}. The checked constructor enforces
/// sum_xi Phi_*xi[1] = 1 within 1e-10.
class KrausFamily {
 public:
  KrausFamily(OutcomeAlphabet alphabet, std::vector<OutcomeMap> maps);
  static KrausFamily unchecked(OutcomeAlphabet alphabet, std::vector<OutcomeMap> maps);

  const OutcomeAlphabet& alphabet() const { return alphabet_; }
  std::size_t size() const { return maps_.size(); }
  Eigen::Index dim() const { return maps_.front().dim(); }
  const OutcomeMap& operator[](std::size_t xi) const { return maps_[xi]; }
  const std::vector<OutcomeMap>& maps() const { return maps_; }

  /// ||sum_xi Phi_*xi[1] - 1||_op.
  double completeness_residual() const;
  /// Superoperator of Phi(sigma_S) = sum_xi Phi_xi.
  ComplexMatrix total_superoperator() const;

 private:
  KrausFamily(OutcomeAlphabet alphabet, std::vector<OutcomeMap> maps, bool check);
  OutcomeAlphabet alphabet_;
  std::vector<OutcomeMap> maps_;
};

struct OutcomeImage {
  ComplexMatrix image;  ///< unnormalized Phi_xi[rho]
  double weight;        ///< Tr Phi_xi[rho]
};

OutcomeImage apply_outcome(const KrausFamily& family, std::size_t xi, const ComplexMatrix& rho);
OutcomeImage apply_outcome(const KrausFamily& family, const std::string& xi, const DensityMatrix& rho);

/// Non-demolition model: C_xi = sum_nu c_xi(nu) Pi_nu with p(xi|nu) = |c_xi(nu)|^2.
/// Amplitude and probability tables are outcomes x facts.
class NonDemolitionModel {
 public:
  const ProjectorFamily& projectors() const { return projectors_; }
  const OutcomeAlphabet& alphabet() const { return channel_.alphabet(); }
  const ComplexMatrix& amplitudes() const { return amplitudes_; }
  const RealMatrix& cond_probs() const { return cond_probs_; }
  const KrausFamily& channel() const { return channel_; }

  std::size_t num_facts() const { return projectors_.size(); }
  std::size_t num_outcomes() const { return alphabet().size(); }
  Eigen::Index dim() const { return projectors_.dim(); }
  /// p(.|nu) as a vector over outcomes.
  RealVector conditional(std::size_t nu) const { return cond_probs_.col(static_cast<Eigen::Index>(nu)); }

  friend NonDemolitionModel build_nd_model(ProjectorFamily, OutcomeAlphabet, ComplexMatrix, bool);

 private:
  NonDemolitionModel(ProjectorFamily projectors, ComplexMatrix amplitudes, RealMatrix probs, KrausFamily channel)
      : projectors_(std::move(projectors)),
        amplitudes_(std::move(amplitudes)),
        cond_probs_(std::move(probs)),
        channel_(std::move(channel)) {}

  ProjectorFamily projectors_;
  ComplexMatrix amplitudes_;
  RealMatrix cond_probs_;
  KrausFamily channel_;
};

/// Validates normalization and pairwise distinctness (TV > 1e-6) of the
/// conditional distributions; `strict` additionally forbids p(xi|nu) = 0.
NonDemolitionModel build_nd_model(ProjectorFamily projectors, OutcomeAlphabet alphabet,
                                  ComplexMatrix amplitudes, bool strict = false);

double total_variation(const RealVector& p, const RealVector& q);

/// Per-step maps Phi^{(k)}_xi. Steps are 1-based; `history` holds xi_1..xi_{k-1}.
using StepMap = std::function<const KrausFamily&(std::size_t step, std::span<const std::size_t> history)>;

class StepDynamics {
 public:
  StepDynamics(OutcomeAlphabet alphabet, Eigen::Index dim, StepMap map);

  const OutcomeAlphabet& alphabet() const { return alphabet_; }
  Eigen::Index dim() const { return dim_; }
  const KrausFamily& at(std::size_t step, std::span<const std::size_t> history) const { return map_(step, history); }

  const std::optional<NonDemolitionModel>& reference() const { return reference_; }
  StepDynamics& with_reference(NonDemolitionModel model);

  /// sup_k ||H^{(k)}||_op when the dynamics is a Hamiltonian perturbation of
  /// its reference; 0 when it coincides with the reference.
  const std::optional<double>& hamiltonian_bound() const { return hamiltonian_bound_; }
  StepDynamics& with_hamiltonian_bound(double bound);

 private:
  OutcomeAlphabet alphabet_;
  Eigen::Index dim_;
  StepMap map_;
  std::optional<NonDemolitionModel> reference_;
  std::optional<double> hamiltonian_bound_;
};

/// Same family at every step.
StepDynamics constant_dynamics(KrausFamily family);
/// I.i.d. repetition of the non-demolition channel, reference attached.
StepDynamics nd_dynamics(const NonDemolitionModel& model);

/// Phi^{(k)}_xi = Phi~_xi o Ad(exp(-i H^{(k)})), H^{(k)} taken cyclically from
/// `hamiltonians`. When `declared_d1` is given every ||H^{(k)}||_op must not
/// exceed declared_d1 / 2; otherwise 2 ||H^{(k)}||_op must stay below 1.
StepDynamics build_hamiltonian_perturbation(const NonDemolitionModel& reference,
                                            std::vector<ComplexMatrix> hamiltonians,
                                            std::optional<double> declared_d1 = std::nullopt);

/// Burst/cycle schedule: M measurements with free evolution lambda1/(M-1)
/// between them, then free evolution lambda2 - lambda1 before the next burst.
struct CycleConfig {
  double lambda1 = 0.0;
  double lambda2 = 1.0;
  std::size_t measurements = 1;
  ComplexMatrix hamiltonian;
  std::shared_ptr<const NonDemolitionModel> model;

  void validate() const;
};

/// Free evolution is folded in front of each measurement, so the state after
/// step n*M + M is the post-burst state of cycle n.
StepDynamics build_cycle_dynamics(const CycleConfig& config);

/// max over the operator basis |i><j| of ||[Phi_*xi, Phi_*xi'](E_ij)||_op,
/// for every ordered pair; a |sigma| x |sigma| matrix.
RealMatrix check_map_commutation(const KrausFamily& family);

/// max_{xi, xi'} ||[Phi_*xi[1], Phi_*xi'[1]]||_op.
double check_unital_images_commute(const KrausFamily& family);

struct JointSpectrum {
  ProjectorFamily projectors;
  RealMatrix cond_probs;  ///< outcomes x facts
};

/// Simultaneous eigenprojectors of the commuting family {Phi_*xi[1]};
/// facts with identical distributions come out merged.
JointSpectrum joint_spectral_projectors(const KrausFamily& family, double residual_tol = 1e-8);

/// Largest projector (op norm) or p-table deviation between a recovered
/// spectrum and declared facts under the best label matching; +inf when
/// the fact counts differ.
double spectrum_mismatch(const JointSpectrum& recovered, const ProjectorFamily& projectors,
                         const RealMatrix& cond_probs);

struct StationaryState {
  DensityMatrix state;
  bool faithful;
  std::size_t fixed_space_dim;  ///< multiplicity of eigenvalue 1
};

StationaryState stationary_state(const KrausFamily& family);

enum class ConstantsMode { Analytic, Sampled };

struct AssumptionConstants {
  double d1 = 0.0;
  double d2 = 1.0;
  double d = 1.0;
  RealVector per_xi_norms;  ///< ||Phi~_xi|| = lambda_max(Phi~_*xi[1])
  RealVector per_xi_d2;     ///< lambda_min / lambda_max per outcome
  ConstantsMode mode = ConstantsMode::Analytic;
  bool d1_is_estimate = false;
  /// Conservative upper bound on d1 (sampled mode only).
  std::optional<double> d1_upper;
};

struct SampledConstantsOptions {
  std::size_t steps = 8;
  std::size_t samples = 256;
  std::uint64_t seed = 0;
};

/// Constants of the near-non-demolition assumption for `dyn` against its
/// reference model.
AssumptionConstants assumption_constants(const StepDynamics& dyn, ConstantsMode mode,
                                         const SampledConstantsOptions& options = {});

/// Lower estimate of the induced trace norm of a superoperator, maximized
/// over rank-one inputs |psi><phi| (basis elements plus random samples).
double induced_trace_norm_estimate(const ComplexMatrix& superoperator, Eigen::Index dim,
                                   std::size_t samples = 256, std::uint64_t seed = 0);

struct MixtureChannel {
  KrausFamily maps;  ///< Phi~_xi = upsilon_xi id + Upsilon_xi, superoperator form
  double d2;
  RealVector per_xi_d2;
  RealVector upsilon_norms;
};

/// Upsilon maps are dim^2 x dim^2 superoperators summing to zero. Norms may
/// be supplied; otherwise induced_trace_norm_estimate is used.
MixtureChannel build_mixture_channel(OutcomeAlphabet alphabet, const RealVector& upsilon,
                                     const std::vector<ComplexMatrix>& upsilon_maps,
                                     std::optional<RealVector> norms = std::nullopt);

/// Kronecker helper shared with tests: vec(A X B) = (B^T (x) A) vec(X).
ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix vec_to_matrix(const ComplexVector& v, Eigen::Index dim);
ComplexVector matrix_to_vec(const ComplexMatrix& m);

}  // namespace qnd
