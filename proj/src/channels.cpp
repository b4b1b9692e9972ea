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

#include "qnd/channels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qnd/rng.hpp"

namespace qnd {

namespace {

ComplexMatrix identity(Eigen::Index d) { return ComplexMatrix::Identity(d, d); }

ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) { return a * b - b * a; }

// Columns are vec(Phi_*[E_ij]) for the column-major basis E_ij.
ComplexMatrix dual_superoperator(const OutcomeMap& map) {
  const Eigen::Index d = map.dim();
  ComplexMatrix out(d * d, d * d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) {
      ComplexMatrix e = ComplexMatrix::Zero(d, d);
      e(i, j) = 1.0;
      out.col(j * d + i) = matrix_to_vec(map.apply_dual(e));
    }
  return out;
}

ComplexVector random_unit_vector(Philox4x32& rng, Eigen::Index d) {
  ComplexVector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = Complex(rng.normal(), rng.normal());
  return v / v.norm();
}

}  // namespace

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

ComplexVector matrix_to_vec(const ComplexMatrix& m) {
  return Eigen::Map<const ComplexVector>(m.data(), m.size());
}

ComplexMatrix vec_to_matrix(const ComplexVector& v, Eigen::Index dim) {
  return Eigen::Map<const ComplexMatrix>(v.data(), dim, dim);
}

// ---------------------------------------------------------------------------
// OutcomeAlphabet

OutcomeAlphabet::OutcomeAlphabet(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.empty()) throw Error(ErrorCode::InvalidAlphabet, "alphabet is empty");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i].empty()) throw Error(ErrorCode::InvalidAlphabet, "empty outcome label");
    if (labels_[i].find(',') != std::string::npos)
      throw Error(ErrorCode::InvalidAlphabet, "outcome labels may not contain ','");
    for (std::size_t j = i + 1; j < labels_.size(); ++j)
      if (labels_[i] == labels_[j]) throw Error(ErrorCode::InvalidAlphabet, "duplicate outcome " + labels_[i]);
  }
}

std::size_t OutcomeAlphabet::index_of(const std::string& label) const {
  const auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) throw Error(ErrorCode::UnknownOutcome, "outcome '" + label + "' not in alphabet");
  return static_cast<std::size_t>(it - labels_.begin());
}

std::string OutcomeAlphabet::format(std::span<const std::size_t> protocol) const {
  const bool compact = std::all_of(labels_.begin(), labels_.end(), [](const auto& l) { return l.size() == 1; });
  std::string out;
  for (std::size_t i = 0; i < protocol.size(); ++i) {
    if (!compact && i > 0) out += ',';
    out += labels_.at(protocol[i]);
  }
  return out;
}

std::vector<std::size_t> OutcomeAlphabet::parse(const std::string& text) const {
  std::vector<std::size_t> out;
  const bool compact = std::all_of(labels_.begin(), labels_.end(), [](const auto& l) { return l.size() == 1; });
  if (compact) {
    for (char c : text) out.push_back(index_of(std::string(1, c)));
    return out;
  }
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) out.push_back(index_of(token));
  return out;
}

// ---------------------------------------------------------------------------
// OutcomeMap

OutcomeMap OutcomeMap::from_kraus(std::vector<ComplexMatrix> operators) {
  if (operators.empty()) throw Error(ErrorCode::InvalidMatrix, "outcome map needs at least one Kraus operator");
  const Eigen::Index d = operators.front().rows();
  for (const auto& a : operators) {
    require_square_finite(a, "Kraus operator");
    if (a.rows() != d) throw Error(ErrorCode::InvalidMatrix, "Kraus operators differ in dimension");
  }
  OutcomeMap m;
  m.dim_ = d;
  m.kraus_ = std::move(operators);
  m.finish();
  return m;
}

OutcomeMap OutcomeMap::from_superoperator(ComplexMatrix superoperator) {
  require_square_finite(superoperator, "superoperator");
  const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(superoperator.rows()))));
  if (d * d != superoperator.rows()) throw Error(ErrorCode::InvalidMatrix, "superoperator size is not a square");
  OutcomeMap m;
  m.dim_ = d;
  m.superoperator_ = std::move(superoperator);
  m.finish();
  return m;
}

void OutcomeMap::finish() { unital_image_ = apply_dual(identity(dim_)); }

ComplexMatrix OutcomeMap::apply(const ComplexMatrix& rho) const {
  if (is_kraus()) {
    ComplexMatrix out = ComplexMatrix::Zero(dim_, dim_);
    for (const auto& a : kraus_) out.noalias() += a * rho * a.adjoint();
    return out;
  }
  return vec_to_matrix(superoperator_ * matrix_to_vec(rho), dim_);
}

ComplexMatrix OutcomeMap::apply_dual(const ComplexMatrix& x) const {
  if (is_kraus()) {
    ComplexMatrix out = ComplexMatrix::Zero(dim_, dim_);
    for (const auto& a : kraus_) out.noalias() += a.adjoint() * x * a;
    return out;
  }
  const ComplexMatrix xa = x.adjoint();
  const ComplexVector v = superoperator_.adjoint() * matrix_to_vec(xa);
  return vec_to_matrix(v, dim_).adjoint();
}

ComplexMatrix OutcomeMap::superoperator() const {
  if (!is_kraus()) return superoperator_;
  ComplexMatrix out = ComplexMatrix::Zero(dim_ * dim_, dim_ * dim_);
  for (const auto& a : kraus_) out += kron(a.conjugate(), a);
  return out;
}

double OutcomeMap::weight(const ComplexMatrix& rho) const {
  return unital_image_.transpose().cwiseProduct(rho).sum().real();
}

OutcomeMap OutcomeMap::after_unitary(const ComplexMatrix& u) const {
  if (is_kraus()) {
    std::vector<ComplexMatrix> ops;
    ops.reserve(kraus_.size());
    for (const auto& a : kraus_) ops.push_back(a * u);
    return from_kraus(std::move(ops));
  }
  return from_superoperator(superoperator_ * kron(u.conjugate(), u));
}

OutcomeMap OutcomeMap::before_unitary(const ComplexMatrix& u) const {
  if (is_kraus()) {
    std::vector<ComplexMatrix> ops;
    ops.reserve(kraus_.size());
    for (const auto& a : kraus_) ops.push_back(u * a);
    return from_kraus(std::move(ops));
  }
  return from_superoperator(kron(u.conjugate(), u) * superoperator_);
}

// ---------------------------------------------------------------------------
// KrausFamily

KrausFamily::KrausFamily(OutcomeAlphabet alphabet, std::vector<OutcomeMap> maps)
    : KrausFamily(std::move(alphabet), std::move(maps), true) {}

KrausFamily KrausFamily::unchecked(OutcomeAlphabet alphabet, std::vector<OutcomeMap> maps) {
  return KrausFamily(std::move(alphabet), std::move(maps), false);
}

KrausFamily::KrausFamily(OutcomeAlphabet alphabet, std::vector<OutcomeMap> maps, bool check)
    : alphabet_(std::move(alphabet)), maps_(std::move(maps)) {
  if (maps_.empty() || maps_.size() != alphabet_.size())
    throw Error(ErrorCode::InvalidConfig, "need exactly one map per outcome");
  for (const auto& m : maps_)
    if (m.dim() != maps_.front().dim()) throw Error(ErrorCode::InvalidMatrix, "maps differ in dimension");
  if (check && completeness_residual() > 1e-10)
    throw Error(ErrorCode::NotNormalized,
                "sum_xi Phi_*xi[1] deviates from identity by " + std::to_string(completeness_residual()));
}

double KrausFamily::completeness_residual() const {
  ComplexMatrix sum = -identity(dim());
  for (const auto& m : maps_) sum += m.unital_image();
  return op_norm(sum);
}

ComplexMatrix KrausFamily::total_superoperator() const {
  ComplexMatrix out = ComplexMatrix::Zero(dim() * dim(), dim() * dim());
  for (const auto& m : maps_) out += m.superoperator();
  return out;
}

OutcomeImage apply_outcome(const KrausFamily& family, std::size_t xi, const ComplexMatrix& rho) {
  if (xi >= family.size()) throw Error(ErrorCode::UnknownOutcome, "outcome index " + std::to_string(xi));
  ComplexMatrix image = family[xi].apply(rho);
  const double w = std::real(image.trace());
  return {std::move(image), w};
}

OutcomeImage apply_outcome(const KrausFamily& family, const std::string& xi, const DensityMatrix& rho) {
  return apply_outcome(family, family.alphabet().index_of(xi), rho.matrix());
}

// ---------------------------------------------------------------------------
// Non-demolition models

double total_variation(const RealVector& p, const RealVector& q) { return 0.5 * (p - q).cwiseAbs().sum(); }

NonDemolitionModel build_nd_model(ProjectorFamily projectors, OutcomeAlphabet alphabet, ComplexMatrix amplitudes,
                                  bool strict) {
  const auto n_out = static_cast<Eigen::Index>(alphabet.size());
  const auto n_facts = static_cast<Eigen::Index>(projectors.size());
  if (amplitudes.rows() != n_out || amplitudes.cols() != n_facts)
    throw Error(ErrorCode::InvalidConfig, "amplitude table must be outcomes x facts");
  if (!all_finite(amplitudes)) throw Error(ErrorCode::InvalidConfig, "amplitude table has non-finite entries");

  const RealMatrix probs = amplitudes.cwiseAbs2();
  for (Eigen::Index nu = 0; nu < n_facts; ++nu) {
    const double total = probs.col(nu).sum();
    if (std::abs(total - 1.0) > 1e-12)
      throw Error(ErrorCode::NotNormalized, "p(.|" + projectors.labels()[static_cast<std::size_t>(nu)] +
                                                ") sums to " + std::to_string(total));
    if (strict)
      for (Eigen::Index xi = 0; xi < n_out; ++xi)
        if (probs(xi, nu) == 0.0)
          throw Error(ErrorCode::ZeroAmplitude, "p(" + alphabet[static_cast<std::size_t>(xi)] + "|" +
                                                    projectors.labels()[static_cast<std::size_t>(nu)] + ") = 0");
  }
  for (Eigen::Index a = 0; a < n_facts; ++a)
    for (Eigen::Index b = a + 1; b < n_facts; ++b)
      if (total_variation(probs.col(a), probs.col(b)) <= 1e-6)
        throw Error(ErrorCode::DegenerateFacts, "facts " + projectors.labels()[static_cast<std::size_t>(a)] +
                                                    " and " + projectors.labels()[static_cast<std::size_t>(b)] +
                                                    " have indistinguishable outcome distributions");

  std::vector<OutcomeMap> maps;
  for (Eigen::Index xi = 0; xi < n_out; ++xi) {
    ComplexMatrix c = ComplexMatrix::Zero(projectors.dim(), projectors.dim());
    for (Eigen::Index nu = 0; nu < n_facts; ++nu) c += amplitudes(xi, nu) * projectors[static_cast<std::size_t>(nu)];
    maps.push_back(OutcomeMap::from_kraus({c}));
  }
  KrausFamily channel(std::move(alphabet), std::move(maps));
  return NonDemolitionModel(std::move(projectors), std::move(amplitudes), probs, std::move(channel));
}

// ---------------------------------------------------------------------------
// Dynamics

StepDynamics::StepDynamics(OutcomeAlphabet alphabet, Eigen::Index dim, StepMap map)
    : alphabet_(std::move(alphabet)), dim_(dim), map_(std::move(map)) {}

StepDynamics& StepDynamics::with_reference(NonDemolitionModel model) {
  if (!(model.alphabet() == alphabet_) || model.dim() != dim_)
    throw Error(ErrorCode::InvalidConfig, "reference model does not match the dynamics");
  reference_ = std::move(model);
  return *this;
}

StepDynamics& StepDynamics::with_hamiltonian_bound(double bound) {
  hamiltonian_bound_ = bound;
  return *this;
}

StepDynamics constant_dynamics(KrausFamily family) {
  auto shared = std::make_shared<const KrausFamily>(std::move(family));
  return StepDynamics(shared->alphabet(), shared->dim(),
                      [shared](std::size_t, std::span<const std::size_t>) -> const KrausFamily& { return *shared; });
}

StepDynamics nd_dynamics(const NonDemolitionModel& model) {
  StepDynamics dyn = constant_dynamics(model.channel());
  dyn.with_reference(model).with_hamiltonian_bound(0.0);
  return dyn;
}

StepDynamics build_hamiltonian_perturbation(const NonDemolitionModel& reference,
                                            std::vector<ComplexMatrix> hamiltonians,
                                            std::optional<double> declared_d1) {
  if (hamiltonians.empty()) throw Error(ErrorCode::InvalidConfig, "empty Hamiltonian sequence");
  if (declared_d1 && (*declared_d1 < 0.0 || *declared_d1 >= 1.0))
    throw Error(ErrorCode::InvalidConfig, "declared d1 must lie in [0, 1)");
  auto families = std::make_shared<std::vector<KrausFamily>>();
  double sup_norm = 0.0;
  for (const auto& h : hamiltonians) {
    if (h.rows() != reference.dim() || h.cols() != reference.dim())
      throw Error(ErrorCode::InvalidConfig, "Hamiltonian dimension mismatch");
    const ComplexMatrix u = matrix_exponential_unitary(h, 1.0);
    const double norm = op_norm(h);
    if (declared_d1 ? norm > *declared_d1 / 2.0 + 1e-15 : 2.0 * norm >= 1.0)
      throw Error(ErrorCode::PerturbationTooLarge, "||H||_op = " + std::to_string(norm));
    sup_norm = std::max(sup_norm, norm);
    std::vector<OutcomeMap> maps;
    for (const auto& m : reference.channel().maps()) maps.push_back(m.after_unitary(u));
    families->emplace_back(reference.alphabet(), std::move(maps));
  }
  StepDynamics dyn(reference.alphabet(), reference.dim(),
                   [families](std::size_t step, std::span<const std::size_t>) -> const KrausFamily& {
                     return (*families)[(step - 1) % families->size()];
                   });
  dyn.with_reference(reference).with_hamiltonian_bound(sup_norm);
  return dyn;
}

void CycleConfig::validate() const {
  if (!model) throw Error(ErrorCode::InvalidConfig, "cycle config has no measurement model");
  if (!(lambda1 >= 0.0) || !(lambda2 > lambda1) || !std::isfinite(lambda2))
    throw Error(ErrorCode::InvalidConfig, "need 0 <= lambda1 < lambda2");
  if (measurements < 1) throw Error(ErrorCode::InvalidConfig, "need at least one measurement per burst");
  if (measurements == 1 && lambda1 != 0.0)
    throw Error(ErrorCode::InvalidConfig, "a single-measurement burst requires lambda1 = 0");
  if (hamiltonian.rows() != model->dim() || hamiltonian.cols() != model->dim())
    throw Error(ErrorCode::InvalidConfig, "H_P dimension mismatch");
  if (!all_finite(hamiltonian) || hermiticity_residual(hamiltonian) > tol::kHermitianInput)
    throw Error(ErrorCode::InvalidConfig, "H_P must be Hermitian");
}

StepDynamics build_cycle_dynamics(const CycleConfig& config) {
  config.validate();
  const NonDemolitionModel& model = *config.model;
  const std::size_t m = config.measurements;
  const double in_burst_dt = m > 1 ? config.lambda1 / static_cast<double>(m - 1) : 0.0;
  const double gap = config.lambda2 - config.lambda1;

  auto with_pre_unitary = [&](double t) {
    const ComplexMatrix u = matrix_exponential_unitary(config.hamiltonian, t);
    std::vector<OutcomeMap> maps;
    for (const auto& map : model.channel().maps()) maps.push_back(map.after_unitary(u));
    return KrausFamily(model.alphabet(), std::move(maps));
  };
  // [0]: very first measurement, [1]: first measurement of later bursts,
  // [2]: remaining in-burst measurements.
  auto families = std::make_shared<std::vector<KrausFamily>>();
  families->push_back(model.channel());
  families->push_back(with_pre_unitary(gap));
  families->push_back(with_pre_unitary(in_burst_dt));

  StepDynamics dyn(model.alphabet(), model.dim(),
                   [families, m](std::size_t step, std::span<const std::size_t>) -> const KrausFamily& {
                     if (step == 1) return (*families)[0];
                     return (step - 1) % m == 0 ? (*families)[1] : (*families)[2];
                   });
  dyn.with_reference(model).with_hamiltonian_bound(op_norm(config.hamiltonian) * std::max(gap, in_burst_dt));
  return dyn;
}

// ---------------------------------------------------------------------------
// Structural checks

RealMatrix check_map_commutation(const KrausFamily& family) {
  const auto n = static_cast<Eigen::Index>(family.size());
  const Eigen::Index d = family.dim();
  std::vector<ComplexMatrix> duals;
  for (const auto& m : family.maps()) duals.push_back(dual_superoperator(m));
  RealMatrix residual = RealMatrix::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = a + 1; b < n; ++b) {
      const ComplexMatrix c = commutator(duals[static_cast<std::size_t>(a)], duals[static_cast<std::size_t>(b)]);
      double worst = 0.0;
      for (Eigen::Index col = 0; col < c.cols(); ++col)
        worst = std::max(worst, op_norm(vec_to_matrix(c.col(col), d)));
      residual(a, b) = residual(b, a) = worst;
    }
  return residual;
}

double check_unital_images_commute(const KrausFamily& family) {
  double worst = 0.0;
  for (std::size_t a = 0; a < family.size(); ++a)
    for (std::size_t b = a + 1; b < family.size(); ++b)
      worst = std::max(worst, op_norm(commutator(family[a].unital_image(), family[b].unital_image())));
  return worst;
}

JointSpectrum joint_spectral_projectors(const KrausFamily& family, double residual_tol) {
  const double residual = check_unital_images_commute(family);
  if (residual > residual_tol)
    throw Error(ErrorCode::NonCommuting, "unital images fail to commute (residual " + std::to_string(residual) + ")");
  const Eigen::Index d = family.dim();

  // Refine an orthonormal block decomposition one outcome at a time.
  std::vector<ComplexMatrix> blocks{identity(d)};
  for (const auto& map : family.maps()) {
    std::vector<ComplexMatrix> refined;
    for (const auto& basis : blocks) {
      ComplexMatrix compressed = basis.adjoint() * map.unital_image() * basis;
      compressed = (compressed + compressed.adjoint()).eval() / 2.0;
      Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(compressed);
      const auto& values = solver.eigenvalues();
      Eigen::Index start = 0;
      while (start < values.size()) {
        Eigen::Index end = start + 1;
        while (end < values.size() && values[end] - values[end - 1] <= tol::kEigenGroup) ++end;
        refined.push_back(basis * solver.eigenvectors().middleCols(start, end - start));
        start = end;
      }
    }
    blocks = std::move(refined);
  }

  std::vector<std::string> labels;
  std::vector<ComplexMatrix> projectors;
  RealMatrix probs(static_cast<Eigen::Index>(family.size()), static_cast<Eigen::Index>(blocks.size()));
  for (std::size_t nu = 0; nu < blocks.size(); ++nu) {
    const ComplexMatrix& v = blocks[nu];
    labels.push_back(std::to_string(nu));
    projectors.push_back(v * v.adjoint());
    for (std::size_t xi = 0; xi < family.size(); ++xi)
      probs(static_cast<Eigen::Index>(xi), static_cast<Eigen::Index>(nu)) =
          std::real((v.adjoint() * family[xi].unital_image() * v).trace()) / static_cast<double>(v.cols());
  }
  return {ProjectorFamily(std::move(labels), std::move(projectors)), std::move(probs)};
}

double spectrum_mismatch(const JointSpectrum& recovered, const ProjectorFamily& projectors,
                         const RealMatrix& cond_probs) {
  const std::size_t n = projectors.size();
  if (recovered.projectors.size() != n) return std::numeric_limits<double>::infinity();
  std::vector<bool> used(n, false);
  double worst = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    std::size_t best = n;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < n; ++b) {
      if (used[b]) continue;
      const double dist = op_norm(ComplexMatrix(recovered.projectors[a] - projectors[b]));
      if (dist < best_dist) {
        best_dist = dist;
        best = b;
      }
    }
    used[best] = true;
    const double table = (recovered.cond_probs.col(static_cast<Eigen::Index>(a)) -
                          cond_probs.col(static_cast<Eigen::Index>(best)))
                             .cwiseAbs()
                             .maxCoeff();
    worst = std::max({worst, best_dist, table});
  }
  return worst;
}

StationaryState stationary_state(const KrausFamily& family) {
  const Eigen::Index d = family.dim();
  const ComplexMatrix s = family.total_superoperator();
  Eigen::ComplexEigenSolver<ComplexMatrix> solver(s);
  std::vector<Eigen::Index> unit;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i)
    if (std::abs(solver.eigenvalues()[i] - Complex(1.0)) <= 1e-9) unit.push_back(i);
  if (unit.empty()) throw Error(ErrorCode::NoFixedPoint, "superoperator has no eigenvalue 1");

  std::optional<ComplexMatrix> fixed;
  if (unit.size() == 1) {
    ComplexMatrix m = vec_to_matrix(solver.eigenvectors().col(unit.front()), d);
    const Complex tr = m.trace();
    if (std::abs(tr) > 1e-8) fixed = ComplexMatrix(m / tr);
  }
  if (!fixed) {
    // Degenerate fixed space: limit of the lazy map (1 + Phi)/2 applied to
    // the maximally mixed state, by repeated squaring until Cauchy.
    ComplexMatrix lazy = (s + ComplexMatrix::Identity(d * d, d * d)) / 2.0;
    const ComplexVector start = matrix_to_vec(identity(d) / static_cast<double>(d));
    ComplexVector previous = lazy * start;
    for (int iter = 0; iter < 80; ++iter) {
      lazy = (lazy * lazy).eval();
      ComplexVector next = lazy * start;
      const double change = trace_norm(vec_to_matrix(next - previous, d));
      previous = std::move(next);
      if (change <= 1e-10) break;
    }
    fixed = vec_to_matrix(previous, d);
  }
  DensityMatrix state = validate_density(ComplexMatrix((*fixed + fixed->adjoint()) / 2.0));
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> spectrum(state.matrix(), Eigen::EigenvaluesOnly);
  const bool faithful = spectrum.eigenvalues().minCoeff() > 1e-10;
  return {std::move(state), faithful, unit.size()};
}

// ---------------------------------------------------------------------------
// Near-non-demolition constants

double induced_trace_norm_estimate(const ComplexMatrix& superoperator, Eigen::Index dim, std::size_t samples,
                                   std::uint64_t seed) {
  double best = 0.0;
  for (Eigen::Index col = 0; col < superoperator.cols(); ++col)
    best = std::max(best, trace_norm(vec_to_matrix(superoperator.col(col), dim)));
  Philox4x32 rng(seed, 0x7472616365ull);
  for (std::size_t s = 0; s < samples; ++s) {
    const ComplexVector psi = random_unit_vector(rng, dim);
    const ComplexVector phi = s % 2 == 0 ? psi : random_unit_vector(rng, dim);
    const ComplexMatrix x = psi * phi.adjoint();
    best = std::max(best, trace_norm(vec_to_matrix(superoperator * matrix_to_vec(x), dim)));
  }
  return best;
}

AssumptionConstants assumption_constants(const StepDynamics& dyn, ConstantsMode mode,
                                         const SampledConstantsOptions& options) {
  if (!dyn.reference()) throw Error(ErrorCode::NoReference, "dynamics has no reference model attached");
  const NonDemolitionModel& ref = *dyn.reference();
  const auto n = static_cast<Eigen::Index>(ref.num_outcomes());

  AssumptionConstants out;
  out.mode = mode;
  out.per_xi_norms.resize(n);
  out.per_xi_d2.resize(n);
  for (Eigen::Index xi = 0; xi < n; ++xi) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(ref.channel()[static_cast<std::size_t>(xi)].unital_image(),
                                                        Eigen::EigenvaluesOnly);
    const double hi = solver.eigenvalues().maxCoeff();
    out.per_xi_norms[xi] = hi;
    out.per_xi_d2[xi] = hi > 0.0 ? solver.eigenvalues().minCoeff() / hi : 0.0;
  }
  out.d2 = out.per_xi_d2.minCoeff();

  if (mode == ConstantsMode::Analytic) {
    if (!dyn.hamiltonian_bound())
      throw Error(ErrorCode::InvalidConfig, "analytic d1 needs a Hamiltonian perturbation of the reference");
    out.d1 = 2.0 * *dyn.hamiltonian_bound();
  } else {
    const Eigen::Index d = ref.dim();
    double lower = 0.0;
    double upper = 0.0;
    std::vector<std::size_t> history;
    for (std::size_t step = 1; step <= options.steps; ++step) {
      const KrausFamily& actual = dyn.at(step, history);
      for (std::size_t xi = 0; xi < ref.num_outcomes(); ++xi) {
        const OutcomeMap& a = actual[xi];
        const OutcomeMap& b = ref.channel()[xi];
        const double scale = out.per_xi_norms[static_cast<Eigen::Index>(xi)];
        const ComplexMatrix diff = a.superoperator() - b.superoperator();
        lower = std::max(lower, induced_trace_norm_estimate(diff, d, options.samples, options.seed + step) / scale);
        double bound = std::sqrt(static_cast<double>(d)) * op_norm(diff);
        if (a.is_kraus() && b.is_kraus() && a.kraus().size() == b.kraus().size()) {
          double paired = 0.0;
          for (std::size_t i = 0; i < a.kraus().size(); ++i)
            paired += op_norm(ComplexMatrix(a.kraus()[i] - b.kraus()[i])) *
                      (op_norm(a.kraus()[i]) + op_norm(b.kraus()[i]));
          bound = std::min(bound, paired);
        }
        upper = std::max(upper, bound / scale);
      }
      history.push_back(0);
    }
    out.d1 = lower;
    out.d1_upper = upper;
    out.d1_is_estimate = true;
  }
  out.d = out.d2 - out.d1;
  if (!(out.d1 >= 0.0 && out.d1 < out.d2 && out.d2 <= 1.0 + 1e-12))
    throw Error(ErrorCode::AssumptionViolated,
                "constants d1 = " + std::to_string(out.d1) + ", d2 = " + std::to_string(out.d2) + " violate 0 <= d1 < d2 <= 1");
  return out;
}

MixtureChannel build_mixture_channel(OutcomeAlphabet alphabet, const RealVector& upsilon,
                                     const std::vector<ComplexMatrix>& upsilon_maps, std::optional<RealVector> norms) {
  const std::size_t n = alphabet.size();
  if (static_cast<std::size_t>(upsilon.size()) != n || upsilon_maps.size() != n)
    throw Error(ErrorCode::InvalidConfig, "need one weight and one map per outcome");
  if (upsilon.minCoeff() < 0.0 || std::abs(upsilon.sum() - 1.0) > 1e-12)
    throw Error(ErrorCode::InvalidConfig, "upsilon is not a probability distribution");
  const Eigen::Index dd = upsilon_maps.front().rows();
  ComplexMatrix sum = ComplexMatrix::Zero(dd, dd);
  for (const auto& m : upsilon_maps) {
    if (m.rows() != dd || m.cols() != dd) throw Error(ErrorCode::InvalidConfig, "Upsilon maps differ in size");
    sum += m;
  }
  if (sum.cwiseAbs().maxCoeff() > 1e-12) throw Error(ErrorCode::InvalidConfig, "Upsilon maps do not sum to zero");
  const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(dd))));

  RealVector upsilon_norms(static_cast<Eigen::Index>(n));
  for (std::size_t xi = 0; xi < n; ++xi)
    upsilon_norms[static_cast<Eigen::Index>(xi)] =
        norms ? (*norms)[static_cast<Eigen::Index>(xi)] : induced_trace_norm_estimate(upsilon_maps[xi], d);

  RealVector per_xi(static_cast<Eigen::Index>(n));
  std::vector<OutcomeMap> maps;
  for (std::size_t xi = 0; xi < n; ++xi) {
    const auto i = static_cast<Eigen::Index>(xi);
    if (!(upsilon[i] > upsilon_norms[i]))
      throw Error(ErrorCode::DominanceViolated, "upsilon_" + alphabet[xi] + " does not exceed ||Upsilon_" + alphabet[xi] + "||");
    per_xi[i] = 1.0 - 2.0 * upsilon_norms[i] / (upsilon[i] + upsilon_norms[i]);
    maps.push_back(OutcomeMap::from_superoperator(upsilon[i] * ComplexMatrix::Identity(dd, dd) + upsilon_maps[xi]));
  }
  const double d2 = per_xi.minCoeff();
  return {KrausFamily(std::move(alphabet), std::move(maps)), d2, std::move(per_xi), std::move(upsilon_norms)};
}

}  // namespace qnd
