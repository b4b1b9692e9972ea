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

// Dense complex linear algebra and validated quantum-state types.
//
// Everything here is header-only and templated on the real scalar type so
// that the free functions accept arbitrary Eigen expressions. The rest of
// the library instantiates it with double through the aliases at the end
// of this file.

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qnd/errors.hpp"

namespace qnd {

template <typename Real>
using ComplexMatrixT = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using RealVectorT = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

namespace tol {
inline constexpr double kHermitian = 1e-10;
inline constexpr double kHermitianInput = 1e-8;
inline constexpr double kNegativeEigenvalue = 1e-10;
inline constexpr double kZeroTrace = 1e-14;
inline constexpr double kProjector = 1e-10;
inline constexpr double kEigenGroup = 1e-8;
}  // namespace tol

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& a) {
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const auto v = a(i, j);
      if (!std::isfinite(std::real(v)) || !std::isfinite(std::imag(v))) return false;
    }
  return true;
}

/// Entrywise max |A - A^dagger|.
template <typename Derived>
auto hermiticity_residual(const Eigen::MatrixBase<Derived>& a) {
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  if (a.rows() != a.cols()) return std::numeric_limits<Real>::infinity();
  if (a.size() == 0) return Real(0);
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

template <typename Derived>
void require_square_finite(const Eigen::MatrixBase<Derived>& a, const char* what) {
  if (a.rows() != a.cols() || a.rows() < 1)
    throw Error(ErrorCode::InvalidMatrix, std::string(what) + " must be square with dim >= 1");
  if (!all_finite(a)) throw Error(ErrorCode::InvalidMatrix, std::string(what) + " has non-finite entries");
}

template <typename Derived>
auto singular_values(const Eigen::MatrixBase<Derived>& a) {
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  const ComplexMatrixT<Real> m = a.template cast<std::complex<Real>>();
  return Eigen::JacobiSVD<ComplexMatrixT<Real>>(m).singularValues().eval();
}

/// Sum of singular values.
template <typename Derived>
auto trace_norm(const Eigen::MatrixBase<Derived>& a) {
  return singular_values(a).sum();
}

/// Largest singular value.
template <typename Derived>
auto op_norm(const Eigen::MatrixBase<Derived>& a) {
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  const auto sv = singular_values(a);
  return sv.size() == 0 ? Real(0) : sv.maxCoeff();
}

/// Hermitian eigendecomposition with degenerate eigenvalues merged into a
/// single eigenprojector. Eigenvalues are ascending.
template <typename Real>
struct SpectralDecompositionT {
  RealVectorT<Real> eigenvalues;
  std::vector<ComplexMatrixT<Real>> projectors;

  ComplexMatrixT<Real> reconstruct() const {
    ComplexMatrixT<Real> out = ComplexMatrixT<Real>::Zero(projectors.front().rows(), projectors.front().cols());
    for (std::size_t i = 0; i < projectors.size(); ++i)
      out += eigenvalues[static_cast<Eigen::Index>(i)] * projectors[i];
    return out;
  }
};

template <typename Derived>
auto herm_eigendecompose(const Eigen::MatrixBase<Derived>& a, double group_tol = tol::kEigenGroup) {
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  using Matrix = ComplexMatrixT<Real>;
  require_square_finite(a, "matrix");
  if (hermiticity_residual(a) > tol::kHermitianInput)
    throw Error(ErrorCode::NotHermitian, "eigendecomposition input is not Hermitian");

  const Matrix h = (a + a.adjoint()).template cast<std::complex<Real>>() / Real(2);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
  const auto& values = solver.eigenvalues();
  const auto& vectors = solver.eigenvectors();

  SpectralDecompositionT<Real> out;
  std::vector<Real> group_values;
  Eigen::Index start = 0;
  const Eigen::Index n = values.size();
  while (start < n) {
    Eigen::Index end = start + 1;
    while (end < n && values[end] - values[end - 1] <= group_tol) ++end;
    const auto block = vectors.middleCols(start, end - start);
    out.projectors.push_back(block * block.adjoint());
    group_values.push_back(values.segment(start, end - start).mean());
    start = end;
  }
  out.eigenvalues = Eigen::Map<RealVectorT<Real>>(group_values.data(), static_cast<Eigen::Index>(group_values.size()));
  return out;
}

/// exp(-i t H) for Hermitian H.
template <typename Derived>
auto matrix_exponential_unitary(const Eigen::MatrixBase<Derived>& h,
                                typename Eigen::NumTraits<typename Derived::Scalar>::Real t) {
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  using Matrix = ComplexMatrixT<Real>;
  require_square_finite(h, "Hamiltonian");
  if (hermiticity_residual(h) > tol::kHermitianInput)
    throw Error(ErrorCode::NotHermitian, "Hamiltonian is not Hermitian");
  if (t == Real(0) || h.isZero(Real(0))) return Matrix(Matrix::Identity(h.rows(), h.cols()));
  const Matrix sym = (h + h.adjoint()).template cast<std::complex<Real>>() / Real(2);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  const auto& v = solver.eigenvectors();
  Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1> phases(solver.eigenvalues().size());
  for (Eigen::Index i = 0; i < phases.size(); ++i)
    phases[i] = std::polar(Real(1), -t * solver.eigenvalues()[i]);
  return Matrix(v * phases.asDiagonal() * v.adjoint());
}

/// Hermitian, positive semidefinite, unit-trace matrix. Only obtainable
/// through validate_density, so every instance satisfies the invariants.
template <typename Real>
class DensityMatrixT {
 public:
  using Matrix = ComplexMatrixT<Real>;

  const Matrix& matrix() const { return matrix_; }
  Eigen::Index dim() const { return matrix_.rows(); }

  /// Maximally mixed state 1/dim.
  static DensityMatrixT maximally_mixed(Eigen::Index dim) {
    return DensityMatrixT(Matrix::Identity(dim, dim) / Real(dim));
  }

  template <typename Derived>
  friend DensityMatrixT<typename Eigen::NumTraits<typename Derived::Scalar>::Real> validate_density(
      const Eigen::MatrixBase<Derived>& a);

 private:
  explicit DensityMatrixT(Matrix m) : matrix_(std::move(m)) {}
  Matrix matrix_;
};

/// Hermitize, reject materially negative spectra, clamp drift, renormalize.
template <typename Derived>
DensityMatrixT<typename Eigen::NumTraits<typename Derived::Scalar>::Real> validate_density(
    const Eigen::MatrixBase<Derived>& a) {
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  using Matrix = ComplexMatrixT<Real>;
  require_square_finite(a, "density matrix");
  if (hermiticity_residual(a) > tol::kHermitianInput)
    throw Error(ErrorCode::NotHermitian, "density matrix is not Hermitian");
  Matrix h = (a + a.adjoint()).template cast<std::complex<Real>>() / Real(2);

  const Real trace = std::real(h.trace());
  if (trace <= tol::kZeroTrace) throw Error(ErrorCode::ZeroTrace, "density matrix has non-positive trace");

  Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
  RealVectorT<Real> values = solver.eigenvalues();
  if (values.minCoeff() < -tol::kNegativeEigenvalue * trace)
    throw Error(ErrorCode::NotPositive, "density matrix has eigenvalue " + std::to_string(values.minCoeff()));
  if (values.minCoeff() < 0) {
    values = values.cwiseMax(Real(0));
    const auto& v = solver.eigenvectors();
    h = v * values.template cast<std::complex<Real>>().asDiagonal() * v.adjoint();
    h = (h + h.adjoint()).eval() / Real(2);
  }
  h /= std::real(h.trace());
  return DensityMatrixT<Real>(std::move(h));
}

/// |psi><psi| / <psi|psi>.
template <typename Derived>
auto pure_state(const Eigen::MatrixBase<Derived>& psi) {
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  const Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1> v = psi.template cast<std::complex<Real>>();
  return validate_density(v * v.adjoint());
}

/// Orthogonal resolution of the identity {Pi_nu} labelled by facts.
template <typename Real>
class ProjectorFamilyT {
 public:
  using Matrix = ComplexMatrixT<Real>;

  ProjectorFamilyT(std::vector<std::string> labels, std::vector<Matrix> projectors)
      : labels_(std::move(labels)), projectors_(std::move(projectors)) {
    validate();
  }

  Eigen::Index dim() const { return projectors_.front().rows(); }
  std::size_t size() const { return projectors_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<Matrix>& projectors() const { return projectors_; }
  const Matrix& operator[](std::size_t nu) const { return projectors_[nu]; }

  std::size_t index_of(const std::string& label) const {
    const auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) throw Error(ErrorCode::InvalidConfig, "unknown fact label '" + label + "'");
    return static_cast<std::size_t>(it - labels_.begin());
  }

  /// Tr(Pi_nu rho) for every fact.
  template <typename Derived>
  RealVectorT<Real> weights(const Eigen::MatrixBase<Derived>& rho) const {
    RealVectorT<Real> w(static_cast<Eigen::Index>(size()));
    for (std::size_t nu = 0; nu < size(); ++nu)
      w[static_cast<Eigen::Index>(nu)] = std::real((projectors_[nu] * rho).trace());
    return w;
  }

 private:
  void validate() const {
    if (projectors_.empty() || labels_.size() != projectors_.size())
      throw Error(ErrorCode::NotProjectorFamily, "need one label per projector and at least one projector");
    for (std::size_t i = 0; i < labels_.size(); ++i)
      for (std::size_t j = i + 1; j < labels_.size(); ++j)
        if (labels_[i] == labels_[j]) throw Error(ErrorCode::NotProjectorFamily, "duplicate fact label " + labels_[i]);
    const Eigen::Index d = projectors_.front().rows();
    Matrix sum = Matrix::Zero(d, d);
    for (std::size_t i = 0; i < projectors_.size(); ++i) {
      const Matrix& p = projectors_[i];
      if (p.rows() != d || p.cols() != d || !all_finite(p))
        throw Error(ErrorCode::NotProjectorFamily, "projector " + labels_[i] + " has wrong shape");
      if (hermiticity_residual(p) > tol::kProjector)
        throw Error(ErrorCode::NotProjectorFamily, "projector " + labels_[i] + " is not Hermitian");
      if (op_norm(Matrix(p * p - p)) > tol::kProjector)
        throw Error(ErrorCode::NotProjectorFamily, "projector " + labels_[i] + " is not idempotent");
      for (std::size_t j = i + 1; j < projectors_.size(); ++j)
        if (op_norm(Matrix(p * projectors_[j])) > tol::kProjector)
          throw Error(ErrorCode::NotProjectorFamily, "projectors " + labels_[i] + " and " + labels_[j] + " overlap");
      sum += p;
    }
    if (op_norm(Matrix(sum - Matrix::Identity(d, d))) > tol::kProjector)
      throw Error(ErrorCode::NotProjectorFamily, "projectors do not resolve the identity");
  }

  std::vector<std::string> labels_;
  std::vector<Matrix> projectors_;
};

using Complex = std::complex<double>;
using ComplexMatrix = ComplexMatrixT<double>;
using ComplexVector = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;
using RealVector = RealVectorT<double>;
using RealMatrix = Eigen::MatrixXd;
using DensityMatrix = DensityMatrixT<double>;
using SpectralDecomposition = SpectralDecompositionT<double>;
using ProjectorFamily = ProjectorFamilyT<double>;

/// Pauli matrices, handy for model construction.
inline ComplexMatrix pauli_x() { ComplexMatrix m(2, 2); m << 0, 1, 1, 0; return m; }
inline ComplexMatrix pauli_y() { ComplexMatrix m(2, 2); m << 0, Complex(0, -1), Complex(0, 1), 0; return m; }
inline ComplexMatrix pauli_z() { ComplexMatrix m(2, 2); m << 1, 0, 0, -1; return m; }

}  // namespace qnd
