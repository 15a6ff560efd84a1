#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "isosim/error.hpp"

namespace isosim {

using Vector = Eigen::VectorXd;
using CVector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXd;
using CMatrix = Eigen::MatrixXcd;
using Complex = std::complex<double>;

inline constexpr double kNormTolerance = 1e-8;
inline constexpr std::uint64_t kDefaultSeed = 42;

/// Normalized amplitude vector in the product basis.
class QuantumState {
 public:
  explicit QuantumState(CVector amplitudes) : amplitudes_(std::move(amplitudes)) {
    if (amplitudes_.size() == 0) throw ValidationError("quantum state must have positive dimension");
    if (std::abs(amplitudes_.norm() - 1.0) > kNormTolerance)
      throw ValidationError("quantum state is not normalized (norm " + std::to_string(amplitudes_.norm()) + ")");
  }

  static QuantumState normalized(CVector amplitudes) {
    const double n = amplitudes.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw ValidationError("cannot normalize a zero or non-finite vector");
    return QuantumState(amplitudes / n);
  }

  const CVector& amplitudes() const noexcept { return amplitudes_; }
  std::size_t dimension() const noexcept { return static_cast<std::size_t>(amplitudes_.size()); }
  double norm() const { return amplitudes_.norm(); }

  /// |<this|other>|
  double overlap(const QuantumState& other) const { return std::abs(amplitudes_.dot(other.amplitudes_)); }

 private:
  CVector amplitudes_;
};

/// Complex Gaussian amplitudes, normalized. Deterministic for a given seed.
inline QuantumState random_state(std::size_t dimension, std::uint64_t seed = kDefaultSeed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  CVector v(static_cast<Eigen::Index>(dimension));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    v[i] = Complex(re, im);
  }
  return QuantumState::normalized(std::move(v));
}

/// Hermitian, unit-trace, positive semidefinite matrix (checked on construction).
class DensityMatrix {
 public:
  static constexpr double kHermiticityTolerance = 1e-10;
  static constexpr double kTraceTolerance = 1e-8;
  static constexpr double kPositivityFloor = -1e-9;

  explicit DensityMatrix(CMatrix rho, double positivity_floor = kPositivityFloor) : rho_(std::move(rho)) {
    if (rho_.rows() != rho_.cols() || rho_.rows() == 0) throw ValidationError("density matrix must be square");
    if ((rho_ - rho_.adjoint()).norm() > kHermiticityTolerance)
      throw ValidationError("density matrix is not Hermitian");
    if (std::abs(rho_.trace() - Complex(1.0)) > kTraceTolerance)
      throw ValidationError("density matrix trace differs from one");
    const double lowest = min_eigenvalue();
    if (lowest < positivity_floor)
      throw ValidationError("density matrix has negative eigenvalue " + std::to_string(lowest));
  }

  static DensityMatrix pure(const QuantumState& psi) {
    return DensityMatrix(psi.amplitudes() * psi.amplitudes().adjoint());
  }

  static DensityMatrix maximally_mixed(std::size_t dimension) {
    const auto d = static_cast<Eigen::Index>(dimension);
    return DensityMatrix(CMatrix::Identity(d, d) / static_cast<double>(dimension));
  }

  const CMatrix& matrix() const noexcept { return rho_; }
  std::size_t dimension() const noexcept { return static_cast<std::size_t>(rho_.rows()); }

  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(rho_, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
  }

 private:
  CMatrix rho_;
};

/// (1/2) * sum of |eigenvalues| of the Hermitian difference.
inline double trace_distance(const CMatrix& a, const CMatrix& b) {
  const CMatrix diff = a - b;
  const CMatrix herm = 0.5 * (diff + diff.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(herm, Eigen::EigenvaluesOnly);
  return 0.5 * solver.eigenvalues().cwiseAbs().sum();
}

inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  return trace_distance(a.matrix(), b.matrix());
}

}  // namespace isosim
