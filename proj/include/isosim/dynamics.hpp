#pragma once

// Real-time driven evolution, imaginary-time relaxation and open-system
// (Lindblad) relaxation toward the ground or thermal state.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "isosim/compiler.hpp"
#include "isosim/error.hpp"
#include "isosim/hamiltonian.hpp"
#include "isosim/state.hpp"

namespace isosim {

struct PropagatorConfig {
  double dt = 1e-2;
  std::size_t krylov_dim = 24;
  double tol = 1e-9;
  std::size_t max_steps = 10'000'000;
  std::size_t max_substeps = 100'000;

  void check() const {
    std::vector<std::string> errors;
    if (!(std::isfinite(dt) && dt > 0.0)) errors.emplace_back("dt must be finite and positive");
    if (krylov_dim < 2) errors.emplace_back("krylov_dim must be at least 2");
    if (!(std::isfinite(tol) && tol > 0.0)) errors.emplace_back("tol must be finite and positive");
    if (max_steps < 1) errors.emplace_back("max_steps must be positive");
    if (!errors.empty()) throw ValidationError(errors);
  }
};

/// exp(z (H - shift)) v by Lanczos projection onto a Krylov subspace of at
/// most `krylov_dim` vectors, with adaptive substepping in z.
///
/// A substep covering the fraction h of z is accepted when the a posteriori
/// estimate |h z| beta_m |[exp(h z T)]_{m,1}| is at most tol * h, so the
/// accumulated relative error stays below tol. When the Krylov space becomes
/// invariant (always the case for dimension <= krylov_dim) the remaining
/// propagation is done in one exact step.
template <HermitianOperator Op>
CVector krylov_expv(const Op& op, const CVector& v, Complex z, const PropagatorConfig& cfg = {}, double shift = 0.0) {
  cfg.check();
  const std::size_t dim = op.dimension();
  if (static_cast<std::size_t>(v.size()) != dim) throw ValidationError("vector dimension does not match operator");
  if (z == Complex(0.0)) return v;
  if (!std::isfinite(std::abs(z)) || !std::isfinite(shift)) throw ValidationError("non-finite propagation argument");
  if (v.norm() == 0.0) throw ValidationError("cannot propagate the zero vector");

  const std::size_t m_max = std::min(cfg.krylov_dim, dim);
  const double scale = std::max(op.norm_estimate() + std::abs(shift), std::numeric_limits<double>::min());
  const double invariant_tol = 1e-12 * scale;

  CVector w = v;
  double done = 0.0;
  double h = 1.0;
  std::size_t substeps = 0;
  std::vector<CVector> basis;
  basis.reserve(m_max);
  CVector u;
  std::vector<double> alpha, beta;

  while (done < 1.0) {
    const double nw = w.norm();
    basis.clear();
    alpha.clear();
    beta.clear();
    basis.push_back(w / nw);
    double b = 0.0;
    bool invariant = false;
    for (std::size_t j = 0;; ++j) {
      op.apply(basis[j], u);
      if (shift != 0.0) u -= shift * basis[j];
      const double a = basis[j].dot(u).real();
      u -= a * basis[j];
      if (j > 0) u -= beta[j - 1] * basis[j - 1];
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& q : basis) u -= q.dot(u) * q;
      alpha.push_back(a);
      b = u.norm();
      if (b <= invariant_tol) {
        invariant = true;
        break;
      }
      if (j + 1 == m_max) break;
      beta.push_back(b);
      basis.push_back(u / b);
    }
    const auto m = static_cast<Eigen::Index>(alpha.size());
    Eigen::SelfAdjointEigenSolver<Matrix> tri;
    tri.computeFromTridiagonal(Eigen::Map<const Vector>(alpha.data(), m), Eigen::Map<const Vector>(beta.data(), m - 1),
                               Eigen::ComputeEigenvectors);
    const Matrix& s = tri.eigenvectors();
    const Vector& theta = tri.eigenvalues();

    const double remaining = 1.0 - done;
    double step = invariant ? remaining : std::min(h, remaining);
    CVector y;
    double err = 0.0;
    while (true) {
      if (++substeps > cfg.max_substeps) throw NumericalError("Krylov propagation exceeded the substep budget", err);
      // y = exp(step z T) e_1 = S exp(step z Theta) S^T e_1
      CVector c(m);
      for (Eigen::Index i = 0; i < m; ++i) c[i] = std::exp(step * z * theta[i]) * s(0, i);
      y = s.cast<Complex>() * c;
      if (!y.allFinite()) throw NumericalError("Krylov propagation overflowed");
      err = invariant ? 0.0 : std::abs(step * z) * b * std::abs(y[m - 1]) / std::max(y.norm(), 1e-300);
      if (err <= cfg.tol * step) break;
      step *= 0.5;
      if (step < 1e-14) throw NumericalError("Krylov step size underflow", err);
    }
    CVector next = CVector::Zero(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < m; ++i) next += y[i] * basis[static_cast<std::size_t>(i)];
    w = nw * next;
    done = step == remaining ? 1.0 : done + step;
    h = err < 0.05 * cfg.tol * step ? 2.0 * step : step;
  }
  return w;
}

struct TrajectoryRecord {
  std::vector<std::string> wires;
  std::vector<double> times;
  std::vector<double> energies;
  std::vector<double> norms;
  std::vector<std::vector<double>> position_mean;      // [sample][wire]
  std::vector<std::vector<double>> position_variance;  // [sample][wire]
};

struct EvolutionResult {
  TrajectoryRecord trajectory;
  QuantumState final_state;
};

/// Unitary evolution over [0, t_final] in equal steps no longer than cfg.dt.
/// Driven fields are sampled at each step midpoint (exponential midpoint
/// rule, second order). The state is never renormalized.
inline EvolutionResult evolve_real(const SimulatorLayout& layout, const QuantumState& psi0, double t_final,
                                   const PropagatorConfig& cfg = {}, std::size_t sample_every = 1) {
  cfg.check();
  if (!(std::isfinite(t_final) && t_final > 0.0)) throw ValidationError("t_final must be finite and positive");
  if (sample_every < 1) throw ValidationError("sample_every must be positive");
  const HamiltonianFamily family(layout);
  if (psi0.dimension() != family.basis().dimension()) throw ValidationError("initial state dimension mismatch");

  const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(t_final / cfg.dt - 1e-9)));
  if (steps > cfg.max_steps) throw ValidationError("t_final / dt exceeds max_steps");
  const double h = t_final / static_cast<double>(steps);
  const bool driven = family.time_dependent();
  std::optional<SparseHamiltonian> fixed;
  if (!driven) fixed.emplace(family.at(0.0));

  TrajectoryRecord record;
  for (const auto& w : layout.wires) record.wires.push_back(w.name);
  CVector psi = psi0.amplitudes();
  auto sample = [&](double t) {
    CVector hpsi;
    if (driven) {
      family.at(t).apply(psi, hpsi);
    } else {
      fixed->apply(psi, hpsi);
    }
    const double n = psi.norm();
    const PositionMoments moments = position_moments(layout, psi / n);
    record.times.push_back(t);
    record.energies.push_back(psi.dot(hpsi).real() / (n * n));
    record.norms.push_back(n);
    record.position_mean.push_back(moments.mean);
    record.position_variance.push_back(moments.variance);
  };

  sample(0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t0 = static_cast<double>(k) * h;
    if (driven) {
      psi = krylov_expv(family.at(t0 + 0.5 * h), psi, Complex(0.0, -h), cfg);
    } else {
      psi = krylov_expv(*fixed, psi, Complex(0.0, -h), cfg);
    }
    if ((k + 1) % sample_every == 0 || k + 1 == steps) sample(k + 1 == steps ? t_final : static_cast<double>(k + 1) * h);
  }
  if (std::abs(psi.norm() - 1.0) > kNormTolerance)
    throw NumericalError("norm drifted to " + std::to_string(psi.norm()) + " during evolution");
  return {std::move(record), QuantumState(psi)};
}

struct RelaxResult {
  QuantumState state;
  std::vector<double> energies;  // energies[0] is the starting energy
  /// Index into `energies` of the first entry that was already stationary.
  std::size_t converged_at = 0;
};

/// Imaginary-time projection psi <- normalize(exp(-H dtau) psi) until the
/// energy settles within `tol`. Convergence is geometric, so besides a small
/// step-to-step change the estimated remaining decrease
/// dE_k * r / (1 - r), with r = dE_k / dE_{k-1}, must also be below `tol`.
template <HermitianOperator Op>
RelaxResult relax_imaginary(const Op& op, const QuantumState& psi0, double dtau, double tol,
                            const PropagatorConfig& cfg = {}, std::size_t max_steps = 100'000) {
  if (!(std::isfinite(dtau) && dtau > 0.0)) throw ValidationError("dtau must be finite and positive");
  if (!(std::isfinite(tol) && tol > 0.0)) throw ValidationError("tol must be finite and positive");
  if (psi0.dimension() != op.dimension()) throw ValidationError("initial state dimension mismatch");

  CVector psi = psi0.amplitudes();
  std::vector<double> energies{expectation(op, psi0)};
  double previous_change = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= max_steps; ++k) {
    psi = krylov_expv(op, psi, Complex(-dtau, 0.0), cfg, energies.back());
    psi /= psi.norm();
    energies.push_back(expectation(op, QuantumState(psi)));
    const double change = std::abs(energies[k] - energies[k - 1]);
    bool settled = false;
    if (change <= tol) {
      const double ratio = std::isfinite(previous_change) && previous_change > 0.0 ? change / previous_change : 1.0;
      settled = ratio < 1.0 ? change * ratio / (1.0 - ratio) <= tol : change <= 0.1 * tol;
    }
    if (settled) return {QuantumState(psi), std::move(energies), k - 1};
    previous_change = change;
  }
  throw NumericalError("imaginary-time relaxation stagnated after " + std::to_string(max_steps) + " steps",
                       std::abs(energies.back() - energies[energies.size() - 2]));
}

inline RelaxResult relax_imaginary(const SimulatorLayout& layout, const QuantumState& psi0, double dtau, double tol,
                                   const PropagatorConfig& cfg = {}, std::size_t max_steps = 100'000) {
  return relax_imaginary(assemble(layout, 0.0), psi0, dtau, tol, cfg, max_steps);
}

/// Thermal state exp(-H/T)/Z from a dense eigendecomposition, with the
/// exponent shifted by its maximum. T = +infinity gives I/D.
inline DensityMatrix gibbs_state(const Matrix& h, double temperature) {
  if (h.rows() > static_cast<Eigen::Index>(kDenseEigenThreshold))
    throw ValidationError("gibbs_state is limited to dimension " + std::to_string(kDenseEigenThreshold));
  if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
  const Vector& energies = solver.eigenvalues();
  Vector weights(energies.size());
  for (Eigen::Index i = 0; i < energies.size(); ++i)
    weights[i] = std::isinf(temperature) ? 1.0 : std::exp(-(energies[i] - energies[0]) / temperature);
  weights /= weights.sum();
  const Matrix rho = solver.eigenvectors() * weights.asDiagonal() * solver.eigenvectors().transpose();
  return DensityMatrix(rho.cast<Complex>());
}

inline DensityMatrix gibbs_state(const SparseHamiltonian& h, double temperature) {
  if (h.dimension() > kDenseEigenThreshold)
    throw ValidationError("gibbs_state is limited to dimension " + std::to_string(kDenseEigenThreshold));
  return gibbs_state(dense_matrix(h), temperature);
}

/// Bath coupled through C = sum_i X_i. Downward rates are gamma0, upward
/// rates obey detailed balance gamma(-w) = exp(-w/T) gamma(w); T = 0 allows
/// only downward (and zero-frequency) jumps, T = +infinity gives symmetric
/// rates.
struct BathSpec {
  double temperature = 0.0;
  double gamma0 = 1.0;

  void check() const {
    std::vector<std::string> errors;
    if (!(temperature >= 0.0)) errors.emplace_back("bath temperature must be non-negative");
    if (!(std::isfinite(gamma0) && gamma0 > 0.0)) errors.emplace_back("gamma0 must be finite and positive");
    if (!errors.empty()) throw ValidationError(errors);
  }

  double rate(double released_energy) const {
    if (released_energy >= 0.0) return gamma0;
    if (temperature == 0.0) return 0.0;
    if (std::isinf(temperature)) return gamma0;
    return gamma0 * std::exp(released_energy / temperature);
  }
};

inline constexpr std::size_t kLindbladMaxDimension = 128;

/// Lindblad generator with jump operators L_mn = <m|C|n> |m><n| in the
/// Hamiltonian eigenbasis. In that basis populations follow a Pauli master
/// equation and each coherence decays independently:
///
///   dp_k/dt      = sum_n W_kn p_n - out_k p_k,   out_k = sum_{m != k} W_mk
///   d rho_kl/dt  = (-i (E_k - E_l) - (G_k + G_l) / 2) rho_kl,  G_k = sum_m W_mk
///
/// with W_mn = gamma(E_n - E_m) |<m|C|n>|^2. Couplings below 1e-10 max|C|
/// are treated as exact zeros.
class LindbladGenerator {
 public:
  LindbladGenerator(const Matrix& hamiltonian, const Vector& coupling_diagonal, const BathSpec& bath) : bath_(bath) {
    bath.check();
    const Eigen::Index d = hamiltonian.rows();
    if (d > static_cast<Eigen::Index>(kLindbladMaxDimension))
      throw ValidationError("density-matrix relaxation is limited to dimension " +
                            std::to_string(kLindbladMaxDimension));
    if (coupling_diagonal.size() != d) throw ValidationError("coupling operator dimension mismatch");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(hamiltonian);
    energies_ = solver.eigenvalues();
    basis_ = solver.eigenvectors();
    coupling_ = basis_.transpose() * coupling_diagonal.asDiagonal() * basis_;
    const double cutoff = 1e-10 * std::max(coupling_.cwiseAbs().maxCoeff(), 1e-300);
    rates_ = Matrix::Zero(d, d);
    for (Eigen::Index m = 0; m < d; ++m)
      for (Eigen::Index n = 0; n < d; ++n) {
        const double c = coupling_(m, n);
        if (std::abs(c) <= cutoff) continue;
        rates_(m, n) = bath.rate(energies_[n] - energies_[m]) * c * c;
      }
    total_ = rates_.colwise().sum().transpose();
    outflow_ = total_ - rates_.diagonal();
    const double spread = std::max(1.0, energies_.cwiseAbs().maxCoeff());
    for (Eigen::Index k = 0; k < d; ++k)
      if (energies_[k] - energies_[0] <= 1e-9 * spread) ground_.push_back(k);
  }

  Eigen::Index dimension() const { return energies_.size(); }
  const Vector& energies() const { return energies_; }
  const Matrix& eigenvectors() const { return basis_; }
  const Matrix& coupling() const { return coupling_; }
  /// rates()(m, n): transition rate n -> m.
  const Matrix& rates() const { return rates_; }
  const Vector& outflow() const { return outflow_; }
  const std::vector<Eigen::Index>& ground_indices() const { return ground_; }
  const BathSpec& bath() const { return bath_; }

  CMatrix to_eigenbasis(const CMatrix& rho) const { return basis_.transpose() * rho * basis_; }
  CMatrix from_eigenbasis(const CMatrix& rho) const { return basis_ * rho * basis_.transpose(); }

  // rates_ keeps the diagonal (pure dephasing) term; it cancels against total_.
  Vector population_rhs(const Vector& p) const { return rates_ * p - total_.cwiseProduct(p); }

  CMatrix rhs_eigenbasis(const CMatrix& rho) const {
    const Eigen::Index d = dimension();
    CMatrix out(d, d);
    for (Eigen::Index l = 0; l < d; ++l)
      for (Eigen::Index k = 0; k < d; ++k)
        out(k, l) = k == l ? Complex(0.0) : coherence_rate(k, l) * rho(k, l);
    const Vector p = rho.diagonal().real();
    out.diagonal() = population_rhs(p).cast<Complex>();
    return out;
  }

  /// d rho / dt in the product (position) basis.
  CMatrix rhs(const CMatrix& rho) const { return from_eigenbasis(rhs_eigenbasis(to_eigenbasis(rho))); }

  Complex coherence_rate(Eigen::Index k, Eigen::Index l) const {
    return Complex(-0.5 * (total_[k] + total_[l]), -(energies_[k] - energies_[l]));
  }

  /// States whose population ends up in the ground space with certainty:
  /// every state reachable from them can still reach the ground space.
  std::vector<bool> drains_to_ground() const {
    const Eigen::Index d = dimension();
    std::vector<bool> reaches(static_cast<std::size_t>(d), false);
    std::vector<Eigen::Index> stack(ground_.begin(), ground_.end());
    for (auto g : ground_) reaches[static_cast<std::size_t>(g)] = true;
    while (!stack.empty()) {
      const Eigen::Index m = stack.back();
      stack.pop_back();
      for (Eigen::Index n = 0; n < d; ++n)
        if (n != m && rates_(m, n) > 0.0 && !reaches[static_cast<std::size_t>(n)]) {
          reaches[static_cast<std::size_t>(n)] = true;
          stack.push_back(n);
        }
    }
    std::vector<bool> safe(static_cast<std::size_t>(d), false);
    for (Eigen::Index s = 0; s < d; ++s) {
      std::vector<bool> seen(static_cast<std::size_t>(d), false);
      std::vector<Eigen::Index> todo{s};
      seen[static_cast<std::size_t>(s)] = true;
      bool ok = true;
      while (!todo.empty() && ok) {
        const Eigen::Index n = todo.back();
        todo.pop_back();
        if (!reaches[static_cast<std::size_t>(n)]) ok = false;
        for (Eigen::Index m = 0; m < d && ok; ++m)
          if (m != n && rates_(m, n) > 0.0 && !seen[static_cast<std::size_t>(m)]) {
            seen[static_cast<std::size_t>(m)] = true;
            todo.push_back(m);
          }
      }
      safe[static_cast<std::size_t>(s)] = ok;
    }
    return safe;
  }

  /// True when every eigenstate is linked to every other through nonzero
  /// off-diagonal couplings (unique steady state for T > 0).
  bool connected() const {
    const Eigen::Index d = dimension();
    std::vector<bool> seen(static_cast<std::size_t>(d), false);
    std::vector<Eigen::Index> todo{0};
    seen[0] = true;
    std::size_t count = 1;
    while (!todo.empty()) {
      const Eigen::Index n = todo.back();
      todo.pop_back();
      for (Eigen::Index m = 0; m < d; ++m)
        if (m != n && (rates_(m, n) > 0.0 || rates_(n, m) > 0.0) && !seen[static_cast<std::size_t>(m)]) {
          seen[static_cast<std::size_t>(m)] = true;
          ++count;
          todo.push_back(m);
        }
    }
    return count == static_cast<std::size_t>(d);
  }

  /// Slowest nonzero relaxation rate among populations and coherences;
  /// zero when some mode never relaxes.
  double slowest_rate() const {
    const Eigen::Index d = dimension();
    double slowest = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < d; ++k)
      for (Eigen::Index l = k + 1; l < d; ++l) slowest = std::min(slowest, 0.5 * (total_[k] + total_[l]));
    if (bath_.temperature == 0.0) {
      const auto safe = drains_to_ground();
      for (Eigen::Index k = 0; k < d; ++k) {
        const bool ground = std::find(ground_.begin(), ground_.end(), k) != ground_.end();
        if (!ground && safe[static_cast<std::size_t>(k)]) slowest = std::min(slowest, outflow_[k]);
      }
    } else {
      // Detailed balance makes pi^{-1/2} G pi^{1/2} symmetric.
      Vector pi(d);
      for (Eigen::Index k = 0; k < d; ++k)
        pi[k] = std::isinf(bath_.temperature) ? 1.0 : std::exp(-(energies_[k] - energies_[0]) / bath_.temperature);
      Matrix g = rates_;
      g.diagonal() = -outflow_;
      const Vector root = pi.cwiseSqrt();
      const Matrix sym = root.cwiseInverse().asDiagonal() * g * root.asDiagonal();
      Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (sym + sym.transpose()), Eigen::EigenvaluesOnly);
      const Vector ev = solver.eigenvalues();  // ascending, largest is ~0
      if (d > 1) slowest = std::min(slowest, -ev[d - 2]);
    }
    return std::max(slowest, 0.0);
  }

 private:
  BathSpec bath_;
  Vector energies_;
  Matrix basis_;
  Matrix coupling_;
  Matrix rates_;
  Vector total_;
  Vector outflow_;
  std::vector<Eigen::Index> ground_;
};

struct LindbladResult {
  DensityMatrix rho;
  std::vector<double> times;
  std::vector<double> energies;
  double ground_population = 0.0;
  std::vector<std::string> warnings;
};

/// Integrates the relaxation of rho0 under H (fields sampled at t = 0) up
/// to t_final. Populations in the eigenbasis advance with classical RK4;
/// coherences are decoupled scalar decays and are advanced exactly.
inline LindbladResult lindblad_relax(const SimulatorLayout& layout, const DensityMatrix& rho0, const BathSpec& bath,
                                     double t_final, double dt, std::size_t sample_every = 1) {
  const SparseHamiltonian h = assemble(layout, 0.0);
  if (h.dimension() > kLindbladMaxDimension)
    throw ValidationError("density-matrix relaxation is limited to dimension " + std::to_string(kLindbladMaxDimension));
  if (rho0.dimension() != h.dimension()) throw ValidationError("initial density matrix dimension mismatch");
  if (!(std::isfinite(t_final) && t_final > 0.0)) throw ValidationError("t_final must be finite and positive");
  if (!(std::isfinite(dt) && dt > 0.0)) throw ValidationError("dt must be finite and positive");
  if (sample_every < 1) throw ValidationError("sample_every must be positive");

  const LindbladGenerator gen(dense_matrix(h), total_position(layout), bath);
  const CMatrix start = gen.to_eigenbasis(rho0.matrix());
  Vector p = start.diagonal().real();
  const Vector& e = gen.energies();

  LindbladResult out{rho0, {}, {}, 0.0, {}};
  const auto safe = gen.drains_to_ground();
  if (bath.temperature == 0.0) {
    double stranded = 0.0;
    for (Eigen::Index k = 0; k < p.size(); ++k)
      if (!safe[static_cast<std::size_t>(k)]) stranded += p[k];
    if (stranded > 1e-12)
      out.warnings.push_back("population " + std::to_string(stranded) +
                             " starts in states that cannot relax to the ground state (zero couplings)");
  } else if (!gen.connected()) {
    out.warnings.push_back("coupling graph is disconnected; the steady state depends on the initial state");
  }

  const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(t_final / dt - 1e-9)));
  const double step = t_final / static_cast<double>(steps);
  out.times.push_back(0.0);
  out.energies.push_back(e.dot(p));
  for (std::size_t k = 0; k < steps; ++k) {
    const Vector k1 = gen.population_rhs(p);
    const Vector k2 = gen.population_rhs(p + 0.5 * step * k1);
    const Vector k3 = gen.population_rhs(p + 0.5 * step * k2);
    const Vector k4 = gen.population_rhs(p + step * k3);
    p += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (p.minCoeff() < -1e-7)
      throw NumericalError("population became negative (" + std::to_string(p.minCoeff()) + "); reduce the step size");
    if ((k + 1) % sample_every == 0 || k + 1 == steps) {
      out.times.push_back(k + 1 == steps ? t_final : static_cast<double>(k + 1) * step);
      out.energies.push_back(e.dot(p));
    }
  }

  CMatrix rho(start.rows(), start.cols());
  for (Eigen::Index l = 0; l < rho.cols(); ++l)
    for (Eigen::Index k = 0; k < rho.rows(); ++k)
      rho(k, l) = k == l ? Complex(p[k]) : start(k, l) * std::exp(gen.coherence_rate(k, l) * t_final);
  for (auto g : gen.ground_indices()) out.ground_population += p[g];
  CMatrix position = gen.from_eigenbasis(rho);
  position = 0.5 * (position + position.adjoint()).eval();
  try {
    out.rho = DensityMatrix(position, -1e-7);
  } catch (const ValidationError& err) {
    throw NumericalError(std::string("relaxed density matrix is invalid: ") + err.what() + "; reduce the step size");
  }
  return out;
}

}  // namespace isosim
