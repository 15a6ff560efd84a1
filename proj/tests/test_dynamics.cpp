#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "isosim/compiler.hpp"
#include "isosim/dynamics.hpp"
#include "isosim/model.hpp"

using isosim::CMatrix;
using isosim::Complex;
using isosim::CVector;
using isosim::Matrix;
using isosim::Vector;

namespace {

const double kPi = std::acos(-1.0);

isosim::SimulatorLayout compile_builtin(const char* name, isosim::BuiltinParams p) {
  return isosim::compile(isosim::builtin(name, p));
}

// exp(z H) v through a full eigendecomposition.
CVector dense_expv(const Matrix& h, const CVector& v, Complex z) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
  const CMatrix u = solver.eigenvectors().cast<Complex>();
  CVector phases(h.rows());
  for (Eigen::Index i = 0; i < h.rows(); ++i) phases[i] = std::exp(z * solver.eigenvalues()[i]);
  return u * phases.asDiagonal() * (u.adjoint() * v);
}

Matrix random_symmetric(Eigen::Index d, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> normal;
  Matrix a(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) a(i, j) = normal(rng);
  return scale * 0.5 * (a + a.transpose());
}

isosim::ModelSpec asymmetric_pair() {
  isosim::RawModel raw;
  raw.wires = {{"x1", 1.0, 1.0, 6}, {"x2", 1.5, 1.0, 7}};
  raw.pairs = {{"x1", "x2", "0.5*kappa*(x1-x2)^2"}};
  raw.fields = {{"x1", "30*(x1-0.4)^2"}};
  raw.constants = {{"kappa", 80.0}};
  return isosim::validate(raw);
}

// Lindblad right-hand side summed term by term over explicit jump operators
// L = sqrt(W_mn) |m><n| built in the eigenbasis and mapped to positions.
CMatrix brute_force_lindblad(const Matrix& h, const Vector& coupling, const isosim::BathSpec& bath, const CMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
  const Matrix& u = solver.eigenvectors();
  const Vector& e = solver.eigenvalues();
  const Matrix c = u.transpose() * coupling.asDiagonal() * u;
  const double cutoff = 1e-10 * c.cwiseAbs().maxCoeff();
  const CMatrix hc = h.cast<Complex>();
  CMatrix out = Complex(0, -1) * (hc * rho - rho * hc);
  const Eigen::Index d = h.rows();
  for (Eigen::Index m = 0; m < d; ++m)
    for (Eigen::Index n = 0; n < d; ++n) {
      if (std::abs(c(m, n)) <= cutoff) continue;
      const double rate = bath.rate(e[n] - e[m]) * c(m, n) * c(m, n);
      if (rate == 0.0) continue;
      const CMatrix l = (u.col(m) * u.col(n).transpose()).cast<Complex>();
      const CMatrix ll = l.adjoint() * l;
      out += rate * (l * rho * l.adjoint() - 0.5 * (ll * rho + rho * ll));
    }
  return out;
}

}  // namespace

TEST(Krylov, ZeroArgumentIsIdentity) {
  const auto h = isosim::assemble(compile_builtin("box", {{"N", 10}}));
  const CVector v = isosim::random_state(10).amplitudes();
  EXPECT_EQ(isosim::krylov_expv(h, v, Complex(0.0)), v);
}

TEST(Krylov, EigenvectorPhase) {
  const auto h = isosim::assemble(compile_builtin("harmonic", {{"omega", 40}, {"N", 60}}));
  const auto s = isosim::lowest_eigenpairs(h, 3);
  for (Eigen::Index k = 0; k < 3; ++k) {
    const CVector v = s.eigenvectors.col(k).cast<Complex>();
    const double t = 0.37;
    const CVector got = isosim::krylov_expv(h, v, Complex(0, -t));
    EXPECT_LE((got - std::exp(Complex(0, -s.eigenvalues[k] * t)) * v).norm(), 1e-9);
  }
}

TEST(Krylov, MatchesDenseExponentialOnRandomMatrices) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index d = 2 + trial * 2;
    const Matrix h = random_symmetric(d, rng, 5.0);
    const isosim::DenseOperator op(h);
    const CVector v = isosim::random_state(static_cast<std::size_t>(d), trial).amplitudes();
    for (Complex z : {Complex(0, -1.3), Complex(-0.2, 0), Complex(-0.05, 0.4)}) {
      const CVector got = isosim::krylov_expv(op, v, z);
      const CVector want = dense_expv(h, v, z);
      EXPECT_LE((got - want).norm(), 1e-8 * want.norm()) << "d=" << d << " z=" << z;
    }
  }
}

TEST(Krylov, SubstepsOnStiffOperators) {
  const auto h = isosim::assemble(compile_builtin("coupled_harmonic", {{"omega", 40}, {"kappa", 200}, {"N", 20}}));
  const CVector v = isosim::random_state(h.dimension(), 1).amplitudes();
  const CVector got = isosim::krylov_expv(h, v, Complex(0, -0.5));
  const CVector want = dense_expv(isosim::dense_matrix(h), v, Complex(0, -0.5));
  EXPECT_LE((got - want).norm(), 1e-8);
}

TEST(Krylov, ShiftOnlyChangesGlobalFactor) {
  const auto h = isosim::assemble(compile_builtin("box", {{"N", 30}}));
  const CVector v = isosim::random_state(30, 4).amplitudes();
  const CVector a = isosim::krylov_expv(h, v, Complex(-0.01, 0), {}, 0.0);
  const CVector b = isosim::krylov_expv(h, v, Complex(-0.01, 0), {}, 100.0);
  EXPECT_LE((a * std::exp(0.01 * 100.0) - b).norm(), 1e-9 * b.norm());
}

TEST(Krylov, InputChecks) {
  const auto h = isosim::assemble(compile_builtin("box", {{"N", 4}}));
  EXPECT_THROW(isosim::krylov_expv(h, CVector::Zero(4), Complex(0, 1)), isosim::ValidationError);
  EXPECT_THROW(isosim::krylov_expv(h, CVector::Ones(5), Complex(0, 1)), isosim::ValidationError);
  isosim::PropagatorConfig bad;
  bad.krylov_dim = 1;
  EXPECT_THROW(isosim::krylov_expv(h, CVector::Ones(4), Complex(0, 1), bad), isosim::ValidationError);
}

TEST(Evolve, GroundStateIsStationary) {
  const auto layout = compile_builtin("box", {{"N", 32}});
  const auto h = isosim::assemble(layout);
  const auto s = isosim::lowest_eigenpairs(h, 1);
  const isosim::QuantumState g(s.eigenvectors.col(0).cast<Complex>());
  const auto r = isosim::evolve_real(layout, g, 1.0);
  EXPECT_GE(r.final_state.overlap(g), 1.0 - 1e-8);
  for (double e : r.trajectory.energies) EXPECT_NEAR(e, s.eigenvalues[0], 1e-8 * s.eigenvalues[0]);
  EXPECT_EQ(r.trajectory.times.size(), 101u);
  EXPECT_EQ(r.trajectory.times.back(), 1.0);
  for (std::size_t k = 1; k < r.trajectory.times.size(); ++k)
    EXPECT_GT(r.trajectory.times[k], r.trajectory.times[k - 1]);
}

TEST(Evolve, MatchesDensePropagation) {
  const auto m = asymmetric_pair();
  const auto layout = isosim::compile(m);
  const Matrix h = isosim::dense_matrix(isosim::assemble(layout));
  const auto psi0 = isosim::random_state(42, 17);
  const auto r = isosim::evolve_real(layout, psi0, 0.8);
  const CVector want = dense_expv(h, psi0.amplitudes(), Complex(0, -0.8));
  EXPECT_LE((r.final_state.amplitudes() - want).norm(), 1e-8);
}

TEST(Evolve, ConservesNormAndEnergyOverThousandSteps) {
  const auto layout = compile_builtin("coupled_harmonic", {{"omega", 40}, {"kappa", 200}, {"N", 16}});
  const auto r = isosim::evolve_real(layout, isosim::random_state(256, 2), 10.0, {}, 50);
  const auto& e = r.trajectory.energies;
  for (std::size_t k = 0; k < e.size(); ++k) {
    EXPECT_LE(std::abs(r.trajectory.norms[k] - 1.0), 1e-8);
    EXPECT_LE(std::abs(e[k] - e[0]), 1e-8 * std::abs(e[0]));
  }
  EXPECT_EQ(r.trajectory.times.size(), 1000u / 50 + 1);
}

TEST(Evolve, TimeScalingIdentity) {
  const auto base_model = asymmetric_pair();
  const auto base = isosim::compile(base_model);
  const auto psi0 = isosim::random_state(42, 5);
  const auto ref = isosim::evolve_real(base, psi0, 1.0);
  for (double lambda : {0.5, 2.0, 10.0}) {
    const auto scaled = isosim::compile(isosim::with_scale(base_model, lambda));
    isosim::PropagatorConfig cfg;
    cfg.dt = 1e-2 / lambda;
    const auto r = isosim::evolve_real(scaled, psi0, 1.0 / lambda, cfg);
    EXPECT_LE((r.final_state.amplitudes() - ref.final_state.amplitudes()).norm(), 1e-8) << lambda;
    const CVector dense = dense_expv(isosim::dense_matrix(isosim::assemble(scaled)), psi0.amplitudes(),
                                     Complex(0, -1.0 / lambda));
    EXPECT_LE((r.final_state.amplitudes() - dense).norm(), 1e-8) << lambda;
  }
}

TEST(Evolve, DrivenMidpointRuleIsSecondOrder) {
  isosim::RawModel raw;
  raw.wires = {{"x1", 1, 1, 24}};
  raw.fields = {{"x1", "A*sin(w*t)*x1"}};
  raw.constants = {{"A", 400.0}, {"w", 30.0}};
  const auto layout = isosim::compile(isosim::validate(raw));
  const auto psi0 = isosim::random_state(24, 3);
  auto run = [&](double dt) {
    isosim::PropagatorConfig cfg;
    cfg.dt = dt;
    cfg.tol = 1e-12;
    return isosim::evolve_real(layout, psi0, 0.5, cfg).final_state.amplitudes();
  };
  const CVector a = run(0.02), b = run(0.01), c = run(0.005);
  const double order = std::log2((a - b).norm() / (b - c).norm());
  EXPECT_GE(order, 1.8);
  EXPECT_LE(order, 2.3);
}

TEST(Evolve, RejectsBadArguments) {
  const auto layout = compile_builtin("box", {{"N", 4}});
  EXPECT_THROW(isosim::evolve_real(layout, isosim::random_state(4), -1.0), isosim::ValidationError);
  EXPECT_THROW(isosim::evolve_real(layout, isosim::random_state(5), 1.0), isosim::ValidationError);
}

TEST(Relax, BoxReachesClosedFormGroundEnergy) {
  const auto layout = compile_builtin("box", {{"N", 16}});
  const auto r = isosim::relax_imaginary(layout, isosim::random_state(16), 0.05, 1e-10);
  const double dx = 1.0 / 17;
  EXPECT_NEAR(r.energies.back(), (1.0 - std::cos(kPi * dx)) / (dx * dx), 1e-8);
  for (std::size_t k = 1; k < r.energies.size(); ++k) EXPECT_LE(r.energies[k], r.energies[k - 1] + 1e-10);
}

TEST(Relax, GroundStartConvergesImmediately) {
  const auto layout = compile_builtin("box", {{"N", 16}});
  const auto s = isosim::lowest_eigenpairs(isosim::assemble(layout), 1);
  const auto r = isosim::relax_imaginary(layout, isosim::QuantumState(s.eigenvectors.col(0).cast<Complex>()), 0.05, 1e-10);
  EXPECT_EQ(r.converged_at, 0u);
}

TEST(Relax, CoupledHarmonicMatchesDenseGroundEnergy) {
  const auto layout = compile_builtin("coupled_harmonic", {{"omega", 40}, {"kappa", 200}, {"N", 12}});
  const Matrix h = isosim::dense_matrix(isosim::assemble(layout));
  Eigen::SelfAdjointEigenSolver<Matrix> oracle(h, Eigen::EigenvaluesOnly);
  const auto r = isosim::relax_imaginary(layout, isosim::random_state(144, 9), 0.05, 1e-10);
  EXPECT_NEAR(r.energies.back(), oracle.eigenvalues()[0], 1e-8);
  for (std::size_t k = 1; k < r.energies.size(); ++k) EXPECT_LE(r.energies[k], r.energies[k - 1] + 1e-10);
}

TEST(Relax, StagnationIsNumericalError) {
  const auto layout = compile_builtin("box", {{"N", 16}});
  EXPECT_THROW(isosim::relax_imaginary(layout, isosim::random_state(16), 1e-6, 1e-12, {}, 5), isosim::NumericalError);
}

TEST(Gibbs, TwoLevelByHand) {
  Matrix h(2, 2);
  h << 1.0, 0.0, 0.0, 3.0;
  const auto rho = isosim::gibbs_state(h, 2.0);
  const double z = std::exp(-0.5) + std::exp(-1.5);
  EXPECT_NEAR(rho.matrix()(0, 0).real(), std::exp(-0.5) / z, 1e-15);
  EXPECT_NEAR(rho.matrix()(1, 1).real(), std::exp(-1.5) / z, 1e-15);
  EXPECT_NEAR(std::abs(rho.matrix()(0, 1)), 0.0, 1e-15);
}

TEST(Gibbs, Limits) {
  const auto h = isosim::assemble(compile_builtin("harmonic", {{"omega", 40}, {"N", 20}}));
  const Matrix d = isosim::dense_matrix(h);
  const auto hot = isosim::gibbs_state(d, 1e6 * h.norm_estimate());
  EXPECT_LE(isosim::trace_distance(hot, isosim::DensityMatrix::maximally_mixed(20)), 1e-6);
  const auto inf = isosim::gibbs_state(d, std::numeric_limits<double>::infinity());
  EXPECT_LE(isosim::trace_distance(inf, isosim::DensityMatrix::maximally_mixed(20)), 1e-12);
  const auto s = isosim::lowest_eigenpairs(h, 1);
  const auto ground = isosim::DensityMatrix::pure(isosim::QuantumState(s.eigenvectors.col(0).cast<Complex>()));
  EXPECT_LE(isosim::trace_distance(isosim::gibbs_state(d, 1e-3), ground), 1e-9);
  EXPECT_THROW(isosim::gibbs_state(d, 0.0), isosim::ValidationError);
}

TEST(DensityMatrixType, Invariants) {
  EXPECT_NO_THROW(isosim::DensityMatrix::maximally_mixed(5));
  CMatrix bad = CMatrix::Identity(2, 2);
  EXPECT_THROW(isosim::DensityMatrix{bad}, isosim::ValidationError);
  bad = CMatrix::Identity(2, 2) * 0.5;
  bad(0, 1) = Complex(0, 0.1);
  EXPECT_THROW(isosim::DensityMatrix{bad}, isosim::ValidationError);
  CMatrix neg(2, 2);
  neg << 1.2, 0, 0, -0.2;
  EXPECT_THROW(isosim::DensityMatrix{neg}, isosim::ValidationError);
}

TEST(Lindblad, GeneratorMatchesExplicitJumpOperators) {
  const auto model = asymmetric_pair();
  isosim::RawModel small_raw = isosim::to_raw(model);
  small_raw.wires[0].sites = 3;
  small_raw.wires[1].sites = 4;
  const auto layout = isosim::compile(isosim::validate(small_raw));
  const Matrix h = isosim::dense_matrix(isosim::assemble(layout));
  const Vector c = isosim::total_position(layout);
  std::mt19937_64 rng(1);
  CMatrix a = CMatrix::Random(12, 12);
  CMatrix rho = a * a.adjoint();
  rho /= rho.trace();
  for (double temperature : {0.0, 7.0, std::numeric_limits<double>::infinity()}) {
    const isosim::BathSpec bath{temperature, 0.7};
    const isosim::LindbladGenerator gen(h, c, bath);
    const CMatrix got = gen.rhs(rho);
    const CMatrix want = brute_force_lindblad(h, c, bath, rho);
    EXPECT_LE((got - want).norm(), 1e-10 * want.norm()) << temperature;
    EXPECT_LE(std::abs(got.trace()), 1e-12);
    EXPECT_LE((got - got.adjoint()).norm(), 1e-12);
  }
}

TEST(Lindblad, ZeroTemperatureReachesGround) {
  const auto layout = isosim::compile(asymmetric_pair());
  const Matrix h = isosim::dense_matrix(isosim::assemble(layout));
  const isosim::BathSpec bath{0.0, 1.0};
  const isosim::LindbladGenerator gen(h, isosim::total_position(layout), bath);
  ASSERT_TRUE(std::all_of(gen.drains_to_ground().begin(), gen.drains_to_ground().end(), [](bool b) { return b; }));
  const double slow = gen.slowest_rate();
  ASSERT_GT(slow, 0.0);
  const auto r = isosim::lindblad_relax(layout, isosim::DensityMatrix::maximally_mixed(42), bath, 25.0 / slow,
                                        0.5 / gen.outflow().maxCoeff(), 100);
  EXPECT_GE(r.ground_population, 0.999);
  EXPECT_TRUE(r.warnings.empty());
  const auto s = isosim::lowest_eigenpairs(isosim::assemble(layout), 1);
  const CVector g = s.eigenvectors.col(0).cast<Complex>();
  EXPECT_GE((g.adjoint() * r.rho.matrix() * g)(0, 0).real(), 0.999);
  for (std::size_t k = 1; k < r.energies.size(); ++k) EXPECT_LE(r.energies[k], r.energies[k - 1] + 1e-12);
}

TEST(Lindblad, FiniteTemperatureReachesGibbs) {
  const auto layout = isosim::compile(asymmetric_pair());
  const Matrix h = isosim::dense_matrix(isosim::assemble(layout));
  for (double temperature : {40.0, 150.0}) {
    const isosim::BathSpec bath{temperature, 1.0};
    const isosim::LindbladGenerator gen(h, isosim::total_position(layout), bath);
    ASSERT_TRUE(gen.connected());
    const auto start = isosim::DensityMatrix::pure(isosim::random_state(42, 8));
    const auto r = isosim::lindblad_relax(layout, start, bath, 25.0 / gen.slowest_rate(),
                                          0.5 / gen.outflow().maxCoeff(), 1000);
    EXPECT_LE(isosim::trace_distance(r.rho, isosim::gibbs_state(h, temperature)), 1e-6) << temperature;
    EXPECT_NEAR(r.rho.matrix().trace().real(), 1.0, 1e-8);
  }
}

TEST(Lindblad, InfiniteTemperatureReachesMaximallyMixed) {
  const auto layout = compile_builtin("box", {{"N", 16}});
  const isosim::BathSpec bath{std::numeric_limits<double>::infinity(), 1.0};
  const isosim::LindbladGenerator gen(isosim::dense_matrix(isosim::assemble(layout)), isosim::total_position(layout), bath);
  const auto start = isosim::DensityMatrix::pure(isosim::random_state(16, 2));
  const auto r = isosim::lindblad_relax(layout, start, bath, 25.0 / gen.slowest_rate(), 0.5 / gen.outflow().maxCoeff());
  EXPECT_LE(isosim::trace_distance(r.rho, isosim::DensityMatrix::maximally_mixed(16)), 1e-6);
}

TEST(Lindblad, SymmetricModelWarnsAboutUnreachableStates) {
  const auto layout = compile_builtin("coupled_harmonic", {{"omega", 40}, {"kappa", 200}, {"N", 6}});
  const isosim::BathSpec bath{0.0, 1.0};
  const isosim::LindbladGenerator gen(isosim::dense_matrix(isosim::assemble(layout)), isosim::total_position(layout), bath);
  const auto safe = gen.drains_to_ground();
  EXPECT_LT(std::count(safe.begin(), safe.end(), true), 36);
  const auto r = isosim::lindblad_relax(layout, isosim::DensityMatrix::maximally_mixed(36), bath, 10.0, 0.5);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Lindblad, Guards) {
  const auto big = compile_builtin("coupled_harmonic", {{"omega", 40}, {"kappa", 200}, {"N", 12}});
  EXPECT_THROW(isosim::lindblad_relax(big, isosim::DensityMatrix::maximally_mixed(144), {0.0, 1.0}, 1.0, 0.1),
               isosim::ValidationError);
  const auto small = compile_builtin("box", {{"N", 4}});
  EXPECT_THROW(isosim::lindblad_relax(small, isosim::DensityMatrix::maximally_mixed(4), {-1.0, 1.0}, 1.0, 0.1),
               isosim::ValidationError);
  EXPECT_THROW(isosim::lindblad_relax(small, isosim::DensityMatrix::maximally_mixed(4), {0.0, 1e4}, 10.0, 5.0),
               isosim::NumericalError);
}
