#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "isosim/compiler.hpp"
#include "isosim/hamiltonian.hpp"
#include "isosim/model.hpp"

using isosim::CVector;
using isosim::Matrix;
using isosim::Vector;

namespace {

const double kPi = std::acos(-1.0);

isosim::SimulatorLayout layout_of(const isosim::ModelSpec& m) { return isosim::compile(m); }

// Full matrix from the model definition: each entry computed from the wire
// digits of its row and column, evaluating the potentials directly.
Matrix brute_force(const isosim::ModelSpec& m, double t = 0.0) {
  const std::size_t wires = m.wires.size();
  std::size_t dim = 1;
  for (const auto& w : m.wires) dim *= static_cast<std::size_t>(w.sites);
  auto digits = [&](std::size_t idx) {
    std::vector<std::size_t> d(wires);
    for (std::size_t w = wires; w-- > 0;) {
      d[w] = idx % static_cast<std::size_t>(m.wires[w].sites);
      idx /= static_cast<std::size_t>(m.wires[w].sites);
    }
    return d;
  };
  auto position = [&](std::size_t w, std::size_t k) {
    return static_cast<double>(k + 1) * m.wires[w].length / (m.wires[w].sites + 1);
  };
  Matrix h = Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < dim; ++r) {
    const auto dr = digits(r);
    isosim::expr::Bindings b(m.constants.begin(), m.constants.end());
    b["t"] = t;
    for (std::size_t w = 0; w < wires; ++w) b[m.wires[w].name] = position(w, dr[w]);
    double diag = 0.0;
    for (std::size_t w = 0; w < wires; ++w) {
      const double dx = m.wires[w].length / (m.wires[w].sites + 1);
      diag += 1.0 / (m.wires[w].mass * dx * dx);
    }
    for (const auto& p : m.pairs) diag += isosim::expr::evaluate(p.potential, b);
    for (const auto& f : m.fields) diag += isosim::expr::evaluate(f.potential, b);
    h(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r)) = m.scale * diag;
    for (std::size_t c = 0; c < dim; ++c) {
      const auto dc = digits(c);
      std::size_t differing = 0, which = 0;
      for (std::size_t w = 0; w < wires; ++w)
        if (dr[w] != dc[w]) ++differing, which = w;
      if (differing != 1) continue;
      const auto gap = static_cast<long>(dr[which]) - static_cast<long>(dc[which]);
      if (std::abs(gap) != 1) continue;
      const double dx = m.wires[which].length / (m.wires[which].sites + 1);
      h(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = -m.scale / (2.0 * m.wires[which].mass * dx * dx);
    }
  }
  return h;
}

isosim::ModelSpec random_model(std::mt19937_64& rng, std::size_t max_dim) {
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  while (true) {
    isosim::RawModel raw;
    const int m = uniform(1, 3);
    std::size_t dim = 1;
    for (int k = 1; k <= m; ++k) {
      const int n = uniform(2, m == 1 ? 40 : 9);
      dim *= static_cast<std::size_t>(n);
      raw.wires.push_back({"x" + std::to_string(k), 0.5 + 0.25 * uniform(0, 6), 0.5 + 0.5 * uniform(0, 3), n});
    }
    if (dim > max_dim) continue;
    raw.constants = {{"a", 1.0 + uniform(0, 20)}, {"b", 0.1 * uniform(1, 9)}};
    for (int k = 1; k <= m; ++k) {
      const std::string x = "x" + std::to_string(k);
      if (uniform(0, 1)) raw.fields.push_back({x, "a*(" + x + "-b)^2"});
      if (uniform(0, 2) == 0) raw.fields.push_back({x, "b*sin(3*" + x + ")"});
    }
    for (int i = 1; i <= m; ++i)
      for (int j = i + 1; j <= m; ++j)
        if (uniform(0, 1)) {
          const std::string a = "x" + std::to_string(i), c = "x" + std::to_string(j);
          raw.pairs.push_back({a, c, "a/sqrt((" + a + "-" + c + ")^2+b)"});
        }
    raw.scale = 0.5 + 0.5 * uniform(0, 4);
    return isosim::validate(raw);
  }
}

CVector random_vector(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  CVector v(static_cast<Eigen::Index>(dim));
  for (auto& x : v) x = {normal(rng), normal(rng)};
  return v;
}

}  // namespace

TEST(Basis, MixedRadixLastFastest) {
  const isosim::BasisIndexer b({3, 4, 2});
  EXPECT_EQ(b.dimension(), 24u);
  EXPECT_EQ(b.stride(0), 8u);
  EXPECT_EQ(b.stride(1), 2u);
  EXPECT_EQ(b.stride(2), 1u);
  const std::vector<std::size_t> d{2, 1, 1};
  EXPECT_EQ(b.index(d), 2u * 8 + 1u * 2 + 1u);
  std::vector<bool> seen(24, false);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t k = 0; k < 2; ++k) {
        const std::vector<std::size_t> digits{i, j, k};
        const std::size_t idx = b.index(digits);
        ASSERT_LT(idx, 24u);
        EXPECT_FALSE(seen[idx]);
        seen[idx] = true;
        EXPECT_EQ(b.digits(idx), digits);
      }
  EXPECT_THROW(b.index(std::vector<std::size_t>{3, 0, 0}), isosim::ValidationError);
  EXPECT_THROW(b.digits(24), isosim::ValidationError);
}

TEST(Assemble, BoxThreeSites) {
  const auto h = isosim::assemble(layout_of(isosim::builtin("box", {{"N", 3}})));
  Matrix expected(3, 3);
  expected << 16, -8, 0, -8, 16, -8, 0, -8, 16;
  EXPECT_EQ(isosim::dense_matrix(h), expected);
  const CVector e0 = CVector::Unit(3, 0);
  const CVector col = isosim::apply(h, e0);
  EXPECT_EQ(col, (CVector(3) << 16, -8, 0).finished());
  EXPECT_EQ(isosim::apply(h, CVector::Zero(3)), CVector::Zero(3));
}

TEST(Assemble, ScaleMultipliesEveryAmplitude) {
  const auto m = isosim::builtin("coupled_harmonic", {{"omega", 40}, {"kappa", 200}, {"N", 6}});
  const Matrix a = isosim::dense_matrix(isosim::assemble(layout_of(m)));
  const Matrix b = isosim::dense_matrix(isosim::assemble(layout_of(isosim::with_scale(m, 2.0))));
  EXPECT_EQ(b, 2.0 * a);
}

TEST(Assemble, SparsityPattern) {
  const auto h = isosim::assemble(layout_of(isosim::builtin("coupled_harmonic", {{"omega", 40}, {"kappa", 200}, {"N", 8}})));
  EXPECT_EQ(h.dimension(), 64u);
  const Matrix d = isosim::dense_matrix(h);
  for (Eigen::Index r = 0; r < d.rows(); ++r) EXPECT_LE((d.row(r).array() != 0.0).count(), 5);
  EXPECT_EQ(d, d.transpose());
}

TEST(Assemble, MatchesBruteForceMatrix) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const auto m = random_model(rng, 300);
    const Matrix oracle = brute_force(m);
    const auto h = isosim::assemble(layout_of(m));
    const Matrix dense = isosim::dense_matrix(h);
    ASSERT_EQ(dense.rows(), oracle.rows());
    EXPECT_LE((dense - oracle).cwiseAbs().maxCoeff(), 1e-12 * oracle.cwiseAbs().maxCoeff()) << trial;
  }
}

TEST(Assemble, TimeDependentFieldsSampledAtRequestedTime) {
  isosim::RawModel raw;
  raw.wires = {{"x1", 1, 1, 5}, {"x2", 1, 1, 4}};
  raw.fields = {{"x2", "3*sin(2*t)*x2"}, {"x1", "x1^2"}};
  raw.pairs = {{"x1", "x2", "x1*x2"}};
  const auto m = isosim::validate(raw);
  const auto layout = layout_of(m);
  for (double t : {0.0, 0.4, 1.3}) {
    const Matrix diff = isosim::dense_matrix(isosim::assemble(layout, t)) - brute_force(m, t);
    EXPECT_LE(diff.cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Apply, ColumnsOfDenseMatrixExactly) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto h = isosim::assemble(layout_of(random_model(rng, 400)));
    EXPECT_EQ(isosim::materialize(h), isosim::dense_matrix(h));
  }
}

TEST(Apply, HermitianInnerProducts) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto h = isosim::assemble(layout_of(random_model(rng, 2000)));
    const CVector u = random_vector(h.dimension(), rng), v = random_vector(h.dimension(), rng);
    const auto lhs = u.dot(isosim::apply(h, v));
    const auto rhs = isosim::apply(h, u).dot(v);
    EXPECT_LE(std::abs(lhs - rhs), 1e-12 * h.norm_estimate() * u.norm() * v.norm());
    EXPECT_LE(std::abs(v.dot(isosim::apply(h, v)).imag()), 1e-12 * h.norm_estimate() * v.squaredNorm());
  }
}

TEST(Apply, Linear) {
  std::mt19937_64 rng(9);
  const auto h = isosim::assemble(layout_of(random_model(rng, 500)));
  const CVector u = random_vector(h.dimension(), rng), v = random_vector(h.dimension(), rng);
  const isosim::Complex a(0.3, -1.2);
  const CVector lhs = isosim::apply(h, (a * u + v).eval());
  const CVector rhs = a * isosim::apply(h, u) + isosim::apply(h, v);
  EXPECT_LE((lhs - rhs).norm(), 1e-12 * h.norm_estimate() * (u.norm() + v.norm()));
}

TEST(Apply, DimensionMismatch) {
  const auto h = isosim::assemble(layout_of(isosim::builtin("box", {{"N", 3}})));
  EXPECT_THROW(isosim::apply(h, CVector::Zero(4)), isosim::ValidationError);
}

TEST(DenseMatrix, Guard) {
  const auto h = isosim::assemble(layout_of(isosim::builtin("coupled_harmonic", {{"omega", 40}, {"kappa", 1}, {"N", 65}})));
  EXPECT_THROW(isosim::dense_matrix(h), isosim::ValidationError);
}

TEST(Spectrum, BoxThreeSitesClosedForm) {
  const auto h = isosim::assemble(layout_of(isosim::builtin("box", {{"N", 3}})));
  const auto s = isosim::lowest_eigenpairs(h, 3);
  for (int n = 1; n <= 3; ++n) EXPECT_NEAR(s.eigenvalues[n - 1], 16.0 * (1.0 - std::cos(n * kPi / 4)), 1e-12);
  EXPECT_NEAR(s.eigenvalues[0], 4.686292, 1e-6);
  EXPECT_NEAR(s.eigenvalues[1], 16.0, 1e-12);
  EXPECT_NEAR(s.eigenvalues[2], 27.313708, 1e-6);
  EXPECT_EQ(s.method, "dense");
}

TEST(Spectrum, BoxContinuumLimit) {
  const auto h = isosim::assemble(layout_of(isosim::builtin("box", {{"N", 64}})));
  const double e = isosim::lowest_eigenpairs(h, 1).eigenvalues[0];
  const double dx = 1.0 / 65;
  EXPECT_NEAR(e, (1.0 - std::cos(kPi * dx)) / (dx * dx), 1e-10);
  EXPECT_LE(std::abs(e - kPi * kPi / 2) / (kPi * kPi / 2), 5e-4);
}

TEST(Spectrum, FullSpectrumWhenCountIsDimension) {
  const auto h = isosim::assemble(layout_of(isosim::builtin("box", {{"N", 3}})));
  for (auto method : {isosim::EigenMethod::dense, isosim::EigenMethod::lanczos}) {
    isosim::EigenOptions opts;
    opts.method = method;
    const auto s = isosim::lowest_eigenpairs(h, 3, opts);
    Eigen::SelfAdjointEigenSolver<Matrix> oracle(isosim::dense_matrix(h));
    EXPECT_LE((s.eigenvalues - oracle.eigenvalues()).cwiseAbs().maxCoeff(), 1e-10);
  }
  EXPECT_THROW(isosim::lowest_eigenpairs(h, 4), isosim::ValidationError);
  EXPECT_THROW(isosim::lowest_eigenpairs(h, 0), isosim::ValidationError);
}

TEST(Spectrum, LanczosMatchesDenseOnRandomModels) {
  std::mt19937_64 rng(21);
  isosim::EigenOptions lanczos;
  lanczos.method = isosim::EigenMethod::lanczos;
  for (int trial = 0; trial < 30; ++trial) {
    const auto h = isosim::assemble(layout_of(random_model(rng, 256)));
    const std::size_t k = std::min<std::size_t>(6, h.dimension());
    const auto s = isosim::lowest_eigenpairs(h, k, lanczos);
    Eigen::SelfAdjointEigenSolver<Matrix> oracle(isosim::dense_matrix(h));
    for (std::size_t i = 0; i < k; ++i)
      EXPECT_NEAR(s.eigenvalues[static_cast<Eigen::Index>(i)], oracle.eigenvalues()[static_cast<Eigen::Index>(i)], 1e-8)
          << "trial " << trial << " index " << i;
    EXPECT_EQ(s.method, "lanczos");
    for (Eigen::Index i = 1; i < s.eigenvalues.size(); ++i) EXPECT_GE(s.eigenvalues[i], s.eigenvalues[i - 1]);
  }
}

TEST(Spectrum, LanczosFindsDegenerateLevels) {
  // Two identical uncoupled boxes: E_{a,b} = e_a + e_b, so (1,2) and (2,1) coincide.
  const auto m = isosim::validate(isosim::RawModel{{{"x1", 1, 1, 12}, {"x2", 1, 1, 12}}, {}, {}, {}, 1.0});
  const auto h = isosim::assemble(layout_of(m));
  isosim::EigenOptions lanczos;
  lanczos.method = isosim::EigenMethod::lanczos;
  const auto s = isosim::lowest_eigenpairs(h, 6, lanczos);
  const double dx = 1.0 / 13;
  std::vector<double> expected;
  for (int a = 1; a <= 12; ++a)
    for (int b = 1; b <= 12; ++b)
      expected.push_back((2.0 - std::cos(a * kPi * dx) - std::cos(b * kPi * dx)) / (dx * dx));
  std::sort(expected.begin(), expected.end());
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(s.eigenvalues[i], expected[i], 1e-8) << i;
}

TEST(Spectrum, LargeDimensionUsesLanczos) {
  // D = 2500: two uncoupled boxes of 50 sites, closed-form levels.
  const auto m = isosim::validate(isosim::RawModel{{{"x1", 1, 1, 50}, {"x2", 2, 1, 50}}, {}, {}, {}, 1.0});
  const auto h = isosim::assemble(layout_of(m));
  const auto s = isosim::lowest_eigenpairs(h, 4);
  EXPECT_EQ(s.method, "lanczos");
  const double dx = 1.0 / 51;
  std::vector<double> expected;
  for (int a = 1; a <= 6; ++a)
    for (int b = 1; b <= 6; ++b)
      expected.push_back((1.0 - std::cos(a * kPi * dx)) / (dx * dx) + (1.0 - std::cos(b * kPi * dx)) / (2 * dx * dx));
  std::sort(expected.begin(), expected.end());
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(s.eigenvalues[i], expected[i], 1e-8 * expected[i]) << i;
  for (Eigen::Index i = 0; i < s.residuals.size(); ++i) EXPECT_LE(s.residuals[i], 1e-9 * h.norm_estimate());
}

TEST(Spectrum, ResidualsAndGroundStateSign) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 15; ++trial) {
    const auto h = isosim::assemble(layout_of(random_model(rng, 2048)));
    const auto s = isosim::lowest_eigenpairs(h, 2);
    for (Eigen::Index i = 0; i < s.residuals.size(); ++i) EXPECT_LE(s.residuals[i], 1e-9 * h.norm_estimate());
    EXPECT_GE(s.eigenvectors.col(0).minCoeff(), -1e-10);
  }
}

TEST(Spectrum, Deterministic) {
  const auto h = isosim::assemble(layout_of(isosim::builtin("double_well_chain", {{"M", 3}, {"N", 8}})));
  isosim::EigenOptions lanczos;
  lanczos.method = isosim::EigenMethod::lanczos;
  const auto a = isosim::lowest_eigenpairs(h, 3, lanczos);
  const auto b = isosim::lowest_eigenpairs(h, 3, lanczos);
  EXPECT_EQ(a.eigenvalues, b.eigenvalues);
  EXPECT_EQ(a.eigenvectors, b.eigenvectors);
}

TEST(Expectation, EigenstatesAndMixtures) {
  const auto h = isosim::assemble(layout_of(isosim::builtin("harmonic", {{"omega", 40}, {"N", 30}})));
  const auto s = isosim::lowest_eigenpairs(h, 2);
  const CVector g = s.eigenvectors.col(0).cast<isosim::Complex>();
  const CVector x = s.eigenvectors.col(1).cast<isosim::Complex>();
  EXPECT_NEAR(isosim::expectation(h, isosim::QuantumState(g)), s.eigenvalues[0], 1e-10);
  const auto mix = isosim::QuantumState::normalized(g + isosim::Complex(0, 1) * x);
  EXPECT_NEAR(isosim::expectation(h, mix), 0.5 * (s.eigenvalues[0] + s.eigenvalues[1]), 1e-10);
  Eigen::SelfAdjointEigenSolver<Matrix> all(isosim::dense_matrix(h), Eigen::EigenvaluesOnly);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const double e = isosim::expectation(h, isosim::random_state(h.dimension(), seed));
    EXPECT_GE(e, all.eigenvalues().minCoeff());
    EXPECT_LE(e, all.eigenvalues().maxCoeff());
  }
  EXPECT_THROW(isosim::QuantumState(CVector(2.0 * g)), isosim::ValidationError);
}

TEST(Positions, MomentsOfBasisState) {
  isosim::RawModel raw;
  raw.wires = {{"x1", 1, 1, 3}, {"x2", 1, 2, 4}};
  const auto layout = layout_of(isosim::validate(raw));
  CVector v = CVector::Zero(12);
  v[2 * 4 + 1] = 1.0;
  const auto m = isosim::position_moments(layout, v);
  EXPECT_DOUBLE_EQ(m.mean[0], 0.75);
  EXPECT_DOUBLE_EQ(m.mean[1], 0.8);
  EXPECT_NEAR(m.variance[0], 0.0, 1e-15);
  const Vector total = isosim::total_position(layout);
  EXPECT_DOUBLE_EQ(total[2 * 4 + 1], 0.75 + 0.8);
}
