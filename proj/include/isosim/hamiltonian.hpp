#pragma once

// Lattice Hamiltonian on the product space of all wire grids.
//
// Basis ordering is mixed-radix row-major with the last wire fastest: the
// configuration (d_1, ..., d_M) has index sum_w d_w * stride_w where
// stride_M = 1 and stride_w = stride_{w+1} * N_{w+1}.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "isosim/compiler.hpp"
#include "isosim/error.hpp"
#include "isosim/state.hpp"

namespace isosim {

inline constexpr std::string_view kBasisConvention = "mixed-radix-row-major-last-fastest";
inline constexpr std::size_t kDenseEigenThreshold = 2048;
inline constexpr std::size_t kDenseMatrixLimit = 4096;
inline constexpr std::size_t kMaxDimension = std::size_t{1} << 28;

class BasisIndexer {
 public:
  explicit BasisIndexer(std::vector<std::size_t> radices) : radices_(std::move(radices)), strides_(radices_.size()) {
    if (radices_.empty()) throw ValidationError("basis needs at least one wire");
    dimension_ = 1;
    for (std::size_t w = radices_.size(); w-- > 0;) {
      if (radices_[w] == 0) throw ValidationError("basis radix must be positive");
      strides_[w] = dimension_;
      if (dimension_ > kMaxDimension / radices_[w])
        throw ValidationError("product space dimension exceeds " + std::to_string(kMaxDimension));
      dimension_ *= radices_[w];
    }
  }

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t wires() const noexcept { return radices_.size(); }
  const std::vector<std::size_t>& radices() const noexcept { return radices_; }
  std::size_t stride(std::size_t wire) const { return strides_[wire]; }

  std::size_t index(std::span<const std::size_t> digits) const {
    if (digits.size() != radices_.size()) throw ValidationError("digit count does not match wire count");
    std::size_t idx = 0;
    for (std::size_t w = 0; w < digits.size(); ++w) {
      if (digits[w] >= radices_[w]) throw ValidationError("digit out of range");
      idx += digits[w] * strides_[w];
    }
    return idx;
  }

  std::vector<std::size_t> digits(std::size_t index) const {
    if (index >= dimension_) throw ValidationError("basis index out of range");
    std::vector<std::size_t> out(radices_.size());
    for (std::size_t w = 0; w < radices_.size(); ++w) out[w] = (index / strides_[w]) % radices_[w];
    return out;
  }

  std::size_t digit(std::size_t index, std::size_t wire) const { return (index / strides_[wire]) % radices_[wire]; }

 private:
  std::vector<std::size_t> radices_;
  std::vector<std::size_t> strides_;
  std::size_t dimension_ = 0;
};

inline BasisIndexer basis_of(const SimulatorLayout& layout) {
  std::vector<std::size_t> radices;
  for (const auto& w : layout.wires) radices.push_back(static_cast<std::size_t>(w.sites));
  return BasisIndexer(std::move(radices));
}

/// Anything the Krylov and Lanczos routines can act on: a Hermitian linear map
/// with a cheap upper bound on its spectral norm.
template <class Op>
concept HermitianOperator = requires(const Op& op, const Vector& x, Vector& y, const CVector& cx, CVector& cy) {
  { op.dimension() } -> std::convertible_to<std::size_t>;
  { op.norm_estimate() } -> std::convertible_to<double>;
  op.apply(x, y);
  op.apply(cx, cy);
};

/// Diagonal potential plus nearest-neighbor hopping along each wire. Every
/// stored amplitude already includes the scale factor.
class SparseHamiltonian {
 public:
  struct Hop {
    std::size_t stride;
    std::size_t radix;
    double amplitude;
  };

  SparseHamiltonian(BasisIndexer basis, Vector diagonal, std::vector<Hop> hops, double scale, double time)
      : basis_(std::move(basis)), diagonal_(std::move(diagonal)), hops_(std::move(hops)), scale_(scale), time_(time) {
    double off = 0.0;
    for (const auto& h : hops_) off += 2.0 * std::abs(h.amplitude);
    norm_estimate_ = (diagonal_.size() ? diagonal_.cwiseAbs().maxCoeff() : 0.0) + off;
  }

  std::size_t dimension() const noexcept { return basis_.dimension(); }
  const BasisIndexer& basis() const noexcept { return basis_; }
  const Vector& diagonal() const noexcept { return diagonal_; }
  const std::vector<Hop>& hops() const noexcept { return hops_; }
  double scale() const noexcept { return scale_; }
  double time() const noexcept { return time_; }

  /// Gershgorin bound on the spectral radius.
  double norm_estimate() const noexcept { return norm_estimate_; }

  template <typename Scalar>
  void apply(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& in, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& out) const {
    const auto d = static_cast<Eigen::Index>(dimension());
    if (in.size() != d) throw ValidationError("vector dimension does not match operator");
    out.resize(d);
    out = diagonal_.template cast<Scalar>().cwiseProduct(in);
    const Scalar* x = in.data();
    Scalar* y = out.data();
    const std::size_t dim = dimension();
    for (const auto& h : hops_) {
      const std::size_t block = h.stride * h.radix;
      const double a = h.amplitude;
      for (std::size_t base = 0; base < dim; base += block) {
        for (std::size_t digit = 0; digit + 1 < h.radix; ++digit) {
          const std::size_t lo = base + digit * h.stride;
          for (std::size_t i = 0; i < h.stride; ++i) {
            const std::size_t c = lo + i;
            y[c] += a * x[c + h.stride];
            y[c + h.stride] += a * x[c];
          }
        }
      }
    }
  }

 private:
  BasisIndexer basis_;
  Vector diagonal_;
  std::vector<Hop> hops_;
  double scale_;
  double time_;
  double norm_estimate_ = 0.0;
};

/// Time-parameterized family H(t) for one layout. The kinetic, pair and
/// static-field parts are summed once; driven fields are added per call.
class HamiltonianFamily {
 public:
  explicit HamiltonianFamily(const SimulatorLayout& layout) : layout_(&layout), basis_(basis_of(layout)) {
    const std::size_t dim = basis_.dimension();
    static_diagonal_ = Vector::Zero(static_cast<Eigen::Index>(dim));
    for (std::size_t w = 0; w < layout.wires.size(); ++w) {
      static_diagonal_.array() += layout.stencils[w].onsite;
      hops_.push_back({basis_.stride(w), basis_.radices()[w], layout.scale * layout.stencils[w].hop});
    }
    for (const auto& table : layout.couplings) add_pair(table);
    for (const auto& f : layout.fields)
      if (!f.time_dependent) add_field(static_diagonal_, f, 0.0);
  }

  const BasisIndexer& basis() const noexcept { return basis_; }
  bool time_dependent() const { return layout_->time_dependent(); }

  SparseHamiltonian at(double t) const {
    Vector diag = static_diagonal_;
    for (const auto& f : layout_->fields)
      if (f.time_dependent) add_field(diag, f, t);
    diag *= layout_->scale;
    for (Eigen::Index c = 0; c < diag.size(); ++c)
      if (!std::isfinite(diag[c])) throw EvaluationError("non-finite diagonal entry at basis index " + std::to_string(c));
    return SparseHamiltonian(basis_, std::move(diag), hops_, layout_->scale, t);
  }

 private:
  void add_field(Vector& diag, const FieldTable& f, double t) const {
    const std::size_t w = layout_->wire_index(f.field.wire);
    const std::vector<double> values = f.sample(t);
    const std::size_t stride = basis_.stride(w), radix = basis_.radices()[w];
    const std::size_t block = stride * radix;
    for (std::size_t base = 0; base < basis_.dimension(); base += block)
      for (std::size_t d = 0; d < radix; ++d)
        for (std::size_t i = 0; i < stride; ++i) diag[static_cast<Eigen::Index>(base + d * stride + i)] += values[d];
  }

  void add_pair(const CouplingTable& table) {
    const std::size_t wi = layout_->wire_index(table.wire_i);
    const std::size_t wj = layout_->wire_index(table.wire_j);
    for (std::size_t c = 0; c < basis_.dimension(); ++c)
      static_diagonal_[static_cast<Eigen::Index>(c)] += table(basis_.digit(c, wi), basis_.digit(c, wj));
  }

  const SimulatorLayout* layout_;
  BasisIndexer basis_;
  Vector static_diagonal_;
  std::vector<SparseHamiltonian::Hop> hops_;
};

/// H(t) = scale * (kinetic + sum of pair tables + sum of fields sampled at t).
inline SparseHamiltonian assemble(const SimulatorLayout& layout, double t = 0.0) {
  if (!std::isfinite(t)) throw ValidationError("assembly time must be finite");
  return HamiltonianFamily(layout).at(t);
}

template <HermitianOperator Op>
CVector apply(const Op& op, const CVector& v) {
  CVector out;
  op.apply(v, out);
  return out;
}

inline Matrix dense_matrix(const SparseHamiltonian& h) {
  const std::size_t dim = h.dimension();
  if (dim > kDenseMatrixLimit)
    throw ValidationError("dense matrix requested for dimension " + std::to_string(dim) + " > " +
                          std::to_string(kDenseMatrixLimit));
  Matrix m = h.diagonal().asDiagonal();
  for (const auto& hop : h.hops()) {
    for (std::size_t c = 0; c < dim; ++c) {
      if ((c / hop.stride) % hop.radix + 1 >= hop.radix) continue;
      const auto a = static_cast<Eigen::Index>(c);
      const auto b = static_cast<Eigen::Index>(c + hop.stride);
      m(a, b) = hop.amplitude;
      m(b, a) = hop.amplitude;
    }
  }
  return m;
}

/// Column-by-column materialization for any operator.
template <HermitianOperator Op>
Matrix materialize(const Op& op) {
  const std::size_t dim = op.dimension();
  if (dim > kDenseMatrixLimit) throw ValidationError("dense matrix requested for dimension " + std::to_string(dim));
  const auto d = static_cast<Eigen::Index>(dim);
  Matrix m(d, d);
  Vector e = Vector::Zero(d), col;
  for (Eigen::Index j = 0; j < d; ++j) {
    e[j] = 1.0;
    op.apply(e, col);
    m.col(j) = col;
    e[j] = 0.0;
  }
  return m;
}

/// Dense symmetric matrix viewed as an operator, for oracles and small models.
class DenseOperator {
 public:
  explicit DenseOperator(Matrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) throw ValidationError("dense operator must be square");
    norm_estimate_ = m_.cwiseAbs().rowwise().sum().maxCoeff();
  }

  std::size_t dimension() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  double norm_estimate() const noexcept { return norm_estimate_; }
  const Matrix& matrix() const noexcept { return m_; }

  template <typename Scalar>
  void apply(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& in, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& out) const {
    if (in.size() != m_.rows()) throw ValidationError("vector dimension does not match operator");
    out = m_.template cast<Scalar>() * in;
  }

 private:
  Matrix m_;
  double norm_estimate_;
};

/// <psi|H|psi>; the state must be normalized.
template <HermitianOperator Op>
double expectation(const Op& op, const QuantumState& psi) {
  if (std::abs(psi.norm() - 1.0) > kNormTolerance) throw ValidationError("expectation needs a normalized state");
  CVector hpsi;
  op.apply(psi.amplitudes(), hpsi);
  return psi.amplitudes().dot(hpsi).real();
}

enum class EigenMethod { automatic, dense, lanczos };

struct EigenOptions {
  double tol = 1e-9;             // residual target relative to the norm estimate
  std::size_t max_iter = 1000;   // Krylov dimension cap per Lanczos run
  std::uint64_t seed = kDefaultSeed;
  EigenMethod method = EigenMethod::automatic;
};

struct SpectrumResult {
  Vector eigenvalues;   // ascending
  Matrix eigenvectors;  // one unit column per eigenvalue
  Vector residuals;     // ||H v - E v||
  std::string method;
};

namespace detail {

/// Sign convention: the largest-magnitude component of each vector is positive.
inline void fix_signs(Matrix& vectors) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    Eigen::Index arg = 0;
    vectors.col(j).cwiseAbs().maxCoeff(&arg);
    if (vectors(arg, j) < 0.0) vectors.col(j) *= -1.0;
  }
}

template <HermitianOperator Op>
Vector residual_norms(const Op& op, const Vector& values, const Matrix& vectors) {
  Vector out(values.size());
  Vector hv;
  for (Eigen::Index j = 0; j < values.size(); ++j) {
    Vector v = vectors.col(j);
    op.apply(v, hv);
    out[j] = (hv - values[j] * v).norm();
  }
  return out;
}

inline void orthogonalize(Vector& w, const std::vector<Vector>& a, const std::vector<Vector>& b) {
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& q : a) w -= q.dot(w) * q;
    for (const auto& q : b) w -= q.dot(w) * q;
  }
}

struct LanczosRun {
  Vector values;
  Matrix vectors;
  bool converged = false;
  double worst_residual = 0.0;
};

/// One Lanczos pass with full reorthogonalization, restricted to the
/// orthogonal complement of `locked`.
template <HermitianOperator Op>
LanczosRun lanczos_run(const Op& op, std::size_t wanted, const std::vector<Vector>& locked, const EigenOptions& opts,
                       std::mt19937_64& rng) {
  const std::size_t dim = op.dimension();
  const auto d = static_cast<Eigen::Index>(dim);
  const std::size_t free_dim = dim - locked.size();
  wanted = std::min(wanted, free_dim);
  const std::size_t cap = std::min(free_dim, std::max(opts.max_iter, wanted));
  const double scale = std::max(op.norm_estimate(), std::numeric_limits<double>::min());
  const double target = opts.tol * scale;
  const double breakdown = 1e-12 * scale;

  std::normal_distribution<double> normal;
  auto fresh = [&](const std::vector<Vector>& basis) -> std::optional<Vector> {
    for (int attempt = 0; attempt < 4; ++attempt) {
      Vector q(d);
      for (Eigen::Index i = 0; i < d; ++i) q[i] = normal(rng);
      orthogonalize(q, locked, basis);
      const double n = q.norm();
      if (n > 1e-8) return Vector(q / n);
    }
    return std::nullopt;
  };

  LanczosRun run;
  std::vector<Vector> basis;
  std::vector<double> alpha, beta;
  auto start = fresh(basis);
  if (!start) return run;
  Vector q = *start, w;

  while (true) {
    basis.push_back(q);
    op.apply(basis.back(), w);
    const double a = basis.back().dot(w);
    w -= a * basis.back();
    if (basis.size() > 1) w -= beta.back() * basis[basis.size() - 2];
    orthogonalize(w, locked, basis);
    const double b = w.norm();
    alpha.push_back(a);
    const std::size_t m = basis.size();

    // An invariant subspace was found: continue from a new direction unless
    // the whole complement is spanned.
    const bool broke_down = b <= breakdown;
    std::optional<Vector> restart;
    if (broke_down && m < free_dim) restart = fresh(basis);
    const bool exhausted = broke_down && !restart;

    if (exhausted || (m >= wanted && !broke_down && (m % 5 == 0 || m == cap)) || m == cap) {
      Vector diag = Eigen::Map<const Vector>(alpha.data(), static_cast<Eigen::Index>(m));
      Vector sub = Eigen::Map<const Vector>(beta.data(), static_cast<Eigen::Index>(m - 1));
      Eigen::SelfAdjointEigenSolver<Matrix> tri;
      tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
      const auto last = static_cast<Eigen::Index>(m - 1);
      double worst = 0.0;
      if (!broke_down)
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(wanted); ++i)
          worst = std::max(worst, b * std::abs(tri.eigenvectors()(last, i)));
      run.worst_residual = worst;
      if (worst <= target || exhausted || m == cap) {
        run.converged = worst <= target || exhausted;
        const auto k = static_cast<Eigen::Index>(wanted);
        run.values = tri.eigenvalues().head(k);
        run.vectors = Matrix::Zero(d, k);
        for (std::size_t j = 0; j < m; ++j)
          run.vectors += basis[j] * tri.eigenvectors().row(static_cast<Eigen::Index>(j)).head(k);
        for (Eigen::Index j = 0; j < k; ++j) run.vectors.col(j).normalize();
        return run;
      }
    }
    if (broke_down) {
      beta.push_back(0.0);
      q = *restart;
    } else {
      beta.push_back(b);
      q = w / b;
    }
  }
}

}  // namespace detail

/// The `count` lowest eigenpairs. Dense symmetric eigendecomposition for
/// dimensions up to 2048, otherwise Lanczos with full reorthogonalization.
/// Lanczos runs are repeated on the complement of the pairs found so far
/// until no eigenvalue below the current count-th one appears, so degenerate
/// levels are not missed.
template <HermitianOperator Op>
SpectrumResult lowest_eigenpairs(const Op& op, std::size_t count, const EigenOptions& opts = {}) {
  const std::size_t dim = op.dimension();
  if (count < 1 || count > dim)
    throw ValidationError("requested " + std::to_string(count) + " eigenpairs of a dimension-" + std::to_string(dim) +
                          " operator");
  const bool dense = opts.method == EigenMethod::dense ||
                     (opts.method == EigenMethod::automatic && dim <= kDenseEigenThreshold);
  SpectrumResult result;
  const auto k = static_cast<Eigen::Index>(count);
  if (dense) {
    Matrix m;
    if constexpr (std::same_as<Op, SparseHamiltonian>) {
      m = dense_matrix(op);
    } else {
      m = materialize(op);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
    if (solver.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");
    result.eigenvalues = solver.eigenvalues().head(k);
    result.eigenvectors = solver.eigenvectors().leftCols(k);
    result.method = "dense";
  } else {
    std::mt19937_64 rng(opts.seed);
    std::vector<double> values;
    std::vector<Vector> vectors;
    for (std::size_t round = 0;; ++round) {
      const std::size_t wanted = round == 0 ? count : 1;
      if (vectors.size() >= dim) break;
      detail::LanczosRun run = detail::lanczos_run(op, wanted, vectors, opts, rng);
      if (!run.converged)
        throw NumericalError("Lanczos did not converge within " + std::to_string(opts.max_iter) + " iterations",
                             run.worst_residual);
      if (run.values.size() == 0) break;
      std::vector<double> sorted = values;
      std::sort(sorted.begin(), sorted.end());
      const double kth = sorted.size() >= count ? sorted[count - 1] : std::numeric_limits<double>::infinity();
      if (round > 0 && run.values[0] >= kth - opts.tol * op.norm_estimate()) break;
      for (Eigen::Index j = 0; j < run.values.size(); ++j) {
        values.push_back(run.values[j]);
        vectors.push_back(run.vectors.col(j));
      }
    }
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    result.eigenvalues.resize(k);
    result.eigenvectors.resize(static_cast<Eigen::Index>(dim), k);
    for (Eigen::Index j = 0; j < k; ++j) {
      result.eigenvalues[j] = values[order[static_cast<std::size_t>(j)]];
      result.eigenvectors.col(j) = vectors[order[static_cast<std::size_t>(j)]];
    }
    result.method = "lanczos";
  }
  detail::fix_signs(result.eigenvectors);
  result.residuals = detail::residual_norms(op, result.eigenvalues, result.eigenvectors);
  return result;
}

/// Expected position and variance of each wire coordinate.
struct PositionMoments {
  std::vector<double> mean;
  std::vector<double> variance;
};

inline PositionMoments position_moments(const SimulatorLayout& layout, const CVector& amplitudes) {
  const BasisIndexer basis = basis_of(layout);
  PositionMoments out{std::vector<double>(layout.wires.size(), 0.0), std::vector<double>(layout.wires.size(), 0.0)};
  std::vector<double> second(layout.wires.size(), 0.0);
  for (std::size_t c = 0; c < basis.dimension(); ++c) {
    const double p = std::norm(amplitudes[static_cast<Eigen::Index>(c)]);
    for (std::size_t w = 0; w < layout.wires.size(); ++w) {
      const double x = layout.grids[w].positions[basis.digit(c, w)];
      out.mean[w] += p * x;
      second[w] += p * x * x;
    }
  }
  for (std::size_t w = 0; w < layout.wires.size(); ++w)
    out.variance[w] = std::max(0.0, second[w] - out.mean[w] * out.mean[w]);
  return out;
}

/// Diagonal of sum_w X_w in the product basis.
inline Vector total_position(const SimulatorLayout& layout) {
  const BasisIndexer basis = basis_of(layout);
  Vector c = Vector::Zero(static_cast<Eigen::Index>(basis.dimension()));
  for (std::size_t i = 0; i < basis.dimension(); ++i)
    for (std::size_t w = 0; w < layout.wires.size(); ++w)
      c[static_cast<Eigen::Index>(i)] += layout.grids[w].positions[basis.digit(i, w)];
  return c;
}

}  // namespace isosim
