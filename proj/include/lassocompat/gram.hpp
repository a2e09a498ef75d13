#pragma once

#include "lassocompat/core.hpp"

#include <Eigen/Eigenvalues>

#include <numeric>
#include <optional>
#include <utility>

namespace lassocompat {

/// Eigenvalues below this (in absolute value) are treated as round-off and
/// clipped to zero.
inline constexpr double kPsdTolerance = 1e-12;

/// Symmetric positive semidefinite p x p matrix Sigma = X^T X. All quantities
/// in the library are functions of it.
class GramMatrix {
public:
  GramMatrix() = default;

  /// Validates symmetry (|a_jk - a_kj| <= 1e-12) and PSD-ness, then stores the
  /// exactly symmetrized matrix.
  explicit GramMatrix(Matrix entries) : entries_(std::move(entries)) {
    if (entries_.rows() != entries_.cols() || entries_.rows() == 0)
      throw AdmissibilityError("Gram matrix must be square and non-empty");
    if (!entries_.allFinite())
      throw AdmissibilityError("Gram matrix has non-finite entries");
    const double asym = (entries_ - entries_.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12)
      throw AdmissibilityError("Gram matrix is not symmetric (max asymmetry " +
                               std::to_string(asym) + ")");
    entries_ = 0.5 * (entries_ + entries_.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(entries_, Eigen::EigenvaluesOnly);
    lambda_min_ = es.eigenvalues()(0);
    lambda_max_ = es.eigenvalues()(entries_.rows() - 1);
    if (lambda_min_ < -kPsdTolerance)
      throw AdmissibilityError("Gram matrix is not positive semidefinite "
                               "(smallest eigenvalue " +
                               std::to_string(lambda_min_) + ")");
    lambda_min_ = std::max(lambda_min_, 0.0);
  }

  static GramMatrix identity(int p) { return GramMatrix(Matrix::Identity(p, p)); }

  int p() const noexcept { return static_cast<int>(entries_.rows()); }
  const Matrix& matrix() const noexcept { return entries_; }
  double operator()(int j, int k) const { return entries_(j, k); }

  /// Smallest eigenvalue after clipping round-off negatives to 0.
  double lambda_min() const noexcept { return lambda_min_; }
  double lambda_max() const noexcept { return lambda_max_; }

  double quad(const Vector& v) const { return v.dot(entries_ * v); }

  bool unit_diagonal(double tol = 1e-12) const {
    return (entries_.diagonal().array() - 1.0).abs().maxCoeff() <= tol;
  }

private:
  Matrix entries_;
  double lambda_min_ = 0.0;
  double lambda_max_ = 0.0;
};

/// Realization X (n x p) of a Gram matrix.
struct DesignFactor {
  int n = 0;
  Matrix columns;

  int p() const { return static_cast<int>(columns.cols()); }
  Matrix gram() const { return columns.transpose() * columns; }
};

struct SpectralDecomposition {
  Vector eigenvalues;  // descending, clipped at 0
  Matrix eigenvectors; // column i belongs to eigenvalues(i)
};

/// Descending eigen-decomposition with a deterministic sign convention: the
/// first entry of each eigenvector with |v| > 1e-12 is positive. Ties keep the
/// solver's order (stable sort).
inline SpectralDecomposition spectral_decomposition(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  const int p = static_cast<int>(sym.rows());
  std::vector<int> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return es.eigenvalues()(a) > es.eigenvalues()(b);
  });
  SpectralDecomposition out{Vector(p), Matrix(p, p)};
  for (int i = 0; i < p; ++i) {
    out.eigenvalues(i) = std::max(es.eigenvalues()(order[i]), 0.0);
    Vector v = es.eigenvectors().col(order[i]);
    for (int k = 0; k < p; ++k) {
      if (std::abs(v(k)) > 1e-12) {
        if (v(k) < 0) v = -v;
        break;
      }
    }
    out.eigenvectors.col(i) = v;
  }
  return out;
}

/// Numerical rank: eigenvalues above 1e-11 * max(1, Lambda_max).
inline int numerical_rank(const GramMatrix& gram) {
  const Vector ev = spectral_decomposition(gram.matrix()).eigenvalues;
  const double cut = 1e-11 * std::max(1.0, ev.size() ? ev(0) : 0.0);
  int r = 0;
  for (int i = 0; i < ev.size(); ++i)
    if (ev(i) > cut) ++r;
  return r;
}

/// Produces X with X^T X = Sigma via the symmetric PSD square root restricted
/// to the numerical range. Rows beyond the rank are zero.
inline DesignFactor factorize(const GramMatrix& gram, std::optional<int> n = std::nullopt) {
  const SpectralDecomposition sd = spectral_decomposition(gram.matrix());
  const double cut = 1e-11 * std::max(1.0, sd.eigenvalues.size() ? sd.eigenvalues(0) : 0.0);
  int rank = 0;
  for (int i = 0; i < sd.eigenvalues.size(); ++i)
    if (sd.eigenvalues(i) > cut) ++rank;
  const int rows = n.value_or(rank);
  if (rows < rank)
    throw RankError("requested n = " + std::to_string(rows) +
                    " is smaller than rank(Sigma) = " + std::to_string(rank));
  if (rows <= 0) throw RankError("design must have at least one row");

  DesignFactor f;
  f.n = rows;
  f.columns = Matrix::Zero(rows, gram.p());
  for (int i = 0; i < rank; ++i)
    f.columns.row(i) = std::sqrt(sd.eigenvalues(i)) * sd.eigenvectors.col(i).transpose();
  return f;
}

struct FairnessVerdict {
  bool normalized = true;
  bool no_aligned_columns = true;
  std::optional<int> unnormalized_column;
  std::optional<std::pair<int, int>> aligned_pair;

  bool fair() const { return normalized && no_aligned_columns; }
};

/// Normalized columns (Sigma_jj = 1) and no pair with X_j = b X_k, i.e. no
/// equality in Cauchy-Schwarz. Reports the first offender of each kind.
inline FairnessVerdict check_fair(const GramMatrix& gram, double tol = 1e-12) {
  FairnessVerdict v;
  const Matrix& s = gram.matrix();
  for (int j = 0; j < gram.p(); ++j) {
    if (std::abs(s(j, j) - 1.0) > tol) {
      v.normalized = false;
      v.unnormalized_column = j;
      break;
    }
  }
  for (int j = 0; j < gram.p() && v.no_aligned_columns; ++j) {
    for (int k = j + 1; k < gram.p(); ++k) {
      const double bound = std::sqrt(std::max(s(j, j), 0.0) * std::max(s(k, k), 0.0));
      if (std::abs(s(j, k)) >= bound * (1.0 - tol)) {
        v.no_aligned_columns = false;
        v.aligned_pair = std::make_pair(j, k);
        break;
      }
    }
  }
  return v;
}

} // namespace lassocompat
