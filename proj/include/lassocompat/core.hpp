#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace lassocompat {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Sorted, duplicate-free list of 0-based column indices.
using IndexSet = std::vector<int>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A design family parameter set violates one of its constraints.
class AdmissibilityError : public Error {
public:
  using Error::Error;
};

class RankError : public Error {
public:
  using Error::Error;
};

class NonConvergence : public Error {
public:
  NonConvergence(long iterations, double residual)
      : Error("coordinate descent did not converge after " +
              std::to_string(iterations) + " sweeps (KKT residual " +
              std::to_string(residual) + ")"),
        iterations_(iterations), residual_(residual) {}

  long iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

private:
  long iterations_;
  double residual_;
};

class DegenerateDiagonal : public Error {
public:
  explicit DegenerateDiagonal(int column)
      : Error("Gram diagonal entry " + std::to_string(column + 1) + " is zero"),
        column_(column) {}
  int column() const noexcept { return column_; }

private:
  int column_;
};

class SetTooLarge : public Error {
public:
  SetTooLarge(std::size_t size, std::size_t limit)
      : Error("index set of size " + std::to_string(size) +
              " exceeds the enumeration limit " + std::to_string(limit)) {}
};

class UnsupportedFamily : public Error {
public:
  using Error::Error;
};

class MissingSigma0 : public Error {
public:
  MissingSigma0() : Error("the Sigma0 variant needs an approximating Gram matrix") {}
};

/// Noise-level or tuning-parameter precondition of the noisy-case bounds fails.
class PreconditionError : public Error {
public:
  using Error::Error;
};

class ParseError : public Error {
public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Small helpers shared by the modules

inline IndexSet normalize_set(IndexSet s) {
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

inline IndexSet complement(const IndexSet& s, int p) {
  IndexSet out;
  std::size_t k = 0;
  for (int j = 0; j < p; ++j) {
    if (k < s.size() && s[k] == j) {
      ++k;
    } else {
      out.push_back(j);
    }
  }
  return out;
}

inline IndexSet support(const Vector& v) {
  IndexSet s;
  for (int j = 0; j < v.size(); ++j)
    if (v[j] != 0.0) s.push_back(j);
  return s;
}

inline double l1_norm_on(const Vector& v, const IndexSet& s) {
  double acc = 0.0;
  for (int j : s) acc += std::abs(v[j]);
  return acc;
}

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

inline double soft_threshold(double u, double t) {
  if (u > t) return u - t;
  if (u < -t) return u + t;
  return 0.0;
}

/// 1-based, comma separated rendering, e.g. "{1,2}".
inline std::string format_set(const IndexSet& s) {
  std::string out = "{";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i] + 1);
  }
  return out + "}";
}

} // namespace lassocompat
