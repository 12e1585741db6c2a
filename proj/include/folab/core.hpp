#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace folab {

using cd = std::complex<double>;

/// Small dense complex matrix. Every matrix in the symbol calculus is at
/// most 8x8, so storage lives on the stack.
using CMat = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, 0, 8, 8>;
using CVec = Eigen::Matrix<cd, Eigen::Dynamic, 1, 0, 8, 1>;
using RVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 8, 1>;
using RMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 8, 8>;

inline constexpr int kMaxDim = 4;
inline constexpr int kMaxSize = 8;
inline constexpr double kPi = std::numbers::pi;
inline constexpr cd kI{0.0, 1.0};

/// A point on T^n (or a momentum in R^n); only the first n entries matter.
using Point = std::vector<double>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape, dimension or index mismatches between arguments.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented precondition (non-Hermitian data, non-positive
/// weight, wrong dimension for a 2x2-only construction, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Two eigenvalues of the principal symbol closer than the gap tolerance.
class DegenerateBranchError : public Error {
 public:
  using Error::Error;
};

/// A computed quantity failed its internal consistency tolerance.
class ToleranceError : public Error {
 public:
  using Error::Error;
};

/// Requested work exceeds the configured resource cap.
class ResourceError : public Error {
 public:
  using Error::Error;
};

inline CMat identity(int m) { return CMat::Identity(m, m); }

inline std::array<CMat, 4> pauli_basis() {
  CMat s0 = CMat::Identity(2, 2);
  CMat s1(2, 2), s2(2, 2), s3(2, 2);
  s1 << 0, 1, 1, 0;
  s2 << 0, -kI, kI, 0;
  s3 << 1, 0, 0, -1;
  return {s0, s1, s2, s3};
}

/// Operator 2-norm of a small matrix.
inline double op_norm(const CMat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMat> svd(a);
  return svd.singularValues()(0);
}

}  // namespace folab
