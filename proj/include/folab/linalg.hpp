#pragma once

#include "folab/core.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>

namespace folab {

struct HermitianEigen {
  RVec values;   // ascending
  CMat vectors;  // columns
};

/// Closed-form 2x2 Hermitian eigendecomposition.
inline HermitianEigen hermitian_eig2(const CMat& h) {
  const double a = h(0, 0).real(), d = h(1, 1).real();
  const cd b = h(0, 1);
  const double mean = 0.5 * (a + d), diff = 0.5 * (a - d);
  const double r = std::hypot(diff, std::abs(b));
  HermitianEigen out;
  out.values.resize(2);
  out.values << mean - r, mean + r;
  out.vectors.resize(2, 2);
  if (r == 0.0) {
    out.vectors.setIdentity();
    return out;
  }
  // Eigenvector of mean + r, from whichever row is better conditioned.
  CVec up(2);
  if (diff >= 0.0) {
    up << diff + r, std::conj(b);
  } else {
    up << b, r - diff;
  }
  up /= up.norm();
  out.vectors(0, 1) = up(0);
  out.vectors(1, 1) = up(1);
  out.vectors(0, 0) = -std::conj(up(1));
  out.vectors(1, 0) = std::conj(up(0));
  return out;
}

inline HermitianEigen hermitian_eig(const CMat& h) {
  if (h.rows() == 2) return hermitian_eig2(h);
  Eigen::SelfAdjointEigenSolver<CMat> solver(h);
  if (solver.info() != Eigen::Success) throw Error("small Hermitian eigensolve failed");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

/// 2x2 adjugate [[a,b],[c,d]] -> [[d,-b],[-c,a]].
inline CMat adjugate(const CMat& p) {
  if (p.rows() != 2 || p.cols() != 2) throw ShapeError("adjugate is defined here for 2x2 only");
  CMat r(2, 2);
  r << p(1, 1), -p(0, 1), -p(1, 0), p(0, 0);
  return r;
}

/// Coordinates (h0, h1, h2, h3) of a 2x2 matrix in the basis {I, s1, s2, s3}.
inline Eigen::Vector4cd pauli_coordinates(const CMat& h) {
  const auto s = pauli_basis();
  Eigen::Vector4cd c;
  for (int i = 0; i < 4; ++i) c(i) = 0.5 * (h * s[i]).trace();
  return c;
}

struct DenseEigen {
  Eigen::VectorXd values;     // ascending
  Eigen::MatrixXcd vectors;   // columns; empty unless requested
};

/// Dense Hermitian eigenpairs through LAPACK zheevd.
inline DenseEigen dense_hermitian_eig(Eigen::MatrixXcd a, bool vectors) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  DenseEigen out;
  out.values.resize(n);
  if (n == 0) return out;
  lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'U', n,
                                   reinterpret_cast<lapack_complex_double*>(a.data()), n, out.values.data());
  if (info != 0) throw Error("zheevd failed with info " + std::to_string(info));
  if (vectors) out.vectors = std::move(a);
  return out;
}

/// Generalized pairs A x = lambda B x (B Hermitian positive definite), with
/// x normalized by x^* B x = 1.
inline DenseEigen dense_generalized_eig(Eigen::MatrixXcd a, Eigen::MatrixXcd b, bool vectors) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  DenseEigen out;
  out.values.resize(n);
  if (n == 0) return out;
  lapack_int info = LAPACKE_zhegvd(LAPACK_COL_MAJOR, 1, vectors ? 'V' : 'N', 'U', n,
                                   reinterpret_cast<lapack_complex_double*>(a.data()), n,
                                   reinterpret_cast<lapack_complex_double*>(b.data()), n, out.values.data());
  if (info != 0) throw Error("zhegvd failed with info " + std::to_string(info));
  if (vectors) out.vectors = std::move(a);
  return out;
}

/// Dense Hermitian eigenvalues (ascending) through LAPACK zheevd.
inline Eigen::VectorXd dense_hermitian_eigenvalues(Eigen::MatrixXcd a) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  Eigen::VectorXd w(n);
  if (n == 0) return w;
  lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'N', 'U', n,
                                   reinterpret_cast<lapack_complex_double*>(a.data()), n, w.data());
  if (info != 0) throw Error("zheevd failed with info " + std::to_string(info));
  return w;
}

/// Generalized problem A x = lambda B x with B Hermitian positive definite.
inline Eigen::VectorXd dense_generalized_eigenvalues(Eigen::MatrixXcd a, Eigen::MatrixXcd b) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  Eigen::VectorXd w(n);
  if (n == 0) return w;
  lapack_int info = LAPACKE_zhegvd(LAPACK_COL_MAJOR, 1, 'N', 'U', n,
                                   reinterpret_cast<lapack_complex_double*>(a.data()), n,
                                   reinterpret_cast<lapack_complex_double*>(b.data()), n, w.data());
  if (info != 0) throw Error("zhegvd failed with info " + std::to_string(info));
  return w;
}

}  // namespace folab
