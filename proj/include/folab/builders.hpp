#pragma once

// Operators and gauge fields used by the tests, the CLI builtins and the
// acceptance runs. Random constructions take an explicit engine so that every
// draw is reproducible from a seed.

#include "folab/operator.hpp"

#include <random>

namespace folab {

using Rng = std::mt19937_64;

/// Constant Hermitian coefficients of the flat operators: (s1, s2) in 2D,
/// (s1, s2, s3) in 3D and (s1, s2, s3, I) in 4D.
inline std::vector<CMat> flat_dirac_matrices(int n) {
  const auto s = pauli_basis();
  switch (n) {
    case 2: return {s[1], s[2]};
    case 3: return {s[1], s[2], s[3]};
    case 4: return {s[1], s[2], s[3], s[0]};
  }
  throw PreconditionError("flat Dirac-type operators exist for n in {2, 3, 4}");
}

inline OperatorData constant_operator(const std::vector<CMat>& S, const CMat& Lsub,
                                      std::optional<Series> weight = std::nullopt) {
  const int n = static_cast<int>(S.size());
  std::vector<Series> ss;
  for (const auto& s : S) ss.push_back(Series::constant(n, s, true));
  return build_operator(std::move(ss), Series::constant(n, Lsub, true), std::move(weight));
}

inline OperatorData flat_dirac(int n, const CMat& Lsub) { return constant_operator(flat_dirac_matrices(n), Lsub); }

inline OperatorData flat_dirac(int n, double c = 0.0) { return flat_dirac(n, c * identity(2)); }

/// Same operator with L_sub replaced by L_sub + extra.
inline OperatorData with_added_subprincipal(const OperatorData& op, const Series& extra) {
  Series l = op.Lsub() + extra;
  l.mark_hermitian();
  return build_operator(op.S(), l, op.weight());
}

inline OperatorData with_weight(const OperatorData& op, const Series& s) {
  return build_operator(op.S(), op.Lsub(), s);
}

inline double uniform(Rng& rng, double lo = -1.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gaussian(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

inline CMat random_matrix(Rng& rng, int rows, int cols) {
  CMat a(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) a(i, j) = cd(gaussian(rng), gaussian(rng));
  return a;
}

inline CMat random_hermitian(Rng& rng, int m) {
  CMat a = random_matrix(rng, m, m);
  return 0.5 * (a + a.adjoint());
}

inline Point random_point(Rng& rng, int n) {
  Point x(n);
  for (auto& c : x) c = uniform(rng, 0.0, 2.0 * kPi);
  return x;
}

inline Point random_direction(Rng& rng, int n) {
  Point p(n);
  double norm = 0.0;
  while (norm < 1e-3) {
    norm = 0.0;
    for (auto& c : p) {
      c = gaussian(rng);
      norm += c * c;
    }
    norm = std::sqrt(norm);
  }
  for (auto& c : p) c /= norm;
  return p;
}

/// Random frequency with entries in [-degree, degree], not all zero.
inline Freq random_frequency(Rng& rng, int n, int degree) {
  Freq k{};
  std::uniform_int_distribution<int> d(-degree, degree);
  do {
    for (int a = 0; a < n; ++a) k[a] = d(rng);
  } while (std::all_of(k.begin(), k.begin() + n, [](int v) { return v == 0; }));
  return k;
}

/// Hermitian-valued series with `terms` random nonconstant modes (and their
/// mirrors) of size `amp`, plus a random constant part of size `amp0`.
inline Series random_hermitian_series(Rng& rng, int n, int m, int degree, int terms, double amp,
                                      double amp0 = 0.0) {
  Series::TermMap t;
  if (amp0 != 0.0) t[Freq{}] = amp0 * random_hermitian(rng, m);
  for (int i = 0; i < terms; ++i) {
    const Freq k = random_frequency(rng, n, degree);
    const CMat c = amp * random_matrix(rng, m, m) / std::sqrt(2.0 * m);
    t[k] = (t.count(k) ? t[k] : CMat::Zero(m, m)) + c;
    const Freq mk = Series::negate(k);
    t[mk] = (t.count(mk) ? t[mk] : CMat::Zero(m, m)) + c.adjoint();
  }
  return Series::from_terms(n, m, m, std::move(t), true);
}

/// Real scalar trigonometric polynomial with random modes.
inline Series random_real_scalar(Rng& rng, int n, int degree, int terms, double amp) {
  return random_hermitian_series(rng, n, 1, degree, terms, amp);
}

/// Haar-ish random constant SU(2) matrix from a unit quaternion.
inline CMat random_su2(Rng& rng) {
  Eigen::Vector4d q;
  for (int i = 0; i < 4; ++i) q(i) = gaussian(rng);
  q.normalize();
  CMat r(2, 2);
  r << cd(q(0), q(3)), cd(q(2), q(1)), cd(-q(2), q(1)), cd(q(0), -q(3));
  return r;
}

inline CMat random_unitary(Rng& rng, int m) {
  Eigen::HouseholderQR<CMat> qr(random_matrix(rng, m, m));
  CMat q = qr.householderQ() * CMat::Identity(m, m);
  return q;
}

/// cos(theta) I + i sin(theta) [[0, e^{-ik.x}], [e^{ik.x}, 0]]: an exact
/// special-unitary trigonometric polynomial.
inline Series su2_rotation_factor(int n, double theta, const Freq& k) {
  Series::TermMap t;
  t[Freq{}] = std::cos(theta) * identity(2);
  CMat up = CMat::Zero(2, 2), lo = CMat::Zero(2, 2);
  up(0, 1) = kI * std::sin(theta);
  lo(1, 0) = kI * std::sin(theta);
  const Freq mk = Series::negate(k);
  t[mk] = up;
  t[k] = (t.count(k) ? t[k] : CMat::Zero(2, 2)) + lo;
  return Series::from_terms(n, 2, 2, std::move(t));
}

/// Product of `factors` random rotation factors with angles in
/// [-amp, amp], conjugated by random constant SU(2) matrices between factors
/// so that the result is generic.
inline Series random_su2_field(Rng& rng, int n, int degree, int factors, double amp) {
  Series r = Series::constant(n, random_su2(rng));
  for (int i = 0; i < factors; ++i) {
    const CMat u = random_su2(rng);
    Series f = su2_rotation_factor(n, uniform(rng, -amp, amp), random_frequency(rng, n, degree));
    f = multiply(multiply(Series::constant(n, u.adjoint()), f), Series::constant(n, u));
    r = multiply(r, f);
  }
  return r;
}

/// Product of unipotent factors [[1, u(x)], [0, 1]] and [[1, 0], [l(x), 1]]
/// with small complex trigonometric u, l: an exact special-linear field.
inline Series random_sl2_field(Rng& rng, int n, int degree, int terms, double amp) {
  auto scalar_poly = [&]() {
    Series::TermMap t;
    t[Freq{}] = amp * random_matrix(rng, 1, 1);
    for (int i = 0; i < terms; ++i) t[random_frequency(rng, n, degree)] = amp * random_matrix(rng, 1, 1);
    return Series::from_terms(n, 1, 1, std::move(t));
  };
  auto unipotent = [&](bool upper) {
    const Series u = scalar_poly();
    Series::TermMap t;
    for (const auto& [k, c] : u.terms()) {
      CMat b = CMat::Zero(2, 2);
      b(upper ? 0 : 1, upper ? 1 : 0) = c(0, 0);
      t[k] = b;
    }
    t[Freq{}] = (t.count(Freq{}) ? t[Freq{}] : CMat::Zero(2, 2)) + identity(2);
    return Series::from_terms(n, 2, 2, std::move(t));
  };
  return multiply(multiply(unipotent(true), unipotent(false)), unipotent(true));
}

/// e^{i phi(x)} I_m with real phi.
inline Series phase_field(const Series& phi, int m, double tol = 1e-15) {
  const Series e = exp_scalar(cd(0.0, 1.0) * phi, tol);
  return e.map_coeffs([m](const CMat& c) -> CMat { return c(0, 0) * identity(m); });
}

/// e^{psi(x)} I_m with real psi.
inline Series positive_scalar_field(const Series& psi, int m, double tol = 1e-15) {
  Series e = exp_scalar(psi, tol).map_coeffs([m](const CMat& c) -> CMat { return c(0, 0) * identity(m); });
  e = 0.5 * (e + e.adjoint());
  e.mark_hermitian();
  return e;
}

/// 3D trace-free elliptic operator R^* (sigma . p) R + random Hermitian L_sub.
inline OperatorData random_conjugated_dirac(Rng& rng, int degree = 1, int factors = 2, double amp = 0.3,
                                            double lsub_amp = 0.3) {
  const Series R = random_su2_field(rng, 3, degree, factors, amp);
  OperatorData op = apply_gauge(flat_dirac(3), GaugeField{R, GaugeKind::SpecialUnitary});
  if (lsub_amp > 0.0) op = with_added_subprincipal(op, random_hermitian_series(rng, 3, 2, degree, 2, lsub_amp, lsub_amp));
  return op;
}

}  // namespace folab
