#include "folab/builders.hpp"
#include "folab/dirac4d.hpp"
#include "folab/spectra.hpp"

#include <gtest/gtest.h>

using namespace folab;

namespace {

std::vector<Series> flat_coefficients() {
  std::vector<Series> S;
  for (const auto& s : flat_dirac_matrices(4)) S.push_back(Series::constant(4, s, true));
  return S;
}

CovariantOperatorSpec flat_spec(const CMat& Lcsub = CMat::Zero(2, 2)) {
  return {flat_coefficients(), Series::constant(4, Lcsub, true)};
}

/// R^* S^a R for a special-linear field R: constant metric, x-dependent S.
std::vector<Series> conjugated_coefficients(Rng& rng) {
  const Series R = random_sl2_field(rng, 4, 1, 1, 0.25);
  std::vector<Series> S;
  for (const auto& s : flat_coefficients()) {
    Series t = multiply(multiply(R.adjoint(), s), R);
    t.mark_hermitian(1e-12);
    S.push_back(t);
  }
  return S;
}

/// e^{psi(x1)} S^a: metric scaled by e^{2 psi}, varying along one axis.
std::vector<Series> conformal_coefficients(double amp) {
  Freq k{};
  k[0] = 1;
  const Series psi = Series::from_terms(
      4, 1, 1, {{k, CMat::Constant(1, 1, 0.5 * amp)}, {Series::negate(k), CMat::Constant(1, 1, 0.5 * amp)}}, true);
  const Series f = positive_scalar_field(psi, 2);
  std::vector<Series> S;
  for (const auto& s : flat_coefficients()) {
    Series t = multiply(f, s);
    t.mark_hermitian(1e-12);
    S.push_back(t);
  }
  return S;
}

double series_gap(const Series& a, const Series& b, Rng& rng, int points = 20) {
  double worst = 0.0;
  for (int i = 0; i < points; ++i) {
    const Point x = random_point(rng, a.dim());
    worst = std::max(worst, op_norm(a.eval(x) - b.eval(x)));
  }
  return worst;
}

}  // namespace

TEST(OpFromCovariant, ConstantCoefficients) {
  const OperatorData op = op_from_covariant(flat_spec());
  EXPECT_LE(op_norm(op.Lsub().eval({0.1, 0.2, 0.3, 0.4})), 1e-15);
  const auto s = pauli_basis();
  const OperatorData op1 = op_from_covariant(flat_spec(s[1]));
  EXPECT_LE(op_norm(op1.Lsub().eval({1.0, 2.0, 3.0, 4.0}) - s[1]), 1e-15);
}

TEST(OpFromCovariant, RoundTripVariableCoefficients) {
  Rng rng(101);
  const auto s = pauli_basis();
  for (int trial = 0; trial < 2; ++trial) {
    CovariantOperatorSpec spec{trial == 0 ? conjugated_coefficients(rng) : conformal_coefficients(0.3),
                               Series::constant(4, CMat(0.2 * s[1] - 0.4 * s[3] + 0.1 * s[0]), true) +
                                   random_hermitian_series(rng, 4, 2, 1, 2, 0.1)};
    const OperatorData op = op_from_covariant(spec);
    // The correction is nontrivial for the conjugated family and cancels for a
    // scalar conformal factor, where g_{ab} S^a adj(S^b) is a multiple of I.
    if (trial == 0)
      EXPECT_GT(series_gap(op.Lsub(), spec.Lcsub, rng), 1e-6);
    else
      EXPECT_LE(series_gap(op.Lsub(), spec.Lcsub, rng), 1e-12);
    EXPECT_LE(series_gap(covariant_subprincipal(op), spec.Lcsub, rng), 1e-10);
    for (int i = 0; i < 5; ++i) {
      const Point x = random_point(rng, 4);
      EXPECT_LE(op_norm(covariant_subprincipal_at(op, x) - spec.Lcsub.eval(x)), 1e-10);
    }
  }
}

TEST(OpFromCovariant, Preconditions) {
  std::vector<Series> S = flat_coefficients();
  S[3] = Series::constant(4, CMat(-pauli_basis()[0]), true);
  // (s1, s2, s3, -I) still gives signature (3, 1).
  EXPECT_NO_THROW(op_from_covariant({S, Series(4, 2, 2)}));
  S[3] = Series::constant(4, CMat(2.0 * pauli_basis()[3]), true);
  EXPECT_THROW(op_from_covariant({S, Series(4, 2, 2)}), PreconditionError);
  const std::vector<Series> flat = flat_coefficients();
  const std::vector<Series> three(flat.begin(), flat.begin() + 3);
  EXPECT_THROW(op_from_covariant({three, Series(4, 2, 2)}), PreconditionError);
}

TEST(Adjugate, FlatPrincipalSymbol) {
  const OperatorData adj = adjugate_operator(op_from_covariant(flat_spec()));
  const auto s = pauli_basis();
  const Point p{0.3, -0.7, 1.1, 0.5};
  const CMat expect = p[3] * identity(2) - (p[0] * s[1] + p[1] * s[2] + p[2] * s[3]);
  EXPECT_LE(op_norm(principal_symbol(adj, {0, 0, 0, 0}, p) - expect), 1e-15);
}

TEST(Adjugate, InvolutionAndMetric) {
  Rng rng(102);
  const auto s = pauli_basis();
  const CovariantOperatorSpec spec{conjugated_coefficients(rng),
                                   Series::constant(4, CMat(0.3 * s[2]), true) + random_hermitian_series(rng, 4, 2, 1, 1, 0.1)};
  const OperatorData L = op_from_covariant(spec);
  const OperatorData adj = adjugate_operator(L);
  const OperatorData back = adjugate_operator(adj);
  for (int a = 0; a < 4; ++a) EXPECT_LE(series_gap(back.S(a), L.S(a), rng), 1e-14);
  EXPECT_LE(series_gap(back.Lsub(), L.Lsub(), rng), 1e-10);
  const MetricField g = extract_metric(L), ga = extract_metric(adj);
  for (int i = 0; i < 5; ++i) {
    const Point x = random_point(rng, 4);
    EXPECT_LE((g.upper(x) - ga.upper(x)).cwiseAbs().maxCoeff(), 1e-12);
  }
  // Defining property: covariant subprincipal of Adj L is adj(L_csub).
  EXPECT_LE(series_gap(covariant_subprincipal(adj), adjugate_series(spec.Lcsub), rng), 1e-10);
}

TEST(Dirac, MasslessIsBlockDiagonal) {
  const DiracOperator4 d = assemble_dirac(flat_spec(), 0.0);
  const Point x{0.1, 0.2, 0.3, 0.4}, p{1.0, 0.5, -0.5, 2.0};
  const CMat sym = d.full_symbol(x, p);
  EXPECT_LE(op_norm(sym.block(0, 2, 2, 2)), 1e-15);
  EXPECT_LE(op_norm(sym.block(0, 0, 2, 2) - principal_symbol(d.L, x, p)), 1e-15);
  EXPECT_LE(op_norm(sym.block(2, 2, 2, 2) - principal_symbol(d.adjL, x, p)), 1e-15);
  EXPECT_THROW(assemble_dirac(flat_spec(), -1.0), PreconditionError);
}

TEST(Dirac, FlatBlocksAndMass) {
  const auto s = pauli_basis();
  const DiracOperator4 d = assemble_dirac(flat_spec(), 0.7);
  const Point p{0.2, 0.4, -0.1, 1.3};
  const CMat sp = p[0] * s[1] + p[1] * s[2] + p[2] * s[3];
  const CMat sym = d.full_symbol({0, 0, 0, 0}, p);
  EXPECT_LE(op_norm(sym.block(0, 0, 2, 2) - (p[3] * identity(2) + sp)), 1e-15);
  EXPECT_LE(op_norm(sym.block(2, 2, 2, 2) - (p[3] * identity(2) - sp)), 1e-15);
  EXPECT_LE(op_norm(sym.block(0, 2, 2, 2) - 0.7 * identity(2)), 1e-15);
  EXPECT_LE(op_norm(sym.block(2, 0, 2, 2) - 0.7 * identity(2)), 1e-15);
}

TEST(Dirac, GalerkinSelfAdjoint) {
  Rng rng(103);
  const DiracOperator4 d = assemble_dirac({conjugated_coefficients(rng), random_hermitian_series(rng, 4, 2, 1, 1, 0.2)}, 0.5);
  const Eigen::MatrixXcd M = galerkin_matrix(d.full, 1);
  EXPECT_EQ(M.rows(), 81 * 4);
  EXPECT_LE((M - M.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Dispersion, FlatClosedForms) {
  const DiracOperator4 d0 = assemble_dirac(flat_spec(), 0.0);
  const Point p{0.3, -0.2, 0.6, 0.9};
  const double expect = std::pow(p[3] * p[3] - (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]), 2);
  EXPECT_NEAR(d0.principal_with_mass({0, 0, 0, 0}, p).determinant().real(), expect, 1e-14);
  const DiracOperator4 d1 = assemble_dirac(flat_spec(), 1.0);
  EXPECT_NEAR(d1.principal_with_mass({0, 0, 0, 0}, {0, 0, 0, 0}).determinant().real(), 1.0, 1e-15);
  EXPECT_LE(dispersion_check(d1, 500).max_residual, 1e-10);
}

TEST(Dispersion, RandomSpecs) {
  Rng rng(104);
  for (double mass : {0.0, 0.8}) {
    const DiracOperator4 d = assemble_dirac({conjugated_coefficients(rng), Series(4, 2, 2)}, mass);
    const DispersionReport r = dispersion_check(d, 500, 7);
    EXPECT_EQ(r.samples, 500u);
    EXPECT_LE(r.max_residual, 1e-10);
  }
  const DiracOperator4 c = assemble_dirac({conformal_coefficients(0.3), Series(4, 2, 2)}, 0.4);
  EXPECT_LE(dispersion_check(c, 500, 8).max_residual, 1e-10);
}

TEST(Covariance, SpecialLinearGaugeCommutes) {
  Rng rng(105);
  const auto s = pauli_basis();
  const CovariantOperatorSpec spec{flat_coefficients(), Series::constant(4, CMat(0.3 * s[1] + 0.2 * s[0]), true) +
                                                            random_hermitian_series(rng, 4, 2, 1, 1, 0.1)};
  const OperatorData L = op_from_covariant(spec);
  const Series R = random_sl2_field(rng, 4, 1, 1, 0.25);
  const OperatorData gauged = apply_gauge(L, make_gauge(R, GaugeKind::SpecialLinear));
  CovariantOperatorSpec moved;
  for (const auto& a : spec.S) {
    Series t = multiply(multiply(R.adjoint(), a), R);
    t.mark_hermitian(1e-12);
    moved.S.push_back(t);
  }
  moved.Lcsub = multiply(multiply(R.adjoint(), spec.Lcsub), R);
  moved.Lcsub.mark_hermitian(1e-12);
  const OperatorData rebuilt = op_from_covariant(moved);
  EXPECT_LE(series_gap(rebuilt.Lsub(), gauged.Lsub(), rng), 1e-8);
  for (int a = 0; a < 4; ++a) EXPECT_LE(series_gap(rebuilt.S(a), gauged.S(a), rng), 1e-12);
}

TEST(Covariance, EmPotentialRoundTrip) {
  const double A[4] = {0.3, -0.1, 0.25, 0.6};
  const auto s = pauli_basis();
  const CMat Lcsub = A[0] * s[1] + A[1] * s[2] + A[2] * s[3] + A[3] * s[0];
  const OperatorData op = op_from_covariant(flat_spec(Lcsub));
  const EmPotential em = em_potential_at(op, {0.5, 0.5, 0.5, 0.5});
  for (int a = 0; a < 4; ++a) EXPECT_NEAR(em.A(a), A[a], 1e-12);
}

TEST(Dirac, Json) {
  const nlohmann::json j = to_json(assemble_dirac(flat_spec(), 0.25));
  EXPECT_DOUBLE_EQ(j["mass"].get<double>(), 0.25);
  EXPECT_TRUE(j.contains("L"));
  EXPECT_TRUE(j.contains("adjL"));
}
