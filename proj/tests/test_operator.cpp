#include "folab/builders.hpp"
#include "folab/operator.hpp"

#include <gtest/gtest.h>

using namespace folab;

namespace {

double max_diff(const Series& a, const Series& b) { return (a - b).max_abs_coeff(); }

// S^1 = s1 + eps cos(x^1) s3, S^2 = s2, S^3 = s3.
OperatorData wavy_dirac(double eps) {
  const auto s = pauli_basis();
  Series::TermMap t;
  t[Freq{}] = s[1];
  t[Freq{1, 0, 0}] = 0.5 * eps * s[3];
  t[Freq{-1, 0, 0}] = 0.5 * eps * s[3];
  std::vector<Series> S{Series::from_terms(3, 2, 2, t, true), Series::constant(3, s[2], true),
                        Series::constant(3, s[3], true)};
  return build_operator(S, Series(3, 2, 2));
}

}  // namespace

TEST(BuildOperator, FlatDiracHasZeroLocalPotential) {
  const OperatorData op = flat_dirac(3);
  const auto lc = local_coefficients(op);
  EXPECT_TRUE(lc.Q.empty());
  const auto s = pauli_basis();
  for (int a = 0; a < 3; ++a) EXPECT_LT((lc.P[a].coeff(Freq{}) + kI * s[a + 1]).norm(), 1e-15);
}

TEST(BuildOperator, ConstantShift) {
  const OperatorData op = flat_dirac(3, 0.7);
  const auto lc = local_coefficients(op);
  EXPECT_LT((lc.Q.coeff(Freq{}) - 0.7 * identity(2)).norm(), 1e-15);
}

TEST(BuildOperator, VariablePrincipalGivesPotential) {
  const double eps = 0.2;
  const OperatorData op = wavy_dirac(eps);
  const auto lc = local_coefficients(op);
  // Q = -(i/2) d_1 S^1 = (i eps / 2) sin(x^1) s3.
  const auto s = pauli_basis();
  EXPECT_LT((lc.Q.coeff(Freq{1, 0, 0}) - 0.25 * eps * s[3]).norm(), 1e-15);
  EXPECT_LT((lc.Q.coeff(Freq{-1, 0, 0}) + 0.25 * eps * s[3]).norm(), 1e-15);
  EXPECT_TRUE(op.Lsub().empty());
  const Point x{0.4, 1.0, 2.0};
  EXPECT_LT((lc.Q.eval(x) - kI * 0.5 * eps * std::sin(x[0]) * s[3]).norm(), 1e-15);
}

TEST(BuildOperator, RejectsNonHermitianAndBadWeight) {
  CMat bad = CMat::Zero(2, 2);
  bad(0, 1) = 1.0;
  std::vector<Series> S;
  for (const auto& s : flat_dirac_matrices(3)) S.push_back(Series::constant(3, s, true));
  EXPECT_THROW(build_operator(S, Series::constant(3, bad)), PreconditionError);
  EXPECT_THROW(build_operator(S, Series(3, 2, 2), Series::scalar(3, -1.0)), PreconditionError);
  EXPECT_THROW(build_operator({S[0]}, Series(3, 2, 2)), PreconditionError);
  const OperatorData unchecked = build_operator(S, Series::constant(3, bad), std::nullopt, true);
  EXPECT_FALSE(unchecked.checked());
}

TEST(LocalCoefficients, RoundTrip) {
  Rng rng(11);
  const OperatorData op = random_conjugated_dirac(rng);
  const auto lc = local_coefficients(op);
  const OperatorData back = operator_from_local(lc.P, lc.Q);
  for (int a = 0; a < 3; ++a) EXPECT_LT(max_diff(back.S(a), op.S(a)), 1e-14);
  EXPECT_LT(max_diff(back.Lsub(), op.Lsub()), 1e-14);
}

TEST(Symbols, PrincipalValuesAndHomogeneity) {
  const OperatorData op = flat_dirac(3);
  EXPECT_LT((principal_symbol(op, {0, 0, 0}, {0, 0, 1}) - pauli_basis()[3]).norm(), 1e-15);
  EXPECT_LT(principal_symbol(op, {1, 2, 3}, {0, 0, 0}).norm(), 1e-15);
  Rng rng(12);
  const OperatorData w = random_conjugated_dirac(rng);
  for (int i = 0; i < 10; ++i) {
    const Point x = random_point(rng, 3), p = random_direction(rng, 3);
    Point p2 = p;
    for (auto& c : p2) c *= 2.0;
    EXPECT_LT((principal_symbol(w, x, p2) - 2.0 * principal_symbol(w, x, p)).norm(), 1e-13);
  }
}

TEST(Symbols, SubprincipalFromLocalCoefficients) {
  Rng rng(13);
  const OperatorData op = random_conjugated_dirac(rng);
  const auto lc = local_coefficients(op);
  for (int i = 0; i < 10; ++i) {
    const Point x = random_point(rng, 3);
    // Q + (i/2) (L_prin)_{x^a p_a}
    CMat mixed = CMat::Zero(2, 2);
    for (int a = 0; a < 3; ++a) mixed += derive_x(op.S(a), a).eval(x);
    EXPECT_LT((lc.Q.eval(x) + 0.5 * kI * mixed - subprincipal_symbol(op, x)).norm(), 1e-12);
  }
  const OperatorData c = flat_dirac(3, 0.3);
  EXPECT_LT((subprincipal_symbol(c, {1, 1, 1}) - 0.3 * identity(2)).norm(), 1e-15);
  EXPECT_TRUE(wavy_dirac(0.2).Lsub().empty());
}

TEST(Ellipticity, FlatDirac3D) {
  const auto cert = check_ellipticity(flat_dirac(3), 8);
  EXPECT_TRUE(cert.elliptic);
  EXPECT_TRUE(cert.nondegenerate);
  EXPECT_NEAR(cert.min_abs_det, 1.0, 1e-12);
  EXPECT_NEAR(cert.max_abs_det, 1.0, 1e-12);
}

TEST(Ellipticity, Minkowski4DIsNotElliptic) {
  const auto cert = check_ellipticity(flat_dirac(4), 8);
  EXPECT_FALSE(cert.elliptic);
  EXPECT_TRUE(cert.nondegenerate);
}

TEST(Ellipticity, OddSizeShortcut) {
  Rng rng(14);
  std::vector<CMat> S{random_hermitian(rng, 3), random_hermitian(rng, 3)};
  const auto cert = check_ellipticity(constant_operator(S, CMat::Zero(3, 3)), 8);
  EXPECT_FALSE(cert.elliptic);
  EXPECT_TRUE(cert.odd_size_shortcut);
}

TEST(Ellipticity, OddSizeDeterminantIsOdd) {
  Rng rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<CMat> S{random_hermitian(rng, 3), random_hermitian(rng, 3), random_hermitian(rng, 3)};
    const OperatorData op = constant_operator(S, CMat::Zero(3, 3));
    const Point x{0, 0, 0}, p = random_direction(rng, 3);
    const Point mp{-p[0], -p[1], -p[2]};
    const cd d1 = principal_symbol(op, x, p).determinant(), d2 = principal_symbol(op, x, mp).determinant();
    EXPECT_NEAR((d1 + d2).real(), 0.0, 1e-12);
  }
}

TEST(Ellipticity, SignDefiniteDegeneracyBetweenSamples) {
  // det = -(p1 + p2)^2 never changes sign and vanishes off the sample grid.
  const auto s = pauli_basis();
  const auto cert = check_ellipticity(constant_operator({s[1], s[1]}, CMat::Zero(2, 2)), 8);
  EXPECT_FALSE(cert.elliptic);
  EXPECT_FALSE(cert.det_sign_change);
  EXPECT_LT(cert.min_singular, 1e-8);
  EXPECT_NEAR(std::abs(cert.witness_p[0] + cert.witness_p[1]), 0.0, 1e-7);
  EXPECT_NEAR(check_ellipticity(flat_dirac(2), 8).min_singular, 1.0, 1e-12);
}

TEST(Ellipticity, RejectsCoarseGrid) { EXPECT_THROW(check_ellipticity(flat_dirac(3), 4), PreconditionError); }

TEST(Gauge, IdentityLeavesOperatorUnchanged) {
  Rng rng(16);
  const OperatorData op = random_conjugated_dirac(rng);
  const OperatorData g = apply_gauge(op, make_gauge(Series::constant(3, identity(2)), GaugeKind::SpecialUnitary));
  for (int a = 0; a < 3; ++a) EXPECT_LT(max_diff(g.S(a), op.S(a)), 1e-14);
  EXPECT_LT(max_diff(g.Lsub(), op.Lsub()), 1e-14);
}

TEST(Gauge, ConstantPositiveScalar) {
  Rng rng(17);
  const OperatorData op = random_conjugated_dirac(rng);
  const double psi = 0.35;
  const auto g = make_gauge(Series::constant(3, std::exp(psi) * identity(2)), GaugeKind::PositiveScalar);
  const OperatorData out = apply_gauge(op, g);
  EXPECT_LT(max_diff(out.Lsub(), std::exp(2 * psi) * op.Lsub()), 1e-13);
}

TEST(Gauge, PhaseShiftsSubprincipalByGradient) {
  Rng rng(18);
  const OperatorData op = random_conjugated_dirac(rng);
  Series::TermMap t;
  t[Freq{1, 0, 0}] = CMat::Constant(1, 1, 0.5);
  t[Freq{-1, 0, 0}] = CMat::Constant(1, 1, 0.5);
  const Series phi = Series::from_terms(3, 1, 1, t, true);  // cos x^1
  const auto g = make_gauge(phase_field(phi, 2), GaugeKind::PhaseScalar);
  const OperatorData out = apply_gauge(op, g);
  for (int i = 0; i < 50; ++i) {
    const Point x = random_point(rng, 3);
    const Point grad{-std::sin(x[0]), 0.0, 0.0};
    const CMat expect = subprincipal_symbol(op, x) + principal_symbol(op, x, grad);
    EXPECT_LT((subprincipal_symbol(out, x) - expect).norm(), 1e-10);
    EXPECT_LT((principal_symbol(out, x, {0.3, -0.2, 0.9}) - principal_symbol(op, x, {0.3, -0.2, 0.9})).norm(), 1e-12);
  }
}

TEST(Gauge, PrincipalTransformsBySandwich) {
  Rng rng(19);
  const OperatorData op = random_conjugated_dirac(rng);
  const Series Q = random_sl2_field(rng, 3, 1, 1, 0.2);
  const OperatorData out = apply_gauge(op, make_gauge(Q, GaugeKind::SpecialLinear));
  for (int a = 0; a < 3; ++a) EXPECT_LT(max_diff(out.S(a), sandwich(Q, op.S(a))), 1e-12);
}

TEST(Gauge, Composition) {
  Rng rng(20);
  const OperatorData op = random_conjugated_dirac(rng);
  const auto g1 = make_gauge(random_sl2_field(rng, 3, 1, 1, 0.2), GaugeKind::SpecialLinear);
  const auto g2 = make_gauge(random_su2_field(rng, 3, 1, 1, 0.3), GaugeKind::SpecialUnitary);
  const OperatorData a = apply_gauge(apply_gauge(op, g1), g2);
  const OperatorData b = apply_gauge(op, compose(g1, g2));
  for (int k = 0; k < 3; ++k) EXPECT_LT(max_diff(a.S(k), b.S(k)), 1e-12);
  EXPECT_LT(max_diff(a.Lsub(), b.Lsub()), 1e-12);
}

TEST(Gauge, ValidationRejectsWrongKind) {
  Rng rng(21);
  EXPECT_THROW(make_gauge(Series::constant(3, 2.0 * identity(2)), GaugeKind::SpecialLinear), PreconditionError);
  EXPECT_THROW(make_gauge(Series::constant(3, random_matrix(rng, 2, 2)), GaugeKind::Unitary), PreconditionError);
  EXPECT_THROW(make_gauge(Series::constant(3, CMat::Zero(2, 2)), GaugeKind::GeneralLinear), PreconditionError);
  EXPECT_NO_THROW(make_gauge(random_su2_field(rng, 3, 2, 3, 0.5), GaugeKind::SpecialUnitary));
  EXPECT_NO_THROW(make_gauge(random_sl2_field(rng, 3, 2, 2, 0.5), GaugeKind::SpecialLinear));
}

TEST(Weight, UnitWeightIsIdentity) {
  Rng rng(22);
  const OperatorData op = random_conjugated_dirac(rng);
  const OperatorData out = conjugate_weight(with_weight(op, Series::scalar(3, 1.0)));
  for (int a = 0; a < 3; ++a) EXPECT_LT(max_diff(out.S(a), op.S(a)), 1e-14);
  EXPECT_LT(max_diff(out.Lsub(), op.Lsub()), 1e-14);
  EXPECT_FALSE(out.weight().has_value());
}

TEST(Weight, ConstantWeightScales) {
  const OperatorData op = with_weight(flat_dirac(3, 0.8), Series::scalar(3, 4.0));
  const OperatorData out = conjugate_weight(op);
  EXPECT_LT((out.Lsub().coeff(Freq{}) - 0.2 * identity(2)).norm(), 1e-15);
  EXPECT_LT((out.S(0).coeff(Freq{}) - 0.25 * pauli_basis()[1]).norm(), 1e-15);
}

TEST(Weight, ExponentialWeightSubprincipal) {
  Rng rng(23);
  OperatorData op = with_added_subprincipal(flat_dirac(3), random_hermitian_series(rng, 3, 2, 1, 2, 0.5, 0.5));
  Series::TermMap t;
  const Series cosx = Series::from_terms(3, 1, 1, {{Freq{1, 0, 0}, CMat::Constant(1, 1, 0.15)},
                                                   {Freq{-1, 0, 0}, CMat::Constant(1, 1, 0.15)}}, true);
  const Series s = positive_scalar_field(cosx, 1);  // exp(0.3 cos x^1)
  op = with_weight(op, s);
  const OperatorData out = conjugate_weight(op);
  EXPECT_GT(out.weight_cutoff(), 0);
  double err = 0.0;
  const int N = 12;
  for (std::size_t i = 0; i < grid_size(3, N); ++i) {
    Point x = grid_point(3, N, i);
    for (auto& c : x) c += 0.1;
    const double sx = std::exp(0.3 * std::cos(x[0]));
    err = std::max(err, (subprincipal_symbol(out, x) - subprincipal_symbol(op, x) / sx).norm());
  }
  EXPECT_LE(err, 1e-8);
}

TEST(Weight, RequiresWeight) { EXPECT_THROW(conjugate_weight(flat_dirac(3)), PreconditionError); }

TEST(OperatorJson, RoundTrip) {
  Rng rng(24);
  const OperatorData op = with_weight(random_conjugated_dirac(rng), Series::scalar(3, 2.0));
  const OperatorData back = operator_from_json(to_json(op));
  for (int a = 0; a < 3; ++a) EXPECT_LT(max_diff(back.S(a), op.S(a)), 1e-15);
  EXPECT_LT(max_diff(back.Lsub(), op.Lsub()), 1e-15);
  ASSERT_TRUE(back.weight().has_value());
  EXPECT_THROW(operator_from_json(nlohmann::json{{"n", 3}}), PreconditionError);
}
