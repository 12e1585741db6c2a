#include "folab/builders.hpp"
#include "folab/symbol.hpp"

#include <gtest/gtest.h>

using namespace folab;

namespace {

// Eigenvector of branch j at (x, p), phase-aligned to `ref`.
CVec aligned_vector(const OperatorData& op, int j, const Point& x, const Point& p, const CVec& ref) {
  const SymbolPoint sp = SymbolEvaluator(op)(x);
  CVec v = eigen_branch(sp, p, j).v;
  const cd ov = ref.dot(v);
  return v * (std::conj(ov) / std::abs(ov));
}

struct FdDerivatives {
  CMat dv_x, dv_p;
};

FdDerivatives finite_difference(const OperatorData& op, int j, const Point& x, const Point& p, double step) {
  const int n = op.dim();
  const CVec v0 = eigen_branch(SymbolEvaluator(op)(x), p, j).v;
  FdDerivatives d{CMat::Zero(op.size(), n), CMat::Zero(op.size(), n)};
  for (int a = 0; a < n; ++a) {
    Point xp = x, xm = x, pp = p, pm = p;
    xp[a] += step;
    xm[a] -= step;
    pp[a] += step;
    pm[a] -= step;
    d.dv_x.col(a) = (aligned_vector(op, j, xp, p, v0) - aligned_vector(op, j, xm, p, v0)) / (2 * step);
    d.dv_p.col(a) = (aligned_vector(op, j, x, pp, v0) - aligned_vector(op, j, x, pm, v0)) / (2 * step);
  }
  return d;
}

}  // namespace

TEST(EigenBranches, FlatDiracNorthPole) {
  const SymbolPoint sp = SymbolEvaluator(flat_dirac(3))({0, 0, 0});
  const auto br = eigen_branches(sp, {0, 0, 1});
  ASSERT_EQ(br.size(), 2u);
  EXPECT_EQ(br[0].j, -1);
  EXPECT_EQ(br[1].j, 1);
  EXPECT_NEAR(br[0].h, -1.0, 1e-15);
  EXPECT_NEAR(br[1].h, 1.0, 1e-15);
  EXPECT_NEAR(std::abs(br[1].v(0)), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(br[0].v(1)), 1.0, 1e-15);
}

TEST(EigenBranches, GradientOfModulus) {
  Rng rng(31);
  const SymbolPoint sp = SymbolEvaluator(flat_dirac(3))({0, 0, 0});
  for (int i = 0; i < 10; ++i) {
    Point p = random_direction(rng, 3);
    for (auto& c : p) c *= 2.5;
    const EigenBranch b = eigen_branch(sp, p, 1);
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(b.dh_p(a), p[a] / 2.5, 1e-13);
    EXPECT_LT(b.dv_x.norm(), 1e-15);
  }
}

TEST(EigenBranches, InvariantsOnRandomOperator) {
  Rng rng(32);
  const OperatorData op = random_conjugated_dirac(rng);
  SymbolEvaluator ev(op);
  for (int i = 0; i < 20; ++i) {
    const Point x = random_point(rng, 3), p = random_direction(rng, 3);
    const SymbolPoint sp = ev(x);
    const CMat L = sp.principal(p);
    for (const auto& b : eigen_branches(sp, p)) {
      EXPECT_NEAR(b.v.norm(), 1.0, 1e-14);
      EXPECT_LT((L * b.v - b.h * b.v).norm(), 1e-10);
      for (int a = 0; a < 3; ++a) {
        EXPECT_LT(std::abs(b.v.dot(b.dv_x.col(a))), 1e-13);
        EXPECT_LT(std::abs(b.v.dot(b.dv_p.col(a))), 1e-13);
      }
      Point p3 = p;
      for (auto& c : p3) c *= 3.0;
      EXPECT_NEAR(eigen_branch(sp, p3, b.j).h, 3.0 * b.h, 1e-12);
    }
  }
}

TEST(EigenBranches, DerivativesMatchFiniteDifferences) {
  Rng rng(33);
  const OperatorData op = random_conjugated_dirac(rng);
  SymbolEvaluator ev(op);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Point x = random_point(rng, 3), p = random_direction(rng, 3);
    for (int j : {-1, 1}) {
      const EigenBranch b = eigen_branch(ev(x), p, j);
      const FdDerivatives fd = finite_difference(op, j, x, p, 1e-4);
      worst = std::max({worst, (fd.dv_p - b.dv_p).cwiseAbs().maxCoeff(), (fd.dv_x - b.dv_x).cwiseAbs().maxCoeff()});
    }
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(EigenBranches, DegeneracyIsAnError) {
  const OperatorData op = constant_operator({identity(2), identity(2)}, CMat::Zero(2, 2));
  EXPECT_THROW(eigen_branches(SymbolEvaluator(op)({0, 0}), {1, 0}), DegenerateBranchError);
  EXPECT_THROW(eigen_branches(SymbolEvaluator(flat_dirac(3))({0, 0, 0}), {0, 0, 0}), PreconditionError);
}

TEST(Brackets, CanonicalPair) {
  MatrixJet F{CMat::Constant(1, 1, 0.0), {CMat::Zero(1, 1), CMat::Zero(1, 1)},
              {CMat::Constant(1, 1, 1.0), CMat::Zero(1, 1)}};  // F = p_1
  MatrixJet H{CMat::Constant(1, 1, 0.0), {CMat::Constant(1, 1, 1.0), CMat::Zero(1, 1)},
              {CMat::Zero(1, 1), CMat::Zero(1, 1)}};  // H = x^1
  EXPECT_NEAR(poisson_bracket(F, H)(0, 0).real(), -1.0, 1e-15);
}

TEST(Brackets, GeneralizedWithIdentityMiddle) {
  Rng rng(34);
  auto random_jet = [&]() {
    MatrixJet j{random_matrix(rng, 2, 2), {}, {}};
    for (int a = 0; a < 3; ++a) {
      j.dx.push_back(random_matrix(rng, 2, 2));
      j.dp.push_back(random_matrix(rng, 2, 2));
    }
    return j;
  };
  const MatrixJet F = random_jet(), H = random_jet();
  MatrixJet G{identity(2), std::vector<CMat>(3, CMat::Zero(2, 2)), std::vector<CMat>(3, CMat::Zero(2, 2))};
  EXPECT_LT((generalized_bracket(F, G, H) - poisson_bracket(F, H)).norm(), 1e-14);

  // F = x^1 I, G = I, H = p_1 I -> I
  MatrixJet Fx{CMat::Zero(2, 2), {identity(2), CMat::Zero(2, 2)}, {CMat::Zero(2, 2), CMat::Zero(2, 2)}};
  MatrixJet Hp{CMat::Zero(2, 2), {CMat::Zero(2, 2), CMat::Zero(2, 2)}, {identity(2), CMat::Zero(2, 2)}};
  MatrixJet G2{identity(2), std::vector<CMat>(2, CMat::Zero(2, 2)), std::vector<CMat>(2, CMat::Zero(2, 2))};
  EXPECT_LT((generalized_bracket(Fx, G2, Hp) - identity(2)).norm(), 1e-15);

  MatrixJet missing{identity(2), {}, {}};
  EXPECT_THROW(poisson_bracket(missing, H), PreconditionError);
}

TEST(Brackets, JetFormMatchesScalarForm) {
  Rng rng(35);
  const OperatorData op = random_conjugated_dirac(rng);
  const Point x = random_point(rng, 3), p = random_direction(rng, 3);
  const SymbolPoint sp = SymbolEvaluator(op)(x);
  const EigenBranch b = eigen_branch(sp, p, 1);
  const MatrixJet v = vector_jet(b), vh = adjoint_jet(v), A = shifted_principal_jet(sp, p, b);
  EXPECT_LT(std::abs(generalized_bracket(vh, A, v)(0, 0) - bracket_vLv(sp, p, b)), 1e-14);
  EXPECT_LT(std::abs(poisson_bracket(vh, v)(0, 0) - bracket_vv(b)), 1e-14);
}

TEST(PhaseF, ConstantScalarSubprincipal) {
  const OperatorData op = flat_dirac(3, 0.4);
  Rng rng(36);
  for (int i = 0; i < 5; ++i) {
    const Point p = random_direction(rng, 3);
    for (int j : {-1, 1}) EXPECT_NEAR(phase_f(op, j, {0, 0, 0}, p), 0.4, 1e-14);
  }
}

TEST(PhaseF, SigmaThreeAtNorthPole) {
  const OperatorData op = flat_dirac(3, pauli_basis()[3]);
  EXPECT_NEAR(phase_f(op, 1, {0, 0, 0}, {0, 0, 1}), 1.0, 1e-14);
}

// Eigenvector of branch j in the gauge where its largest component is real.
CVec lcr_vector(const OperatorData& op, int j, const Point& x, const Point& p, Eigen::Index c) {
  CVec v = eigen_branch(SymbolEvaluator(op)(x), p, j).v;
  return v * (std::abs(v(c)) / v(c));
}

TEST(PhaseF, GaugeConsistency) {
  Rng rng(37);
  const OperatorData op = random_conjugated_dirac(rng);
  SymbolEvaluator ev(op);
  const double step = 1e-4;
  for (int i = 0; i < 20; ++i) {
    const Point x = random_point(rng, 3), p = random_direction(rng, 3);
    const SymbolPoint sp = ev(x);
    for (int j : {-1, 1}) {
      const EigenBranch par = eigen_branch(sp, p, j);
      const EigenBranch lcr = largest_component_real_gauge(par);
      Eigen::Index c = 0;
      lcr.v.cwiseAbs().maxCoeff(&c);
      // Connection term of the second gauge from finite differences of that gauge.
      cd conn = 0.0;
      for (int a = 0; a < 3; ++a) {
        Point xp = x, xm = x, pp = p, pm = p;
        xp[a] += step;
        xm[a] -= step;
        pp[a] += step;
        pm[a] -= step;
        const CVec vx = (lcr_vector(op, j, xp, p, c) - lcr_vector(op, j, xm, p, c)) / (2 * step);
        const CVec vp = (lcr_vector(op, j, x, pp, c) - lcr_vector(op, j, x, pm, c)) / (2 * step);
        conn += lcr.v.dot(vx) * par.dh_p(a) - lcr.v.dot(vp) * par.dh_x(a);
      }
      const double f_par = phase_f(sp, p, par);
      const double f_lcr = phase_f(sp, p, lcr);
      EXPECT_NEAR(std::abs(conn - connection_term(lcr)), 0.0, 1e-6);
      EXPECT_NEAR(f_lcr, (cd(f_par) - kI * conn).real(), 1e-6);
      // The parallel-gauge value is recovered once the connection term is
      // compensated in the second gauge.
      EXPECT_NEAR(f_par, (phase_f_complex(sp, p, lcr) + kI * connection_term(lcr)).real(), 1e-8);
    }
  }
}

TEST(BIntegrand, ConstantShift) {
  const OperatorData op = flat_dirac(3, 0.25);
  EXPECT_NEAR(b_integrand(op, 1, {0, 0, 0}, {0.3, 0.4, 0.5}), 0.25, 1e-14);
  EXPECT_NEAR(b_integrand(op, -1, {0, 0, 0}, {0.3, 0.4, 0.5}), 0.25, 1e-14);
}

TEST(BIntegrand, HomogeneityAndRephasing) {
  Rng rng(38);
  const OperatorData op = random_conjugated_dirac(rng);
  SymbolEvaluator ev(op);
  for (int i = 0; i < 20; ++i) {
    const Point x = random_point(rng, 3), p = random_direction(rng, 3);
    Point p3 = p;
    for (auto& c : p3) c *= 3.0;
    const SymbolPoint sp = ev(x);
    for (int j : {-1, 1}) {
      const EigenBranch b = eigen_branch(sp, p, j);
      const double base = b_integrand(sp, p, b);
      EXPECT_NEAR(b_integrand(sp, p3, eigen_branch(sp, p3, j)), base, 1e-9);
      RVec fx(3), fp(3);
      for (int a = 0; a < 3; ++a) {
        fx(a) = gaussian(rng);
        fp(a) = gaussian(rng);
      }
      const EigenBranch r = regauge(b, uniform(rng, -kPi, kPi), fx, fp);
      EXPECT_NEAR(b_integrand(sp, p, r), base, 1e-10);
      EXPECT_NEAR(curvature_trace(r), curvature_trace(b), 1e-10);
    }
  }
}

TEST(Curvature, VanishesForConstantSymbols) {
  Rng rng(39);
  std::vector<CMat> S{random_hermitian(rng, 2), random_hermitian(rng, 2), random_hermitian(rng, 2)};
  const OperatorData op = constant_operator(S, CMat::Zero(2, 2));
  for (int i = 0; i < 5; ++i)
    for (int j : {-1, 1}) {
      try {
        EXPECT_LE(std::abs(curvature_trace(op, j, random_point(rng, 3), random_direction(rng, 3))), 1e-12);
      } catch (const PreconditionError&) {
        // random constant symbols need not have one eigenvalue of each sign
      }
    }
  EXPECT_EQ(curvature_trace(flat_dirac(3), 1, {0, 1, 2}, {0.6, 0.0, 0.8}), 0.0);
}

TEST(Curvature, MatchesFiniteDifferenceBracket) {
  Rng rng(40);
  const OperatorData op = random_conjugated_dirac(rng, 1, 2, 0.4, 0.0);
  double worst = 0.0, largest = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Point x = random_point(rng, 3), p = random_direction(rng, 3);
    const FdDerivatives fd = finite_difference(op, 1, x, p, 1e-4);
    cd br = 0.0;
    for (int a = 0; a < 3; ++a) br += fd.dv_x.col(a).dot(fd.dv_p.col(a)) - fd.dv_p.col(a).dot(fd.dv_x.col(a));
    const double ref = (-kI * br).real();
    const double got = curvature_trace(op, 1, x, p);
    worst = std::max(worst, std::abs(ref - got));
    largest = std::max(largest, std::abs(got));
  }
  EXPECT_LE(worst, 1e-6);
  EXPECT_GT(largest, 1e-3);
}

TEST(SymbolEvaluator, WeightedSymbols) {
  const OperatorData op = with_weight(flat_dirac(3, 0.8), Series::scalar(3, 4.0));
  const SymbolPoint sp = SymbolEvaluator(op, true)({0, 0, 0});
  EXPECT_LT((sp.S[0] - 0.25 * pauli_basis()[1]).norm(), 1e-15);
  EXPECT_LT((sp.Lsub - 0.2 * identity(2)).norm(), 1e-15);
}
