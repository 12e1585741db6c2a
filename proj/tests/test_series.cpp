#include "folab/builders.hpp"
#include "folab/series.hpp"

#include <gtest/gtest.h>

using namespace folab;

namespace {

Series cos_x1(int n, const CMat& a) {
  Series::TermMap t;
  t[Freq{1, 0, 0, 0}] = 0.5 * a;
  t[Freq{-1, 0, 0, 0}] = 0.5 * a;
  return Series::from_terms(n, a.rows(), a.cols(), t);
}

double max_diff(const Series& a, const Series& b) { return (a - b).max_abs_coeff(); }

}  // namespace

TEST(SeriesEval, ConstantSeries) {
  const Series s = Series::constant(2, identity(2));
  EXPECT_LT((s.eval({1.3, -0.2}) - identity(2)).norm(), 1e-15);
}

TEST(SeriesEval, CosineAtZeroAndPi) {
  const Series s = cos_x1(2, identity(2));
  EXPECT_LT((s.eval({0.0, 0.0}) - identity(2)).norm(), 1e-15);
  EXPECT_LT((s.eval({kPi, 0.0}) + identity(2)).norm(), 1e-15);
}

TEST(SeriesEval, RejectsWrongDimension) {
  const Series s = Series::constant(2, identity(2));
  EXPECT_THROW(s.eval({0.0, 0.0, 0.0}), ShapeError);
}

TEST(SeriesDerive, ConstantGoesToZero) {
  EXPECT_TRUE(derive_x(Series::constant(2, identity(2)), 0).empty());
}

TEST(SeriesDerive, SingleMode) {
  Rng rng(1);
  const CMat A = random_matrix(rng, 2, 2);
  Series::TermMap t;
  t[Freq{1, 0}] = A;
  const Series d = derive_x(Series::from_terms(2, 2, 2, t), 0);
  EXPECT_LT((d.coeff(Freq{1, 0}) - kI * A).norm(), 1e-15);

  Series::TermMap t2;
  t2[Freq{0, 2}] = A;
  EXPECT_TRUE(derive_x(Series::from_terms(2, 2, 2, t2), 0).empty());
}

TEST(SeriesDerive, AxisOutOfRange) {
  EXPECT_THROW(derive_x(Series::constant(2, identity(2)), 2), ShapeError);
}

TEST(SeriesMultiply, Identity) {
  Rng rng(2);
  const Series s = random_hermitian_series(rng, 2, 2, 2, 3, 1.0, 1.0);
  EXPECT_LT(max_diff(multiply(Series::constant(2, identity(2)), s), s), 1e-15);
}

TEST(SeriesMultiply, FrequenciesAdd) {
  Rng rng(3);
  const CMat A = random_matrix(rng, 2, 2), B = random_matrix(rng, 2, 2);
  Series::TermMap ta, tb;
  ta[Freq{1, 0}] = A;
  tb[Freq{-1, 0}] = B;
  const Series p = multiply(Series::from_terms(2, 2, 2, ta), Series::from_terms(2, 2, 2, tb));
  ASSERT_EQ(p.terms().size(), 1u);
  EXPECT_LT((p.coeff(Freq{}) - A * B).norm(), 1e-14);
}

TEST(SeriesMultiply, Scalars) {
  const Series p = multiply(Series::scalar(2, 2.0), Series::scalar(2, 3.0));
  EXPECT_EQ(p.coeff(Freq{})(0, 0), cd(6.0));
}

TEST(SeriesMultiply, ShapeMismatch) {
  EXPECT_THROW(multiply(Series::constant(2, CMat::Identity(2, 2)), Series::constant(2, CMat::Identity(3, 3))),
               ShapeError);
}

TEST(SeriesIntegrate, ZeroModeOnly) {
  EXPECT_LT((integrate_torus(Series::constant(2, identity(2))) - std::pow(2 * kPi, 2) * identity(2)).norm(), 1e-12);
  Series::TermMap t;
  t[Freq{1, 0}] = identity(2);
  EXPECT_LT(integrate_torus(Series::from_terms(2, 2, 2, t)).norm(), 1e-15);
  EXPECT_NEAR(integrate_torus(Series::scalar(3, 1.5))(0, 0).real(), 1.5 * std::pow(2 * kPi, 3), 1e-10);
}

TEST(SeriesFit, CosineAndConstant) {
  const auto g = sample_grid([](const Point& x) -> CMat { return CMat::Constant(1, 1, std::cos(x[0])); }, 2, 8);
  const Series s = fit_from_grid(g, 2);
  EXPECT_NEAR(s.coeff(Freq{1, 0})(0, 0).real(), 0.5, 1e-14);
  EXPECT_NEAR(s.coeff(Freq{-1, 0})(0, 0).real(), 0.5, 1e-14);
  EXPECT_LT(s.pruned(1e-14).terms().size(), 3u);

  const auto g5 = sample_grid([](const Point&) -> CMat { return CMat::Constant(1, 1, 5.0); }, 2, 6);
  const Series c = fit_from_grid(g5, 2).pruned(1e-14);
  ASSERT_EQ(c.terms().size(), 1u);
  EXPECT_NEAR(c.coeff(Freq{})(0, 0).real(), 5.0, 1e-14);
}

TEST(SeriesFit, RoundTripRandomBandLimited) {
  Rng rng(4);
  for (int n : {2, 3}) {
    const Series s = random_hermitian_series(rng, n, 2, 3, 6, 1.0, 1.0);
    const Series back = fit_from_grid(sample_grid(s, 8), 3, true);
    EXPECT_LT(max_diff(back, s), 1e-12) << "n=" << n;
  }
}

TEST(SeriesFit, GridTooCoarse) {
  const auto g = sample_grid(Series::scalar(2, 1.0), 6);
  EXPECT_THROW(fit_from_grid(g, 3), PreconditionError);
}

TEST(SeriesProperties, Leibniz) {
  Rng rng(5);
  const Series a = random_hermitian_series(rng, 3, 2, 2, 4, 1.0, 1.0);
  const Series b = random_hermitian_series(rng, 3, 2, 2, 4, 1.0, 1.0);
  for (int axis = 0; axis < 3; ++axis) {
    const Series lhs = derive_x(multiply(a, b), axis);
    const Series rhs = multiply(derive_x(a, axis), b) + multiply(a, derive_x(b, axis));
    EXPECT_LT(max_diff(lhs, rhs), 1e-12);
  }
}

TEST(SeriesProperties, IntegralOfDerivativeVanishes) {
  Rng rng(6);
  const Series a = random_hermitian_series(rng, 3, 2, 3, 5, 1.0, 1.0);
  for (int axis = 0; axis < 3; ++axis) EXPECT_LT(integrate_torus(derive_x(a, axis)).norm(), 1e-15);
}

TEST(SeriesProperties, HermitianPreservedBySandwich) {
  Rng rng(7);
  const Series x = random_hermitian_series(rng, 2, 2, 2, 3, 1.0, 1.0);
  const Series q = random_sl2_field(rng, 2, 1, 2, 0.3);
  Series y = sandwich(q, x);
  EXPECT_NO_THROW(y.mark_hermitian());
  Series z = 0.5 * x + (-2.0) * y;
  EXPECT_NO_THROW(z.mark_hermitian());
  // Two derivatives are real-linear and keep c_{-k} = c_k^dagger.
  Series dd = derive_x(derive_x(x, 0), 1);
  EXPECT_NO_THROW(dd.mark_hermitian());
}

TEST(SeriesConstruction, RejectsNonHermitian) {
  Series::TermMap t;
  CMat a = CMat::Zero(2, 2);
  a(0, 1) = 1.0;
  t[Freq{}] = a;
  EXPECT_THROW(Series::from_terms(2, 2, 2, t, true), PreconditionError);
}

TEST(SeriesConstruction, PrunesZeros) {
  Series::TermMap t;
  t[Freq{1, 0}] = CMat::Zero(2, 2);
  t[Freq{}] = identity(2);
  EXPECT_EQ(Series::from_terms(2, 2, 2, t).terms().size(), 1u);
}

TEST(SeriesJson, RoundTrip) {
  Rng rng(8);
  const Series s = random_hermitian_series(rng, 3, 2, 2, 3, 1.0, 1.0);
  const auto j = to_json(s);
  EXPECT_EQ(j["n"], 3);
  const Series back = series_from_json(j, true);
  EXPECT_LT(max_diff(back, s), 1e-15);
}

TEST(SeriesJson, Malformed) {
  nlohmann::json j = {{"n", 2}, {"rows", 2}};
  EXPECT_THROW(series_from_json(j), PreconditionError);
}

TEST(SeriesFit, AdaptiveReachesTolerance) {
  auto f = [](const Point& x) -> CMat { return CMat::Constant(1, 1, std::exp(0.3 * std::cos(x[0]))); };
  const Series s = fit_adaptive(f, 2, 1e-13);
  Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    const Point x = random_point(rng, 2);
    EXPECT_NEAR(s.eval(x)(0, 0).real(), f(x)(0, 0).real(), 1e-13);
  }
}

TEST(SeriesExp, MatchesPointwiseExponential) {
  Series::TermMap t;
  Freq k1{}, k2{};
  k1[0] = 1;
  k2[1] = 2;
  k2[2] = -1;
  t[k1] = CMat::Constant(1, 1, cd(0.8, 0.3));
  t[k2] = CMat::Constant(1, 1, cd(-1.1, 0.5));
  const Series a = Series::from_terms(3, 1, 1, t);
  const Series e = exp_scalar(a);
  for (const Point& x : {Point{0.1, 0.2, 0.3}, Point{4.0, 1.5, 2.5}, Point{6.0, 0.0, 3.3}})
    EXPECT_LT(std::abs(e.eval(x)(0, 0) - std::exp(a.eval(x)(0, 0))), 1e-13);
  EXPECT_LT(std::abs(exp_scalar(Series::scalar(3, 0.0)).eval({1, 2, 3})(0, 0) - 1.0), 1e-15);
}
