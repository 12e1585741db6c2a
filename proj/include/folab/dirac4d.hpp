#pragma once

// Covariant description of 2x2 operators on T^4, the adjugate operator and
// the 4x4 massive Dirac operator [[L, m I], [m I, Adj L]].

#include "folab/geometry.hpp"

#include <random>

namespace folab {

/// The pair (L_prin, L_csub): principal coefficients S^a and the covariant
/// subprincipal symbol.
struct CovariantOperatorSpec {
  std::vector<Series> S;
  Series Lcsub;
};

/// Checks n = 4, m = 2, Hermitian data and a Lorentzian metric of signature
/// (3, 1). For 2x2 symbols det g^{ab} = -det(Pauli coordinates of S^a)^2, so
/// the signature check also certifies non-degeneracy.
inline MetricField validate_covariant_spec(const CovariantOperatorSpec& spec) {
  if (spec.S.size() != 4) throw PreconditionError("covariant spec needs four principal coefficients");
  for (const auto& s : spec.S)
    if (s.dim() != 4 || s.rows() != 2 || s.cols() != 2) throw ShapeError("principal coefficients must be 2x2 on T^4");
  if (spec.Lcsub.dim() != 4 || spec.Lcsub.rows() != 2 || spec.Lcsub.cols() != 2)
    throw ShapeError("covariant subprincipal symbol must be 2x2 on T^4");
  const OperatorData prin = build_operator(spec.S, Series(4, 2, 2));
  const MetricField g = extract_metric(prin);
  if (!(g.constant_signature() == Signature{3, 1})) throw PreconditionError("metric is not Lorentzian (3, 1)");
  return g;
}

/// Op(L_prin, L_csub): L_sub = L_csub - (i/16) g_{ab} {L_prin, adj L_prin, L_prin}_{p_a p_b}.
inline OperatorData op_from_covariant(const CovariantOperatorSpec& spec) {
  validate_covariant_spec(spec);
  Series Lcsub = spec.Lcsub;
  Lcsub.mark_hermitian();
  const OperatorData prin = build_operator(spec.S, Series(4, 2, 2));
  Series Lsub = Lcsub - csub_correction(prin, CsubForm::General);
  Lsub.mark_hermitian(1e-10);
  return build_operator(spec.S, std::move(Lsub));
}

inline CovariantOperatorSpec covariant_spec_of(const OperatorData& op) {
  if (op.dim() != 4) throw PreconditionError("covariant spec needs n = 4");
  return {op.S(), covariant_subprincipal(op, CsubForm::General)};
}

/// Adj L = Op(adj L_prin, adj L_csub).
inline OperatorData adjugate_operator(const OperatorData& op) {
  require_2x2(op);
  const CovariantOperatorSpec spec = covariant_spec_of(op);
  CovariantOperatorSpec adj;
  for (const auto& s : spec.S) adj.S.push_back(adjugate_series(s));
  adj.Lcsub = adjugate_series(spec.Lcsub);
  return op_from_covariant(adj);
}

struct DiracOperator4 {
  OperatorData L;
  OperatorData adjL;
  double mass = 0.0;
  OperatorData full;  // 4x4 block operator

  /// [[L_prin, m I], [m I, adj L_prin]] at (x, p).
  CMat principal_with_mass(const Point& x, const Point& p) const {
    const CMat P = principal_symbol(full, x, p);
    CMat out = P;
    out.block(0, 2, 2, 2) = mass * identity(2);
    out.block(2, 0, 2, 2) = mass * identity(2);
    return out;
  }

  /// Principal plus subprincipal symbol of the block operator.
  CMat full_symbol(const Point& x, const Point& p) const {
    return principal_symbol(full, x, p) + full.Lsub().eval(x);
  }
};

inline DiracOperator4 assemble_dirac(const CovariantOperatorSpec& spec, double mass) {
  if (!(mass >= 0.0)) throw PreconditionError("mass must be non-negative");
  DiracOperator4 d;
  d.L = op_from_covariant(spec);
  d.adjL = adjugate_operator(d.L);
  d.mass = mass;
  std::vector<Series> S;
  for (int a = 0; a < 4; ++a) {
    const Series zero(4, 2, 2);
    S.push_back(assemble_blocks({{d.L.S(a), zero}, {zero, d.adjL.S(a)}}));
  }
  const Series mI = Series::constant(4, mass * identity(2), true);
  Series Lsub = assemble_blocks({{d.L.Lsub(), mI}, {mI, d.adjL.Lsub()}});
  Lsub.mark_hermitian(1e-10);
  d.full = build_operator(std::move(S), std::move(Lsub));
  return d;
}

struct DispersionReport {
  std::size_t samples = 0;
  double max_residual = 0.0;           // |det - (g p p + m^2)^2|
  double max_relative_residual = 0.0;  // residual / max(1, (g p p + m^2)^2)
};

/// Klein-Gordon factorization: det [[P, m I], [m I, adj P]] = (det P - m^2)^2
/// with det P = -g^{ab} p_a p_b, checked at random (x, p) with |p| <= 1.
inline DispersionReport dispersion_check(const DiracOperator4& d, std::size_t samples, std::uint64_t seed = 1) {
  const MetricField g = extract_metric(d.L);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, 2.0 * kPi), up(-1.0, 1.0);
  DispersionReport r;
  r.samples = samples;
  for (std::size_t i = 0; i < samples; ++i) {
    Point x(4), p(4);
    for (int a = 0; a < 4; ++a) {
      x[a] = ux(rng);
      p[a] = up(rng);
    }
    const Eigen::Map<const RVec> pv(p.data(), 4);
    const double quad = pv.dot(g.upper(x) * pv);
    const double expect = (quad + d.mass * d.mass) * (quad + d.mass * d.mass);
    const double res = std::abs(d.principal_with_mass(x, p).determinant() - expect);
    r.max_residual = std::max(r.max_residual, res);
    r.max_relative_residual = std::max(r.max_relative_residual, res / std::max(1.0, std::abs(expect)));
  }
  return r;
}

inline nlohmann::json to_json(const DiracOperator4& d) {
  return {{"L", to_json(d.L)}, {"adjL", to_json(d.adjL)}, {"mass", d.mass}};
}

inline nlohmann::json to_json(const DispersionReport& r) {
  return {{"samples", r.samples}, {"max_residual", r.max_residual}, {"max_relative_residual", r.max_relative_residual}};
}

}  // namespace folab
