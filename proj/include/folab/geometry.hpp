#pragma once

// Geometry carried by 2x2 principal symbols: the metric g^{ab} defined by
// det L_prin = -g^{ab} p_a p_b, Pauli matrices, the covariant subprincipal
// symbol, the electromagnetic potential, spinors and SU(2) gauge recovery.

#include "folab/parallel.hpp"
#include "folab/symbol.hpp"

namespace folab {

struct Signature {
  int pos = 0;
  int neg = 0;
  bool operator==(const Signature&) const = default;
};

inline Signature signature_of(const RMat& g, double tol = 1e-10) {
  Eigen::SelfAdjointEigenSolver<RMat> es(g);
  const RVec ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  Signature s;
  for (int i = 0; i < ev.size(); ++i) {
    if (std::abs(ev(i)) <= tol * scale) throw PreconditionError("metric has a zero eigenvalue");
    (ev(i) > 0 ? s.pos : s.neg)++;
  }
  return s;
}

/// Contravariant metric g^{ab}(x) stored as an n x n real-symmetric series.
class MetricField {
 public:
  MetricField() = default;
  explicit MetricField(Series ginv) : ginv_(std::move(ginv)) {}

  int dim() const { return ginv_.rows(); }
  const Series& series() const { return ginv_; }
  bool is_constant() const { return ginv_.is_constant(); }

  RMat upper(const Point& x) const { return ginv_.eval(x).real(); }

  RMat lower(const Point& x) const {
    const RMat g = upper(x);
    if (std::abs(g.determinant()) < 1e-12 * std::max(1.0, g.cwiseAbs().maxCoeff()))
      throw PreconditionError("metric is degenerate");
    return g.inverse();
  }

  /// det g_{ab} = 1 / det g^{ab}.
  double det_lower(const Point& x) const { return 1.0 / upper(x).determinant(); }

  Signature signature(const Point& x) const { return signature_of(upper(x)); }

  /// Signature on an N^n grid; throws if it changes.
  Signature constant_signature(int N = 8) const {
    const int n = ginv_.dim();
    const int Nx = is_constant() ? 1 : N;
    Signature first = signature(grid_point(n, Nx, 0));
    for (std::size_t i = 1; i < grid_size(n, Nx); ++i)
      if (!(signature(grid_point(n, Nx, i)) == first)) throw PreconditionError("metric signature jumps on the grid");
    return first;
  }

 private:
  Series ginv_;
};

inline void require_2x2(const OperatorData& op) {
  if (op.size() != 2) throw PreconditionError("this construction needs m = 2");
}

/// g^{ab} = (1/2)(tr(S^a S^b) - tr S^a tr S^b), exact on coefficients.
inline MetricField extract_metric(const OperatorData& op) {
  require_2x2(op);
  const int n = op.dim();
  std::vector<Series> tr;
  for (const auto& s : op.S()) tr.push_back(s.trace());
  std::vector<std::vector<Series>> blocks(n, std::vector<Series>(n));
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      blocks[a][b] = 0.5 * (multiply(op.S(a), op.S(b)).trace() - multiply(tr[a], tr[b]));
      blocks[b][a] = blocks[a][b];
    }
  Series g = assemble_blocks(blocks);
  g = g.pruned(1e-14 * std::max(1.0, g.max_abs_coeff()));
  g.mark_hermitian(1e-12);
  return MetricField(std::move(g));
}

/// |det L_prin(x,p) + g^{ab} p_a p_b|.
inline double metric_identity_residual(const OperatorData& op, const MetricField& g, const Point& x,
                                       const Point& p) {
  const Eigen::Map<const RVec> pv(p.data(), static_cast<Eigen::Index>(p.size()));
  const double quad = pv.dot(g.upper(x) * pv);
  return std::abs(principal_symbol(op, x, p).determinant() + quad);
}

// ---------------------------------------------------------------------------
// Pauli matrices and adjugation

inline CMat adjugate_matrix(const CMat& p) { return adjugate(p); }

inline Series adjugate_series(const Series& s) {
  Series out = s.map_coeffs([](const CMat& c) { return adjugate(c); });
  if (s.hermitian()) out.mark_hermitian();
  return out;
}

/// sigma^a(x) = (L_prin)_{p_a}(x) = S^a(x).
inline std::vector<CMat> pauli(const OperatorData& op, const Point& x) {
  require_2x2(op);
  std::vector<CMat> s;
  for (const auto& sa : op.S()) s.push_back(sa.eval(x));
  return s;
}

/// Max residual of sigma^a adj(sigma^b) + sigma^b adj(sigma^a) = -2 g^{ab} I.
/// With `trace_free_form` the adjugate is replaced by -sigma.
inline double pauli_relation_residual(const OperatorData& op, const MetricField& g, const Point& x,
                                      bool trace_free_form = false) {
  const auto s = pauli(op, x);
  const RMat gu = g.upper(x);
  const int n = op.dim();
  double res = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const CMat adj_a = trace_free_form ? CMat(-s[a]) : adjugate(s[a]);
      const CMat adj_b = trace_free_form ? CMat(-s[b]) : adjugate(s[b]);
      const CMat lhs = s[a] * adj_b + s[b] * adj_a;
      res = std::max(res, (lhs + 2.0 * gu(a, b) * identity(2)).cwiseAbs().maxCoeff());
    }
  return res;
}

inline bool is_trace_free(const OperatorData& op, double tol = 1e-12) {
  for (const auto& s : op.S())
    if (s.trace().max_abs_coeff() > tol) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Covariant subprincipal symbol
//
// With L = S^m p_m the bracket {L, adj L, L} is the quadratic form
// T^{mn} p_m p_n, T^{mn} = sum_c d_c S^m adj(S^n) S^c - S^c adj(S^n) d_c S^m,
// so (i/16) g_{ab} {..}_{p_a p_b} = (i/8) g_{ab} T^{ab}. In the trace-free 3D
// form adj(S^n) is replaced by -S^n.

enum class CsubForm { General, TraceFree };

inline CMat bracket_tensor_at(const SymbolPoint& sp, int mu, int nu, CsubForm form) {
  const CMat mid = form == CsubForm::General ? adjugate(sp.S[nu]) : CMat(-sp.S[nu]);
  CMat t = CMat::Zero(2, 2);
  for (int c = 0; c < sp.n; ++c) t += sp.dS[c][mu] * mid * sp.S[c] - sp.S[c] * mid * sp.dS[c][mu];
  return t;
}

inline void require_csub_input(const OperatorData& op, CsubForm form) {
  require_2x2(op);
  if (op.dim() != 3 && op.dim() != 4) throw PreconditionError("covariant subprincipal symbol needs n in {3, 4}");
  if (form == CsubForm::TraceFree && !is_trace_free(op))
    throw PreconditionError("trace-free form requested for a principal symbol with trace");
}

/// (i/8) g_{ab}(x) T^{ab}(x), evaluated pointwise.
inline CMat csub_correction_at(const OperatorData& op, const MetricField& g, const Point& x,
                               CsubForm form = CsubForm::General) {
  const SymbolPoint sp = SymbolEvaluator(op)(x);
  const RMat gl = g.lower(x);
  CMat c = CMat::Zero(2, 2);
  for (int a = 0; a < sp.n; ++a)
    for (int b = 0; b < sp.n; ++b) c += gl(a, b) * bracket_tensor_at(sp, a, b, form);
  return (kI / 8.0) * c;
}

inline CMat covariant_subprincipal_at(const OperatorData& op, const MetricField& g, const Point& x,
                                      CsubForm form = CsubForm::General) {
  require_csub_input(op, form);
  return op.Lsub().eval(x) + csub_correction_at(op, g, x, form);
}

inline CMat covariant_subprincipal_at(const OperatorData& op, const Point& x, CsubForm form = CsubForm::General) {
  return covariant_subprincipal_at(op, extract_metric(op), x, form);
}

/// Independent route: evaluates {L, adj L, L} as a generic generalized
/// bracket of symbol jets at p-shifted points and extracts the p-Hessian by
/// polarization (exact for a quadratic form), then contracts with g_{ab}.
inline CMat covariant_subprincipal_via_bracket(const OperatorData& op, const Point& x, const Point& p,
                                               CsubForm form = CsubForm::General) {
  require_csub_input(op, form);
  const MetricField g = extract_metric(op);
  const SymbolPoint sp = SymbolEvaluator(op)(x);
  const int n = sp.n;
  auto bracket = [&](const Point& q) {
    MatrixJet L;
    L.value = sp.principal(q);
    for (int a = 0; a < n; ++a) {
      L.dx.push_back(sp.principal_dx(a, q));
      L.dp.push_back(sp.S[a]);
    }
    MatrixJet M = L;
    auto mid = [form](const CMat& c) -> CMat { return form == CsubForm::General ? adjugate(c) : CMat(-c); };
    M.value = mid(L.value);
    for (auto& d : M.dx) d = mid(d);
    for (auto& d : M.dp) d = mid(d);
    return generalized_bracket(L, M, L);
  };
  const RMat gl = g.lower(x);
  CMat acc = CMat::Zero(2, 2);
  const CMat b0 = bracket(p);
  std::vector<CMat> b1(n);
  for (int a = 0; a < n; ++a) {
    Point q = p;
    q[a] += 1.0;
    b1[a] = bracket(q);
  }
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      Point q = p;
      q[a] += 1.0;
      q[b] += 1.0;
      acc += gl(a, b) * (bracket(q) - b1[a] - b1[b] + b0);
    }
  return sp.Lsub + (kI / 16.0) * acc;
}

/// Covariant lower metric as a series: exact when g is constant, otherwise
/// an adaptive fit of g_{ab}(x).
inline Series lower_metric_series(const MetricField& g, double tol = 1e-13) {
  const int n = g.series().dim();
  if (g.is_constant()) return Series::constant(n, g.lower(Point(n, 0.0)).cast<cd>());
  return fit_matrix_function(
      g.series(),
      [](const CMat& up) -> CMat {
        const RMat u = up.real();
        if (std::abs(u.determinant()) < 1e-12 * std::max(1.0, u.cwiseAbs().maxCoeff()))
          throw PreconditionError("metric is degenerate");
        return RMat(u.inverse()).cast<cd>();
      },
      tol, std::max(4, 2 * g.series().degree()), 64, true);
}

/// T^{mn} as series.
inline std::vector<std::vector<Series>> bracket_tensor(const OperatorData& op, CsubForm form) {
  const int n = op.dim();
  std::vector<Series> mid;
  for (int a = 0; a < n; ++a) mid.push_back(form == CsubForm::General ? adjugate_series(op.S(a)) : -op.S(a));
  std::vector<std::vector<Series>> T(n, std::vector<Series>(n, Series(n, 2, 2)));
  for (int mu = 0; mu < n; ++mu)
    for (int nu = 0; nu < n; ++nu)
      for (int c = 0; c < n; ++c) {
        const Series& d = op.dS()[c][mu];
        if (d.empty()) continue;
        T[mu][nu] = T[mu][nu] + multiply(multiply(d, mid[nu]), op.S(c)) - multiply(multiply(op.S(c), mid[nu]), d);
      }
  return T;
}

/// (i/8) g_{ab} T^{ab} as a Hermitian series (exact for constant metrics).
inline Series csub_correction(const OperatorData& op, CsubForm form = CsubForm::General) {
  require_csub_input(op, form);
  const int n = op.dim();
  const MetricField g = extract_metric(op);
  const auto T = bracket_tensor(op, form);
  Series out(n, 2, 2);
  bool any = false;
  for (const auto& row : T)
    for (const auto& t : row) any = any || !t.empty();
  if (any) {
    const Series gl = lower_metric_series(g);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        if (T[a][b].empty()) continue;
        Series gab = gl.map_coeffs([a, b](const CMat& c) { return CMat::Constant(1, 1, c(a, b)); });
        out = out + scale_by(gab, T[a][b]);
      }
    out = cd(0.0, 1.0 / 8.0) * out;
  }
  // Round-off symmetrization; the exact correction is Hermitian.
  out = 0.5 * (out + out.adjoint());
  out.mark_hermitian(1e-10);
  return out;
}

inline Series covariant_subprincipal(const OperatorData& op, CsubForm form = CsubForm::General) {
  Series c = op.Lsub() + csub_correction(op, form);
  c.mark_hermitian(1e-10);
  return c;
}

// ---------------------------------------------------------------------------
// Electromagnetic potential (n = 4): L_csub = sigma^a A_a

struct EmPotential {
  RVec A;
  double residual = 0.0;
  double condition = 0.0;
};

inline EmPotential em_potential_at(const OperatorData& op, const MetricField& g, const Point& x) {
  require_2x2(op);
  if (op.dim() != 4) throw PreconditionError("the electromagnetic potential is defined for n = 4");
  const CMat csub = covariant_subprincipal_at(op, g, x);
  const auto s = pauli(op, x);
  Eigen::Matrix4d M;
  for (int a = 0; a < 4; ++a) M.col(a) = pauli_coordinates(s[a]).real();
  const Eigen::Vector4d rhs = pauli_coordinates(csub).real();
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto sv = svd.singularValues();
  EmPotential out;
  out.condition = sv(0) / sv(3);
  if (!(sv(3) > 1e-10 * sv(0))) throw PreconditionError("Pauli matrices are not a basis (degenerate symbol)");
  const Eigen::Vector4d A = svd.solve(rhs);
  out.A = A;
  CMat rec = CMat::Zero(2, 2);
  for (int a = 0; a < 4; ++a) rec += A(a) * s[a];
  out.residual = (rec - csub).cwiseAbs().maxCoeff();
  if (out.residual > 1e-10 * std::max(1.0, csub.cwiseAbs().maxCoeff()))
    throw ToleranceError("electromagnetic potential reconstruction residual too large");
  return out;
}

inline EmPotential em_potential_at(const OperatorData& op, const Point& x) {
  return em_potential_at(op, extract_metric(op), x);
}

// ---------------------------------------------------------------------------
// Spinors and SU(2)

inline CMat su2_from_spinor(const CVec& xi) {
  if (xi.size() != 2) throw ShapeError("spinor must have two components");
  const double nrm = xi.norm();
  if (!(nrm > 0.0)) throw PreconditionError("zero spinor");
  CMat r(2, 2);
  r << xi(0), -std::conj(xi(1)), xi(1), std::conj(xi(0));
  return r / nrm;
}

inline bool is_special_unitary(const CMat& r, double tol = 1e-10) {
  if (r.rows() != 2 || r.cols() != 2) return false;
  return (r.adjoint() * r - identity(2)).cwiseAbs().maxCoeff() <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

/// Spinor of norm `scale` whose SU(2) matrix is R.
inline CVec spinor_from_su2(const CMat& r, double scale = 1.0) {
  if (!is_special_unitary(r)) throw PreconditionError("matrix is not special unitary");
  if (!(scale > 0.0)) throw PreconditionError("spinor scale must be positive");
  return scale * r.col(0);
}

/// O_ij with R^* s_i R = O_ij s_j.
inline Eigen::Matrix3d rotation_of(const CMat& r) {
  const auto s = pauli_basis();
  Eigen::Matrix3d o;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) o(i, j) = 0.5 * (r.adjoint() * s[i + 1] * r * s[j + 1]).trace().real();
  return o;
}

/// One of the two SU(2) lifts of O in SO(3) under rotation_of.
inline CMat su2_lift(const Eigen::Matrix3d& o) {
  // Unit quaternion (w, x, y, z) of O, then R = w I - i (x s1 + y s2 + z s3).
  const Eigen::Quaterniond q(o);
  const auto s = pauli_basis();
  CMat r = q.w() * s[0] - kI * (q.x() * s[1] + q.y() * s[2] + q.z() * s[3]);
  return r;
}

struct GaugeRecovery {
  int N = 0;
  std::vector<CMat> R;        // raster order, axis 0 slowest
  double max_residual = 0.0;  // max |S^a - R^* S_ref^a R|
  double min_continuity = 1.0;
  int seed_sign = 1;  // the whole field is determined up to a global -1
};

/// Recovers R(x) with L_prin = R^* L_ref,prin R on an N^3 grid by Procrustes
/// alignment of the Pauli frames and a continuity-chosen SU(2) lift. The
/// continuity pass is sequential in raster order.
inline GaugeRecovery recover_gauge(const OperatorData& op, const OperatorData& ref, int N = 16,
                                   double metric_tol = 1e-10) {
  for (const OperatorData* o : {&op, &ref}) {
    require_2x2(*o);
    if (o->dim() != 3) throw PreconditionError("gauge recovery works on 3D operators");
    if (!is_trace_free(*o)) throw PreconditionError("gauge recovery needs trace-free principal symbols");
  }
  const MetricField g = extract_metric(op), g0 = extract_metric(ref);
  GaugeRecovery out;
  out.N = N;
  const std::size_t total = grid_size(3, N);
  out.R.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    const Point x = grid_point(3, N, i);
    if ((g.upper(x) - g0.upper(x)).cwiseAbs().maxCoeff() > metric_tol)
      throw PreconditionError("operators have different metrics");
    Eigen::Matrix3d E, E0;
    for (int a = 0; a < 3; ++a) {
      E.row(a) = pauli_coordinates(op.S(a).eval(x)).tail<3>().real();
      E0.row(a) = pauli_coordinates(ref.S(a).eval(x)).tail<3>().real();
    }
    // E = E0 O, O in SO(3), by orthogonal Procrustes.
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(E0.transpose() * E, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Matrix3d O = svd.matrixU() * svd.matrixV().transpose();
    if (O.determinant() < 0.0) throw PreconditionError("Pauli frames have opposite orientation");
    CMat r = su2_lift(O);

    // Sign by continuity with the neighbour that precedes this point along
    // the fastest axis with a nonzero index; seeded near the identity.
    std::size_t nb = total;
    {
      std::size_t stride = 1, rem = i;
      for (int a = 2; a >= 0; --a) {
        if (rem % N != 0) {
          nb = i - stride;
          break;
        }
        rem /= N;
        stride *= N;
      }
    }
    if (nb == total) {
      if (r.trace().real() < 0.0) {
        r = -r;
      }
      out.seed_sign = 1;
    } else {
      const double ov = 0.5 * (out.R[nb].adjoint() * r).trace().real();
      if (ov < 0.0) r = -r;
      out.min_continuity = std::min(out.min_continuity, std::abs(ov));
    }
    out.R[i] = r;
    for (int a = 0; a < 3; ++a) {
      const CMat s = op.S(a).eval(x), s0 = ref.S(a).eval(x);
      out.max_residual = std::max(out.max_residual, (s - r.adjoint() * s0 * r).cwiseAbs().maxCoeff());
    }
  }
  if (out.min_continuity < 0.5)
    throw ToleranceError("SU(2) lift is discontinuous on the grid (operators not close enough)");
  if (out.max_residual > 1e-8) throw ToleranceError("recovered gauge does not reproduce the principal symbol");
  return out;
}

// ---------------------------------------------------------------------------
// 3D trace-free elliptic operators

inline void require_3d_dirac_type(const OperatorData& op) {
  require_2x2(op);
  if (op.dim() != 3) throw PreconditionError("operator must be three-dimensional");
  if (!is_trace_free(op)) throw PreconditionError("principal symbol must be trace-free");
  if (!check_ellipticity(op, 8).elliptic) throw PreconditionError("operator must be elliptic");
}

inline bool is_massless_dirac(const OperatorData& op, int N = 12) {
  require_3d_dirac_type(op);
  const MetricField g = extract_metric(op);
  const int Nx = op.constant_coefficients() ? 1 : N;
  double mx = 0.0;
  for (std::size_t i = 0; i < grid_size(3, Nx); ++i)
    mx = std::max(mx, op_norm(covariant_subprincipal_at(op, g, grid_point(3, Nx, i), CsubForm::TraceFree)));
  return mx <= 1e-10;
}

/// Mean over T^n of a smooth function by the trapezoid rule, doubling the
/// grid until two successive values agree to `tol` (exact for trigonometric
/// polynomials of degree < N).
inline double torus_mean(const std::function<double(const Point&)>& f, int n, int N0, double tol = 1e-14,
                         int Nmax = 256) {
  auto mean = [&](int N) {
    std::vector<double> v(grid_size(n, N));
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid_point(n, N, i));
    return tree_sum(v, 0.0) / double(v.size());
  };
  int N = std::max(1, N0);
  double prev = mean(N);
  while (true) {
    if (2 * N > Nmax) return prev;
    const double next = mean(2 * N);
    if (std::abs(next - prev) <= tol * std::max(1.0, std::abs(next))) return next;
    prev = next;
    N *= 2;
    if (std::pow(double(N), n) > 3e6) return prev;
  }
}

/// Integral over T^n of the real scalar series s(x)^k tr(F(x)) sqrt|det g_ab(x)|.
/// Exact on coefficients when the metric is constant.
inline double weighted_trace_integral(const Series& F, const MetricField& g, const Series& s, int power) {
  const int n = F.dim();
  const Point origin(n, 0.0);
  if (g.is_constant()) {
    const double vol = std::sqrt(std::abs(g.det_lower(origin)));
    Series w = Series::scalar(n, 1.0);
    for (int k = 0; k < power; ++k) w = multiply(w, s);
    const Series integrand = multiply(w, F.trace());
    return vol * integrate_torus(integrand)(0, 0).real();
  }
  const int deg = F.degree() + power * s.degree() + g.series().degree();
  const double mean = torus_mean(
      [&](const Point& x) {
        return std::pow(s.eval(x)(0, 0).real(), power) * F.eval(x).trace().real() *
               std::sqrt(std::abs(g.det_lower(x)));
      },
      n, 2 * deg + 2);
  return std::pow(2.0 * kPi, n) * mean;
}

/// S = (1/2) int s^2 tr(L_sub - L_csub) sqrt(det g) dx, labelled
/// "action via spectral identity" in reports.
inline double dirac_action_correction(const OperatorData& op, const Series& s) {
  require_3d_dirac_type(op);
  if (!(grid_min_real(s) > 0.0)) throw PreconditionError("weight must be positive");
  const MetricField g = extract_metric(op);
  const Series diff = -csub_correction(op, CsubForm::TraceFree);
  return 0.5 * weighted_trace_integral(diff, g, s, 2);
}

}  // namespace folab
