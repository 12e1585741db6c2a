#pragma once

// Eigen-data of the principal symbol and the bracket calculus built on it.
//
// Eigenvector derivatives come from first-order perturbation theory,
//   dv_j = sum_{l != j} v_l (v_l^* dL v_j) / (h_j - h_l),
// which is the derivative of the locally parallel (v^* dv = 0) family.

#include "folab/operator.hpp"

namespace folab {

/// Principal and subprincipal data at a single x, with exact x-derivatives.
struct SymbolPoint {
  int n = 0;
  int m = 0;
  std::vector<CMat> S;                // S^a(x)
  std::vector<std::vector<CMat>> dS;  // dS[b][a] = d_b S^a(x)
  CMat Lsub;

  CMat principal(const Point& p) const {
    CMat l = CMat::Zero(m, m);
    for (int a = 0; a < n; ++a) l += p[a] * S[a];
    return l;
  }

  /// (L_prin)_{x^b}(x, p).
  CMat principal_dx(int b, const Point& p) const {
    CMat l = CMat::Zero(m, m);
    for (int a = 0; a < n; ++a) l += p[a] * dS[b][a];
    return l;
  }
};

/// Evaluates SymbolPoints of an operator. With `include_weight`, the symbols
/// are those of s^{-1/2} L s^{-1/2}: S^a / s and L_sub / s.
class SymbolEvaluator {
 public:
  explicit SymbolEvaluator(const OperatorData& op, bool include_weight = false)
      : op_(op), weighted_(include_weight && op.weight().has_value()) {
    if (weighted_)
      for (int b = 0; b < op.dim(); ++b) ds_.push_back(derive_x(*op.weight(), b));
  }

  const OperatorData& op() const { return op_; }
  bool weighted() const { return weighted_; }

  SymbolPoint operator()(const Point& x) const {
    const int n = op_.dim();
    SymbolPoint sp;
    sp.n = n;
    sp.m = op_.size();
    sp.S.resize(n);
    sp.dS.assign(n, std::vector<CMat>(n));
    for (int a = 0; a < n; ++a) sp.S[a] = op_.S(a).eval(x);
    for (int b = 0; b < n; ++b)
      for (int a = 0; a < n; ++a) sp.dS[b][a] = op_.dS()[b][a].eval(x);
    sp.Lsub = op_.Lsub().eval(x);
    if (weighted_) {
      const double s = op_.weight()->eval(x)(0, 0).real();
      for (int b = 0; b < n; ++b) {
        const double dsb = ds_[b].eval(x)(0, 0).real();
        for (int a = 0; a < n; ++a) sp.dS[b][a] = sp.dS[b][a] / s - sp.S[a] * (dsb / (s * s));
      }
      for (int a = 0; a < n; ++a) sp.S[a] /= s;
      sp.Lsub /= s;
    }
    return sp;
  }

 private:
  const OperatorData& op_;
  bool weighted_;
  std::vector<Series> ds_;
};

struct EigenBranch {
  int j = 0;
  double h = 0.0;
  CVec v;
  RVec dh_x, dh_p;
  CMat dv_x, dv_p;  // m x n, columns are derivatives along each axis
};

/// Column of branch j in the ascending eigen-ordering.
inline int branch_column(int j, int m) {
  if (j == 0 || std::abs(j) > m / 2) throw PreconditionError("branch index out of range");
  return j < 0 ? j + m / 2 : j - 1 + m / 2;
}

/// All m branches ordered j = -m/2..-1, 1..m/2, with perturbation-theory
/// derivatives. gap_tol < 0 selects 1e-8 * |L_prin|.
inline std::vector<EigenBranch> eigen_branches(const SymbolPoint& sp, const Point& p,
                                               double gap_tol = -1.0) {
  const int n = sp.n, m = sp.m;
  if (static_cast<int>(p.size()) != n) throw ShapeError("momentum has wrong dimension");
  double pn = 0.0;
  for (double c : p) pn += c * c;
  if (pn == 0.0) throw PreconditionError("eigen branches need p != 0");

  const CMat L = sp.principal(p);
  const HermitianEigen eig = hermitian_eig(L);
  const RVec& h = eig.values;
  const CMat& V = eig.vectors;
  const double scale = std::max(std::abs(h(0)), std::abs(h(m - 1)));
  if (gap_tol < 0.0) gap_tol = 1e-8 * scale;
  for (int l = 0; l + 1 < m; ++l)
    if (h(l + 1) - h(l) <= gap_tol)
      throw DegenerateBranchError("principal symbol eigenvalues are not simple at this point");
  if (!(h(m / 2 - 1) < 0.0 && h(m / 2) > 0.0) || m % 2 != 0)
    throw PreconditionError("principal symbol does not have m/2 eigenvalues of each sign");

  std::vector<CMat> Ax(n), Ap(n);
  const CMat Vh = V.adjoint();
  for (int a = 0; a < n; ++a) {
    Ax[a] = Vh * sp.principal_dx(a, p) * V;
    Ap[a] = Vh * sp.S[a] * V;
  }

  std::vector<EigenBranch> out(m);
  for (int c = 0; c < m; ++c) {
    EigenBranch& br = out[c];
    br.j = c < m / 2 ? c - m / 2 : c - m / 2 + 1;
    br.h = h(c);
    br.v = V.col(c);
    br.dh_x.resize(n);
    br.dh_p.resize(n);
    br.dv_x = CMat::Zero(m, n);
    br.dv_p = CMat::Zero(m, n);
    for (int a = 0; a < n; ++a) {
      br.dh_x(a) = Ax[a](c, c).real();
      br.dh_p(a) = Ap[a](c, c).real();
      for (int l = 0; l < m; ++l) {
        if (l == c) continue;
        const double gap = h(c) - h(l);
        br.dv_x.col(a) += V.col(l) * (Ax[a](l, c) / gap);
        br.dv_p.col(a) += V.col(l) * (Ap[a](l, c) / gap);
      }
    }
  }
  return out;
}

inline EigenBranch eigen_branch(const SymbolPoint& sp, const Point& p, int j, double gap_tol = -1.0) {
  const int col = branch_column(j, sp.m);
  return eigen_branches(sp, p, gap_tol)[col];
}

/// v -> e^{i phi} v with the induced derivative transformation.
inline EigenBranch regauge(const EigenBranch& br, double phi, const RVec& phi_x, const RVec& phi_p) {
  EigenBranch out = br;
  const cd e = std::polar(1.0, phi);
  out.v = e * br.v;
  for (int a = 0; a < br.dv_x.cols(); ++a) {
    out.dv_x.col(a) = e * (br.dv_x.col(a) + kI * phi_x(a) * br.v);
    out.dv_p.col(a) = e * (br.dv_p.col(a) + kI * phi_p(a) * br.v);
  }
  return out;
}

/// Re-gauges so that the largest-modulus component of v is real positive;
/// the phase derivative is taken from the supplied derivative data.
inline EigenBranch largest_component_real_gauge(const EigenBranch& br) {
  Eigen::Index c = 0;
  br.v.cwiseAbs().maxCoeff(&c);
  const cd vc = br.v(c);
  const double theta = -std::arg(vc);
  const int n = static_cast<int>(br.dv_x.cols());
  RVec tx(n), tp(n);
  for (int a = 0; a < n; ++a) {
    tx(a) = -(br.dv_x(c, a) / vc).imag();
    tp(a) = -(br.dv_p(c, a) / vc).imag();
  }
  return regauge(br, theta, tx, tp);
}

// ---------------------------------------------------------------------------
// Poisson brackets of matrix-valued symbols

/// A matrix symbol with its first derivatives at one phase-space point.
struct MatrixJet {
  CMat value;
  std::vector<CMat> dx;
  std::vector<CMat> dp;
};

inline void check_jet(const MatrixJet& f, std::size_t n) {
  if (f.dx.size() != n || f.dp.size() != n) throw PreconditionError("symbol jet is missing derivative data");
}

/// {F, G} = F_{x^a} G_{p_a} - F_{p_a} G_{x^a}.
inline CMat poisson_bracket(const MatrixJet& f, const MatrixJet& g) {
  const std::size_t n = f.dx.size();
  check_jet(f, n);
  check_jet(g, n);
  CMat out = CMat::Zero(f.value.rows(), g.value.cols());
  for (std::size_t a = 0; a < n; ++a) out += f.dx[a] * g.dp[a] - f.dp[a] * g.dx[a];
  return out;
}

/// {F, G, H} = F_{x^a} G H_{p_a} - F_{p_a} G H_{x^a}.
inline CMat generalized_bracket(const MatrixJet& f, const MatrixJet& g, const MatrixJet& h) {
  const std::size_t n = f.dx.size();
  check_jet(f, n);
  check_jet(h, n);
  CMat out = CMat::Zero(f.value.rows(), h.value.cols());
  for (std::size_t a = 0; a < n; ++a) out += f.dx[a] * g.value * h.dp[a] - f.dp[a] * g.value * h.dx[a];
  return out;
}

inline MatrixJet vector_jet(const EigenBranch& br) {
  MatrixJet j;
  j.value = br.v;
  for (int a = 0; a < br.dv_x.cols(); ++a) {
    j.dx.push_back(br.dv_x.col(a));
    j.dp.push_back(br.dv_p.col(a));
  }
  return j;
}

inline MatrixJet adjoint_jet(const MatrixJet& f) {
  MatrixJet j;
  j.value = f.value.adjoint();
  for (const auto& d : f.dx) j.dx.push_back(d.adjoint());
  for (const auto& d : f.dp) j.dp.push_back(d.adjoint());
  return j;
}

/// Jet of L_prin - h^{(j)} I at (x, p).
inline MatrixJet shifted_principal_jet(const SymbolPoint& sp, const Point& p, const EigenBranch& br) {
  MatrixJet j;
  const CMat eye = CMat::Identity(sp.m, sp.m);
  j.value = sp.principal(p) - br.h * eye;
  for (int a = 0; a < sp.n; ++a) {
    j.dx.push_back(sp.principal_dx(a, p) - br.dh_x(a) * eye);
    j.dp.push_back(sp.S[a] - br.dh_p(a) * eye);
  }
  return j;
}

// Scalar brackets of eigen-data, written out for speed.

/// {v^*, L_prin - h, v}.
inline cd bracket_vLv(const SymbolPoint& sp, const Point& p, const EigenBranch& br) {
  const CMat A = sp.principal(p) - br.h * CMat::Identity(sp.m, sp.m);
  cd out = 0.0;
  for (int a = 0; a < sp.n; ++a) {
    out += br.dv_x.col(a).dot(A * br.dv_p.col(a));
    out -= br.dv_p.col(a).dot(A * br.dv_x.col(a));
  }
  return out;
}

/// {v^*, v}.
inline cd bracket_vv(const EigenBranch& br) {
  cd out = 0.0;
  for (int a = 0; a < br.dv_x.cols(); ++a)
    out += br.dv_x.col(a).dot(br.dv_p.col(a)) - br.dv_p.col(a).dot(br.dv_x.col(a));
  return out;
}

/// v^* {v, h}; identically zero in the parallel gauge.
inline cd connection_term(const EigenBranch& br) {
  cd out = 0.0;
  for (int a = 0; a < br.dv_x.cols(); ++a)
    out += br.v.dot(br.dv_x.col(a)) * br.dh_p(a) - br.v.dot(br.dv_p.col(a)) * br.dh_x(a);
  return out;
}

inline double real_checked(cd z, const char* what, double tol = 1e-10) {
  if (std::abs(z.imag()) > tol * std::max(1.0, std::abs(z.real())))
    throw ToleranceError(std::string(what) + " has a non-negligible imaginary part");
  return z.real();
}

/// f^{(j)} = v^* L_sub v - (i/2){v^*, L_prin - h, v} - i v^*{v, h}, in
/// whatever gauge `br` carries.
inline cd phase_f_complex(const SymbolPoint& sp, const Point& p, const EigenBranch& br) {
  const cd sub = br.v.dot(sp.Lsub * br.v);
  return sub - 0.5 * kI * bracket_vLv(sp, p, br) - kI * connection_term(br);
}

inline double phase_f(const SymbolPoint& sp, const Point& p, const EigenBranch& br) {
  return real_checked(phase_f_complex(sp, p, br), "phase f");
}

inline double phase_f(const OperatorData& op, int j, const Point& x, const Point& p) {
  const SymbolPoint sp = SymbolEvaluator(op)(x);
  return phase_f(sp, p, eigen_branch(sp, p, j));
}

/// Integrand of the second Weyl coefficient:
/// v^* L_sub v - (i/2){v^*, L_prin - h, v} + (i/(n-1)) h {v^*, v}.
inline cd b_integrand_complex(const SymbolPoint& sp, const Point& p, const EigenBranch& br) {
  const cd sub = br.v.dot(sp.Lsub * br.v);
  return sub - 0.5 * kI * bracket_vLv(sp, p, br) + kI / double(sp.n - 1) * br.h * bracket_vv(br);
}

inline double b_integrand(const SymbolPoint& sp, const Point& p, const EigenBranch& br) {
  return real_checked(b_integrand_complex(sp, p, br), "b integrand");
}

inline double b_integrand(const OperatorData& op, int j, const Point& x, const Point& p) {
  const SymbolPoint sp = SymbolEvaluator(op)(x);
  return b_integrand(sp, p, eigen_branch(sp, p, j));
}

/// -i {v^*, v}: trace of the subprincipal symbol of U^{(j)}(0).
inline double curvature_trace(const EigenBranch& br) {
  return real_checked(-kI * bracket_vv(br), "curvature trace");
}

inline double curvature_trace(const OperatorData& op, int j, const Point& x, const Point& p) {
  const SymbolPoint sp = SymbolEvaluator(op)(x);
  return curvature_trace(eigen_branch(sp, p, j));
}

}  // namespace folab
