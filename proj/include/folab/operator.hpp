#pragma once

// First-order operators L = P^a(x) d/dx^a + Q(x) on T^n, stored through their
// invariant data: principal coefficients S^a (L_prin(x,p) = S^a(x) p_a) and
// the subprincipal symbol L_sub. With P^a = -i S^a and
// Q = L_sub - (i/2) d_a S^a the operator is formally self-adjoint exactly
// when every S^a and L_sub is Hermitian-valued.

#include "folab/linalg.hpp"
#include "folab/series.hpp"

#include <algorithm>
#include <tuple>
#include <optional>

namespace folab {

class OperatorData {
 public:
  OperatorData() = default;

  int dim() const { return n_; }
  int size() const { return m_; }
  const std::vector<Series>& S() const { return S_; }
  const Series& S(int axis) const { return S_.at(axis); }
  const Series& Lsub() const { return Lsub_; }
  const std::optional<Series>& weight() const { return weight_; }
  bool checked() const { return checked_; }

  /// dS()[b][a] = d_b S^a.
  const std::vector<std::vector<Series>>& dS() const { return dS_; }

  /// Cutoff used for s^{-1/2} when this operator came out of weight
  /// conjugation; -1 otherwise.
  int weight_cutoff() const { return weight_cutoff_; }

  /// Largest frequency appearing in S, L_sub or the weight.
  int degree() const {
    int d = Lsub_.degree();
    for (const auto& s : S_) d = std::max(d, s.degree());
    if (weight_) d = std::max(d, weight_->degree());
    return d;
  }

  bool constant_coefficients() const {
    for (const auto& s : S_)
      if (!s.is_constant()) return false;
    if (!Lsub_.is_constant()) return false;
    return !weight_ || weight_->is_constant();
  }

  OperatorData without_weight() const {
    OperatorData o = *this;
    o.weight_.reset();
    return o;
  }

 private:
  friend OperatorData build_operator(std::vector<Series>, Series, std::optional<Series>, bool);
  friend OperatorData conjugate_weight(const OperatorData&, int);

  int n_ = 0;
  int m_ = 0;
  std::vector<Series> S_;
  Series Lsub_;
  std::optional<Series> weight_;
  std::vector<std::vector<Series>> dS_;
  bool checked_ = true;
  int weight_cutoff_ = -1;
};

/// Minimum of a real scalar series over a grid fine enough to resolve it.
inline double grid_min_real(const Series& s) {
  const int N = std::max(16, 4 * s.degree() + 2);
  const std::size_t total = grid_size(s.dim(), N);
  double mn = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < total; ++i)
    mn = std::min(mn, s.eval(grid_point(s.dim(), N, i))(0, 0).real());
  return mn;
}

/// Builds an operator from (S^1..S^n, L_sub[, weight]). With
/// `allow_unchecked` the Hermitian validation is skipped so that corrupted
/// inputs can be fed to the verification suite as negative controls.
inline OperatorData build_operator(std::vector<Series> S, Series Lsub,
                                   std::optional<Series> weight = std::nullopt,
                                   bool allow_unchecked = false) {
  const int n = static_cast<int>(S.size());
  if (n < 2 || n > kMaxDim) throw PreconditionError("operator dimension must be in [2, 4]");
  const int m = S[0].rows();
  if (m < 2) throw PreconditionError("system size m must be at least 2");
  for (auto& s : S) {
    if (s.dim() != n || s.rows() != m || s.cols() != m)
      throw ShapeError("principal coefficient has inconsistent shape");
    if (!s.hermitian()) s.mark_hermitian();
  }
  if (Lsub.dim() != n || Lsub.rows() != m || Lsub.cols() != m)
    throw ShapeError("subprincipal symbol has inconsistent shape");
  if (!allow_unchecked && !Lsub.hermitian()) Lsub.mark_hermitian();
  if (weight) {
    if (weight->dim() != n || weight->rows() != 1 || weight->cols() != 1)
      throw ShapeError("weight must be a scalar series on the same torus");
    if (!weight->hermitian()) weight->mark_hermitian();
    if (!(grid_min_real(*weight) > 0.0)) throw PreconditionError("weight is not strictly positive");
  }

  OperatorData op;
  op.n_ = n;
  op.m_ = m;
  op.S_ = std::move(S);
  op.Lsub_ = std::move(Lsub);
  op.weight_ = std::move(weight);
  op.checked_ = op.Lsub_.hermitian();
  op.dS_.assign(n, {});
  for (int b = 0; b < n; ++b)
    for (int a = 0; a < n; ++a) op.dS_[b].push_back(derive_x(op.S_[a], b));
  return op;
}

struct LocalCoefficients {
  std::vector<Series> P;  // P^a = -i S^a
  Series Q;               // Q = L_sub - (i/2) d_a S^a
};

inline Series divergence(const OperatorData& op) {
  Series div(op.dim(), op.size(), op.size());
  for (int a = 0; a < op.dim(); ++a) div = div + op.dS()[a][a];
  return div;
}

inline LocalCoefficients local_coefficients(const OperatorData& op) {
  LocalCoefficients lc;
  for (const auto& s : op.S()) lc.P.push_back(cd(0.0, -1.0) * s);
  lc.Q = op.Lsub() - cd(0.0, 0.5) * divergence(op);
  return lc;
}

/// Inverse of local_coefficients: S^a = i P^a, L_sub = Q + (i/2) d_a S^a.
inline OperatorData operator_from_local(const std::vector<Series>& P, const Series& Q,
                                        std::optional<Series> weight = std::nullopt,
                                        double herm_tol = 1e-10) {
  std::vector<Series> S;
  for (const auto& p : P) {
    Series s = cd(0.0, 1.0) * p;
    s.mark_hermitian(herm_tol);
    S.push_back(std::move(s));
  }
  Series div(Q.dim(), Q.rows(), Q.cols());
  for (int a = 0; a < static_cast<int>(S.size()); ++a) div = div + derive_x(S[a], a);
  Series lsub = Q + cd(0.0, 0.5) * div;
  lsub.mark_hermitian(herm_tol);
  return build_operator(std::move(S), std::move(lsub), std::move(weight));
}

inline CMat principal_symbol(const OperatorData& op, const Point& x, const Point& p) {
  if (static_cast<int>(p.size()) != op.dim()) throw ShapeError("momentum has wrong dimension");
  CMat l = CMat::Zero(op.size(), op.size());
  for (int a = 0; a < op.dim(); ++a) l += p[a] * op.S(a).eval(x);
  return l;
}

inline CMat subprincipal_symbol(const OperatorData& op, const Point& x) { return op.Lsub().eval(x); }

/// Full symbol S^a p_a + Q(x) of the local representation.
inline CMat full_symbol(const OperatorData& op, const Point& x, const Point& p) {
  return principal_symbol(op, x, p) + local_coefficients(op).Q.eval(x);
}

// ---------------------------------------------------------------------------
// Ellipticity / non-degeneracy certificates

struct EllipticityCertificate {
  bool elliptic = false;
  bool nondegenerate = false;
  bool odd_size_shortcut = false;
  bool det_sign_change = false;
  double min_abs_det = 0.0;
  double max_abs_det = 0.0;
  double min_norm = 0.0;
  double max_norm = 0.0;
  double min_singular = 0.0;  // smallest singular value after local refinement
  Point witness_x;  // location of the smallest |det| (or norm, if degenerate)
  Point witness_p;
};

/// Unit vectors on S^{n-1} from a hyperspherical angle grid with
/// `res` subdivisions per angle.
inline std::vector<Point> sphere_sample(int n, int res) {
  std::vector<Point> out;
  const int polar_angles = n - 2;
  std::vector<int> idx(polar_angles, 0);
  while (true) {
    for (int k = 0; k < res; ++k) {
      const double phi = 2.0 * kPi * (k + 0.5) / res;
      Point w(n);
      double sprod = 1.0;
      for (int a = 0; a < polar_angles; ++a) {
        const double th = kPi * idx[a] / res;
        w[a] = sprod * std::cos(th);
        sprod *= std::sin(th);
      }
      w[n - 2] = sprod * std::cos(phi);
      w[n - 1] = sprod * std::sin(phi);
      out.push_back(w);
    }
    int a = 0;
    while (a < polar_angles && ++idx[a] > res) idx[a++] = 0;
    if (a == polar_angles) break;
  }
  return out;
}

namespace detail {

inline CMat principal_at(const OperatorData& op, const Point& x, const Point& p) {
  CMat l = CMat::Zero(op.size(), op.size());
  for (int a = 0; a < op.dim(); ++a) l += p[a] * op.S(a).eval(x);
  return l;
}

inline double min_singular(const CMat& l) {
  return Eigen::JacobiSVD<CMat>(l).singularValues().minCoeff();
}

/// Pattern search for the smallest singular value of L_prin(x, p) on the
/// sphere bundle, starting at (x, p) with step h.
inline std::pair<double, std::pair<Point, Point>> refine_min_singular(const OperatorData& op, Point x, Point p,
                                                                      double h) {
  const int n = op.dim();
  const bool vary_x = !op.constant_coefficients();
  auto normalize = [n](Point& q) {
    double r = 0.0;
    for (int a = 0; a < n; ++a) r += q[a] * q[a];
    r = std::sqrt(r);
    for (int a = 0; a < n; ++a) q[a] /= r;
  };
  double best = min_singular(principal_at(op, x, p));
  while (h > 1e-10 && best > 0.0) {
    bool improved = false;
    for (int a = 0; a < 2 * n && !improved; ++a)
      for (double sgn : {1.0, -1.0}) {
        Point xs = x, ps = p;
        if (a < n) {
          ps[a] += sgn * h;
          normalize(ps);
        } else if (vary_x) {
          xs[a - n] += sgn * h;
        } else {
          continue;
        }
        const double v = min_singular(principal_at(op, xs, ps));
        if (v < best) {
          best = v;
          x = xs;
          p = ps;
          improved = true;
          break;
        }
      }
    if (!improved) h *= 0.5;
  }
  return {best, {x, p}};
}

}  // namespace detail

/// Samples det L_prin and |L_prin| over an x-grid times a momentum-sphere
/// grid, then refines the smallest singular value locally from the worst
/// samples. Ellipticity fails when the refined minimum singular value falls
/// below 1e-8 * max|L_prin|, when some sampled |det| falls below
/// 1e-8 * max|det| or when det takes both signs (then it vanishes somewhere
/// on the connected sphere bundle).
inline EllipticityCertificate check_ellipticity(const OperatorData& op, int resolution = 8) {
  if (resolution < 8) throw PreconditionError("ellipticity grid resolution must be >= 8");
  const int n = op.dim(), m = op.size();
  EllipticityCertificate cert;
  cert.odd_size_shortcut = (m % 2 == 1);

  const auto dirs = sphere_sample(n, resolution);
  const int Nx = op.constant_coefficients() ? 1 : resolution;
  const std::size_t total = grid_size(n, Nx);
  double min_det = std::numeric_limits<double>::infinity(), max_det = 0.0;
  double min_norm = std::numeric_limits<double>::infinity(), max_norm = 0.0;
  bool pos = false, neg = false;
  Point wx_det, wp_det, wx_norm, wp_norm;
  std::vector<std::tuple<double, Point, Point>> worst;
  constexpr std::size_t kSeeds = 4;
  for (std::size_t i = 0; i < total; ++i) {
    const Point x = grid_point(n, Nx, i);
    std::vector<CMat> s(n);
    for (int a = 0; a < n; ++a) s[a] = op.S(a).eval(x);
    for (const auto& w : dirs) {
      CMat l = CMat::Zero(m, m);
      for (int a = 0; a < n; ++a) l += w[a] * s[a];
      const double norm = op_norm(l);
      if (norm < min_norm) {
        min_norm = norm;
        wx_norm = x;
        wp_norm = w;
      }
      max_norm = std::max(max_norm, norm);
      const double sv = detail::min_singular(l);
      if (worst.size() < kSeeds || sv < std::get<0>(worst.back())) {
        if (worst.size() == kSeeds) worst.pop_back();
        worst.emplace_back(sv, x, w);
        std::sort(worst.begin(), worst.end(), [](const auto& a, const auto& b) { return std::get<0>(a) < std::get<0>(b); });
      }
      if (cert.odd_size_shortcut) continue;
      const double det = l.determinant().real();
      if (det > 0) pos = true;
      if (det < 0) neg = true;
      if (std::abs(det) < min_det) {
        min_det = std::abs(det);
        wx_det = x;
        wp_det = w;
      }
      max_det = std::max(max_det, std::abs(det));
    }
  }
  cert.min_norm = min_norm;
  cert.max_norm = max_norm;
  cert.min_singular = std::numeric_limits<double>::infinity();
  Point wx_sv, wp_sv;
  for (const auto& [sv, x, w] : worst) {
    const auto [v, at] = detail::refine_min_singular(op, x, w, kPi / resolution);
    if (v < cert.min_singular) {
      cert.min_singular = v;
      wx_sv = at.first;
      wp_sv = at.second;
    }
  }
  const bool singular = !(cert.min_singular > 1e-8 * max_norm);
  cert.nondegenerate = min_norm > 1e-8 * max_norm && max_norm > 0.0;
  if (cert.odd_size_shortcut) {
    // det(x,-p) = -det(x,p) for odd m: a zero is forced.
    cert.elliptic = false;
    cert.witness_x = wx_norm;
    cert.witness_p = wp_norm;
    return cert;
  }
  cert.min_abs_det = min_det;
  cert.max_abs_det = max_det;
  cert.det_sign_change = pos && neg;
  cert.elliptic = !cert.det_sign_change && !singular && min_det >= 1e-8 * max_det && max_det > 0.0;
  cert.witness_x = cert.nondegenerate ? wx_det : wx_norm;
  cert.witness_p = cert.nondegenerate ? wp_det : wp_norm;
  if (singular) {
    cert.witness_x = wx_sv;
    cert.witness_p = wp_sv;
  }
  return cert;
}

// ---------------------------------------------------------------------------
// Gauge transformations L -> Q^* L Q

enum class GaugeKind { GeneralLinear, SpecialLinear, Unitary, SpecialUnitary, PositiveScalar, PhaseScalar };

inline std::string to_string(GaugeKind k) {
  switch (k) {
    case GaugeKind::GeneralLinear: return "general-linear";
    case GaugeKind::SpecialLinear: return "special-linear";
    case GaugeKind::Unitary: return "unitary";
    case GaugeKind::SpecialUnitary: return "special-unitary";
    case GaugeKind::PositiveScalar: return "positive-scalar";
    case GaugeKind::PhaseScalar: return "phase-scalar";
  }
  return "unknown";
}

struct GaugeField {
  Series Q;
  GaugeKind kind = GaugeKind::GeneralLinear;
};

/// Validates the kind-specific constraints of a gauge field on a grid.
inline GaugeField make_gauge(Series Q, GaugeKind kind, double tol = 1e-10) {
  if (Q.rows() != Q.cols()) throw ShapeError("gauge field must be square");
  const int m = Q.rows();
  const int N = std::max(8, 2 * Q.degree() + 3);
  const std::size_t total = grid_size(Q.dim(), N);
  for (std::size_t i = 0; i < total; ++i) {
    const CMat q = Q.eval(grid_point(Q.dim(), N, i));
    const cd det = q.determinant();
    if (std::abs(det) < 1e-12) throw PreconditionError("gauge field is not invertible on the grid");
    const CMat eye = CMat::Identity(m, m);
    auto fail = [&](const char* what) {
      throw PreconditionError(std::string("gauge field violates ") + what + " constraint");
    };
    switch (kind) {
      case GaugeKind::GeneralLinear: break;
      case GaugeKind::SpecialLinear:
        if (std::abs(det - 1.0) > tol) fail("special-linear");
        break;
      case GaugeKind::Unitary:
        if ((q.adjoint() * q - eye).cwiseAbs().maxCoeff() > tol) fail("unitary");
        break;
      case GaugeKind::SpecialUnitary:
        if ((q.adjoint() * q - eye).cwiseAbs().maxCoeff() > tol || std::abs(det - 1.0) > tol)
          fail("special-unitary");
        break;
      case GaugeKind::PositiveScalar:
        if ((q - q(0, 0) * eye).cwiseAbs().maxCoeff() > tol || std::abs(q(0, 0).imag()) > tol ||
            q(0, 0).real() <= 0.0)
          fail("positive-scalar");
        break;
      case GaugeKind::PhaseScalar:
        if ((q - q(0, 0) * eye).cwiseAbs().maxCoeff() > tol || std::abs(std::abs(q(0, 0)) - 1.0) > tol)
          fail("phase-scalar");
        break;
    }
  }
  return {std::move(Q), kind};
}

/// Q^* L Q computed on coefficients: P' = Q^* P Q and
/// Q0' = Q^* P^a (d_a Q) + Q^* Q0 Q, repackaged as (S', L_sub').
inline OperatorData apply_gauge(const OperatorData& op, const GaugeField& g) {
  const Series& Q = g.Q;
  if (Q.rows() != op.size() || Q.dim() != op.dim()) throw ShapeError("gauge field shape mismatch");
  const Series Qa = Q.adjoint();
  const LocalCoefficients lc = local_coefficients(op);
  std::vector<Series> P;
  Series Q0 = multiply(multiply(Qa, lc.Q), Q);
  for (int a = 0; a < op.dim(); ++a) {
    P.push_back(multiply(multiply(Qa, lc.P[a]), Q));
    Q0 = Q0 + multiply(multiply(Qa, lc.P[a]), derive_x(Q, a));
  }
  double scale = std::max(1.0, Q.max_abs_coeff());
  return operator_from_local(P, Q0, op.weight(), 1e-10 * scale * scale);
}

/// Product gauge Q1 Q2 (apply Q1 first, then Q2).
inline GaugeField compose(const GaugeField& g1, const GaugeField& g2) {
  GaugeKind k = g1.kind == g2.kind ? g1.kind : GaugeKind::GeneralLinear;
  return {multiply(g1.Q, g2.Q), k};
}

/// s^{-1/2} L s^{-1/2}. s^{-1/2} is refit on a grid with cutoff
/// max(2 * degree, requested) grown until the pointwise fit error is below
/// 1e-13; the cutoff used is recorded on the result.
inline OperatorData conjugate_weight(const OperatorData& op, int cutoff = 0) {
  if (!op.weight()) throw PreconditionError("operator has no weight");
  const Series s = *op.weight();
  if (!(grid_min_real(s) > 0.0)) throw PreconditionError("weight is not strictly positive");
  const int K0 = std::max({1, 2 * op.degree(), cutoff});
  const Series w = fit_scalar_function(s, [](cd v) { return cd(1.0 / std::sqrt(v.real())); }, op.size(), 1e-13, K0,
                                       256, true);
  OperatorData out = apply_gauge(op.without_weight(), GaugeField{w, GaugeKind::PositiveScalar});
  out.weight_cutoff_ = s.is_constant() ? 0 : w.degree();
  return out;
}

// ---------------------------------------------------------------------------
// JSON: {"n":3,"m":2,"S":[series,...],"Lsub":series,"weight":series?}

inline nlohmann::json to_json(const OperatorData& op) {
  nlohmann::json j;
  j["n"] = op.dim();
  j["m"] = op.size();
  j["S"] = nlohmann::json::array();
  for (const auto& s : op.S()) j["S"].push_back(to_json(s));
  j["Lsub"] = to_json(op.Lsub());
  if (op.weight()) j["weight"] = to_json(*op.weight());
  return j;
}

inline OperatorData operator_from_json(const nlohmann::json& j, bool allow_unchecked = false) {
  try {
    const int n = j.at("n").get<int>();
    const int m = j.at("m").get<int>();
    std::vector<Series> S;
    for (const auto& js : j.at("S")) S.push_back(series_from_json(js));
    if (static_cast<int>(S.size()) != n) throw ShapeError("operator JSON: S must have n entries");
    Series lsub = series_from_json(j.at("Lsub"));
    std::optional<Series> weight;
    if (j.contains("weight") && !j.at("weight").is_null()) weight = series_from_json(j.at("weight"));
    OperatorData op = build_operator(std::move(S), std::move(lsub), std::move(weight), allow_unchecked);
    if (op.size() != m) throw ShapeError("operator JSON: m does not match coefficient shape");
    return op;
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError(std::string("malformed operator JSON: ") + e.what());
  }
}

}  // namespace folab
