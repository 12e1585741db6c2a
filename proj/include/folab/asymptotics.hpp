#pragma once

// Weyl coefficients of N(lambda) = a lambda^n + b lambda^{n-1} + o(lambda^{n-1}):
// the general phase-space formulas, the closed-form 3D geometric formulas and
// empirical fits to computed spectra.
//
// Homogeneity reduces the {h < 1} integrals to the unit sphere:
//   a = mean_x (1/n) sum_j int_{S^{n-1}} h_j^{-n} dw,
//   b = - mean_x sum_j int_{S^{n-1}} F_j h_j^{-n} dw,
// with j over the positive branches and F_j the b-integrand.

#include "folab/geometry.hpp"
#include "folab/quadrature.hpp"
#include "folab/spectra.hpp"

#include <optional>

namespace folab {

struct QuadSpec {
  std::optional<SphereRuleSpec> sphere;  // default: 256 azimuthal (n = 2); 64 polar x 128 azimuthal (n = 3)
  int x_nodes0 = 8;                      // first torus grid (per axis) for variable coefficients
  int x_nodes_max = 32;
  double x_tol = 1e-12;                  // relative change at which the torus grid stops doubling
};

inline SphereRuleSpec default_sphere(int n) {
  if (n == 2) return {256, 1};
  if (n == 3) return {128, 64};
  return {32, 16};
}

struct AsymptoticCoefficients {
  double a = std::numeric_limits<double>::quiet_NaN();
  double b = std::numeric_limits<double>::quiet_NaN();
  double quad_error = 0.0;  // max of the a and b estimates
  double quad_error_a = 0.0;
  double quad_error_b = 0.0;
  std::string route;        // "general-microlocal", "threedim-geometric" or "empirical-fit"

  // general-microlocal
  int x_nodes = 0;
  std::size_t sphere_nodes = 0;
  SphereRuleSpec sphere{};
  double max_imag_residue = 0.0;  // largest |Im| of the b-integrand over the nodes

  // threedim-geometric
  double action = std::numeric_limits<double>::quiet_NaN();  // action via spectral identity
  double b_via_action = std::numeric_limits<double>::quiet_NaN();
  double decomposition_gap = 0.0;
  bool exact_series = false;

  // empirical-fit
  std::size_t samples = 0;
  double residual_rms = 0.0;
  double residual_max = 0.0;
  double b_spread = 0.0;  // standard deviation of the pointwise b estimates
  bool a_known = false;
  bool constant_term = false;
  double c0 = 0.0;  // fitted constant term
  double window_lo = 0.0, window_hi = 0.0, mollifier = 0.0;
};

namespace detail {

struct SpherePartial {
  double a = 0.0;
  double b = 0.0;
  double imag = 0.0;
};

/// Sphere integrals at one x over the positive branches.
inline SpherePartial sphere_partial(const SymbolPoint& sp, const QuadratureRule& rule, bool want_b) {
  const int n = sp.n, m = sp.m;
  std::vector<double> ta, tb;
  ta.reserve(rule.nodes.size());
  if (want_b) tb.reserve(rule.nodes.size());
  SpherePartial out;
  for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
    const Point& w = rule.nodes[q];
    const auto branches = eigen_branches(sp, w);
    double sa = 0.0, sb = 0.0;
    for (int c = m / 2; c < m; ++c) {
      const EigenBranch& br = branches[c];
      if (!(br.h > 0.0)) throw PreconditionError("positive branch is not positive (operator not elliptic)");
      const double hn = std::pow(br.h, -n);
      sa += hn;
      if (want_b) {
        const cd f = b_integrand_complex(sp, w, br);
        out.imag = std::max(out.imag, std::abs(f.imag()));
        sb += f.real() * hn;
      }
    }
    ta.push_back(rule.weights[q] * sa);
    if (want_b) tb.push_back(rule.weights[q] * sb);
  }
  out.a = tree_sum(ta, 0.0) / n;
  if (want_b) out.b = -tree_sum(tb, 0.0);
  return out;
}

/// Torus means of the sphere partials on an N^n grid, reusing the values
/// already computed on the N/2 grid.
class TorusSampler {
 public:
  TorusSampler(const SymbolEvaluator& eval, const QuadratureRule& rule, bool want_b)
      : eval_(eval), rule_(rule), want_b_(want_b) {}

  SpherePartial mean(int N) {
    const int n = eval_.op().dim();
    const std::size_t total = grid_size(n, N);
    std::vector<SpherePartial> vals(total);
    std::vector<char> known(total, 0);
    if (prev_N_ > 0 && N == 2 * prev_N_) {
      for (std::size_t i = 0; i < prev_.size(); ++i) {
        std::size_t r = i, idx = 0;
        std::vector<std::size_t> digits(n);
        for (int a = n - 1; a >= 0; --a) {
          digits[a] = r % prev_N_;
          r /= prev_N_;
        }
        for (int a = 0; a < n; ++a) idx = idx * N + 2 * digits[a];
        vals[idx] = prev_[i];
        known[idx] = 1;
      }
    }
    parallel_for(total, [&](std::size_t i) {
      if (known[i]) return;
      vals[i] = sphere_partial(eval_(grid_point(n, N, i)), rule_, want_b_);
    });
    std::vector<double> va(total), vb(total);
    SpherePartial out;
    for (std::size_t i = 0; i < total; ++i) {
      va[i] = vals[i].a;
      vb[i] = vals[i].b;
      out.imag = std::max(out.imag, vals[i].imag);
    }
    out.a = tree_sum(va, 0.0) / double(total);
    out.b = tree_sum(vb, 0.0) / double(total);
    prev_ = std::move(vals);
    prev_N_ = N;
    return out;
  }

 private:
  const SymbolEvaluator& eval_;
  const QuadratureRule& rule_;
  bool want_b_;
  std::vector<SpherePartial> prev_;
  int prev_N_ = 0;
};

inline void require_microlocal_input(const OperatorData& op) {
  if (op.size() % 2 != 0) throw PreconditionError("odd m: no elliptic operators (Weyl coefficients undefined)");
  if (op.dim() != 2 && op.dim() != 3) throw PreconditionError("Weyl coefficients are implemented for n in {2, 3}");
  if (!check_ellipticity(op, 8).elliptic) throw PreconditionError("operator is not elliptic");
}

}  // namespace detail

/// a and (optionally) b by the general phase-space formulas. quad_error adds
/// the change under torus-grid halving, the change under sphere-rule halving
/// (measured on the first torus grid) and 1e-14 |value|. The torus grid
/// doubles up to x_nodes_max; if it stops there the last change is reported.
inline AsymptoticCoefficients coeff_ab(const OperatorData& op, const QuadSpec& quad = {}, bool want_b = true) {
  detail::require_microlocal_input(op);
  const int n = op.dim();
  const SphereRuleSpec sspec = quad.sphere.value_or(default_sphere(n));
  const QuadratureRule rule = sphere_rule(n, sspec), half = sphere_rule(n, halved(sspec));
  const SymbolEvaluator eval(op, true);

  AsymptoticCoefficients r;
  r.route = "general-microlocal";
  r.sphere = sspec;
  r.sphere_nodes = rule.nodes.size();

  detail::TorusSampler fine(eval, rule, want_b), coarse(eval, half, want_b);
  const bool constant = op.constant_coefficients();
  int N = constant ? 1 : std::max(1, quad.x_nodes0);
  detail::SpherePartial cur = fine.mean(N);
  const detail::SpherePartial halved_sphere = coarse.mean(N);
  const double sphere_err_a = std::abs(cur.a - halved_sphere.a), sphere_err_b = std::abs(cur.b - halved_sphere.b);
  double err_a = 0.0, err_b = 0.0, imag = cur.imag;
  if (!constant) {
    err_a = err_b = std::numeric_limits<double>::infinity();
    while (2 * N <= quad.x_nodes_max) {
      const detail::SpherePartial next = fine.mean(2 * N);
      err_a = std::abs(next.a - cur.a);
      err_b = std::abs(next.b - cur.b);
      imag = std::max(imag, next.imag);
      cur = next;
      N *= 2;
      if (err_a <= quad.x_tol * std::max(1.0, std::abs(cur.a)) &&
          (!want_b || err_b <= quad.x_tol * std::max(1.0, std::abs(cur.b))))
        break;
    }
  }
  r.x_nodes = N;
  r.a = cur.a;
  r.quad_error_a = err_a + sphere_err_a + 1e-14 * std::abs(cur.a);
  if (want_b) {
    r.b = cur.b;
    r.quad_error_b = err_b + sphere_err_b + 1e-14 * std::abs(cur.b);
    r.max_imag_residue = imag;
  }
  r.quad_error = std::max(r.quad_error_a, r.quad_error_b);
  return r;
}

inline double coeff_a(const OperatorData& op, const QuadSpec& quad = {}) { return coeff_ab(op, quad, false).a; }

inline double coeff_b(const OperatorData& op, const QuadSpec& quad = {}) { return coeff_ab(op, quad, true).b; }

/// Closed-form 3D coefficients
///   a = (1/6 pi^2) int s^3 sqrt(det g_ab),  b = -(1/4 pi^2) int s^2 tr L_csub sqrt(det g_ab),
/// with g and L_csub taken from the unweighted operator, and the
/// decomposition b = S/(2 pi^2) - (1/4 pi^2) int s^2 tr L_sub sqrt(det g_ab)
/// through the action via spectral identity S, checked to 1e-10.
inline AsymptoticCoefficients coeff_ab_3d(const OperatorData& op) {
  const OperatorData bare = op.without_weight();
  require_3d_dirac_type(bare);
  const Series s = op.weight() ? *op.weight() : Series::scalar(3, 1.0);
  const MetricField g = extract_metric(bare);
  const Series one = Series::constant(3, identity(2), true);
  const Series csub = covariant_subprincipal(bare, CsubForm::TraceFree);

  AsymptoticCoefficients r;
  r.route = "threedim-geometric";
  r.exact_series = g.is_constant();
  // int s^3 sqrt(det g) = (1/2) int s^3 tr(I) sqrt(det g).
  r.a = weighted_trace_integral(one, g, s, 3) / 2.0 / (6.0 * kPi * kPi);
  r.b = -weighted_trace_integral(csub, g, s, 2) / (4.0 * kPi * kPi);
  r.action = dirac_action_correction(bare, s);
  r.b_via_action = r.action / (2.0 * kPi * kPi) - weighted_trace_integral(bare.Lsub(), g, s, 2) / (4.0 * kPi * kPi);
  r.decomposition_gap = std::abs(r.b - r.b_via_action);
  if (r.decomposition_gap > 1e-10 * std::max(1.0, std::abs(r.b)))
    throw ToleranceError("the two 3D decompositions of b disagree");
  r.quad_error = r.exact_series ? 1e-14 * std::max(std::abs(r.a), std::abs(r.b)) : 1e-12;
  r.quad_error_a = r.quad_error_b = r.quad_error;
  return r;
}

// ---------------------------------------------------------------------------
// Empirical fits

/// E[(lambda + w Z)^k] for standard normal Z: the Gaussian-mollified monomial.
inline double mollified_monomial(int k, double lambda, double w) {
  double sum = 0.0, binom = 1.0, dfact = 1.0;
  for (int i = 0; i <= k; ++i) {
    if (i > 0) binom = binom * (k - i + 1) / i;
    if (i % 2 == 0) {
      if (i >= 2) dfact *= (i - 1);
      sum += binom * std::pow(lambda, k - i) * std::pow(w, i) * dfact;
    }
  }
  return sum;
}

/// Fits samples N_i at lambda_i with the model a M_n + b M_{n-1} (+ c0),
/// where M_k are monomials mollified at width w (w = 0: plain monomials).
/// With `a_known` only b (and c0) are fitted. The constant c0 absorbs the
/// O(1) part of the remainder, which otherwise biases b by O(1/lambda) on
/// short windows.
inline AsymptoticCoefficients fit_counting_samples(int n, const std::vector<double>& lam, const std::vector<double>& N,
                                                   std::optional<double> a_known, double w,
                                                   bool constant_term = true) {
  const std::size_t count = lam.size();
  if (N.size() != count) throw ShapeError("fit: sample arrays differ in length");
  if (count < 20) throw PreconditionError("fit window too narrow (fewer than 20 samples)");
  std::vector<double> Mn(count), Mn1(count);
  double scale = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    Mn[i] = mollified_monomial(n, lam[i], w);
    Mn1[i] = mollified_monomial(n - 1, lam[i], w);
    scale = std::max(scale, std::abs(lam[i]));
  }
  AsymptoticCoefficients r;
  r.route = "empirical-fit";
  r.samples = count;
  r.a_known = a_known.has_value();
  r.mollifier = w;
  r.constant_term = constant_term;
  // Columns scaled by powers of the window end to keep the problem well
  // conditioned: unknowns a, b / scale, c0 / scale^n.
  const int cols = (a_known ? 1 : 2) + (constant_term ? 1 : 0);
  Eigen::MatrixXd A(count, cols);
  Eigen::VectorXd y(count);
  const double sn = std::pow(scale, n);
  for (std::size_t i = 0; i < count; ++i) {
    int c = 0;
    if (!a_known) A(i, c++) = Mn[i] / sn;
    A(i, c++) = Mn1[i] / std::pow(scale, n - 1);
    if (constant_term) A(i, c++) = 1.0;
    y(i) = (N[i] - (a_known ? *a_known * Mn[i] : 0.0)) / sn;
  }
  const Eigen::VectorXd sol = A.colPivHouseholderQr().solve(y);
  int c = 0;
  r.a = a_known ? *a_known : sol(c++);
  r.b = sol(c++) * scale;
  r.c0 = constant_term ? sol(c++) * sn : 0.0;

  std::vector<double> res2(count), est(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double res = N[i] - r.a * Mn[i] - r.b * Mn1[i] - r.c0;
    res2[i] = res * res;
    r.residual_max = std::max(r.residual_max, std::abs(res));
    est[i] = (N[i] - r.a * Mn[i] - r.c0) / Mn1[i];
  }
  r.residual_rms = std::sqrt(tree_sum(res2, 0.0) / double(count));
  const double mean = tree_sum(est, 0.0) / double(count);
  std::vector<double> dev(count);
  for (std::size_t i = 0; i < count; ++i) dev[i] = (est[i] - mean) * (est[i] - mean);
  r.b_spread = std::sqrt(tree_sum(dev, 0.0) / double(count));
  r.quad_error = std::numeric_limits<double>::quiet_NaN();
  return r;
}

struct FitWindow {
  double lo = 0.0;
  double hi = 0.0;
  double step = 0.05;
};

/// Empirical a, b from the mollified counting function of a computed
/// spectrum, sampled on the window with the given step.
inline AsymptoticCoefficients fit_empirical(const SpectrumResult& spec, std::optional<double> a_known,
                                            const FitWindow& win, double w, bool constant_term = true) {
  if (!(w > 0.0)) throw PreconditionError("mollifier width must be positive");
  if (!(win.lo > 0.0) || !(win.hi > win.lo) || !(win.step > 0.0)) throw PreconditionError("invalid fit window");
  if (win.hi + 5.0 * w > spec.trust_radius) throw PreconditionError("fit window plus 5w exceeds the trust radius");
  const int count = static_cast<int>(std::floor((win.hi - win.lo) / win.step + 1e-9)) + 1;
  if (count < 20) throw PreconditionError("fit window too narrow (fewer than 20 samples)");
  std::vector<double> lam(count), N(count);
  for (int i = 0; i < count; ++i) {
    lam[i] = win.lo + i * win.step;
    N[i] = mollified_counting(spec, lam[i], w);
  }
  AsymptoticCoefficients r = fit_counting_samples(spec.n, lam, N, a_known, w, constant_term);
  r.window_lo = win.lo;
  r.window_hi = win.hi;
  return r;
}

inline nlohmann::json to_json(const AsymptoticCoefficients& c) {
  nlohmann::json j;
  j["route"] = c.route;
  j["a"] = c.a;
  j["b"] = c.b;
  if (c.route == "general-microlocal") {
    j["quad_error"] = c.quad_error;
    j["quad_error_a"] = c.quad_error_a;
    j["quad_error_b"] = c.quad_error_b;
    j["x_nodes"] = c.x_nodes;
    j["sphere_nodes"] = c.sphere_nodes;
    j["sphere_azimuth"] = c.sphere.azimuth;
    j["sphere_polar"] = c.sphere.polar;
    j["max_imag_residue"] = c.max_imag_residue;
  } else if (c.route == "threedim-geometric") {
    j["quad_error"] = c.quad_error;
    j["exact_series"] = c.exact_series;
    j["action_via_spectral_identity"] = c.action;
    j["b_via_action"] = c.b_via_action;
    j["decomposition_gap"] = c.decomposition_gap;
  } else {
    j["samples"] = c.samples;
    j["a_known"] = c.a_known;
    j["constant_term"] = c.constant_term;
    j["c0"] = c.c0;
    j["window"] = {c.window_lo, c.window_hi};
    j["mollifier"] = c.mollifier;
    j["residual_rms"] = c.residual_rms;
    j["residual_max"] = c.residual_max;
    j["b_spread"] = c.b_spread;
  }
  return j;
}

}  // namespace folab
