#pragma once

// Invariant suite: every property that applies to a given operator, run
// with a fixed seed and reported as a pass/fail matrix.

#include "folab/asymptotics.hpp"
#include "folab/builders.hpp"
#include "folab/dirac4d.hpp"
#include "folab/propagator.hpp"

#include <chrono>

namespace folab {

struct InvariantResult {
  std::string module;
  std::string name;
  bool applicable = true;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string note;
  double seconds = 0.0;
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  int points = 20;
  QuadSpec quad = [] {
    QuadSpec q;
    q.sphere = SphereRuleSpec{24, 12};
    q.x_nodes_max = 16;
    return q;
  }();
};

struct VerifyReport {
  std::vector<InvariantResult> results;

  bool all_passed() const {
    for (const auto& r : results)
      if (r.applicable && !r.passed) return false;
    return true;
  }
  std::size_t failures() const {
    std::size_t f = 0;
    for (const auto& r : results) f += (r.applicable && !r.passed);
    return f;
  }
};

namespace detail {

class Suite {
 public:
  explicit Suite(VerifyReport& rep) : rep_(rep) {}

  /// Runs body (returning the measured value) and compares with tol.
  template <class Body>
  void check(const std::string& module, const std::string& name, double tol, Body&& body, std::string note = {}) {
    InvariantResult r{module, name, true, false, 0.0, tol, std::move(note)};
    const auto start = std::chrono::steady_clock::now();
    try {
      r.value = body();
      r.passed = r.value <= tol;
    } catch (const std::exception& e) {
      r.value = std::numeric_limits<double>::infinity();
      r.note = r.note.empty() ? e.what() : r.note + "; " + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (std::getenv("FOLAB_VERIFY_TRACE")) std::fprintf(stderr, "%s/%s %.3fs\n", module.c_str(), name.c_str(), r.seconds);
    rep_.results.push_back(std::move(r));
  }

  void skip(const std::string& module, const std::string& name, const std::string& why) {
    rep_.results.push_back({module, name, false, false, 0.0, 0.0, why});
  }

 private:
  VerifyReport& rep_;
};

inline double series_max_diff(const Series& a, const Series& b) { return (a - b).max_abs_coeff(); }

/// Random (x, p) with simple branches, at most `count` of them.
inline std::vector<std::pair<Point, Point>> branch_points(const OperatorData& op, Rng& rng, int count) {
  std::vector<std::pair<Point, Point>> out;
  const SymbolEvaluator eval(op);
  for (int tries = 0; tries < 10 * count && static_cast<int>(out.size()) < count; ++tries) {
    Point x = random_point(rng, op.dim()), p = random_direction(rng, op.dim());
    try {
      eigen_branches(eval(x), p);
      out.emplace_back(std::move(x), std::move(p));
    } catch (const Error&) {
    }
  }
  if (out.empty()) throw DegenerateBranchError("no sample point with simple branches");
  return out;
}

}  // namespace detail

inline VerifyReport verify_all(const OperatorData& op, const VerifyOptions& opt = {}) {
  VerifyReport rep;
  detail::Suite suite(rep);
  Rng rng(opt.seed);
  const int n = op.dim(), m = op.size();

  // torus-calculus
  suite.check("torus-calculus", "leibniz-rule", 1e-12, [&] {
    const Series a = op.S(0), b = op.Lsub();
    double worst = 0.0;
    for (int ax = 0; ax < n; ++ax)
      worst = std::max(worst, detail::series_max_diff(derive_x(multiply(a, b), ax),
                                                      multiply(derive_x(a, ax), b) + multiply(a, derive_x(b, ax))));
    return worst;
  });
  suite.check("torus-calculus", "derivative-mean-zero", 1e-14, [&] {
    double worst = 0.0;
    for (int ax = 0; ax < n; ++ax) worst = std::max(worst, op_norm(derive_x(op.Lsub(), ax).coeff(Freq{})));
    return worst;
  });

  // operator-model
  suite.check("operator-model", "lsub-hermitian", 1e-12, [&] { return detail::series_max_diff(op.Lsub(), op.Lsub().adjoint()); });
  const int Kself = n == 2 ? 4 : n == 3 ? 2 : 1;
  suite.check("operator-model", "galerkin-self-adjoint", 1e-12, [&] {
    const OperatorData plain = op.weight() ? conjugate_weight(op) : op;
    const Eigen::MatrixXcd M = galerkin_matrix(plain, Kself);
    return (M - M.adjoint()).cwiseAbs().maxCoeff();
  }, "K=" + std::to_string(Kself));
  suite.check("operator-model", "gauge-composition", 1e-10, [&] {
    const GaugeField g1 = make_gauge(Series::constant(n, random_unitary(rng, m)), GaugeKind::Unitary);
    const GaugeField g2 = m == 2 ? make_gauge(random_su2_field(rng, n, 1, 1, 0.3), GaugeKind::SpecialUnitary)
                                 : make_gauge(Series::constant(n, random_unitary(rng, m)), GaugeKind::Unitary);
    const OperatorData two = apply_gauge(apply_gauge(op, g1), g2);
    const OperatorData one = apply_gauge(op, compose(g1, g2));
    double worst = detail::series_max_diff(two.Lsub(), one.Lsub());
    for (int a = 0; a < n; ++a) worst = std::max(worst, detail::series_max_diff(two.S(a), one.S(a)));
    return worst;
  });
  const EllipticityCertificate cert = check_ellipticity(op, 8);
  if (m % 2 == 1) {
    suite.check("operator-model", "odd-size-determinant-sign", 0.0, [&] {
      double bad = 0.0;
      for (int i = 0; i < opt.points; ++i) {
        const Point x = random_point(rng, n), p = random_direction(rng, n);
        Point mp = p;
        for (double& c : mp) c = -c;
        const double d1 = principal_symbol(op, x, p).determinant().real();
        const double d2 = principal_symbol(op, x, mp).determinant().real();
        if (std::abs(d1 + d2) > 1e-10 * std::max(1.0, std::abs(d1))) bad += 1.0;
      }
      return bad;
    });
  }

  // symbol-analysis
  if (!cert.elliptic) {
    for (const char* name : {"reality", "b-integrand-rephasing", "homogeneity", "perturbation-derivatives"})
      suite.skip("symbol-analysis", name, "operator is not elliptic");
  } else {
    const SymbolEvaluator eval(op);
    std::vector<std::pair<Point, Point>> pts;
    try {
      pts = detail::branch_points(op, rng, opt.points);
    } catch (const Error&) {
    }
    auto over_branches = [&](auto&& f) {
      if (pts.empty()) throw DegenerateBranchError("no sample point with simple branches");
      double worst = 0.0;
      for (const auto& [x, p] : pts) {
        const SymbolPoint sp = eval(x);
        for (const auto& br : eigen_branches(sp, p)) worst = std::max(worst, f(sp, x, p, br));
      }
      return worst;
    };
    suite.check("symbol-analysis", "reality", 1e-10, [&] {
      return over_branches([](const SymbolPoint& sp, const Point&, const Point& p, const EigenBranch& br) {
        return std::max(std::abs(phase_f_complex(sp, p, br).imag()), std::abs(b_integrand_complex(sp, p, br).imag()));
      });
    });
    suite.check("symbol-analysis", "b-integrand-rephasing", 1e-10, [&] {
      return over_branches([&](const SymbolPoint& sp, const Point&, const Point& p, const EigenBranch& br) {
        RVec tx(n), tp(n);
        for (int a = 0; a < n; ++a) {
          tx(a) = uniform(rng);
          tp(a) = uniform(rng);
        }
        const EigenBranch g = regauge(br, uniform(rng, 0.0, 2.0 * kPi), tx, tp);
        return std::abs(b_integrand_complex(sp, p, g) - b_integrand_complex(sp, p, br));
      });
    });
    suite.check("symbol-analysis", "homogeneity", 1e-10, [&] {
      return over_branches([&](const SymbolPoint& sp, const Point&, const Point& p, const EigenBranch& br) {
        Point p2 = p;
        for (double& c : p2) c *= 2.5;
        const EigenBranch b2 = eigen_branch(sp, p2, br.j);
        return std::max(std::abs(b2.h - 2.5 * br.h) / std::abs(br.h),
                        std::abs(b_integrand(sp, p2, b2) - b_integrand(sp, p, br)));
      });
    });
    suite.check("symbol-analysis", "perturbation-derivatives", 1e-6, [&] {
      const double step = 1e-4;
      return over_branches([&](const SymbolPoint&, const Point& x, const Point& p, const EigenBranch& br) {
        double worst = 0.0;
        auto aligned = [&](const Point& xx, const Point& pp) {
          CVec v = eigen_branch(eval(xx), pp, br.j).v;
          const cd ov = br.v.dot(v);
          return CVec(v * (std::conj(ov) / std::abs(ov)));
        };
        for (int a = 0; a < n; ++a) {
          Point xp = x, xm = x, pp = p, pm = p;
          xp[a] += step;
          xm[a] -= step;
          pp[a] += step;
          pm[a] -= step;
          const CVec dx = (aligned(xp, p) - aligned(xm, p)) / (2 * step);
          const CVec dp = (aligned(x, pp) - aligned(x, pm)) / (2 * step);
          worst = std::max({worst, (dx - br.dv_x.col(a)).norm(), (dp - br.dv_p.col(a)).norm()});
        }
        return worst;
      });
    }, "central differences, step 1e-4");
  }

  // geometry
  const bool geometric = m == 2 && (n == 3 || n == 4);
  if (!geometric) {
    suite.skip("geometry", "metric-identity", "needs m = 2 and n in {3, 4}");
  } else {
    const MetricField g = extract_metric(op);
    suite.check("geometry", "metric-identity", 1e-10, [&] {
      double worst = 0.0;
      for (int i = 0; i < opt.points; ++i)
        worst = std::max(worst, metric_identity_residual(op, g, random_point(rng, n), random_direction(rng, n)));
      return worst;
    });
    if (n != 4) suite.skip("geometry", "special-linear-covariance", "conjugation covariance holds in dimension four");
    else suite.check("geometry", "special-linear-covariance", 1e-8, [&] {
      const Series R = random_sl2_field(rng, n, 1, 1, 0.2);
      const OperatorData moved = apply_gauge(op, make_gauge(R, GaugeKind::SpecialLinear));
      const MetricField gm = extract_metric(moved);
      double worst = 0.0;
      for (int i = 0; i < opt.points; ++i) {
        const Point x = random_point(rng, n);
        const CMat r = R.eval(x);
        worst = std::max(worst, op_norm(covariant_subprincipal_at(moved, gm, x) - r.adjoint() * covariant_subprincipal_at(op, g, x) * r));
      }
      return worst;
    });
    suite.check("geometry", "phase-law", 1e-8, [&] {
      const Series phi = random_real_scalar(rng, n, 1, 2, 0.4);
      const OperatorData moved = apply_gauge(op, make_gauge(phase_field(phi, 2), GaugeKind::PhaseScalar));
      // A scalar phase commutes with S^a, so the metric of `op` serves both.
      double worst = 0.0;
      for (int a = 0; a < n; ++a) worst = std::max(worst, detail::series_max_diff(moved.S(a), op.S(a)));
      for (int i = 0; i < opt.points; ++i) {
        const Point x = random_point(rng, n);
        Point grad(n);
        for (int a = 0; a < n; ++a) grad[a] = derive_x(phi, a).eval(x)(0, 0).real();
        worst = std::max(worst, op_norm(covariant_subprincipal_at(moved, g, x) -
                                        (covariant_subprincipal_at(op, g, x) + principal_symbol(op, x, grad))));
      }
      return worst;
    });
    suite.check("geometry", "scaling-law", 1e-8, [&] {
      Freq k{};
      k[0] = 1;
      const Series psi = Series::from_terms(
          n, 1, 1, {{k, CMat::Constant(1, 1, 0.1)}, {Series::negate(k), CMat::Constant(1, 1, 0.1)}}, true);
      const OperatorData moved = apply_gauge(op, make_gauge(positive_scalar_field(psi, 2), GaugeKind::PositiveScalar));
      const MetricField gm = extract_metric(moved);
      double worst = 0.0;
      for (int i = 0; i < opt.points; ++i) {
        const Point x = random_point(rng, n);
        const double e2 = std::exp(2.0 * psi.eval(x)(0, 0).real());
        worst = std::max(worst, op_norm(covariant_subprincipal_at(moved, gm, x) - e2 * covariant_subprincipal_at(op, g, x)));
      }
      return worst;
    });
    suite.check("geometry", "csub-momentum-independence", 1e-10, [&] {
      double worst = 0.0;
      for (int i = 0; i < 5; ++i) {
        const Point x = random_point(rng, n);
        const CMat ref = covariant_subprincipal_at(op, x);
        for (int t = 0; t < 5; ++t)
          worst = std::max(worst, op_norm(covariant_subprincipal_via_bracket(op, x, random_direction(rng, n)) - ref));
      }
      return worst;
    });
    if (n == 3 && is_trace_free(op)) {
      suite.check("geometry", "trace-free-form-agreement", 1e-10, [&] {
        double worst = 0.0;
        for (int i = 0; i < opt.points; ++i) {
          const Point x = random_point(rng, n);
          worst = std::max(worst, op_norm(covariant_subprincipal_at(op, x, CsubForm::General) -
                                          covariant_subprincipal_at(op, x, CsubForm::TraceFree)));
        }
        return worst;
      });
    }
  }

  // spectra
  if (!cert.elliptic || n > 3) {
    suite.skip("spectra", "truncation-stability", "needs an elliptic operator with n <= 3");
  } else {
    const int K = n == 2 ? 8 : 3, K2 = n == 2 ? K + 2 : K + 1;
    SpectrumResult a;
    std::string failure;
    try {
      a = spectrum(op, K);
    } catch (const std::exception& e) {
      failure = e.what();
    }
    if (!failure.empty()) {
      suite.check("spectra", "truncation-stability", 1e-6, [&]() -> double { throw Error(failure); });
    } else if (!(a.trust_radius > 0.0)) {
      suite.skip("spectra", "truncation-stability", "trust radius is empty at K=" + std::to_string(K));
    } else {
      suite.check("spectra", "truncation-stability", 1e-6, [&] {
        const SpectrumResult b = spectrum(op, K2);
        const double hi = a.trust_radius * (1.0 - 1e-9);
        return spectral_match(a.eigenvalues, b.eigenvalues, -hi, hi);
      }, "K=" + std::to_string(K) + " vs K=" + std::to_string(K2) + " inside the trust radius");
    }
    if (op.constant_coefficients() && !op.weight()) {
      suite.check("spectra", "galerkin-equals-lattice", 1e-12, [&] {
        const SpectrumResult a = spectrum(op, n == 2 ? 12 : 6);
        const SpectrumResult b = lattice_spectrum(op, a.trust_radius + 2.0);
        const double hi = a.trust_radius * (1.0 - 1e-9);
        return spectral_match(a.eigenvalues, b.eigenvalues, -hi, hi);
      });
    }
    if (op.weight()) {
      suite.check("spectra", "weighted-generalized-pair", 1e-6, [&] {
        const int Kw = n == 2 ? 12 : 4;
        const SpectrumResult a = spectrum(op, Kw), b = generalized_spectrum(op, Kw);
        const double hi = std::min(a.trust_radius, b.trust_radius) * (1.0 - 1e-9);
        return spectral_match(a.eigenvalues, b.eigenvalues, -hi, hi);
      });
    }
  }

  // asymptotics
  if (!cert.elliptic || n > 3 || m % 2 != 0) {
    suite.skip("asymptotics", "weyl-coefficients", "needs an elliptic operator with n in {2, 3}");
  } else {
    AsymptoticCoefficients base;
    suite.check("asymptotics", "imaginary-residue", 1e-10, [&] {
      base = coeff_ab(op, opt.quad);
      return base.max_imag_residue;
    });
    suite.check("asymptotics", "constant-unitary-invariance", 1e-10, [&] {
      const OperatorData moved = apply_gauge(op, make_gauge(Series::constant(n, random_unitary(rng, m)), GaugeKind::Unitary));
      const AsymptoticCoefficients c = coeff_ab(moved, opt.quad);
      return std::max(std::abs(c.a - base.a), std::abs(c.b - base.b));
    });
    suite.check("asymptotics", "sphere-rule-convergence", 0.0, [&] {
      QuadSpec fine = opt.quad;
      SphereRuleSpec s = opt.quad.sphere.value_or(default_sphere(n));
      s.azimuth *= 2;
      if (n == 3) s.polar *= 2;
      fine.sphere = s;
      const AsymptoticCoefficients c = coeff_ab(op, fine);
      return std::max(std::abs(c.a - base.a) - base.quad_error_a, std::abs(c.b - base.b) - base.quad_error_b);
    }, "excess of the doubled-rule change over quad_error");
    if (n == 3 && m == 2 && is_trace_free(op)) {
      suite.check("asymptotics", "route-consistency", 1e-4, [&] {
        const AsymptoticCoefficients g = coeff_ab_3d(op);
        return std::max(std::abs(g.a - base.a) / std::abs(g.a), std::abs(g.b - base.b) / std::max(1e-12, std::abs(g.b)));
      }, "relative difference, b compared against max(|b|, 1e-12)");
    }
  }

  // propagator
  if (!cert.elliptic) {
    suite.skip("propagator", "flow", "operator is not elliptic");
  } else {
    std::vector<std::pair<Point, Point>> seeds;
    try {
      seeds = detail::branch_points(op, rng, 2);
    } catch (const Error&) {
    }
    suite.check("propagator", "reversibility", 1e-7, [&] {
      if (seeds.empty()) throw DegenerateBranchError("no sample point with simple branches");
      double worst = 0.0;
      for (const auto& [y, q] : seeds) {
        const FlowResult f = hamiltonian_flow(op, 1, y, q, 2.0);
        const FlowResult b = hamiltonian_flow(op, 1, f.final_state().x, f.final_state().p, -2.0);
        for (int a = 0; a < n; ++a)
          worst = std::max({worst, std::abs(std::remainder(b.final_state().x[a] - y[a], 2.0 * kPi)),
                            std::abs(b.final_state().p[a] - q[a])});
      }
      return worst;
    });
    suite.check("propagator", "amplitude-homogeneity", 1e-8, [&] {
      if (seeds.empty()) throw DegenerateBranchError("no sample point with simple branches");
      const auto& [y, q] = seeds.front();
      Point q3 = q;
      for (double& c : q3) c *= 3.0;
      return op_norm(transport_amplitude(op, 1, y, q, 1.5) - transport_amplitude(op, 1, y, q3, 1.5));
    });
    suite.check("propagator", "initial-projection-trace", 1e-14, [&] {
      if (seeds.empty()) throw DegenerateBranchError("no sample point with simple branches");
      const auto& [y, q] = seeds.front();
      return std::abs(transport_amplitude(op, 1, y, q, 0.0).trace() - cd(1.0));
    });
  }

  // dirac4d
  if (!(n == 4 && m == 2)) {
    suite.skip("dirac4d", "dispersion", "needs m = 2 and n = 4");
  } else {
    suite.check("dirac4d", "adjugate-involution", 1e-10, [&] {
      const OperatorData back = adjugate_operator(adjugate_operator(op));
      double worst = detail::series_max_diff(back.Lsub(), op.Lsub());
      for (int a = 0; a < n; ++a) worst = std::max(worst, detail::series_max_diff(back.S(a), op.S(a)));
      return worst;
    });
    suite.check("dirac4d", "dispersion", 1e-10, [&] {
      const DiracOperator4 d = assemble_dirac(covariant_spec_of(op), 0.5);
      return dispersion_check(d, 500, opt.seed).max_residual;
    }, "mass 0.5, 500 samples");
  }
  return rep;
}

inline nlohmann::json to_json(const VerifyReport& rep) {
  nlohmann::json j;
  j["all_passed"] = rep.all_passed();
  j["failures"] = rep.failures();
  for (const auto& r : rep.results) {
    nlohmann::json e{{"module", r.module}, {"name", r.name}, {"applicable", r.applicable}};
    if (r.applicable) {
      e["passed"] = r.passed;
      e["value"] = std::isfinite(r.value) ? nlohmann::json(r.value) : nlohmann::json("inf");
      e["tolerance"] = r.tolerance;
    }
    if (!r.note.empty()) e["note"] = r.note;
    j["results"].push_back(e);
  }
  return j;
}

}  // namespace folab
