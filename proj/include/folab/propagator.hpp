#pragma once

// Hamiltonian trajectories of an eigenvalue branch, the phase accumulated
// along them and the leading amplitude of the branch propagator.
//
// The flow is integrated for the unit momentum p / |q|; x(t) does not depend
// on |q|, p(t) scales with it and f is homogeneous of degree zero. The
// eigenvector is carried along as part of the ODE state,
//   v' = {v, h} = v_x . h_p - v_p . h_x,
// with derivatives from perturbation theory, so v stays in the parallel gauge.

#include "folab/parallel.hpp"
#include "folab/symbol.hpp"

#include <fstream>
#include <random>

namespace folab {

struct TrajectoryState {
  double t = 0.0;
  Point x;
  Point p;
  double phase = 0.0;  // integral of f along the path
  CVec v;              // transported unit eigenvector
};

struct FlowOptions {
  double rtol = 1e-10;
  double atol = 1e-10;
  double drift_tol = 1e-9;  // bound on |h(t) - h(0)| / |h(0)|
  double min_overlap = 0.99;
  double initial_step = 1e-2;
  double min_step = 1e-12;
  double max_step = 0.5;
  std::optional<double> fixed_step;
  std::size_t max_steps = 1000000;
  std::optional<std::uint64_t> gauge_scramble_seed;  // random eigensolver phases
};

struct FlowResult {
  int j = 0;
  double momentum_scale = 1.0;
  double h0 = 0.0;
  double max_drift = 0.0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::vector<TrajectoryState> path;

  const TrajectoryState& final_state() const { return path.back(); }
};

namespace detail {

inline double wrap_angle(double x) {
  double r = std::fmod(x, 2.0 * kPi);
  if (r < 0.0) r += 2.0 * kPi;
  return r;
}

inline double norm2(const Point& p) {
  double s = 0.0;
  for (double c : p) s += c * c;
  return std::sqrt(s);
}

/// Flat real state (x, p, phase, Re v, Im v).
struct FlowState {
  int n = 0;
  int m = 0;
  Eigen::VectorXd y;

  Point x() const { return Point(y.data(), y.data() + n); }
  Point p() const { return Point(y.data() + n, y.data() + 2 * n); }
  double phase() const { return y(2 * n); }
  CVec v() const {
    CVec out(m);
    for (int i = 0; i < m; ++i) out(i) = cd(y(2 * n + 1 + i), y(2 * n + 1 + m + i));
    return out;
  }
  void set_v(const CVec& v) {
    for (int i = 0; i < m; ++i) {
      y(2 * n + 1 + i) = v(i).real();
      y(2 * n + 1 + m + i) = v(i).imag();
    }
  }
};

class BranchField {
 public:
  BranchField(const OperatorData& op, int j, std::optional<std::uint64_t> scramble)
      : eval_(op, true), j_(j) {
    if (scramble) rng_.emplace(*scramble);
  }

  EigenBranch branch(const Point& x, const Point& p) {
    const SymbolPoint sp = eval_(x);
    EigenBranch br = eigen_branch(sp, p, j_);
    if (rng_) {
      const double phi = std::uniform_real_distribution<double>(0.0, 2.0 * kPi)(*rng_);
      br = regauge(br, phi, RVec::Zero(sp.n), RVec::Zero(sp.n));
    }
    last_f_ = phase_f(sp, p, br);
    return br;
  }

  double last_f() const { return last_f_; }

  /// Time derivative of the flat state.
  Eigen::VectorXd rhs(const FlowState& s) {
    const int n = s.n, m = s.m;
    const EigenBranch br = branch(s.x(), s.p());
    const CVec v = s.v();
    const cd align = br.v.dot(v);  // v = align * br.v in the local parallel gauge
    Eigen::VectorXd d(s.y.size());
    CVec dv = CVec::Zero(m);
    for (int a = 0; a < n; ++a) {
      d(a) = br.dh_p(a);
      d(n + a) = -br.dh_x(a);
      dv += br.dv_x.col(a) * br.dh_p(a) - br.dv_p.col(a) * br.dh_x(a);
    }
    d(2 * n) = last_f_;
    dv *= align;
    for (int i = 0; i < m; ++i) {
      d(2 * n + 1 + i) = dv(i).real();
      d(2 * n + 1 + m + i) = dv(i).imag();
    }
    return d;
  }

 private:
  SymbolEvaluator eval_;
  int j_;
  std::optional<std::mt19937_64> rng_;
  double last_f_ = 0.0;
};

}  // namespace detail

/// Adaptive Runge-Kutta-Fehlberg 4(5) integration of x' = h_p, p' = -h_x for
/// branch j from (y, q), together with the phase integral of f and the
/// transported eigenvector. Steps are rejected on local error, on drift of
/// h beyond drift_tol and when consecutive eigenvector overlaps drop below
/// min_overlap. Negative t_final integrates backwards.
inline FlowResult hamiltonian_flow(const OperatorData& op, int j, const Point& y, const Point& q, double t_final,
                                   const FlowOptions& opt = {}) {
  const int n = op.dim(), m = op.size();
  if (static_cast<int>(y.size()) != n || static_cast<int>(q.size()) != n)
    throw ShapeError("flow start point has wrong dimension");
  const double scale = detail::norm2(q);
  if (scale == 0.0) throw PreconditionError("flow needs q != 0");

  detail::BranchField field(op, j, opt.gauge_scramble_seed);
  detail::FlowState s{n, m, Eigen::VectorXd::Zero(2 * n + 1 + 2 * m)};
  for (int a = 0; a < n; ++a) {
    s.y(a) = detail::wrap_angle(y[a]);
    s.y(n + a) = q[a] / scale;
  }
  EigenBranch br0 = field.branch(s.x(), s.p());
  s.set_v(br0.v);

  FlowResult r;
  r.j = j;
  r.momentum_scale = scale;
  r.h0 = br0.h;
  auto record = [&](double t) {
    TrajectoryState st;
    st.t = t;
    st.x = s.x();
    st.p = s.p();
    for (double& c : st.p) c *= scale;
    st.phase = s.phase();
    st.v = s.v();
    r.path.push_back(std::move(st));
  };
  record(0.0);
  if (t_final == 0.0) return r;

  // Fehlberg tableau.
  static constexpr double A[6][5] = {{0, 0, 0, 0, 0},
                                     {0.25, 0, 0, 0, 0},
                                     {3.0 / 32.0, 9.0 / 32.0, 0, 0, 0},
                                     {1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0, 0},
                                     {439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0},
                                     {-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0}};
  static constexpr double b5[6] = {16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0};
  static constexpr double b4[6] = {25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -0.2, 0.0};

  const double dir = t_final > 0.0 ? 1.0 : -1.0;
  const double T = std::abs(t_final);
  double t = 0.0;
  double dt = opt.fixed_step ? *opt.fixed_step : std::min(opt.initial_step, opt.max_step);
  if (!(dt > 0.0)) throw PreconditionError("flow step must be positive");

  std::vector<Eigen::VectorXd> k(6);
  while (t < T) {
    if (r.accepted + r.rejected >= opt.max_steps) throw ToleranceError("flow exceeded the step budget");
    const double step = std::min(dt, T - t);
    const double hs = dir * step;
    detail::FlowState stage = s;
    for (int i = 0; i < 6; ++i) {
      stage.y = s.y;
      for (int l = 0; l < i; ++l) stage.y += hs * A[i][l] * k[l];
      k[i] = field.rhs(stage);
    }
    Eigen::VectorXd y5 = s.y, y4 = s.y;
    for (int i = 0; i < 6; ++i) {
      y5 += hs * b5[i] * k[i];
      y4 += hs * b4[i] * k[i];
    }
    double err = 0.0;
    for (Eigen::Index i = 0; i < y5.size(); ++i)
      err = std::max(err, std::abs(y5(i) - y4(i)) / (opt.atol + opt.rtol * std::max(std::abs(y5(i)), std::abs(s.y(i)))));

    detail::FlowState next{n, m, y5};
    bool ok = opt.fixed_step || err <= 1.0;
    EigenBranch br;
    if (ok) {
      br = field.branch(next.x(), next.p());
      const cd overlap = br.v.dot(next.v());
      const double consecutive = std::abs(s.v().dot(br.v));
      const double drift = std::abs(br.h - r.h0) / std::abs(r.h0);
      if (consecutive < opt.min_overlap || (!opt.fixed_step && drift > opt.drift_tol)) {
        ok = false;
        err = std::max(err, 2.0);
      } else {
        // Project back onto the eigenline, keeping the transported phase.
        next.set_v(br.v * (overlap / std::abs(overlap)));
        r.max_drift = std::max(r.max_drift, drift);
      }
    }
    if (ok) {
      for (int a = 0; a < n; ++a) next.y(a) = detail::wrap_angle(next.y(a));
      s = next;
      t += step;
      ++r.accepted;
      record(dir * t);
    } else {
      if (opt.fixed_step) throw ToleranceError("fixed flow step violates the overlap bound");
      ++r.rejected;
    }
    if (!opt.fixed_step) {
      const double factor = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
      dt = std::min(opt.max_step, step * std::clamp(factor, 0.2, 5.0));
      if (dt < opt.min_step) throw ToleranceError("flow step underflow");
    }
  }
  return r;
}

/// Flows from several seeds in parallel.
inline std::vector<FlowResult> hamiltonian_flows(const OperatorData& op, int j,
                                                 const std::vector<std::pair<Point, Point>>& seeds, double t_final,
                                                 const FlowOptions& opt = {}) {
  std::vector<FlowResult> out(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) { out[i] = hamiltonian_flow(op, j, seeds[i].first, seeds[i].second, t_final, opt); });
  return out;
}

/// v(x(t), p(t)) v(y, q)^* exp(-i int_0^t f), with v transported by
/// continuity from (y, q).
inline CMat transport_amplitude(const FlowResult& flow) {
  const TrajectoryState& a = flow.path.front();
  const TrajectoryState& b = flow.path.back();
  return b.v * a.v.adjoint() * std::exp(-kI * b.phase);
}

inline CMat transport_amplitude(const OperatorData& op, int j, const Point& y, const Point& q, double t,
                                const FlowOptions& opt = {}) {
  return transport_amplitude(hamiltonian_flow(op, j, y, q, t, opt));
}

/// Trace of the subprincipal symbol of U^{(j)}(0): -i {v^*, v}.
inline double u0_subprincipal_trace(const OperatorData& op, int j, const Point& x, const Point& p) {
  return curvature_trace(op, j, x, p);
}

struct FValidationRow {
  double radius = 0.0;
  double max_error = 0.0;
};

struct FValidation {
  int j = 0;
  std::vector<FValidationRow> rows;
  double exponent = 0.0;  // least-squares slope of log error against log R
  bool exact = false;     // errors at rounding level for every radius
  bool passed = false;
};

/// For constant coefficients compares the branch-j eigenvalue of the full
/// symbol L_prin(R w) + L_sub with R h(w) + f(w) over sphere nodes w. The
/// residual must decay at least like R^{-0.9}.
inline FValidation validate_f_constant_coeff(const OperatorData& op, int j, const std::vector<double>& radii,
                                             int sphere_resolution = 8) {
  if (!op.constant_coefficients()) throw PreconditionError("f validation needs constant coefficients");
  if (radii.size() < 2) throw PreconditionError("f validation needs at least two radii");
  const int n = op.dim(), m = op.size();
  const SymbolPoint sp = SymbolEvaluator(op, true)(Point(n, 0.0));
  const auto dirs = sphere_sample(n, sphere_resolution);
  const int col = branch_column(j, m);

  FValidation out;
  out.j = j;
  std::vector<double> h(dirs.size()), f(dirs.size());
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const EigenBranch br = eigen_branch(sp, dirs[i], j);
    h[i] = br.h;
    f[i] = phase_f(sp, dirs[i], br);
  }
  bool exact = true;
  for (double R : radii) {
    if (!(R > 0.0)) throw PreconditionError("radii must be positive");
    FValidationRow row{R, 0.0};
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      Point p = dirs[i];
      for (double& c : p) c *= R;
      const RVec ev = hermitian_eig(CMat(sp.principal(p) + sp.Lsub)).values;
      row.max_error = std::max(row.max_error, std::abs(ev(col) - (R * h[i] + f[i])));
    }
    if (row.max_error > 1e-12 * std::max(1.0, R)) exact = false;
    out.rows.push_back(row);
  }
  out.exact = exact;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double N = double(out.rows.size());
  for (const auto& row : out.rows) {
    const double lx = std::log(row.radius), ly = std::log(std::max(row.max_error, 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  out.exponent = (N * sxy - sx * sy) / (N * sxx - sx * sx);
  out.passed = exact || out.exponent <= -0.9;
  return out;
}

inline nlohmann::json to_json(const FValidation& v) {
  nlohmann::json j;
  j["branch"] = v.j;
  j["exponent"] = v.exact ? nlohmann::json(nullptr) : nlohmann::json(v.exponent);
  j["exact"] = v.exact;
  j["passed"] = v.passed;
  for (const auto& r : v.rows) j["rows"].push_back({{"radius", r.radius}, {"max_error", r.max_error}});
  return j;
}

inline nlohmann::json to_json(const FlowResult& r) {
  nlohmann::json j;
  j["branch"] = r.j;
  j["h0"] = r.h0 * r.momentum_scale;
  j["max_relative_drift"] = r.max_drift;
  j["accepted_steps"] = r.accepted;
  j["rejected_steps"] = r.rejected;
  const TrajectoryState& e = r.final_state();
  j["t_final"] = e.t;
  j["x_final"] = e.x;
  j["p_final"] = e.p;
  j["phase_final"] = e.phase;
  return j;
}

inline void write_trajectory_csv(const std::string& path, const FlowResult& r) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path);
  const std::size_t n = r.path.front().x.size();
  out << "t";
  for (std::size_t a = 0; a < n; ++a) out << ",x" << a + 1;
  for (std::size_t a = 0; a < n; ++a) out << ",p" << a + 1;
  out << ",phase\n";
  out.precision(17);
  for (const auto& s : r.path) {
    out << s.t;
    for (double c : s.x) out << ',' << c;
    for (double c : s.p) out << ',' << c;
    out << ',' << s.phase << '\n';
  }
}

}  // namespace folab
