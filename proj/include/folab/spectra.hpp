#pragma once

// Fourier-Galerkin spectra of L on T^n, exact lattice spectra of
// constant-coefficient operators, counting functions and eta partial sums.
//
// In the basis e^{ik.x} the operator has the block entries
//   M_{kl} = (1/2)(k + l)_a S^a_{k-l} + (L_sub)_{k-l},
// so modes only couple through coefficient frequencies. The solver splits the
// mode cube into the connected components of that coupling and solves each
// component densely.
//
// The trust radius starts from the symbol bound K h_min - sup|Q| - margin.
// For variable coefficients it is then cut below the first Ritz pair whose
// leakage out of the mode cube, |(1 - P)(A - lambda B) v|, exceeds residual_tol.

#include "folab/parallel.hpp"
#include "folab/symbol.hpp"

#include <fstream>
#include <map>
#include <numeric>
#include <unordered_map>

namespace folab {

struct SpectrumOptions {
  double margin = 2.0;              // subtracted in the variable-coefficient trust radius
  std::size_t max_block = 6144;     // largest dense block (rows)
  int weight_cutoff = 0;            // minimum cutoff for s^{-1/2} in conjugate_weight
  int sample_resolution = 16;       // sphere/grid sampling for the trust radius bounds
  double residual_tol = 1e-6;       // Ritz residual required below the variable-coefficient trust radius
};

struct SpectrumResult {
  std::vector<double> eigenvalues;  // ascending
  int K = 0;                        // mode cutoff (lattice path: -1)
  int n = 0;
  int m = 0;
  std::string method;               // "galerkin", "galerkin-generalized" or "lattice-exact"
  bool weight_applied = false;
  double trust_radius = 0.0;
  double apriori_trust_radius = 0.0;  // symbol bound before the residual certificate
  double residual_tol = 0.0;          // certificate threshold (0: not needed)
  double max_residual = 0.0;          // largest Ritz residual bound below trust_radius
  double margin = 0.0;
  double h_min = 0.0;               // sampled min singular value of L_prin on the unit sphere bundle
  double zero_order_bound = 0.0;    // sampled sup of the zero-order part
  std::size_t blocks = 0;
  std::size_t largest_block = 0;
};

// ---------------------------------------------------------------------------
// Mode cube

class ModeCube {
 public:
  ModeCube(int n, int K) : n_(n), K_(K), side_(2 * K + 1) {
    if (K < 0) throw PreconditionError("mode cutoff must be nonnegative");
    size_ = grid_size(n, side_);
  }

  int dim() const { return n_; }
  int cutoff() const { return K_; }
  std::size_t size() const { return size_; }

  Freq mode(std::size_t idx) const {
    Freq k{};
    for (int a = n_ - 1; a >= 0; --a) {
      k[a] = static_cast<int>(idx % side_) - K_;
      idx /= side_;
    }
    return k;
  }

  /// Index of k, or size() when k lies outside the cube.
  std::size_t index(const Freq& k) const {
    std::size_t idx = 0;
    for (int a = 0; a < n_; ++a) {
      if (std::abs(k[a]) > K_) return size_;
      idx = idx * side_ + static_cast<std::size_t>(k[a] + K_);
    }
    return idx;
  }

 private:
  int n_;
  int K_;
  int side_;
  std::size_t size_;
};

namespace detail {

inline Freq freq_add(const Freq& a, const Freq& b) {
  Freq r{};
  for (int i = 0; i < kMaxDim; ++i) r[i] = a[i] + b[i];
  return r;
}

/// Connected components of the mode cube under the coupling k ~ k + d.
inline std::vector<std::vector<std::size_t>> coupling_components(const ModeCube& cube,
                                                                 const std::vector<Freq>& support) {
  std::vector<std::size_t> parent(cube.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&parent](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < cube.size(); ++i) {
    const Freq k = cube.mode(i);
    for (const Freq& d : support) {
      const std::size_t j = cube.index(freq_add(k, d));
      if (j == cube.size()) continue;
      const std::size_t ri = find(i), rj = find(j);
      if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < cube.size(); ++i) groups[find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  out.reserve(groups.size());
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  return out;
}

inline void collect_support(const Series& s, std::vector<Freq>& out) {
  for (const auto& [k, c] : s.terms()) out.push_back(k);
}

inline std::vector<Freq> unique_support(std::vector<Freq> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

inline std::vector<Freq> operator_support(const OperatorData& op) {
  std::vector<Freq> v;
  for (const auto& s : op.S()) collect_support(s, v);
  collect_support(op.Lsub(), v);
  return unique_support(std::move(v));
}

/// Dense Galerkin block of `op` restricted to `modes` (in that order).
inline Eigen::MatrixXcd galerkin_block(const OperatorData& op, const ModeCube& cube,
                                       const std::vector<std::size_t>& modes,
                                       const std::vector<Freq>& support) {
  const int n = op.dim(), m = op.size();
  std::unordered_map<std::size_t, std::size_t> local;
  for (std::size_t i = 0; i < modes.size(); ++i) local[modes[i]] = i;
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(m * modes.size(), m * modes.size());
  std::vector<std::vector<CMat>> coeffs(support.size());
  for (std::size_t s = 0; s < support.size(); ++s) {
    for (int a = 0; a < n; ++a) coeffs[s].push_back(op.S(a).coeff(support[s]));
    coeffs[s].push_back(op.Lsub().coeff(support[s]));
  }
  for (std::size_t col = 0; col < modes.size(); ++col) {
    const Freq l = cube.mode(modes[col]);
    for (std::size_t s = 0; s < support.size(); ++s) {
      const Freq k = freq_add(l, support[s]);
      const std::size_t gk = cube.index(k);
      if (gk == cube.size()) continue;
      const std::size_t row = local.at(gk);
      CMat entry = coeffs[s][n];
      for (int a = 0; a < n; ++a) entry += (0.5 * (k[a] + l[a])) * coeffs[s][a];
      M.block(m * row, m * col, m, m) += entry;
    }
  }
  return M;
}

/// Block of the Gram matrix of multiplication by the scalar s.
inline Eigen::MatrixXcd gram_block(const Series& s, int m, const ModeCube& cube, const std::vector<std::size_t>& modes) {
  std::unordered_map<std::size_t, std::size_t> local;
  for (std::size_t i = 0; i < modes.size(); ++i) local[modes[i]] = i;
  Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(m * modes.size(), m * modes.size());
  for (std::size_t col = 0; col < modes.size(); ++col) {
    const Freq l = cube.mode(modes[col]);
    for (const auto& [d, c] : s.terms()) {
      const std::size_t gk = cube.index(freq_add(l, d));
      if (gk == cube.size()) continue;
      const std::size_t row = local.at(gk);
      for (int i = 0; i < m; ++i) G(m * row + i, m * col + i) += c(0, 0);
    }
  }
  return G;
}

/// Sampled bounds for the trust radius: min singular value of L_prin(x, w)
/// over unit w and sup of |Q(x)|, both for the weighted symbols when the
/// operator carries a weight.
inline std::pair<double, double> symbol_bounds(const OperatorData& op, int resolution) {
  const int n = op.dim(), m = op.size();
  const SymbolEvaluator eval(op, true);
  const auto dirs = sphere_sample(n, resolution);
  bool constant = op.constant_coefficients();
  const int Nx = constant ? 1 : std::max(resolution, 4 * op.degree() + 2);
  const std::size_t total = grid_size(n, Nx);
  std::vector<double> hmin(total), qsup(total);
  parallel_for(total, [&](std::size_t i) {
    const SymbolPoint sp = eval(grid_point(n, Nx, i));
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& w : dirs) {
      Eigen::JacobiSVD<CMat> svd(sp.principal(w));
      lo = std::min(lo, svd.singularValues()(m - 1));
    }
    CMat q = sp.Lsub;
    for (int a = 0; a < n; ++a) q -= 0.5 * kI * sp.dS[a][a];
    hmin[i] = lo;
    qsup[i] = op_norm(q);
  });
  return {*std::min_element(hmin.begin(), hmin.end()), *std::max_element(qsup.begin(), qsup.end())};
}

inline void finish_trust_radius(SpectrumResult& r, bool constant) {
  const double t = constant ? (r.K + 1) * r.h_min - r.zero_order_bound
                            : r.K * r.h_min - r.zero_order_bound - r.margin;
  r.trust_radius = std::max(0.0, t);
  r.apriori_trust_radius = r.trust_radius;
}

/// Couplings that the truncation drops: block modes l to outside modes k.
struct Leakage {
  struct Entry {
    std::size_t row;  // outside mode
    std::size_t col;  // local block mode
    CMat a;           // operator entry
    cd s;             // weight coefficient (generalized pair)
  };
  std::size_t outside = 0;
  std::vector<Entry> entries;
};

inline Leakage leakage(const OperatorData& op, const Series* weight, const ModeCube& cube,
                       const std::vector<std::size_t>& modes, const std::vector<Freq>& support) {
  const int n = op.dim();
  std::map<Freq, std::size_t> rows;
  Leakage lk;
  for (std::size_t col = 0; col < modes.size(); ++col) {
    const Freq l = cube.mode(modes[col]);
    for (const Freq& d : support) {
      const Freq k = freq_add(l, d);
      if (cube.index(k) != cube.size()) continue;
      CMat a = op.Lsub().coeff(d);
      for (int b = 0; b < n; ++b) a += (0.5 * (k[b] + l[b])) * op.S(b).coeff(d);
      const cd sc = weight ? weight->coeff(d)(0, 0) : cd(0.0);
      if (a.cwiseAbs().maxCoeff() == 0.0 && sc == 0.0) continue;
      const std::size_t row = rows.emplace(k, rows.size()).first->second;
      lk.entries.push_back({row, col, std::move(a), sc});
    }
  }
  lk.outside = rows.size();
  return lk;
}

/// Norms |(1 - P)(A - lambda B) v| for the Ritz pairs (lambda_i, V.col(i)).
inline Eigen::VectorXd leakage_residuals(const Leakage& lk, int m, const Eigen::MatrixXcd& V,
                                         const Eigen::VectorXd& lambda) {
  Eigen::MatrixXcd R = Eigen::MatrixXcd::Zero(m * lk.outside, V.cols());
  for (const auto& e : lk.entries) {
    R.middleRows(m * e.row, m) += e.a * V.middleRows(m * e.col, m);
    if (e.s != 0.0) R.middleRows(m * e.row, m) -= e.s * (V.middleRows(m * e.col, m) * lambda.asDiagonal());
  }
  return R.colwise().norm().transpose();
}

/// Shrinks the trust radius below the first eigenvalue whose residual bound
/// exceeds the tolerance. `pairs` holds (eigenvalue, bound).
inline void certify_trust_radius(SpectrumResult& r, std::vector<std::pair<double, double>> pairs, double tol) {
  r.residual_tol = tol;
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return std::abs(a.first) < std::abs(b.first); });
  for (const auto& [lam, bound] : pairs) {
    if (std::abs(lam) > r.trust_radius) break;
    if (!(bound <= tol)) {
      r.trust_radius = std::nextafter(std::abs(lam), 0.0);
      break;
    }
    r.max_residual = std::max(r.max_residual, bound);
  }
}

inline void check_blocks(const std::vector<std::vector<std::size_t>>& comps, int m, const SpectrumOptions& opt) {
  for (const auto& c : comps)
    if (c.size() * m > opt.max_block)
      throw ResourceError("Galerkin block of size " + std::to_string(c.size() * m) + " exceeds the dense cap " +
                          std::to_string(opt.max_block));
}

}  // namespace detail

/// Full dense Galerkin matrix (modes in raster order, m x m blocks).
inline Eigen::MatrixXcd galerkin_matrix(const OperatorData& op, int K, std::size_t max_size = 6144) {
  if (op.weight()) throw PreconditionError("conjugate the weight away before building the Galerkin matrix");
  const ModeCube cube(op.dim(), K);
  if (cube.size() * op.size() > max_size)
    throw ResourceError("Galerkin matrix of size " + std::to_string(cube.size() * op.size()) + " exceeds the cap");
  std::vector<std::size_t> all(cube.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return detail::galerkin_block(op, cube, all, detail::operator_support(op));
}

/// Galerkin spectrum. A weight is conjugated away first (weight_applied).
inline SpectrumResult spectrum(const OperatorData& input, int K, const SpectrumOptions& opt = {}) {
  const bool weighted = input.weight().has_value();
  const OperatorData op = weighted ? conjugate_weight(input, opt.weight_cutoff) : input;
  const int m = op.size();
  const ModeCube cube(op.dim(), K);
  const auto support = detail::operator_support(op);
  const auto comps = detail::coupling_components(cube, support);
  detail::check_blocks(comps, m, opt);

  SpectrumResult r;
  r.K = K;
  r.n = op.dim();
  r.m = m;
  r.method = "galerkin";
  r.weight_applied = weighted;
  r.margin = opt.margin;
  r.blocks = comps.size();
  std::tie(r.h_min, r.zero_order_bound) = detail::symbol_bounds(op, opt.sample_resolution);
  detail::finish_trust_radius(r, op.constant_coefficients());
  // Constant coefficients decouple the modes exactly; otherwise each Ritz
  // pair below the a-priori radius is certified by its exact leakage residual.
  const bool certify = !op.constant_coefficients();
  std::vector<std::vector<double>> parts(comps.size());
  std::vector<std::vector<std::pair<double, double>>> bounds(comps.size());
  parallel_for(comps.size(), [&](std::size_t c) {
    const Eigen::MatrixXcd M = detail::galerkin_block(op, cube, comps[c], support);
    DenseEigen e;
    if (M.rows() <= kMaxSize) {
      const HermitianEigen h = hermitian_eig(CMat(M));
      e.values = h.values;
      e.vectors = h.vectors;
    } else {
      e = dense_hermitian_eig(M, certify);
    }
    parts[c].assign(e.values.data(), e.values.data() + e.values.size());
    if (!certify) return;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < e.values.size(); ++i)
      if (std::abs(e.values(i)) <= r.trust_radius) keep.push_back(i);
    if (keep.empty()) return;
    const detail::Leakage lk = detail::leakage(op, nullptr, cube, comps[c], support);
    const Eigen::VectorXd res = detail::leakage_residuals(lk, m, e.vectors(Eigen::all, keep), e.values(keep));
    for (std::size_t i = 0; i < keep.size(); ++i) bounds[c].emplace_back(e.values(keep[i]), res(i));
  });
  std::vector<std::pair<double, double>> all;
  for (std::size_t c = 0; c < comps.size(); ++c) {
    r.largest_block = std::max(r.largest_block, parts[c].size());
    r.eigenvalues.insert(r.eigenvalues.end(), parts[c].begin(), parts[c].end());
    all.insert(all.end(), bounds[c].begin(), bounds[c].end());
  }
  std::sort(r.eigenvalues.begin(), r.eigenvalues.end());
  if (certify) detail::certify_trust_radius(r, std::move(all), opt.residual_tol);
  return r;
}

/// Weighted problem L u = lambda s u solved directly on the Galerkin pair
/// (L matrix, Gram matrix of s).
inline SpectrumResult generalized_spectrum(const OperatorData& op, int K, const SpectrumOptions& opt = {}) {
  if (!op.weight()) throw PreconditionError("generalized spectrum needs a weight");
  const OperatorData bare = op.without_weight();
  const Series& s = *op.weight();
  const int m = op.size();
  const ModeCube cube(op.dim(), K);
  std::vector<Freq> sup = detail::operator_support(bare);
  detail::collect_support(s, sup);
  sup = detail::unique_support(std::move(sup));
  const auto comps = detail::coupling_components(cube, sup);
  detail::check_blocks(comps, m, opt);
  const auto lsup = detail::operator_support(bare);

  SpectrumResult r;
  r.K = K;
  r.n = op.dim();
  r.m = m;
  r.method = "galerkin-generalized";
  r.weight_applied = true;
  r.margin = opt.margin;
  r.blocks = comps.size();
  std::tie(r.h_min, r.zero_order_bound) = detail::symbol_bounds(op, opt.sample_resolution);
  detail::finish_trust_radius(r, op.constant_coefficients());
  // With B >= s_min and x^* B x = 1 the eigenvalue error is at most |r| / sqrt(s_min).
  const bool certify = !op.constant_coefficients();
  const double s_min = certify ? grid_min_real(s) : 1.0;
  std::vector<std::vector<double>> parts(comps.size());
  std::vector<std::vector<std::pair<double, double>>> bounds(comps.size());
  parallel_for(comps.size(), [&](std::size_t c) {
    const Eigen::MatrixXcd A = detail::galerkin_block(bare, cube, comps[c], lsup);
    const Eigen::MatrixXcd B = detail::gram_block(s, m, cube, comps[c]);
    const DenseEigen e = dense_generalized_eig(A, B, certify);
    parts[c].assign(e.values.data(), e.values.data() + e.values.size());
    if (!certify) return;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < e.values.size(); ++i)
      if (std::abs(e.values(i)) <= r.trust_radius) keep.push_back(i);
    if (keep.empty()) return;
    const detail::Leakage lk = detail::leakage(bare, &s, cube, comps[c], sup);
    const Eigen::VectorXd res = detail::leakage_residuals(lk, m, e.vectors(Eigen::all, keep), e.values(keep));
    for (std::size_t i = 0; i < keep.size(); ++i) bounds[c].emplace_back(e.values(keep[i]), res(i) / std::sqrt(s_min));
  });
  std::vector<std::pair<double, double>> all;
  for (std::size_t c = 0; c < comps.size(); ++c) {
    r.largest_block = std::max(r.largest_block, parts[c].size());
    r.eigenvalues.insert(r.eigenvalues.end(), parts[c].begin(), parts[c].end());
    all.insert(all.end(), bounds[c].begin(), bounds[c].end());
  }
  std::sort(r.eigenvalues.begin(), r.eigenvalues.end());
  if (certify) detail::certify_trust_radius(r, std::move(all), opt.residual_tol);
  return r;
}

/// Exact spectrum of a constant-coefficient operator: eigenvalues of
/// S^a k_a + L_sub (divided by s for a constant weight) over all k in Z^n,
/// complete on [-radius, radius].
inline SpectrumResult lattice_spectrum(const OperatorData& op, double radius, int sample_resolution = 16) {
  if (!op.constant_coefficients()) throw PreconditionError("lattice spectrum needs constant coefficients");
  if (!(radius > 0.0)) throw PreconditionError("lattice radius must be positive");
  const int n = op.dim(), m = op.size();
  const double s = op.weight() ? op.weight()->coeff(Freq{})(0, 0).real() : 1.0;
  std::vector<CMat> S;
  for (const auto& sa : op.S()) S.push_back(sa.coeff(Freq{}) / s);
  const CMat L = op.Lsub().coeff(Freq{}) / s;

  SpectrumResult r;
  r.K = -1;
  r.n = n;
  r.m = m;
  r.method = "lattice-exact";
  r.weight_applied = op.weight().has_value();
  std::tie(r.h_min, r.zero_order_bound) = detail::symbol_bounds(op, sample_resolution);
  if (!(r.h_min > 0.0)) throw PreconditionError("principal symbol is degenerate");
  // |eigenvalue| >= h_min |k| - |L_sub| outside this ball.
  const int R = static_cast<int>(std::ceil((radius + r.zero_order_bound) / r.h_min * (1.0 + 1e-12))) + 1;
  const ModeCube cube(n, R);
  std::vector<double> ev;
  for (std::size_t i = 0; i < cube.size(); ++i) {
    const Freq k = cube.mode(i);
    CMat sym = L;
    for (int a = 0; a < n; ++a) sym += double(k[a]) * S[a];
    const RVec e = hermitian_eig(sym).values;
    for (int c = 0; c < e.size(); ++c)
      if (std::abs(e(c)) <= radius) ev.push_back(e(c));
  }
  std::sort(ev.begin(), ev.end());
  r.eigenvalues = std::move(ev);
  r.trust_radius = radius;
  r.blocks = cube.size();
  r.largest_block = m;
  return r;
}

// ---------------------------------------------------------------------------
// Counting and eta

/// N(lambda) = #{k : 0 < lambda_k < lambda}.
inline long counting(const SpectrumResult& spec, double lambda) {
  if (!(lambda > 0.0)) throw PreconditionError("counting needs lambda > 0");
  if (lambda > spec.trust_radius) throw PreconditionError("lambda exceeds the trust radius of the spectrum");
  const auto lo = std::upper_bound(spec.eigenvalues.begin(), spec.eigenvalues.end(), 0.0);
  const auto hi = std::lower_bound(spec.eigenvalues.begin(), spec.eigenvalues.end(), lambda);
  return hi > lo ? static_cast<long>(hi - lo) : 0L;
}

/// (N * rho_w)(lambda) with rho_w the centred Gaussian of standard deviation w.
inline double mollified_counting(const SpectrumResult& spec, double lambda, double w) {
  if (!(w > 0.0)) throw PreconditionError("mollifier width must be positive");
  if (lambda + 5.0 * w > spec.trust_radius) throw PreconditionError("mollifier window exceeds the trust radius");
  std::vector<double> terms;
  const double cut = lambda + 12.0 * w;
  for (double e : spec.eigenvalues) {
    if (e <= 0.0) continue;
    if (e > cut) break;
    terms.push_back(0.5 * std::erfc((e - lambda) / (w * std::sqrt(2.0))));
  }
  return tree_sum(terms, 0.0);
}

struct EtaResult {
  cd value;
  double cutoff = 0.0;
  bool convergent = false;  // Re s > n
  double tail_estimate = 0.0;
  std::size_t terms = 0;
};

/// sum over 0 < |lambda_k| <= cutoff of sign(lambda_k) |lambda_k|^{-s}. The
/// tail estimate uses the sampled eigenvalue density C = #/cutoff^n:
/// n C cutoff^{n - Re s} / (Re s - n).
inline EtaResult eta_partial(const SpectrumResult& spec, cd s, double cutoff) {
  if (!(cutoff > 0.0)) throw PreconditionError("eta cutoff must be positive");
  if (cutoff > spec.trust_radius) throw PreconditionError("eta cutoff exceeds the trust radius");
  EtaResult r;
  r.cutoff = cutoff;
  r.convergent = s.real() > spec.n;
  std::vector<cd> terms;
  for (double e : spec.eigenvalues) {
    if (e == 0.0 || std::abs(e) > cutoff) continue;
    const cd t = std::exp(-s * std::log(std::abs(e)));
    terms.push_back(e > 0.0 ? t : -t);
  }
  r.terms = terms.size();
  r.value = tree_sum(terms, cd(0.0));
  if (r.convergent) {
    const double C = double(terms.size()) / std::pow(cutoff, spec.n);
    r.tail_estimate = spec.n * C * std::pow(cutoff, spec.n - s.real()) / (s.real() - spec.n);
  } else {
    r.tail_estimate = std::numeric_limits<double>::infinity();
  }
  return r;
}

/// Largest distance from an eigenvalue of `a` inside [lo, hi] to the nearest
/// eigenvalue of `b`, symmetrized.
inline double spectral_distance(const std::vector<double>& a, const std::vector<double>& b, double lo, double hi) {
  auto one_way = [lo, hi](const std::vector<double>& x, const std::vector<double>& y) {
    double worst = 0.0;
    for (double e : x) {
      if (e < lo || e > hi) continue;
      auto it = std::lower_bound(y.begin(), y.end(), e);
      double d = std::numeric_limits<double>::infinity();
      if (it != y.end()) d = std::min(d, *it - e);
      if (it != y.begin()) d = std::min(d, e - *std::prev(it));
      worst = std::max(worst, d);
    }
    return worst;
  };
  return std::max(one_way(a, b), one_way(b, a));
}

/// Counts of eigenvalues of a and b inside [lo, hi] agree and the sorted
/// lists match termwise; returns the largest termwise difference (infinity on
/// a count mismatch).
inline double spectral_match(const std::vector<double>& a, const std::vector<double>& b, double lo, double hi) {
  auto window = [lo, hi](const std::vector<double>& x) {
    std::vector<double> w;
    for (double e : x)
      if (e >= lo && e <= hi) w.push_back(e);
    return w;
  };
  const auto wa = window(a), wb = window(b);
  if (wa.size() != wb.size()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t i = 0; i < wa.size(); ++i) worst = std::max(worst, std::abs(wa[i] - wb[i]));
  return worst;
}

// ---------------------------------------------------------------------------
// Export

inline nlohmann::json to_json(const SpectrumResult& r, bool with_eigenvalues = false) {
  nlohmann::json j;
  j["K"] = r.K;
  j["n"] = r.n;
  j["m"] = r.m;
  j["method"] = r.method;
  j["weight_applied"] = r.weight_applied;
  j["trust_radius"] = r.trust_radius;
  j["apriori_trust_radius"] = r.apriori_trust_radius;
  j["trust_margin"] = r.margin;
  if (r.residual_tol > 0.0) {
    j["residual_tol"] = r.residual_tol;
    j["max_residual"] = r.max_residual;
  }
  j["h_min"] = r.h_min;
  j["zero_order_bound"] = r.zero_order_bound;
  j["blocks"] = r.blocks;
  j["largest_block"] = r.largest_block;
  j["count"] = r.eigenvalues.size();
  if (with_eigenvalues) j["eigenvalues"] = r.eigenvalues;
  return j;
}

inline void write_spectrum_csv(const std::string& path, const SpectrumResult& r) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path);
  out << "index,eigenvalue\n";
  out.precision(17);
  for (std::size_t i = 0; i < r.eigenvalues.size(); ++i) out << i << ',' << r.eigenvalues[i] << '\n';
}

}  // namespace folab
