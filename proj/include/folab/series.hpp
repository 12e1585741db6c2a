#pragma once

// Matrix-valued trigonometric polynomials on T^n = [0, 2pi)^n.
//
// A Series stores finitely many coefficient matrices c_k keyed by integer
// frequency vectors k, and represents x -> sum_k c_k exp(i k.x). All
// arithmetic acts on coefficients and is exact; fit_from_grid is the only
// place where truncation error enters.

#include "folab/core.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

namespace folab {

using Freq = std::array<int, kMaxDim>;

class Series {
 public:
  using TermMap = std::map<Freq, CMat>;

  Series() = default;

  /// Zero series of the given shape.
  Series(int n, int rows, int cols) : n_(n), rows_(rows), cols_(cols) {
    if (n < 1 || n > kMaxDim) throw ShapeError("series dimension must be in [1, 4]");
    if (rows < 1 || cols < 1 || rows > kMaxSize || cols > kMaxSize)
      throw ShapeError("series matrix shape must be within 8x8");
  }

  /// Builds from explicit terms. Zero matrices are pruned; when `hermitian`
  /// is requested the symmetry c_{-k} = c_k^dagger is validated.
  static Series from_terms(int n, int rows, int cols, TermMap terms, bool hermitian = false) {
    Series s(n, rows, cols);
    for (auto& [k, c] : terms) {
      if (c.rows() != rows || c.cols() != cols) throw ShapeError("term shape mismatch");
      for (int a = n; a < kMaxDim; ++a)
        if (k[a] != 0) throw ShapeError("frequency has nonzero entries beyond dimension");
    }
    s.terms_ = std::move(terms);
    s.prune();
    if (hermitian) s.mark_hermitian();
    return s;
  }

  static Series constant(int n, const CMat& c, bool hermitian = false) {
    TermMap t;
    t[Freq{}] = c;
    return from_terms(n, static_cast<int>(c.rows()), static_cast<int>(c.cols()), std::move(t),
                      hermitian);
  }

  static Series scalar(int n, cd value) {
    CMat c(1, 1);
    c(0, 0) = value;
    return constant(n, c, value.imag() == 0.0);
  }

  int dim() const { return n_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool hermitian() const { return hermitian_; }
  const TermMap& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  /// Largest |k|_inf among stored frequencies.
  int degree() const {
    int d = 0;
    for (const auto& [k, c] : terms_)
      for (int a = 0; a < n_; ++a) d = std::max(d, std::abs(k[a]));
    return d;
  }

  bool is_constant() const {
    return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first == Freq{});
  }

  CMat coeff(const Freq& k) const {
    auto it = terms_.find(k);
    if (it == terms_.end()) return CMat::Zero(rows_, cols_);
    return it->second;
  }

  /// Max deviation from c_{-k} = c_k^dagger over stored terms.
  double hermitian_defect() const {
    if (rows_ != cols_) return std::numeric_limits<double>::infinity();
    double defect = 0.0;
    for (const auto& [k, c] : terms_) {
      CMat partner = coeff(negate(k));
      defect = std::max(defect, (partner - c.adjoint()).cwiseAbs().maxCoeff());
    }
    return defect;
  }

  double max_abs_coeff() const {
    double m = 0.0;
    for (const auto& [k, c] : terms_) m = std::max(m, c.cwiseAbs().maxCoeff());
    return m;
  }

  /// Validates and sets the Hermitian-valued flag.
  Series& mark_hermitian(double tol = 1e-12) {
    double scale = std::max(1.0, max_abs_coeff());
    if (hermitian_defect() > tol * scale)
      throw PreconditionError("series is not Hermitian-valued: c_{-k} != c_k^dagger");
    hermitian_ = true;
    return *this;
  }

  /// Drops the flag; used for data deliberately left unchecked.
  Series& unmark_hermitian() {
    hermitian_ = false;
    return *this;
  }

  /// Pointwise value sum_k c_k exp(i k.x).
  CMat eval(const Point& x) const {
    if (static_cast<int>(x.size()) != n_) throw ShapeError("evaluation point has wrong dimension");
    CMat out = CMat::Zero(rows_, cols_);
    if (terms_.empty()) return out;
    const int d = degree();
    // Per-axis tables of exp(i k x_a) for k in [-d, d].
    std::array<std::vector<cd>, kMaxDim> table;
    for (int a = 0; a < n_; ++a) {
      table[a].resize(2 * d + 1);
      const cd step = std::polar(1.0, x[a]);
      table[a][d] = 1.0;
      for (int k = 1; k <= d; ++k) {
        table[a][d + k] = table[a][d + k - 1] * step;
        table[a][d - k] = std::conj(table[a][d + k]);
      }
    }
    for (const auto& [k, c] : terms_) {
      cd phase = 1.0;
      for (int a = 0; a < n_; ++a) phase *= table[a][d + k[a]];
      out += phase * c;
    }
    return out;
  }

  /// Pointwise Hermitian adjoint: c_k -> (c_{-k})^dagger.
  Series adjoint() const {
    TermMap t;
    for (const auto& [k, c] : terms_) t[negate(k)] = c.adjoint();
    Series s = from_terms(n_, cols_, rows_, std::move(t));
    s.hermitian_ = hermitian_;
    return s;
  }

  /// Applies a linear map to every coefficient.
  Series map_coeffs(const std::function<CMat(const CMat&)>& f) const {
    TermMap t;
    int r = rows_, c = cols_;
    bool first = true;
    for (const auto& [k, m] : terms_) {
      CMat v = f(m);
      if (first) {
        r = static_cast<int>(v.rows());
        c = static_cast<int>(v.cols());
        first = false;
      }
      t[k] = std::move(v);
    }
    if (first) {
      CMat probe = f(CMat::Zero(rows_, cols_));
      r = static_cast<int>(probe.rows());
      c = static_cast<int>(probe.cols());
    }
    return from_terms(n_, r, c, std::move(t));
  }

  /// Pointwise trace as a 1x1 series.
  Series trace() const {
    if (rows_ != cols_) throw ShapeError("trace of non-square series");
    return map_coeffs([](const CMat& m) {
      CMat t(1, 1);
      t(0, 0) = m.trace();
      return t;
    });
  }

  /// Copy with coefficients below `tol` (absolute) removed.
  Series pruned(double tol) const {
    TermMap t;
    for (const auto& [k, c] : terms_)
      if (c.cwiseAbs().maxCoeff() > tol) t[k] = c;
    Series s = from_terms(n_, rows_, cols_, std::move(t));
    s.hermitian_ = hermitian_;
    return s;
  }

  static Freq negate(const Freq& k) {
    Freq r{};
    for (int a = 0; a < kMaxDim; ++a) r[a] = -k[a];
    return r;
  }

  friend Series operator+(const Series& a, const Series& b) {
    check_same_shape(a, b);
    TermMap t = a.terms_;
    for (const auto& [k, c] : b.terms_) {
      auto it = t.find(k);
      if (it == t.end())
        t[k] = c;
      else
        it->second += c;
    }
    Series s = from_terms(a.n_, a.rows_, a.cols_, std::move(t));
    s.hermitian_ = a.hermitian_ && b.hermitian_;
    return s;
  }

  friend Series operator-(const Series& a) {
    TermMap t;
    for (const auto& [k, c] : a.terms_) t[k] = -c;
    Series s = from_terms(a.n_, a.rows_, a.cols_, std::move(t));
    s.hermitian_ = a.hermitian_;
    return s;
  }

  friend Series operator-(const Series& a, const Series& b) { return a + (-b); }

  friend Series operator*(cd z, const Series& a) {
    TermMap t;
    for (const auto& [k, c] : a.terms_) t[k] = z * c;
    Series s = from_terms(a.n_, a.rows_, a.cols_, std::move(t));
    s.hermitian_ = a.hermitian_ && z.imag() == 0.0;
    return s;
  }

  friend Series operator*(double z, const Series& a) { return cd(z, 0.0) * a; }

 private:
  static void check_same_shape(const Series& a, const Series& b) {
    if (a.n_ != b.n_ || a.rows_ != b.rows_ || a.cols_ != b.cols_)
      throw ShapeError("series shape mismatch");
  }

  void prune() {
    for (auto it = terms_.begin(); it != terms_.end();) {
      if (it->second.isZero(0.0))
        it = terms_.erase(it);
      else
        ++it;
    }
  }

  int n_ = 1;
  int rows_ = 1;
  int cols_ = 1;
  bool hermitian_ = false;
  TermMap terms_;
};

/// Exact x-derivative along axis `axis` (0-based): c_k -> i k_axis c_k.
inline Series derive_x(const Series& s, int axis) {
  if (axis < 0 || axis >= s.dim()) throw ShapeError("derivative axis out of range");
  Series::TermMap t;
  for (const auto& [k, c] : s.terms())
    if (k[axis] != 0) t[k] = cd(0.0, k[axis]) * c;
  return Series::from_terms(s.dim(), s.rows(), s.cols(), std::move(t));
}

/// Exact product (coefficient convolution).
inline Series multiply(const Series& a, const Series& b) {
  if (a.dim() != b.dim()) throw ShapeError("multiply: dimension mismatch");
  if (a.cols() != b.rows()) throw ShapeError("multiply: inner matrix shapes differ");
  Series::TermMap t;
  for (const auto& [ka, ca] : a.terms())
    for (const auto& [kb, cb] : b.terms()) {
      Freq k{};
      for (int i = 0; i < kMaxDim; ++i) k[i] = ka[i] + kb[i];
      CMat prod = ca * cb;
      auto it = t.find(k);
      if (it == t.end())
        t.emplace(k, std::move(prod));
      else
        it->second += prod;
    }
  return Series::from_terms(a.dim(), a.rows(), b.cols(), std::move(t));
}

/// Scalar (1x1) series times matrix series.
inline Series scale_by(const Series& scalar, const Series& m) {
  if (scalar.rows() != 1 || scalar.cols() != 1) throw ShapeError("scale_by expects a 1x1 series");
  Series::TermMap t;
  for (const auto& [ka, ca] : scalar.terms())
    for (const auto& [kb, cb] : m.terms()) {
      Freq k{};
      for (int i = 0; i < kMaxDim; ++i) k[i] = ka[i] + kb[i];
      CMat prod = ca(0, 0) * cb;
      auto it = t.find(k);
      if (it == t.end())
        t.emplace(k, std::move(prod));
      else
        it->second += prod;
    }
  return Series::from_terms(m.dim(), m.rows(), m.cols(), std::move(t));
}

/// exp(a) for a 1x1 series by scaling and squaring of the Taylor series.
/// Coefficients below `tol` times the l1 norm are dropped after each step.
inline Series exp_scalar(const Series& a, double tol = 1e-15) {
  if (a.rows() != 1 || a.cols() != 1) throw ShapeError("exp_scalar expects a 1x1 series");
  double l1 = 0.0;
  for (const auto& [k, c] : a.terms()) l1 += std::abs(c(0, 0));
  int squarings = 0;
  while (l1 / std::ldexp(1.0, squarings) > 0.5) ++squarings;
  const Series b = std::ldexp(1.0, -squarings) * a;
  Series sum = Series::scalar(a.dim(), 1.0), term = sum;
  for (int j = 1; j < 60; ++j) {
    term = (1.0 / j) * multiply(term, b);
    term = term.pruned(tol);
    if (term.empty()) break;
    sum = sum + term;
  }
  for (int i = 0; i < squarings; ++i) {
    sum = multiply(sum, sum);
    sum = sum.pruned(tol * std::max(1.0, sum.max_abs_coeff()));
  }
  return sum;
}

/// Q^dagger X Q, flagged Hermitian when X is.
inline Series sandwich(const Series& q, const Series& x) {
  Series r = multiply(multiply(q.adjoint(), x), q);
  if (x.hermitian()) r.mark_hermitian(1e-11);
  return r;
}

/// Integral over T^n: (2 pi)^n c_0.
inline CMat integrate_torus(const Series& s) {
  return std::pow(2.0 * kPi, s.dim()) * s.coeff(Freq{});
}

/// Samples on the uniform grid x_a = 2 pi i_a / N, raster order with axis 0
/// slowest.
struct GridSamples {
  int n = 0;
  int N = 0;
  int rows = 0;
  int cols = 0;
  std::vector<CMat> values;

  std::size_t size() const { return values.size(); }
};

inline std::size_t grid_size(int n, int N) {
  std::size_t total = 1;
  for (int a = 0; a < n; ++a) total *= static_cast<std::size_t>(N);
  return total;
}

/// Grid point for raster index `idx`.
inline Point grid_point(int n, int N, std::size_t idx) {
  Point x(n);
  for (int a = n - 1; a >= 0; --a) {
    x[a] = 2.0 * kPi * static_cast<double>(idx % N) / N;
    idx /= N;
  }
  return x;
}

inline GridSamples sample_grid(const std::function<CMat(const Point&)>& f, int n, int N) {
  GridSamples g;
  g.n = n;
  g.N = N;
  const std::size_t total = grid_size(n, N);
  g.values.reserve(total);
  for (std::size_t i = 0; i < total; ++i) g.values.push_back(f(grid_point(n, N, i)));
  g.rows = static_cast<int>(g.values.front().rows());
  g.cols = static_cast<int>(g.values.front().cols());
  return g;
}

inline GridSamples sample_grid(const Series& s, int N) {
  return sample_grid([&s](const Point& x) { return s.eval(x); }, s.dim(), N);
}

/// Discrete Fourier fit of grid samples, truncated to |k|_inf <= K.
/// Requires N >= 2K + 2 so that no retained frequency aliases another.
inline Series fit_from_grid(const GridSamples& g, int K, bool hermitian = false) {
  if (K < 0) throw PreconditionError("fit cutoff must be non-negative");
  if (g.N < 2 * K + 2) throw PreconditionError("grid too coarse for requested cutoff");
  if (g.values.size() != grid_size(g.n, g.N)) throw ShapeError("grid sample count mismatch");
  for (const auto& v : g.values)
    if (!v.allFinite()) throw PreconditionError("non-finite grid sample");

  const int n = g.n, N = g.N, M = 2 * K + 1;
  std::vector<std::vector<cd>> twiddle(M, std::vector<cd>(N));
  for (int k = -K; k <= K; ++k)
    for (int j = 0; j < N; ++j)
      twiddle[k + K][j] = std::polar(1.0 / N, -2.0 * kPi * k * j / N);

  // Separable transform, one axis at a time; dims track the current extents.
  std::vector<int> dims(n, N);
  std::vector<CMat> cur = g.values;
  for (int axis = 0; axis < n; ++axis) {
    std::size_t outer = 1, inner = 1;
    for (int a = 0; a < axis; ++a) outer *= dims[a];
    for (int a = axis + 1; a < n; ++a) inner *= dims[a];
    std::vector<CMat> next(outer * M * inner, CMat::Zero(g.rows, g.cols));
    for (std::size_t o = 0; o < outer; ++o)
      for (int k = 0; k < M; ++k)
        for (std::size_t i = 0; i < inner; ++i) {
          CMat acc = CMat::Zero(g.rows, g.cols);
          for (int j = 0; j < N; ++j) acc += twiddle[k][j] * cur[(o * N + j) * inner + i];
          next[(o * M + k) * inner + i] = acc;
        }
    cur = std::move(next);
    dims[axis] = M;
  }

  Series::TermMap t;
  const std::size_t total = cur.size();
  for (std::size_t idx = 0; idx < total; ++idx) {
    Freq k{};
    std::size_t rem = idx;
    for (int a = n - 1; a >= 0; --a) {
      k[a] = static_cast<int>(rem % M) - K;
      rem /= M;
    }
    t[k] = cur[idx];
  }
  // Drop coefficients at round-off level so that separable data stays sparse.
  double big = 0.0;
  for (const auto& [k, c] : t) big = std::max(big, c.cwiseAbs().maxCoeff());
  for (auto it = t.begin(); it != t.end();) {
    if (it->second.cwiseAbs().maxCoeff() <= 1e-16 * big)
      it = t.erase(it);
    else
      ++it;
  }
  Series s = Series::from_terms(n, g.rows, g.cols, std::move(t));
  if (hermitian) {
    // Round-off symmetrization, then validation.
    Series::TermMap sym;
    for (const auto& [k, c] : s.terms()) {
      const CMat h = 0.5 * (c + s.coeff(Series::negate(k)).adjoint());
      sym[k] = h;
      sym[Series::negate(k)] = h.adjoint();
    }
    s = Series::from_terms(n, g.rows, g.cols, std::move(sym), true);
  }
  return s;
}

/// Samples `f` and fits at cutoff K on the minimal admissible grid.
inline Series fit_function(const std::function<CMat(const Point&)>& f, int n, int K,
                           bool hermitian = false) {
  return fit_from_grid(sample_grid(f, n, 2 * K + 2), K, hermitian);
}

/// Fits `f` with the smallest cutoff in {K0, 2K0, ...} <= Kmax whose pointwise
/// error on a half-cell-shifted probe grid is below `tol`.
inline Series fit_adaptive(const std::function<CMat(const Point&)>& f, int n, double tol,
                           int K0 = 4, int Kmax = 64, bool hermitian = false) {
  for (int K = std::max(1, K0);; K *= 2) {
    const double bytes = double(grid_size(n, 2 * K + 2)) * sizeof(CMat);
    if (bytes > 1.5e9) throw ResourceError("adaptive fit grid exceeds the memory budget");
    Series s = fit_function(f, n, K, hermitian);
    const int P = std::max(6, std::min(2 * K + 3, n >= 3 ? 17 : 41));
    double err = 0.0;
    const std::size_t total = grid_size(n, P);
    for (std::size_t i = 0; i < total; ++i) {
      Point x = grid_point(n, P, i);
      for (auto& xa : x) xa += kPi / P + 0.1234;
      err = std::max(err, (s.eval(x) - f(x)).cwiseAbs().maxCoeff());
    }
    if (err <= tol) return s;
    if (2 * K > Kmax)
      throw ToleranceError("adaptive fit did not reach tolerance " + std::to_string(tol) +
                           " (error " + std::to_string(err) + ")");
  }
}

/// g(s(x)) for a matrix series s, fitted adaptively over the axes on which
/// s actually depends (so separable data stays separable).
inline Series fit_matrix_function(const Series& s, const std::function<CMat(const CMat&)>& g, double tol,
                                  int K0 = 4, int Kmax = 64, bool hermitian = false) {
  const int n = s.dim();
  std::vector<int> axes;
  for (int a = 0; a < n; ++a)
    for (const auto& [k, c] : s.terms())
      if (k[a] != 0) {
        axes.push_back(a);
        break;
      }
  if (axes.empty()) return Series::constant(n, g(s.coeff(Freq{})), hermitian);
  const int r = static_cast<int>(axes.size());
  Series::TermMap reduced;
  for (const auto& [k, c] : s.terms()) {
    Freq kr{};
    for (int i = 0; i < r; ++i) kr[i] = k[axes[i]];
    reduced[kr] = c;
  }
  const Series sr = Series::from_terms(r, s.rows(), s.cols(), std::move(reduced));
  const Series fr = fit_adaptive([&](const Point& y) -> CMat { return g(sr.eval(y)); }, r, tol, K0, Kmax, hermitian);
  Series::TermMap full;
  for (const auto& [kr, c] : fr.terms()) {
    Freq k{};
    for (int i = 0; i < r; ++i) k[axes[i]] = kr[i];
    full[k] = c;
  }
  return Series::from_terms(n, fr.rows(), fr.cols(), std::move(full), hermitian);
}

/// g(s(x)) I_m for a scalar series s.
inline Series fit_scalar_function(const Series& s, const std::function<cd(cd)>& g, int m, double tol,
                                  int K0 = 4, int Kmax = 64, bool hermitian = false) {
  if (s.rows() != 1 || s.cols() != 1) throw ShapeError("fit_scalar_function expects a 1x1 series");
  return fit_matrix_function(
      s, [&](const CMat& v) -> CMat { return g(v(0, 0)) * CMat::Identity(m, m); }, tol, K0, Kmax, hermitian);
}

/// Assembles a block-matrix series from a rectangular grid of blocks.
inline Series assemble_blocks(const std::vector<std::vector<Series>>& blocks) {
  const int br = static_cast<int>(blocks.size());
  const int bc = static_cast<int>(blocks.front().size());
  std::vector<int> rh(br), cw(bc);
  for (int i = 0; i < br; ++i) rh[i] = blocks[i][0].rows();
  for (int j = 0; j < bc; ++j) cw[j] = blocks[0][j].cols();
  int R = 0, C = 0;
  for (int v : rh) R += v;
  for (int v : cw) C += v;
  const int n = blocks[0][0].dim();
  Series::TermMap t;
  int r0 = 0;
  for (int i = 0; i < br; ++i) {
    int c0 = 0;
    for (int j = 0; j < bc; ++j) {
      const Series& b = blocks[i][j];
      if (b.rows() != rh[i] || b.cols() != cw[j] || b.dim() != n)
        throw ShapeError("inconsistent block shapes");
      for (const auto& [k, c] : b.terms()) {
        auto it = t.find(k);
        if (it == t.end()) it = t.emplace(k, CMat::Zero(R, C)).first;
        it->second.block(r0, c0, rh[i], cw[j]) = c;
      }
      c0 += cw[j];
    }
    r0 += rh[i];
  }
  return Series::from_terms(n, R, C, std::move(t));
}

// ---------------------------------------------------------------------------
// JSON: {"n":2,"rows":2,"cols":2,"terms":[{"k":[1,0],"re":[[..]],"im":[[..]]}]}

inline nlohmann::json to_json(const Series& s) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [k, c] : s.terms()) {
    nlohmann::json jk = nlohmann::json::array();
    for (int a = 0; a < s.dim(); ++a) jk.push_back(k[a]);
    nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
    for (int i = 0; i < c.rows(); ++i) {
      nlohmann::json rr = nlohmann::json::array(), ii = nlohmann::json::array();
      for (int j = 0; j < c.cols(); ++j) {
        rr.push_back(c(i, j).real());
        ii.push_back(c(i, j).imag());
      }
      re.push_back(rr);
      im.push_back(ii);
    }
    terms.push_back({{"k", jk}, {"re", re}, {"im", im}});
  }
  return {{"n", s.dim()}, {"rows", s.rows()}, {"cols", s.cols()}, {"terms", terms}};
}

inline Series series_from_json(const nlohmann::json& j, bool hermitian = false) {
  try {
    const int n = j.at("n").get<int>();
    const int rows = j.at("rows").get<int>();
    const int cols = j.at("cols").get<int>();
    Series::TermMap t;
    for (const auto& term : j.at("terms")) {
      const auto& jk = term.at("k");
      if (static_cast<int>(jk.size()) != n) throw ShapeError("frequency length != n");
      Freq k{};
      for (int a = 0; a < n; ++a) k[a] = jk[a].get<int>();
      CMat c = CMat::Zero(rows, cols);
      const auto& re = term.at("re");
      const auto* im = term.contains("im") ? &term.at("im") : nullptr;
      if (static_cast<int>(re.size()) != rows) throw ShapeError("coefficient row count mismatch");
      for (int r = 0; r < rows; ++r) {
        if (static_cast<int>(re[r].size()) != cols) throw ShapeError("coefficient column mismatch");
        for (int col = 0; col < cols; ++col)
          c(r, col) = cd(re[r][col].get<double>(), im ? (*im)[r][col].get<double>() : 0.0);
      }
      if (t.count(k)) t[k] += c;
      else t[k] = c;
    }
    return Series::from_terms(n, rows, cols, std::move(t), hermitian);
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError(std::string("malformed series JSON: ") + e.what());
  }
}

}  // namespace folab
