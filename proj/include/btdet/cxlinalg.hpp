#pragma once

// Dense complex linear algebra: pivoted LU determinants and solves, Jacobi
// eigensolvers, singular values, shifted-QR eigenvalues, and branch-continued
// logarithms of determinant samples along a path.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <complex>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "btdet/errors.hpp"
#include "btdet/util.hpp"

namespace btdet {
namespace cxlinalg {

class CMat {
public:
  CMat() : rows_(0), cols_(0) {}
  CMat(std::size_t rows, std::size_t cols, cx fill = cx(0.0, 0.0))
      : rows_(rows), cols_(cols), a_(rows * cols, fill) {}
  CMat(std::size_t rows, std::size_t cols, std::initializer_list<cx> entries)
      : rows_(rows), cols_(cols), a_(entries) {
    if (a_.size() != rows * cols)
      throw Error(ErrorKind::Dimension, "CMat: initializer size mismatch");
  }

  static CMat identity(std::size_t n) {
    CMat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static CMat diagonal(const std::vector<cx>& d) {
    CMat m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }
  bool empty() const noexcept { return a_.empty(); }

  cx& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  cx operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }
  const std::vector<cx>& data() const noexcept { return a_; }
  std::vector<cx>& data() noexcept { return a_; }

  CMat operator+(const CMat& o) const {
    require_same_shape(o);
    CMat r = *this;
    for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] += o.a_[k];
    return r;
  }
  CMat operator-(const CMat& o) const {
    require_same_shape(o);
    CMat r = *this;
    for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] -= o.a_[k];
    return r;
  }
  CMat operator-() const {
    CMat r = *this;
    for (auto& v : r.a_) v = -v;
    return r;
  }
  CMat operator*(cx s) const {
    CMat r = *this;
    for (auto& v : r.a_) v *= s;
    return r;
  }
  friend CMat operator*(cx s, const CMat& m) { return m * s; }

  CMat operator*(const CMat& o) const {
    if (cols_ != o.rows_) throw Error(ErrorKind::Dimension, "CMat: product shape mismatch");
    CMat r(rows_, o.cols_);
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t k = 0; k < cols_; ++k) {
        const cx aik = (*this)(i, k);
        if (aik == cx(0.0, 0.0)) continue;
        const cx* orow = &o.a_[k * o.cols_];
        cx* rrow = &r.a_[i * o.cols_];
        for (std::size_t j = 0; j < o.cols_; ++j) rrow[j] += aik * orow[j];
      }
    }
    return r;
  }

  CMat adjoint() const {
    CMat r(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) r(j, i) = std::conj((*this)(i, j));
    return r;
  }
  CMat transpose() const {
    CMat r(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) r(j, i) = (*this)(i, j);
    return r;
  }
  CMat conj() const {
    CMat r = *this;
    for (auto& v : r.a_) v = std::conj(v);
    return r;
  }

  cx trace() const {
    cx t = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
  }

  double norm_fro() const {
    double s = 0.0;
    for (const auto& v : a_) s += std::norm(v);
    return std::sqrt(s);
  }
  double norm_max() const {
    double s = 0.0;
    for (const auto& v : a_) s = std::max(s, std::abs(v));
    return s;
  }

  bool all_finite() const {
    for (const auto& v : a_)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
  }

  void require_square(const char* who) const {
    if (!square()) throw Error(ErrorKind::Dimension, std::string(who) + ": matrix not square");
  }
  void require_finite(const char* who) const {
    if (!all_finite()) throw Error(ErrorKind::Dimension, std::string(who) + ": non-finite entry");
  }
  void require_same_shape(const CMat& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_)
      throw Error(ErrorKind::Dimension, "CMat: shape mismatch");
  }

  CMat block(std::size_t i0, std::size_t j0, std::size_t r, std::size_t c) const {
    CMat b(r, c);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) b(i, j) = (*this)(i0 + i, j0 + j);
    return b;
  }
  void set_block(std::size_t i0, std::size_t j0, const CMat& b) {
    for (std::size_t i = 0; i < b.rows(); ++i)
      for (std::size_t j = 0; j < b.cols(); ++j) (*this)(i0 + i, j0 + j) = b(i, j);
  }

private:
  std::size_t rows_, cols_;
  std::vector<cx> a_;
};

inline CMat hermitian_part(const CMat& m) {
  CMat r = (m + m.adjoint()) * cx(0.5, 0.0);
  return r;
}
inline CMat skew_part_over_i(const CMat& m) {  // (M - M*)/(2i)
  return (m - m.adjoint()) * (cx(0.0, -0.5));
}

// --- pivoted LU ------------------------------------------------------------

struct Lu {
  CMat lu;                  // packed L\U
  std::vector<std::size_t> piv;
  int sign = 1;
  bool singular = false;

  cx det() const {
    if (singular) return cx(0.0, 0.0);
    cx d = cx(static_cast<double>(sign), 0.0);
    for (std::size_t i = 0; i < lu.rows(); ++i) d *= lu(i, i);
    return d;
  }
  // One branch of log det: sum of principal logs of pivots. Immune to
  // overflow of the raw pivot product.
  cx log_det() const {
    if (singular)
      throw SingularityError("log_det: exactly singular factor", std::numeric_limits<double>::infinity());
    cx s = sign > 0 ? cx(0.0, 0.0) : cx(0.0, kPi);
    for (std::size_t i = 0; i < lu.rows(); ++i) s += std::log(lu(i, i));
    return s;
  }
};

inline Lu lu_factor(CMat a) {
  a.require_square("lu_factor");
  const std::size_t n = a.rows();
  Lu f;
  f.piv.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::abs(a(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      double v = std::abs(a(i, k));
      if (v > best) { best = v; p = i; }
    }
    f.piv[k] = p;
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
      f.sign = -f.sign;
    }
    const cx pivot = a(k, k);
    if (pivot == cx(0.0, 0.0)) { f.singular = true; continue; }
    for (std::size_t i = k + 1; i < n; ++i) {
      const cx l = a(i, k) / pivot;
      a(i, k) = l;
      if (l == cx(0.0, 0.0)) continue;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= l * a(k, j);
    }
  }
  f.lu = std::move(a);
  return f;
}

// Solve with an already-computed factorization; no condition gate.
// L U = P A with P the accumulated permutation, so the rhs is permuted in
// full before the triangular sweeps.
inline CMat lu_solve(const Lu& f, CMat rhs) {
  const std::size_t n = f.lu.rows();
  if (rhs.rows() != n) throw Error(ErrorKind::Dimension, "lu_solve: rhs rows mismatch");
  if (f.singular)
    throw SingularityError("lu_solve: singular matrix", std::numeric_limits<double>::infinity());
  const std::size_t m = rhs.cols();
  for (std::size_t k = 0; k < n; ++k)
    if (f.piv[k] != k)
      for (std::size_t j = 0; j < m; ++j) std::swap(rhs(k, j), rhs(f.piv[k], j));
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = k + 1; i < n; ++i) {
      const cx l = f.lu(i, k);
      if (l == cx(0.0, 0.0)) continue;
      for (std::size_t j = 0; j < m; ++j) rhs(i, j) -= l * rhs(k, j);
    }
  }
  for (std::size_t k = n; k-- > 0;) {
    const cx d = f.lu(k, k);
    for (std::size_t j = 0; j < m; ++j) {
      cx s = rhs(k, j);
      for (std::size_t i = k + 1; i < n; ++i) s -= f.lu(k, i) * rhs(i, j);
      rhs(k, j) = s / d;
    }
  }
  return rhs;
}

// --- Hermitian Jacobi eigensolver -------------------------------------------

struct HermEig {
  std::vector<double> values;  // ascending
  CMat vectors;                // columns; empty when not requested
};

// Cyclic Jacobi with complex rotations. Input is Hermitianized internally.
inline HermEig hermitian_eig(const CMat& m, bool want_vectors = false) {
  m.require_square("hermitian_eig");
  const std::size_t n = m.rows();
  CMat a = hermitian_part(m);
  CMat v = want_vectors ? CMat::identity(n) : CMat();
  const double scale = std::max(a.norm_max(), 1e-300);
  const double tol = 1e-15 * scale;
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::abs(a(p, q)));
    if (off <= tol) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const cx apq = a(p, q);
        const double mag = std::abs(apq);
        if (mag <= tol * 1e-2) continue;
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        const cx phase = apq / mag;
        const double tau = (aqq - app) / (2.0 * mag);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const cx s = phase * (t * c);
        // A <- J^H A J with J = [[c, s],[-conj(s), c]] acting on (p,q)
        for (std::size_t k = 0; k < n; ++k) {
          const cx akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - std::conj(s) * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const cx apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = std::conj(s) * apk + c * aqk;
        }
        a(p, q) = std::conj(a(q, p));
        a(p, p) = cx(a(p, p).real(), 0.0);
        a(q, q) = cx(a(q, q).real(), 0.0);
        if (want_vectors) {
          for (std::size_t k = 0; k < n; ++k) {
            const cx vkp = v(k, p), vkq = v(k, q);
            v(k, p) = c * vkp - std::conj(s) * vkq;
            v(k, q) = s * vkp + c * vkq;
          }
        }
      }
    }
  }
  HermEig r;
  r.values.resize(n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i).real();
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return diag[i] < diag[j]; });
  for (std::size_t i = 0; i < n; ++i) r.values[i] = diag[order[i]];
  if (want_vectors) {
    r.vectors = CMat(n, n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) r.vectors(i, j) = v(i, order[j]);
  }
  return r;
}

// --- singular values ---------------------------------------------------------

// Singular values (descending) by one-sided Jacobi on the columns. Small
// singular values are resolved to full relative accuracy, which the spectrum
// predicates downstream rely on.
inline std::vector<double> singular_values(const CMat& m) {
  if (m.empty()) return {};
  CMat a = (m.rows() >= m.cols()) ? m : m.adjoint();
  const std::size_t rows = a.rows(), n = a.cols();
  for (int sweep = 0; sweep < 60; ++sweep) {
    double worst = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double gpp = 0.0, gqq = 0.0;
        cx gpq = 0.0;
        for (std::size_t k = 0; k < rows; ++k) {
          gpp += std::norm(a(k, p));
          gqq += std::norm(a(k, q));
          gpq += std::conj(a(k, p)) * a(k, q);
        }
        const double mag = std::abs(gpq);
        const double denom = std::sqrt(gpp * gqq);
        if (denom <= 0.0) continue;
        worst = std::max(worst, mag / denom);
        if (mag <= 1e-15 * denom) continue;
        const cx phase = gpq / mag;
        const double tau = (gqq - gpp) / (2.0 * mag);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const cx s = phase * (t * c);
        for (std::size_t k = 0; k < rows; ++k) {
          const cx akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - std::conj(s) * akq;
          a(k, q) = s * akp + c * akq;
        }
      }
    }
    if (worst <= 1e-15) break;
  }
  std::vector<double> s(n);
  for (std::size_t j = 0; j < n; ++j) {
    double col = 0.0;
    for (std::size_t k = 0; k < rows; ++k) col += std::norm(a(k, j));
    s[j] = std::sqrt(col);
  }
  std::sort(s.begin(), s.end(), std::greater<double>());
  return s;
}

inline std::size_t svd_rank(const CMat& m, double tol) {
  if (tol < 0.0) throw Error(ErrorKind::Parameter, "svd_rank: negative tolerance");
  if (m.empty()) return 0;
  auto s = singular_values(m);
  if (s.empty() || s[0] <= 0.0) return 0;
  const double cut = tol * s[0];
  std::size_t r = 0;
  for (double v : s)
    if (v > cut) ++r;
  return r;
}

inline double sigma_max(const CMat& m) {
  auto s = singular_values(m);
  return s.empty() ? 0.0 : s.front();
}
inline double sigma_min(const CMat& m) {
  auto s = singular_values(m);
  return s.empty() ? 0.0 : s.back();
}

// --- public det / solve -------------------------------------------------------

inline cx det(const CMat& m) {
  m.require_square("det");
  m.require_finite("det");
  if (m.rows() == 0) return cx(1.0, 0.0);
  return lu_factor(m).det();
}

constexpr double kSolveConditionLimit = 1e12;

// Solve m x = rhs, rejecting matrices whose condition estimate exceeds 1e12.
inline CMat solve(const CMat& m, const CMat& rhs) {
  m.require_square("solve");
  m.require_finite("solve");
  rhs.require_finite("solve");
  auto s = singular_values(m);
  const double smax = s.empty() ? 0.0 : s.front();
  const double smin = s.empty() ? 0.0 : s.back();
  const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(cond < kSolveConditionLimit))
    throw SingularityError("solve: condition estimate " + std::to_string(cond), cond);
  return lu_solve(lu_factor(m), rhs);
}

inline CMat inverse(const CMat& m) { return solve(m, CMat::identity(m.rows())); }

// --- general complex eigenvalues (Hessenberg + shifted QR) --------------------

namespace detail {

inline void hessenberg_reduce(CMat& a) {
  const std::size_t n = a.rows();
  if (n < 3) return;
  for (std::size_t k = 0; k + 2 < n; ++k) {
    // Householder on column k, rows k+1..n-1
    double colnorm = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) colnorm += std::norm(a(i, k));
    colnorm = std::sqrt(colnorm);
    if (colnorm <= 1e-300) continue;
    cx x0 = a(k + 1, k);
    cx alpha = (x0 == cx(0.0, 0.0)) ? cx(-colnorm, 0.0) : -(x0 / std::abs(x0)) * colnorm;
    std::vector<cx> v(n - k - 1);
    v[0] = x0 - alpha;
    for (std::size_t i = k + 2; i < n; ++i) v[i - k - 1] = a(i, k);
    double vn2 = 0.0;
    for (const auto& t : v) vn2 += std::norm(t);
    if (vn2 <= 1e-300) continue;
    // A <- (I - 2 v v^H / v^H v) A
    for (std::size_t j = k; j < n; ++j) {
      cx s = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) s += std::conj(v[i]) * a(k + 1 + i, j);
      s *= 2.0 / vn2;
      for (std::size_t i = 0; i < v.size(); ++i) a(k + 1 + i, j) -= s * v[i];
    }
    // A <- A (I - 2 v v^H / v^H v)
    for (std::size_t i = 0; i < n; ++i) {
      cx s = 0.0;
      for (std::size_t j = 0; j < v.size(); ++j) s += a(i, k + 1 + j) * v[j];
      s *= 2.0 / vn2;
      for (std::size_t j = 0; j < v.size(); ++j) a(i, k + 1 + j) -= s * std::conj(v[j]);
    }
    for (std::size_t i = k + 2; i < n; ++i) a(i, k) = 0.0;
  }
}

struct Givens { double c; cx s; };

inline Givens make_givens(cx a, cx b) {
  const double na = std::abs(a), nb = std::abs(b);
  if (nb == 0.0) return {1.0, cx(0.0, 0.0)};
  if (na == 0.0) return {0.0, cx(1.0, 0.0)};
  const double r = std::hypot(na, nb);
  return {na / r, (a / na) * std::conj(b) / r};
}

} // namespace detail

// Eigenvalues of a general complex dense matrix. Shifted single-shift QR on the
// Hessenberg form; values in no particular order.
inline std::vector<cx> eigenvalues_dense(CMat a, int max_total_iter = 0) {
  a.require_square("eigenvalues_dense");
  const std::size_t n = a.rows();
  std::vector<cx> eig(n);
  if (n == 0) return eig;
  if (n == 1) { eig[0] = a(0, 0); return eig; }
  detail::hessenberg_reduce(a);
  if (max_total_iter <= 0) max_total_iter = 80 * static_cast<int>(n);
  std::size_t hi = n - 1;
  int iter_here = 0, total = 0;
  const double ulp = std::numeric_limits<double>::epsilon();
  while (true) {
    // deflate: find the start of the trailing unreduced block
    std::size_t lo = hi;
    while (lo > 0) {
      const double sub = std::abs(a(lo, lo - 1));
      const double diag = std::abs(a(lo - 1, lo - 1)) + std::abs(a(lo, lo));
      if (sub <= ulp * std::max(diag, 1e-300) * 8.0) { a(lo, lo - 1) = 0.0; break; }
      --lo;
    }
    if (lo == hi) {
      eig[hi] = a(hi, hi);
      if (hi == 0) break;
      --hi;
      iter_here = 0;
      continue;
    }
    if (++total > max_total_iter)
      throw Error(ErrorKind::Convergence, "eigenvalues_dense: QR iteration stalled");
    // Wilkinson-style shift from trailing 2x2
    cx shift;
    {
      const cx h00 = a(hi - 1, hi - 1), h01 = a(hi - 1, hi), h10 = a(hi, hi - 1), h11 = a(hi, hi);
      const cx tr = h00 + h11;
      const cx dt = h00 * h11 - h01 * h10;
      cx disc = std::sqrt(tr * tr - 4.0 * dt);
      cx r1 = (tr + disc) * 0.5, r2 = (tr - disc) * 0.5;
      shift = (std::abs(r1 - h11) < std::abs(r2 - h11)) ? r1 : r2;
      if (++iter_here % 24 == 0) shift = h11 + cx(1.5 * std::abs(h10), 0.5 * std::abs(h10));
    }
    // implicit single-shift bulge chase on rows/cols lo..hi
    cx x = a(lo, lo) - shift;
    cx y = a(lo + 1, lo);
    for (std::size_t k = lo; k < hi; ++k) {
      auto g = detail::make_givens(x, y);
      const std::size_t jstart = (k == lo) ? lo : k - 1;
      for (std::size_t j = jstart; j < n; ++j) {
        const cx t1 = a(k, j), t2 = a(k + 1, j);
        a(k, j) = g.c * t1 + g.s * t2;
        a(k + 1, j) = -std::conj(g.s) * t1 + g.c * t2;
      }
      const std::size_t itop = std::min(k + 2, hi);
      for (std::size_t i = 0; i <= itop; ++i) {
        const cx t1 = a(i, k), t2 = a(i, k + 1);
        a(i, k) = g.c * t1 + std::conj(g.s) * t2;
        a(i, k + 1) = -g.s * t1 + g.c * t2;
      }
      if (k + 1 < hi) { x = a(k + 1, k); y = a(k + 2, k); }
    }
  }
  return eig;
}

// --- branch-continued logarithm ----------------------------------------------

// Samples of a determinant along a path with a continuously unwrapped complex
// logarithm. offset records the total multiple of 2*pi absorbed relative to
// pointwise principal values.
struct BranchLog {
  std::vector<cx> path;
  std::vector<cx> values;
  long offset = 0;
};

// Consecutive phase increments at or beyond this fraction of pi are treated as
// unresolvable without refinement.
constexpr double kUnwrapJumpLimit = kPi - 0.15;

// Loose phase continuation for boundary-value ladders z = t + i*eps, where
// increments approach pi legitimately near real zeros: accumulates principal
// increments with no refinement gate. Returns continued imaginary parts.
inline std::vector<double> continue_phases(const std::vector<cx>& values, double seed_imag = 0.0) {
  if (values.empty()) throw Error(ErrorKind::Parameter, "continue_phases: empty input");
  std::vector<double> out(values.size());
  const double arg0 = std::arg(values[0]);
  const double k = std::round((seed_imag - arg0) / (2.0 * kPi));
  out[0] = arg0 + 2.0 * kPi * k;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (std::abs(values[i]) < 1e-300)
      throw PathError(ErrorKind::ZeroCrossing, "continue_phases: zero value", i);
    out[i] = out[i - 1] + std::arg(values[i] / values[i - 1]);
  }
  return out;
}

inline BranchLog unwrap_log_det(const std::vector<cx>& path, const std::vector<cx>& dets,
                                cx seed = cx(0.0, 0.0)) {
  if (path.size() != dets.size())
    throw Error(ErrorKind::Dimension, "unwrap_log_det: path/dets size mismatch");
  if (dets.empty()) throw Error(ErrorKind::Parameter, "unwrap_log_det: empty input");
  BranchLog out;
  out.path = path;
  out.values.resize(dets.size());
  for (std::size_t k = 0; k < dets.size(); ++k) {
    if (dets[k] == cx(0.0, 0.0) || std::abs(dets[k]) < 1e-300)
      throw PathError(ErrorKind::ZeroCrossing, "unwrap_log_det: zero determinant on path", k);
  }
  // First value: branch of log(dets[0]) whose imaginary part is nearest the
  // seed's imaginary part. The real part is always log|dets[0]|.
  {
    const double arg0 = std::arg(dets[0]);
    const double k = std::round((seed.imag() - arg0) / (2.0 * kPi));
    out.values[0] = cx(std::log(std::abs(dets[0])), arg0 + 2.0 * kPi * k);
  }
  double carried = 0.0;
  for (std::size_t k = 1; k < dets.size(); ++k) {
    const cx ratio = dets[k] / dets[k - 1];
    const double dphi = std::arg(ratio);
    if (std::abs(dphi) >= kUnwrapJumpLimit)
      throw PathError(ErrorKind::Refinement,
                      "unwrap_log_det: phase increment too close to pi; refine the path", k);
    carried += dphi;
    out.values[k] = cx(std::log(std::abs(dets[k])), out.values[0].imag() + carried);
  }
  const double tail_principal = std::arg(dets.back());
  out.offset = static_cast<long>(std::llround((out.values.back().imag() - tail_principal) / (2.0 * kPi)));
  return out;
}

} // namespace cxlinalg

using cxlinalg::CMat;
using cxlinalg::BranchLog;

} // namespace btdet
