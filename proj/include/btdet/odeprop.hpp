#pragma once

// Propagation of matrix solutions of -f'' + Q f = z f: fundamental pairs on an
// interval (adaptive embedded Runge-Kutta) and Jost solutions on the half-line
// (backward fixed-point iteration on the reduced Volterra equation).

#include <cmath>
#include <fstream>
#include <memory>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "btdet/cxlinalg.hpp"
#include "btdet/errors.hpp"
#include "btdet/util.hpp"

namespace btdet {
namespace odeprop {

// --- potential ----------------------------------------------------------------

enum class Support { Interval, HalfLine };

// Hermitian n x n matrix potential on [0,b] or on the half-line; on the
// half-line, Q is treated as exactly 0 beyond the cutoff R.
class PotentialSpec {
public:
  static PotentialSpec zero(std::size_t n, Support s, double endpoint) {
    PotentialSpec q;
    q.n_ = n;
    q.support_ = s;
    q.end_ = endpoint;
    q.l1_ = 0.0;
    q.fn_ = [n](double) { return CMat(n, n); };
    q.is_zero_ = true;
    q.validate();
    return q;
  }

  static PotentialSpec from_function(std::size_t n, Support s, double endpoint,
                                     std::function<CMat(double)> fn, double l1_estimate) {
    PotentialSpec q;
    q.n_ = n;
    q.support_ = s;
    q.end_ = endpoint;
    q.l1_ = l1_estimate;
    q.fn_ = std::move(fn);
    q.validate();
    return q;
  }

  // Scalar square well Q = -depth on [0, width], 0 beyond.
  static PotentialSpec square_well(double depth, double width) {
    PotentialSpec q;
    q.n_ = 1;
    q.support_ = Support::HalfLine;
    q.end_ = width;
    q.l1_ = std::abs(depth) * width;
    q.fn_ = [depth, width](double x) {
      CMat m(1, 1);
      m(0, 0) = (x <= width) ? cx(-depth, 0.0) : cx(0.0, 0.0);
      return m;
    };
    q.breakpoints_ = {width};
    q.validate();
    return q;
  }

  // CSV columns: x, Re Q_ij, Im Q_ij in lexicographic ij order. Values between
  // samples are linearly interpolated; beyond the last sample Q is 0.
  static PotentialSpec from_csv(const std::string& path, Support s);

  std::size_t channels() const noexcept { return n_; }
  Support support() const noexcept { return support_; }
  bool is_interval() const noexcept { return support_ == Support::Interval; }
  // b for interval support, cutoff R for half-line support
  double endpoint() const noexcept { return end_; }
  double l1_norm_estimate() const noexcept { return l1_; }
  bool is_zero() const noexcept { return is_zero_; }
  const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }

  CMat operator()(double x) const {
    if (support_ == Support::HalfLine && x > end_) return CMat(n_, n_);
    return fn_(x);
  }

  double sup_norm_estimate() const {
    double m = 0.0;
    for (int k = 0; k <= 64; ++k) m = std::max(m, (*this)(end_ * k / 64.0).norm_max());
    return m;
  }

private:
  void validate() const {
    if (n_ == 0) throw Error(ErrorKind::Parameter, "PotentialSpec: zero channels");
    if (!(end_ > 0.0)) throw Error(ErrorKind::Parameter, "PotentialSpec: endpoint must be positive");
    if (support_ == Support::HalfLine && !std::isfinite(l1_))
      throw Error(ErrorKind::Parameter, "PotentialSpec: half-line requires finite l1 estimate");
    for (int k = 0; k <= 37; ++k) {
      const double x = end_ * k / 37.0;
      CMat q = (*this)(x);
      if (q.rows() != n_ || q.cols() != n_)
        throw Error(ErrorKind::Dimension, "PotentialSpec: sample has wrong shape");
      const double defect = (q - q.adjoint()).norm_max();
      if (defect > 1e-12 * std::max(1.0, q.norm_max()))
        throw Error(ErrorKind::Contract, "PotentialSpec: sample not Hermitian at x=" + std::to_string(x));
    }
  }

  std::size_t n_ = 0;
  Support support_ = Support::Interval;
  double end_ = 0.0;
  double l1_ = 0.0;
  bool is_zero_ = false;
  std::vector<double> breakpoints_;
  std::function<CMat(double)> fn_;
};

// --- fundamental solutions ------------------------------------------------------

// Values and x-derivatives at the right endpoint of the C/S basis:
// C(z,0)=I, C'(z,0)=0 and S(z,0)=0, S'(z,0)=I.
struct FundamentalPair {
  cx z;
  CMat C, Cp, S, Sp;

  // Defect of the conserved pairing C^* Sp - Cp^* S = I (exact at real z).
  double symplectic_defect() const {
    CMat w = C.adjoint() * Sp - Cp.adjoint() * S - CMat::identity(C.rows());
    return w.norm_max();
  }
};

namespace detail {

// State carries U = [C S] (n x 2n) and V = U'. Flat layout: U then V.
struct OdeSystem {
  const PotentialSpec* q;
  cx z;
  std::size_t n;

  void rhs(double x, const std::vector<cx>& y, std::vector<cx>& dy) const {
    const std::size_t m = 2 * n * n;  // entries in U (n x 2n)
    CMat qx = (*q)(x);
    for (std::size_t k = 0; k < m; ++k) dy[k] = y[m + k];
    // V' = (Q - z) U, row-major U with 2n columns
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < 2 * n; ++j) {
        cx acc = -z * y[i * 2 * n + j];
        for (std::size_t l = 0; l < n; ++l) acc += qx(i, l) * y[l * 2 * n + j];
        dy[m + i * 2 * n + j] = acc;
      }
    }
  }
};

// Dormand-Prince 5(4) embedded pair on a flat complex state.
template <typename Rhs>
void dormand_prince(const Rhs& rhs, std::vector<cx>& y, double x0, double x1, double tol,
                    const char* who) {
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                      a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                      b6 = 11.0 / 84;
  static const double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                      e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                      e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

  const std::size_t m = y.size();
  std::vector<cx> k1(m), k2(m), k3(m), k4(m), k5(m), k6(m), k7(m), yt(m), y5(m);
  double x = x0;
  const double span = x1 - x0;
  double h = span / 16.0;
  int steps = 0;
  while (x < x1) {
    if (x + h > x1) h = x1 - x;
    if (++steps > 2000000) throw Error(ErrorKind::Stiffness, std::string(who) + ": step budget exhausted");
    rhs(x, y, k1);
    for (std::size_t i = 0; i < m; ++i) yt[i] = y[i] + h * (a21 * k1[i]);
    rhs(x + c2 * h, yt, k2);
    for (std::size_t i = 0; i < m; ++i) yt[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    rhs(x + c3 * h, yt, k3);
    for (std::size_t i = 0; i < m; ++i) yt[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    rhs(x + c4 * h, yt, k4);
    for (std::size_t i = 0; i < m; ++i)
      yt[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    rhs(x + c5 * h, yt, k5);
    for (std::size_t i = 0; i < m; ++i)
      yt[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    rhs(x + h, yt, k6);
    for (std::size_t i = 0; i < m; ++i)
      y5[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    rhs(x + h, y5, k7);

    double err = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const cx e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double sc = tol * (1.0 + std::max(std::abs(y[i]), std::abs(y5[i])));
      err = std::max(err, std::abs(e) / sc);
    }
    if (err <= 1.0) {
      x += h;
      y.swap(y5);
    }
    double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
    fac = std::min(5.0, std::max(0.2, fac));
    h *= fac;
    if (h < 1e-13 * std::max(1.0, std::abs(span)))
      throw Error(ErrorKind::Stiffness,
                  std::string(who) + ": step underflow; reduce |z| (suggested cap ~1e6)");
  }
}

} // namespace detail

inline FundamentalPair fundamental_solutions(const PotentialSpec& q, cx z, double tol = 1e-12) {
  if (!q.is_interval())
    throw Error(ErrorKind::Contract, "fundamental_solutions: interval support required");
  const std::size_t n = q.channels();
  const double b = q.endpoint();
  std::vector<cx> y(4 * n * n, cx(0.0, 0.0));
  // U(0) = [I 0], V(0) = [0 I]
  for (std::size_t i = 0; i < n; ++i) {
    y[i * 2 * n + i] = 1.0;
    y[2 * n * n + i * 2 * n + (n + i)] = 1.0;
  }
  detail::OdeSystem sys{&q, z, n};
  detail::dormand_prince([&sys](double x, const std::vector<cx>& yy, std::vector<cx>& dy) { sys.rhs(x, yy, dy); },
                         y, 0.0, b, tol, "fundamental_solutions");
  FundamentalPair out;
  out.z = z;
  out.C = CMat(n, n);
  out.S = CMat(n, n);
  out.Cp = CMat(n, n);
  out.Sp = CMat(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out.C(i, j) = y[i * 2 * n + j];
      out.S(i, j) = y[i * 2 * n + (n + j)];
      out.Cp(i, j) = y[2 * n * n + i * 2 * n + j];
      out.Sp(i, j) = y[2 * n * n + i * 2 * n + (n + j)];
    }
  }
  return out;
}

// Fixed-step RK4 sampling of [C S; C' S'] on an ascending grid starting at 0.
// Used where whole-solution samples are needed (gamma fields, kernels).
inline std::vector<FundamentalPair> propagate_on_grid(const PotentialSpec& q, cx z,
                                                      const std::vector<double>& grid) {
  if (grid.empty() || grid.front() != 0.0)
    throw Error(ErrorKind::Parameter, "propagate_on_grid: grid must start at 0");
  const std::size_t n = q.channels();
  std::vector<cx> y(4 * n * n, cx(0.0, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    y[i * 2 * n + i] = 1.0;
    y[2 * n * n + i * 2 * n + (n + i)] = 1.0;
  }
  detail::OdeSystem sys{&q, z, n};
  const std::size_t m = y.size();
  std::vector<cx> k1(m), k2(m), k3(m), k4(m), yt(m);
  auto rk4_step = [&](double x, double h) {
    sys.rhs(x, y, k1);
    for (std::size_t i = 0; i < m; ++i) yt[i] = y[i] + 0.5 * h * k1[i];
    sys.rhs(x + 0.5 * h, yt, k2);
    for (std::size_t i = 0; i < m; ++i) yt[i] = y[i] + 0.5 * h * k2[i];
    sys.rhs(x + 0.5 * h, yt, k3);
    for (std::size_t i = 0; i < m; ++i) yt[i] = y[i] + h * k3[i];
    sys.rhs(x + h, yt, k4);
    for (std::size_t i = 0; i < m; ++i)
      y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  };
  const double hmax = std::min(0.01, 0.25 / (1.0 + std::abs(sqrt_upper(z))));
  std::vector<FundamentalPair> out;
  out.reserve(grid.size());
  auto snapshot = [&](double at) {
    FundamentalPair p;
    p.z = z;
    p.C = CMat(n, n);
    p.S = CMat(n, n);
    p.Cp = CMat(n, n);
    p.Sp = CMat(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        p.C(i, j) = y[i * 2 * n + j];
        p.S(i, j) = y[i * 2 * n + (n + j)];
        p.Cp(i, j) = y[2 * n * n + i * 2 * n + j];
        p.Sp(i, j) = y[2 * n * n + i * 2 * n + (n + j)];
      }
    (void)at;
    out.push_back(std::move(p));
  };
  double x = 0.0;
  snapshot(x);
  for (std::size_t g = 1; g < grid.size(); ++g) {
    const double target = grid[g];
    if (target < x) throw Error(ErrorKind::Parameter, "propagate_on_grid: grid not ascending");
    const double span = target - x;
    const int sub = std::max(1, static_cast<int>(std::ceil(span / hmax)));
    const double h = span / sub;
    for (int s = 0; s < sub; ++s) rk4_step(x + s * h, h);
    x = target;
    snapshot(x);
  }
  return out;
}

// --- Jost solutions ---------------------------------------------------------------

struct JostValue {
  cx z;
  CMat F0;       // F(z, 0)
  CMat F0p;      // F'(z, 0)
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> residual_history;
};

// Backward fixed-point iteration on G(x) = e^{-i sqrt(z) x} F(z,x):
//   G(x) = I - int_x^R (1 - e^{2 i k (t-x)}) / (2 i k) Q(t) G(t) dt,  k = sqrt(z).
// The suffix integrals are accumulated by stable backward recurrences.
inline JostValue jost(const PotentialSpec& q, cx z, double fp_tol = 1e-9, int max_iter = 400) {
  if (q.is_interval()) throw Error(ErrorKind::Contract, "jost: half-line support required");
  if (z == cx(0.0, 0.0) || (z.imag() == 0.0 && z.real() >= 0.0))
    throw Error(ErrorKind::Domain, "jost: z on the branch cut [0,inf); approach via t+i*eps");
  const std::size_t n = q.channels();
  const double R = q.endpoint();
  const cx k = sqrt_upper(z);

  JostValue out;
  out.z = z;
  if (q.is_zero()) {  // free tail is exact
    out.F0 = CMat::identity(n);
    out.F0p = CMat::identity(n) * (cx(0, 1) * k);
    return out;
  }

  // grid resolution from the trapezoid error model h^2 * R * |2k|^2 * ||Q|| / 12
  const double kmag = std::max(1.0, std::abs(k));
  const double qsup = std::max(1.0, q.sup_norm_estimate());
  double h_target = std::sqrt(3e-9 / (R * qsup)) / kmag;
  std::size_t N = static_cast<std::size_t>(std::ceil(R / h_target));
  N = std::min<std::size_t>(std::max<std::size_t>(N, 2000), 200000);
  const double h = R / static_cast<double>(N);

  std::vector<CMat> qg(N + 1);  // Q(x_j)
  for (std::size_t j = 0; j <= N; ++j) qg[j] = q(j * h);

  std::vector<CMat> G(N + 1, CMat::identity(n)), P(N + 1, CMat(n, n));
  const cx two_ik = cx(0.0, 2.0) * k;
  const cx decay = std::exp(two_ik * h);  // |decay| <= 1 on the chosen branch

  std::vector<CMat> f(N + 1, CMat(n, n));
  double defect = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    for (std::size_t j = 0; j <= N; ++j) f[j] = qg[j] * G[j];
    // S1(x_j) = int_{x_j}^R f dt ;  T(x_j) = int_{x_j}^R e^{2ik(t-x_j)} f dt
    std::vector<CMat> newG(N + 1);
    newG[N] = CMat::identity(n);
    CMat S1j = CMat(n, n), Tj = CMat(n, n);
    for (std::size_t j = N; j-- > 0;) {
      // local trapezoid of f over [x_j, x_{j+1}]
      S1j = S1j + (f[j] + f[j + 1]) * cx(0.5 * h, 0.0);
      // T(x_j) = e^{2ikh} T(x_{j+1}) + int_{x_j}^{x_{j+1}} e^{2ik(t-x_j)} f dt
      Tj = Tj * decay + (f[j] + f[j + 1] * decay) * cx(0.5 * h, 0.0);
      newG[j] = CMat::identity(n) - (S1j - Tj) * (cx(1.0, 0.0) / two_ik);
    }
    defect = 0.0;
    for (std::size_t j = 0; j <= N; ++j) defect = std::max(defect, (newG[j] - G[j]).norm_max());
    G.swap(newG);
    out.iterations = it + 1;
    out.residual_history.push_back(defect);
    if (defect <= fp_tol) break;
  }
  out.residual = defect;
  if (defect > fp_tol)
    throw Error(ErrorKind::Convergence,
                "jost: fixed point not reached, residual " + std::to_string(defect));

  out.F0 = G[0];
  // F'(0) = i k I - int_0^R (1 + e^{2ikt})/2 Q G dt, trapezoid on the same grid
  CMat intg(n, n);
  cx e2 = cx(1.0, 0.0);
  for (std::size_t j = 0; j <= N; ++j) {
    const double w = (j == 0 || j == N) ? 0.5 * h : h;
    intg = intg + (qg[j] * G[j]) * (cx(0.5, 0.0) * (cx(1.0, 0.0) + e2) * w);
    e2 *= decay;
  }
  out.F0p = CMat::identity(n) * (cx(0, 1) * k) - intg;
  return out;
}

// --- CSV ingestion -----------------------------------------------------------------

inline PotentialSpec PotentialSpec::from_csv(const std::string& path, Support s) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "PotentialSpec::from_csv: cannot open " + path);
  std::vector<double> xs;
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::vector<double> vals;
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (...) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (rows.empty()) continue;  // header row
      throw Error(ErrorKind::Io, "PotentialSpec::from_csv: non-numeric row");
    }
    if (vals.size() < 3) throw Error(ErrorKind::Io, "PotentialSpec::from_csv: too few columns");
    xs.push_back(vals[0]);
    rows.push_back(std::vector<double>(vals.begin() + 1, vals.end()));
  }
  if (rows.size() < 2) throw Error(ErrorKind::Io, "PotentialSpec::from_csv: need at least 2 samples");
  const std::size_t ncols = rows[0].size();
  const std::size_t n = static_cast<std::size_t>(std::llround(std::sqrt(ncols / 2.0)));
  if (2 * n * n != ncols)
    throw Error(ErrorKind::Io, "PotentialSpec::from_csv: column count is not 1 + 2 n^2");
  for (const auto& r : rows)
    if (r.size() != ncols) throw Error(ErrorKind::Io, "PotentialSpec::from_csv: ragged rows");
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] <= xs[i - 1]) throw Error(ErrorKind::Io, "PotentialSpec::from_csv: x not ascending");
  if (std::abs(xs.front()) > 1e-12)
    throw Error(ErrorKind::Io, "PotentialSpec::from_csv: samples must start at x=0");

  auto table_x = std::make_shared<std::vector<double>>(std::move(xs));
  auto table_q = std::make_shared<std::vector<std::vector<double>>>(std::move(rows));
  const double endpoint = table_x->back();
  auto fn = [table_x, table_q, n](double x) {
    const auto& X = *table_x;
    const auto& Qr = *table_q;
    CMat m(n, n);
    if (x <= X.front()) x = X.front();
    if (x >= X.back()) {
      const auto& r = Qr.back();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          m(i, j) = cx(r[2 * (i * n + j)], r[2 * (i * n + j) + 1]);
      return m;
    }
    auto it = std::upper_bound(X.begin(), X.end(), x);
    const std::size_t hi = static_cast<std::size_t>(it - X.begin());
    const std::size_t lo = hi - 1;
    const double t = (x - X[lo]) / (X[hi] - X[lo]);
    const auto& a = Qr[lo];
    const auto& b = Qr[hi];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t k2 = 2 * (i * n + j);
        m(i, j) = cx((1 - t) * a[k2] + t * b[k2], (1 - t) * a[k2 + 1] + t * b[k2 + 1]);
      }
    return m;
  };
  // crude l1 estimate by trapezoid over the samples
  double l1 = 0.0;
  for (std::size_t i = 1; i < table_x->size(); ++i) {
    const double hseg = (*table_x)[i] - (*table_x)[i - 1];
    double a = 0.0, b = 0.0;
    for (std::size_t k2 = 0; k2 < ncols; k2 += 2) {
      a = std::max(a, std::hypot((*table_q)[i - 1][k2], (*table_q)[i - 1][k2 + 1]));
      b = std::max(b, std::hypot((*table_q)[i][k2], (*table_q)[i][k2 + 1]));
    }
    l1 += 0.5 * hseg * (a + b);
  }
  return from_function(n, s, endpoint, fn, l1);
}

} // namespace odeprop

using odeprop::PotentialSpec;
using odeprop::FundamentalPair;
using odeprop::JostValue;

} // namespace btdet
