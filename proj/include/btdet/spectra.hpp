#pragma once

// Eigenvalue localization by the argument principle, spectral shift functions
// (real and complex), Blaschke factorization for dissipative extensions, and
// contour functional-calculus traces.

#include <cmath>
#include <climits>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "btdet/cxlinalg.hpp"
#include "btdet/errors.hpp"
#include "btdet/pdet.hpp"
#include "btdet/triplets.hpp"
#include "btdet/util.hpp"

namespace btdet {
namespace spectra {

// --- contours -------------------------------------------------------------------

struct Contour {
  enum Kind { Circle, Polyline } kind = Circle;
  cx center;
  double radius = 1.0;
  std::vector<cx> vertices;  // closed implicitly (last connects to first)
  std::size_t samples = 128;

  static Contour circle(cx c, double r, std::size_t samples = 128) {
    Contour k;
    k.kind = Circle;
    k.center = c;
    k.radius = r;
    k.samples = samples;
    return k;
  }
  static Contour rectangle(cx lo, cx hi, std::size_t samples = 128) {
    Contour k;
    k.kind = Polyline;
    k.vertices = {lo, cx(hi.real(), lo.imag()), hi, cx(lo.real(), hi.imag())};
    k.samples = samples;
    return k;
  }

  // m points along the positively oriented closed contour
  std::vector<cx> sample(std::size_t m) const {
    std::vector<cx> pts;
    pts.reserve(m);
    if (kind == Circle) {
      for (std::size_t k = 0; k < m; ++k) {
        const double th = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(m);
        pts.push_back(center + radius * cx(std::cos(th), std::sin(th)));
      }
      return pts;
    }
    double per = 0.0;
    const std::size_t nv = vertices.size();
    for (std::size_t e = 0; e < nv; ++e) per += std::abs(vertices[(e + 1) % nv] - vertices[e]);
    for (std::size_t k = 0; k < m; ++k) {
      double s = per * static_cast<double>(k) / static_cast<double>(m);
      for (std::size_t e = 0; e < nv; ++e) {
        const cx a = vertices[e], b = vertices[(e + 1) % nv];
        const double len = std::abs(b - a);
        if (s <= len || e + 1 == nv) {
          pts.push_back(a + (b - a) * (len > 0 ? s / len : 0.0));
          break;
        }
        s -= len;
      }
    }
    return pts;
  }
};

// --- winding counts -------------------------------------------------------------

// Winding number of f along the contour: zeros minus poles inside. Sampling is
// doubled until the phase increments resolve and the count stabilizes across
// two refinements.
inline int count_zeros(const std::function<cx(cx)>& f, const Contour& c) {
  std::size_t m = std::max<std::size_t>(c.samples, 16);
  long prev = LONG_MIN;
  for (int iter = 0; iter < 14; ++iter, m *= 2) {
    const auto pts = c.sample(m);
    std::vector<cx> vals(m);
    double scale = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      vals[k] = f(pts[k]);
      scale = std::max(scale, std::abs(vals[k]));
    }
    bool on_zero = false;
    for (const auto& v : vals)
      if (std::abs(v) < 1e-13 * std::max(scale, 1e-280)) { on_zero = true; break; }
    if (on_zero)
      throw Error(ErrorKind::Inconclusive, "count_zeros: determinant vanishes on the contour");
    double total = 0.0, worst = 0.0;
    bool resolved = true;
    for (std::size_t k = 0; k < m; ++k) {
      const double inc = std::arg(vals[(k + 1) % m] / vals[k]);
      if (std::abs(inc) >= kPi / 2.0) { resolved = false; break; }
      worst = std::max(worst, std::abs(inc));
      total += inc;
    }
    if (!resolved) continue;
    const double w = total / (2.0 * kPi);
    const long rounded = std::lround(w);
    if (std::abs(w - static_cast<double>(rounded)) > 0.05) continue;
    if (rounded == prev) return static_cast<int>(rounded);
    prev = rounded;
  }
  throw Error(ErrorKind::Inconclusive, "count_zeros: winding did not stabilize within the budget");
}

// --- eigenvalue localization --------------------------------------------------------

struct LocatedEigenvalue {
  cx z;
  int algebraic = 0;
  std::size_t geometric = 0;
};

struct LocateResult {
  std::vector<LocatedEigenvalue> found;
  std::vector<std::pair<cx, cx>> unresolved;  // cells where the budget ran out
  bool complete() const { return unresolved.empty(); }
};

namespace detail {

inline cx numeric_derivative(const std::function<cx(cx)>& f, cx z, double h) {
  const cx dr = (f(z + h) - f(z - h)) / (2.0 * h);
  const cx di = (f(z + cx(0, 1) * h) - f(z - cx(0, 1) * h)) / (cx(0, 2) * h);
  return 0.5 * (dr + di);
}

} // namespace detail

constexpr int kLocateMaxDepth = 12;

// Zeros of det(B - M(z)) inside the rectangle: eigenvalues of A_B with their
// algebraic (winding) and geometric (kernel-dimension) multiplicities.
// Cells with negative winding contain poles of M (spectrum of the reference
// extension) and are dropped.
inline LocateResult locate_eigenvalues(const BoundaryOperator& b, const WeylMap& w, cx rect_lo,
                                       cx rect_hi, double tol) {
  if (b.dim() != w.dim())
    throw Error(ErrorKind::Dimension, "locate_eigenvalues: dimension mismatch");
  auto f = [&](cx z) { return cxlinalg::det(b.matrix() - w.eval(z)); };

  LocateResult out;
  struct Cell { cx lo, hi; int depth; };
  std::vector<Cell> stack{{rect_lo, rect_hi, 0}};
  while (!stack.empty()) {
    Cell cell = stack.back();
    stack.pop_back();
    const double diam = std::abs(cell.hi - cell.lo);
    int wind;
    try {
      wind = count_zeros(f, Contour::rectangle(cell.lo, cell.hi, 64));
    } catch (const Error&) {
      // boundary too close to spectrum: nudge the cell fractionally
      const cx pad = 0.013 * (cell.hi - cell.lo);
      try {
        wind = count_zeros(f, Contour::rectangle(cell.lo - pad, cell.hi + pad, 64));
      } catch (const Error&) {
        out.unresolved.emplace_back(cell.lo, cell.hi);
        continue;
      }
    }
    if (wind <= 0) continue;

    const cx mid = 0.5 * (cell.lo + cell.hi);
    if (wind == 1) {
      // Newton polish from the cell center
      cx z = mid;
      bool ok = false;
      const double hstep = std::max(1e-7, 1e-7 * std::abs(z));
      for (int it = 0; it < 60; ++it) {
        cx fz, dfz;
        try {
          fz = f(z);
          dfz = detail::numeric_derivative(f, z, hstep);
        } catch (const Error&) {
          break;
        }
        if (std::abs(dfz) < 1e-280) break;
        const cx step = fz / dfz;
        z -= step;
        const cx margin = 0.6 * (cell.hi - cell.lo);
        if (z.real() < cell.lo.real() - margin.real() || z.real() > cell.hi.real() + margin.real() ||
            z.imag() < cell.lo.imag() - margin.imag() || z.imag() > cell.hi.imag() + margin.imag())
          break;
        if (std::abs(step) < 0.01 * tol) { ok = true; break; }
      }
      if (ok && z.real() >= cell.lo.real() - tol && z.real() <= cell.hi.real() + tol &&
          z.imag() >= cell.lo.imag() - tol && z.imag() <= cell.hi.imag() + tol) {
        LocatedEigenvalue ev;
        ev.z = z;
        ev.algebraic = 1;
        ev.geometric = b.dim() - cxlinalg::svd_rank(b.matrix() - w.eval(z), 1e-8);
        out.found.push_back(ev);
        continue;
      }
    }
    if (diam <= tol || cell.depth >= kLocateMaxDepth) {
      if (diam <= tol) {
        LocatedEigenvalue ev;
        ev.z = mid;
        ev.algebraic = wind;
        ev.geometric = b.dim() - cxlinalg::svd_rank(b.matrix() - w.eval(mid), 1e-8);
        out.found.push_back(ev);
      } else {
        out.unresolved.emplace_back(cell.lo, cell.hi);
      }
      continue;
    }
    const double xr = 0.5 * (cell.lo.real() + cell.hi.real());
    const double yi = 0.5 * (cell.lo.imag() + cell.hi.imag());
    stack.push_back({cell.lo, cx(xr, yi), cell.depth + 1});
    stack.push_back({cx(xr, cell.lo.imag()), cx(cell.hi.real(), yi), cell.depth + 1});
    stack.push_back({cx(cell.lo.real(), yi), cx(xr, cell.hi.imag()), cell.depth + 1});
    stack.push_back({cx(xr, yi), cell.hi, cell.depth + 1});
  }
  return out;
}

// --- shift samples --------------------------------------------------------------------

// Grid of real t with the epsilon ladder, extrapolated shift values and the
// integer branch offset. Stored values carry the 1/pi normalization: for a
// selfadjoint pair, values jump by the (integer) eigenvalue multiplicity.
struct ShiftSample {
  std::vector<double> t_grid;
  std::vector<double> eps_ladder;  // decreasing
  std::vector<cx> values;
  std::vector<std::uint8_t> flagged;  // extrapolation residual above tolerance
  long branch_offset = 0;
  bool is_complex = false;

  std::size_t flag_count() const {
    std::size_t c = 0;
    for (auto f : flagged) c += (f != 0);
    return c;
  }
};

constexpr double kShiftExtrapTol = 1e-3;

namespace detail {

inline void check_ladder(const std::vector<double>& eps_ladder) {
  if (eps_ladder.size() < 2)
    throw Error(ErrorKind::Parameter, "shift: epsilon ladder needs at least two rungs");
  for (std::size_t i = 1; i < eps_ladder.size(); ++i)
    if (!(eps_ladder[i] < eps_ladder[i - 1]) || eps_ladder[i] <= 0.0)
      throw Error(ErrorKind::Parameter, "shift: ladder must be positive and decreasing");
}

// One boundary row: Delta(t_j + i eps) for the pair, ratio form.
inline std::vector<cx> boundary_row(const ExtensionPair& pair, const std::vector<double>& t_grid,
                                    double eps, std::vector<std::uint8_t>* flags) {
  std::vector<cx> dets(t_grid.size());
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    try {
      dets[j] = pdet::pdet_ratio(pair, cx(t_grid[j], eps));
    } catch (const Error&) {
      (*flags)[j] = 1;  // pole-adjacent; patched by neighbours below
      dets[j] = cx(0.0, 0.0);
    }
  }
  for (std::size_t j = 0; j < dets.size(); ++j) {
    if (dets[j] != cx(0.0, 0.0)) continue;
    // nearest evaluated neighbours
    std::size_t l = j, r = j;
    while (l > 0 && dets[l] == cx(0.0, 0.0)) --l;
    while (r + 1 < dets.size() && dets[r] == cx(0.0, 0.0)) ++r;
    if (dets[l] != cx(0.0, 0.0) && dets[r] != cx(0.0, 0.0))
      dets[j] = 0.5 * (dets[l] + dets[r]);
    else if (dets[l] != cx(0.0, 0.0))
      dets[j] = dets[l];
    else if (dets[r] != cx(0.0, 0.0))
      dets[j] = dets[r];
    else
      throw Error(ErrorKind::Coverage, "shift: no evaluable points on the grid");
  }
  return dets;
}

} // namespace detail

// Real spectral shift of a selfadjoint pair: (1/pi) Im log Delta(t + i0),
// branch-continued along t, extrapolated linearly over the two smallest
// ladder rungs, and anchored to 0 at the left end of the grid.
inline ShiftSample spectral_shift(const ExtensionPair& pair, const std::vector<double>& t_grid,
                                  const std::vector<double>& eps_ladder) {
  if (!pair.Bprime.selfadjoint() || !pair.B.selfadjoint())
    throw Error(ErrorKind::Contract, "spectral_shift: both boundary operators must be selfadjoint");
  detail::check_ladder(eps_ladder);
  if (t_grid.size() < 4) throw Error(ErrorKind::Parameter, "spectral_shift: grid too small");

  ShiftSample out;
  out.t_grid = t_grid;
  out.eps_ladder = eps_ladder;
  out.flagged.assign(t_grid.size(), 0);
  const double e1 = eps_ladder[eps_ladder.size() - 2];
  const double e2 = eps_ladder.back();
  auto row1v = detail::boundary_row(pair, t_grid, e1, &out.flagged);
  auto row2v = detail::boundary_row(pair, t_grid, e2, &out.flagged);
  auto row1 = cxlinalg::continue_phases(row1v);
  auto row2 = cxlinalg::continue_phases(row2v);

  out.values.resize(t_grid.size());
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    const double x1 = row1[j] / kPi, x2 = row2[j] / kPi;
    const double ext = x2 + (x2 - x1) * (0.0 - e2) / (e2 - e1);
    if (std::abs(ext - x2) > kShiftExtrapTol) out.flagged[j] = 1;
    out.values[j] = cx(ext, 0.0);
  }
  out.branch_offset = -std::lround(out.values.front().real());
  for (auto& v : out.values) v += cx(static_cast<double>(out.branch_offset), 0.0);
  return out;
}

// Complex shift of a pair whose first element is accumulative (reference
// selfadjoint or accumulative): the real part continues the Hermitian-part
// determinant, the imaginary part is -(1/pi) log|Delta_{B'/B_mid}| <= 0 with
// B_mid = Re B' + i Im B.
inline ShiftSample complex_shift(const ExtensionPair& pair, const std::vector<double>& t_grid,
                                 const std::vector<double>& eps_ladder) {
  if (!pair.Bprime.accumulative())
    throw Error(ErrorKind::Contract, "complex_shift: Bprime must be accumulative");
  if (!pair.B.accumulative() && !pair.B.selfadjoint())
    throw Error(ErrorKind::Contract, "complex_shift: reference must be selfadjoint or accumulative");
  detail::check_ladder(eps_ladder);

  const CMat bmid = cxlinalg::hermitian_part(pair.Bprime.matrix()) +
                    cx(0, 1) * cxlinalg::skew_part_over_i(pair.B.matrix());
  ExtensionPair pair_xi(BoundaryOperator(bmid), pair.B, pair.weyl);
  ExtensionPair pair_eta(pair.Bprime, BoundaryOperator(bmid), pair.weyl);

  ShiftSample out;
  out.t_grid = t_grid;
  out.eps_ladder = eps_ladder;
  out.is_complex = true;
  out.flagged.assign(t_grid.size(), 0);
  const double e1 = eps_ladder[eps_ladder.size() - 2];
  const double e2 = eps_ladder.back();
  auto xi1v = detail::boundary_row(pair_xi, t_grid, e1, &out.flagged);
  auto xi2v = detail::boundary_row(pair_xi, t_grid, e2, &out.flagged);
  auto eta1v = detail::boundary_row(pair_eta, t_grid, e1, &out.flagged);
  auto eta2v = detail::boundary_row(pair_eta, t_grid, e2, &out.flagged);
  auto xi1 = cxlinalg::continue_phases(xi1v);
  auto xi2 = cxlinalg::continue_phases(xi2v);

  out.values.resize(t_grid.size());
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    const double x1 = xi1[j] / kPi, x2 = xi2[j] / kPi;
    const double xi_ext = x2 + (x2 - x1) * (0.0 - e2) / (e2 - e1);
    const double h1 = -std::log(std::abs(eta1v[j])) / kPi;
    const double h2 = -std::log(std::abs(eta2v[j])) / kPi;
    const double eta_ext = h2 + (h2 - h1) * (0.0 - e2) / (e2 - e1);
    if (std::abs(xi_ext - x2) > kShiftExtrapTol || std::abs(eta_ext - h2) > kShiftExtrapTol)
      out.flagged[j] = 1;
    out.values[j] = cx(xi_ext, eta_ext);
  }
  out.branch_offset = -std::lround(out.values.front().real());
  for (auto& v : out.values) v += cx(static_cast<double>(out.branch_offset), 0.0);

  if (pair.B.selfadjoint()) {
    for (std::size_t j = 0; j < t_grid.size(); ++j)
      if (!out.flagged[j] && out.values[j].imag() > 1e-6)
        throw Error(ErrorKind::Contract,
                    "complex_shift: Im omega > 1e-6 at t = " + std::to_string(t_grid[j]));
  }
  return out;
}

// --- trace formula -----------------------------------------------------------------

// Worst relative residual of  -int values/(t-z)^2 dt  (trapezoid, c/t tail
// model beyond the window) against tr((A_{B'}-z)^{-1} - (A_B-z)^{-1}) from the
// determinant log-derivative, over the sample points.
inline double trace_formula_residual(const ExtensionPair& pair, const ShiftSample& xi,
                                     const std::vector<cx>& z_samples) {
  if (xi.t_grid.size() < 8)
    throw Error(ErrorKind::Coverage, "trace_formula_residual: grid too small");
  const auto& ts = xi.t_grid;
  double maxabs = 0.0;
  for (const auto& v : xi.values) maxabs = std::max(maxabs, std::abs(v));
  if (maxabs > 0.0 && (std::abs(xi.values.front()) > 0.8 * maxabs ||
                       std::abs(xi.values.back()) > 0.8 * maxabs))
    throw Error(ErrorKind::Coverage,
                "trace_formula_residual: shift not decayed at the window ends; widen the window");

  double worst = 0.0;
  for (cx z : z_samples) {
    if (z.imag() == 0.0)
      throw Error(ErrorKind::Parameter, "trace_formula_residual: z must be off the real axis");
    cx quad = 0.0;
    for (std::size_t j = 0; j + 1 < ts.size(); ++j) {
      const cx f0 = xi.values[j] / ((cx(ts[j], 0) - z) * (cx(ts[j], 0) - z));
      const cx f1 = xi.values[j + 1] / ((cx(ts[j + 1], 0) - z) * (cx(ts[j + 1], 0) - z));
      quad += 0.5 * (ts[j + 1] - ts[j]) * (f0 + f1);
    }
    // c/t tails: int_T^inf (c/t)/(t-z)^2 dt with c = value*T at each end
    auto tail_upper = [&](double T, cx c) {
      return c * ((cx(1, 0) / (z * z)) * std::log((cx(T, 0) - z) / cx(T, 0)) +
                  cx(1, 0) / (z * (cx(T, 0) - z)));
    };
    auto tail_lower = [&](double T, cx c) {
      return c * ((cx(1, 0) / (z * z)) * std::log(cx(T, 0) / (cx(T, 0) - z)) -
                  cx(1, 0) / (z * (cx(T, 0) - z)));
    };
    if (std::abs(ts.back()) > 1.0) quad += tail_upper(ts.back(), xi.values.back() * ts.back());
    if (std::abs(ts.front()) > 1.0) quad += tail_lower(ts.front(), xi.values.front() * ts.front());

    const cx lhs = -quad;
    const cx rhs = -pdet::log_derivative(pair, z);
    const double resid = std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-12});
    worst = std::max(worst, resid);
  }
  return worst;
}

// --- Blaschke products ----------------------------------------------------------------

struct ZeroWithMult {
  cx z;
  int mult = 1;
};

// e^{i gamma_k} (z - z_k)/(z - conj z_k), gamma_k normalizing the factor to be
// nonnegative at z = i.
inline cx blaschke(const std::vector<ZeroWithMult>& zeros, cx z) {
  cx prod(1.0, 0.0);
  for (const auto& zk : zeros) {
    const cx den = z - std::conj(zk.z);
    if (std::abs(den) < 1e-14)
      throw Error(ErrorKind::Domain, "blaschke: z at a pole (conjugate of a zero)");
    const cx ati = (cx(0, 1) - zk.z) / (cx(0, 1) - std::conj(zk.z));
    const double gamma = (std::abs(ati) < 1e-300) ? 0.0 : -std::arg(ati);
    const cx factor = std::exp(cx(0, gamma)) * (z - zk.z) / den;
    for (int p = 0; p < zk.mult; ++p) prod *= factor;
  }
  return prod;
}

inline cx blaschke_log_derivative(const std::vector<ZeroWithMult>& zeros, cx z) {
  cx acc(0.0, 0.0);
  for (const auto& zk : zeros)
    acc += static_cast<double>(zk.mult) *
           (cx(1, 0) / (z - zk.z) - cx(1, 0) / (z - std::conj(zk.z)));
  return acc;
}

// --- dissipative factorization ----------------------------------------------------------

// B_+/B_- e^{i alpha z} model of Delta_{A_B/A_{B*}} for compact-resolvent
// problems: discrete eigenvalue lists, the exponential factor alpha, the
// z-independent constant c, and the boundary-modulus defect.
struct DissipativeModel {
  std::vector<ZeroWithMult> eigs_plus;   // eigenvalues of A_B in C_+
  std::vector<ZeroWithMult> eigs_minus;  // eigenvalues of A_B in C_-
  double alpha = 0.0;
  cx c = cx(1.0, 0.0);
  double fit_residual = 0.0;
  double modulus_defect = 0.0;
  double blaschke_sum = 0.0;  // sum m Im z / (1 + |z|^2) over eigs_plus
  bool model_warning = false;
  bool trivial = false;

  cx b_plus(cx z) const { return blaschke(eigs_plus, z); }
  cx b_minus(cx z) const {
    std::vector<ZeroWithMult> conj_zeros;
    conj_zeros.reserve(eigs_minus.size());
    for (const auto& e : eigs_minus) conj_zeros.push_back({std::conj(e.z), e.mult});
    return blaschke(conj_zeros, z);
  }
};

inline bool completeness_indicator(const DissipativeModel& model, double tol) {
  return std::abs(model.alpha) <= tol;
}

struct DissipativeOptions {
  double locate_tol = 1e-8;
  std::vector<double> eps_ladder = {1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  std::vector<cx> fit_grid;  // default built over one decade of |z|
  double fit_warn = 1e-4;
  // optional subdivision of the search region (asymptotic eigenvalue hints);
  // when empty the single region rectangle is searched
  std::vector<std::pair<cx, cx>> search_boxes;
};

inline DissipativeModel dissipative_decomposition(const BoundaryOperator& b, const WeylMap& w,
                                                  cx region_lo, cx region_hi,
                                                  const std::vector<double>& real_grid,
                                                  DissipativeOptions opts = {}) {
  DissipativeModel model;
  if (b.selfadjoint()) {
    model.trivial = true;
    return model;
  }
  ExtensionPair pair(b, b.adjoint(), w);  // Delta_{A_B / A_{B*}}

  // eigenvalues of A_B in C_+ directly; in C_- through the adjoint in C_+
  std::vector<std::pair<cx, cx>> boxes = opts.search_boxes;
  if (boxes.empty()) boxes.emplace_back(region_lo, region_hi);
  for (const auto& [lo, hi] : boxes) {
    auto plus = locate_eigenvalues(b, w, lo, hi, opts.locate_tol);
    auto minus_adj = locate_eigenvalues(b.adjoint(), w, lo, hi, opts.locate_tol);
    if (!plus.complete() || !minus_adj.complete())
      throw Error(ErrorKind::Inconclusive, "dissipative_decomposition: unresolved eigenvalue cells");
    for (const auto& ev : plus.found) {
      model.eigs_plus.push_back({ev.z, ev.algebraic});
      model.blaschke_sum += ev.algebraic * ev.z.imag() / (1.0 + std::norm(ev.z));
    }
    for (const auto& ev : minus_adj.found) model.eigs_minus.push_back({std::conj(ev.z), ev.algebraic});
  }

  // alpha from the derivative route, then a branch-snapped linear fit
  std::vector<cx> grid = opts.fit_grid;
  if (grid.empty()) {
    for (int i = 0; i < 8; ++i) {
      const double y = 5.0 * std::pow(10.0, i / 7.0);
      grid.push_back(cx(-4.0, y));
      grid.push_back(cx(0.5, y));
      grid.push_back(cx(5.0, y));
    }
  }
  std::vector<cx> yprime(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const cx dlog = pdet::log_derivative(pair, grid[i]);
    yprime[i] = dlog - blaschke_log_derivative(model.eigs_plus, grid[i]);
    std::vector<ZeroWithMult> conj_minus;
    for (const auto& e : model.eigs_minus) conj_minus.push_back({std::conj(e.z), e.mult});
    yprime[i] += blaschke_log_derivative(conj_minus, grid[i]);
  }
  cx mean(0, 0);
  for (const auto& v : yprime) mean += v;
  mean /= static_cast<double>(yprime.size());
  double alpha0 = mean.imag() == 0.0 && mean.real() == 0.0 ? 0.0 : (mean / cx(0, 1)).real();

  // snapped values y_g = log Delta - log(B+/B-) fit against i alpha z + log c
  std::vector<cx> ys(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const cx delta = pdet::pdet_ratio(pair, grid[i]);
    const cx bb = model.b_plus(grid[i]) / model.b_minus(grid[i]);
    ys[i] = std::log(delta / bb);
  }
  const cx logc0 = [&] {
    cx acc(0, 0);
    for (std::size_t i = 0; i < grid.size(); ++i) acc += ys[i] - cx(0, 1) * alpha0 * grid[i];
    return acc / static_cast<double>(grid.size());
  }();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double k =
        std::round(((ys[i] - cx(0, 1) * alpha0 * grid[i] - logc0).imag()) / (2.0 * kPi));
    ys[i] -= cx(0, 2.0 * kPi * k);
  }
  // least squares in (alpha, Re log c, Im log c)
  double a11 = 0, a12 = 0, a13 = 0, a22 = 0, a33 = 0;
  double r1 = 0, r2 = 0, r3 = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double zr = grid[i].real(), zi = grid[i].imag();
    const double yr = ys[i].real(), yi = ys[i].imag();
    // Re: -alpha zi + Rec = yr ; Im: alpha zr + Imc = yi
    a11 += zi * zi + zr * zr;
    a12 += -zi;
    a13 += zr;
    a22 += 1.0;
    a33 += 1.0;
    r1 += -zi * yr + zr * yi;
    r2 += yr;
    r3 += yi;
  }
  // normal equations of the 3-parameter system (decoupled cross terms a23 = 0)
  const double n = a22;
  const double det3 = a11 * n * n - a12 * a12 * n - a13 * a13 * n;
  double alpha = alpha0, rec = logc0.real(), imc = logc0.imag();
  if (std::abs(det3) > 1e-14) {
    alpha = (r1 * n * n - a12 * n * r2 - a13 * n * r3) / det3;
    rec = (r2 - a12 * alpha) / n;
    imc = (r3 - a13 * alpha) / n;
  }
  model.alpha = alpha;
  model.c = std::exp(cx(rec, imc));
  double fit = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    fit = std::max(fit,
                   std::abs(ys[i] - cx(0, 1) * alpha * grid[i] - cx(rec, imc)));
  model.fit_residual = fit;
  model.model_warning = fit > opts.fit_warn;

  // boundary modulus defect on the real grid
  detail::check_ladder(opts.eps_ladder);
  const double e1 = opts.eps_ladder[opts.eps_ladder.size() - 2];
  const double e2 = opts.eps_ladder.back();
  double defect = 0.0;
  for (double t : real_grid) {
    const double m1 = std::abs(pdet::pdet_ratio(pair, cx(t, e1)));
    const double m2 = std::abs(pdet::pdet_ratio(pair, cx(t, e2)));
    const double ext = m2 + (m2 - m1) * (0.0 - e2) / (e2 - e1);
    defect = std::max(defect, std::abs(ext - 1.0));
  }
  model.modulus_defect = defect;
  return model;
}

// --- functional traces -----------------------------------------------------------------

enum class Enclosure {
  PolesInside,    // contour encircles the poles of Phi, spectra in the exterior
  SpectraInside,  // contour encircles the spectra of the pair
};

// tr(Phi(A_{B'}) - Phi(A_B)) by adaptive contour quadrature with the
// determinant log-derivative as the trace integrand.
inline cx functional_trace(const ExtensionPair& pair, const std::function<cx(cx)>& phi,
                           const Contour& c, Enclosure enclosure = Enclosure::PolesInside,
                           double tol = 1e-8) {
  auto integrand = [&](cx z) {
    // tr((A_{B'} - z)^{-1} - (A_B - z)^{-1}) = -d/dz log Delta_{B'/B}
    return phi(z) * (-pdet::log_derivative(pair, z));
  };
  auto estimate = [&](std::size_t m) {
    const auto pts = c.sample(m);
    cx acc(0, 0);
    for (std::size_t k = 0; k < m; ++k) {
      const cx zk = pts[k], znext = pts[(k + 1) % m];
      const cx mid = 0.5 * (zk + znext);
      acc += integrand(mid) * (znext - zk);
    }
    return acc / (cx(0, 2.0 * kPi));
  };
  std::size_t m = std::max<std::size_t>(c.samples, 16);
  cx prev = estimate(m);
  std::vector<cx> trace_log{prev};
  for (int iter = 0; iter < 10; ++iter) {
    m *= 2;
    const cx cur = estimate(m);
    trace_log.push_back(cur);
    if (std::abs(cur - prev) <= tol * std::max(1.0, std::abs(cur))) {
      return enclosure == Enclosure::PolesInside ? cur : -cur;
    }
    prev = cur;
  }
  throw Error(ErrorKind::Convergence, "functional_trace: quadrature did not converge");
}

} // namespace spectra

using spectra::Contour;
using spectra::ShiftSample;
using spectra::DissipativeModel;

} // namespace btdet
