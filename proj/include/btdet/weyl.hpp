#pragma once

// Weyl functions M(z) for the half-line and interval triplets, gamma fields,
// and Nevanlinna-structure reporting.
//
// Interval triplet convention (trace maps):
//   Gamma0 f = ( f(b), -f(0) ),   Gamma1 f = ( -f'(b), -f'(0) ).
// M(z) is assembled directly from the defect basis {C(z,.)xi + S(z,.)eta} as
// T1 * T0^{-1}; printed block formulas are used as cross-checks only.

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "btdet/cxlinalg.hpp"
#include "btdet/errors.hpp"
#include "btdet/odeprop.hpp"
#include "btdet/util.hpp"

namespace btdet {
namespace weyl {

inline CMat weyl_free_halfline(cx z, std::size_t n) {
  if (z.imag() == 0.0 && z.real() >= 0.0)
    throw Error(ErrorKind::Domain, "weyl_free_halfline: z on the branch cut [0,inf)");
  return CMat::identity(n) * (cx(0, 1) * sqrt_upper(z));
}

inline CMat weyl_halfline(const PotentialSpec& q, cx z) {
  if (q.is_zero()) return weyl_free_halfline(z, q.channels());
  JostValue j = odeprop::jost(q, z);
  const double smin = cxlinalg::sigma_min(j.F0);
  const double smax = cxlinalg::sigma_max(j.F0);
  if (smin <= 1e-12 * std::max(smax, 1e-300))
    throw Error(ErrorKind::SpectralPoint, "weyl_halfline: F(z,0) singular; z is a candidate pole");
  return j.F0p * cxlinalg::lu_solve(cxlinalg::lu_factor(j.F0), CMat::identity(q.channels()));
}

namespace detail {

struct IntervalTraceMatrices {
  CMat T0, T1;  // Gamma0 / Gamma1 over the defect basis columns
};

inline IntervalTraceMatrices interval_trace_matrices(const FundamentalPair& p) {
  const std::size_t n = p.C.rows();
  IntervalTraceMatrices t;
  t.T0 = CMat(2 * n, 2 * n);
  t.T1 = CMat(2 * n, 2 * n);
  t.T0.set_block(0, 0, p.C);
  t.T0.set_block(0, n, p.S);
  t.T0.set_block(n, 0, -CMat::identity(n));
  t.T1.set_block(0, 0, -p.Cp);
  t.T1.set_block(0, n, -p.Sp);
  t.T1.set_block(n, n, -CMat::identity(n));
  return t;
}

} // namespace detail

inline CMat weyl_interval(const PotentialSpec& q, cx z) {
  if (!q.is_interval()) throw Error(ErrorKind::Contract, "weyl_interval: interval support required");
  FundamentalPair p = odeprop::fundamental_solutions(q, z);
  auto t = detail::interval_trace_matrices(p);
  const double smin = cxlinalg::sigma_min(t.T0);
  const double smax = cxlinalg::sigma_max(t.T0);
  if (smin <= 1e-12 * std::max(smax, 1e-300))
    throw Error(ErrorKind::SpectralPoint,
                "weyl_interval: S(z,b) singular; z is in the Dirichlet spectrum");
  return t.T1 * cxlinalg::lu_solve(cxlinalg::lu_factor(t.T0), CMat::identity(t.T0.rows()));
}

// (1,1) block of the printed interval formula, -S'(z,b) S(z,b)^{-1}; the only
// block the direct assembly is asserted against (the printed off-diagonal
// scaling and (2,2) sign disagree with the trace-map assembly).
inline CMat weyl_interval_block11(const PotentialSpec& q, cx z) {
  FundamentalPair p = odeprop::fundamental_solutions(q, z);
  return -(p.Sp * cxlinalg::lu_solve(cxlinalg::lu_factor(p.S), CMat::identity(p.S.rows())));
}

// --- WeylMap -----------------------------------------------------------------

enum class WeylKind { FreeHalfLine, JostHalfLine, Interval, Tabulated, Custom };

// Immutable evaluator z -> M(z) with channel count and singular-point hints.
// Tabulated maps interpolate piecewise-linearly and are for plotting only;
// determinant-grade evaluation refuses them.
class WeylMap {
public:
  static WeylMap free_halfline(std::size_t n) {
    WeylMap w;
    w.kind_ = WeylKind::FreeHalfLine;
    w.dim_ = n;
    return w;
  }
  static WeylMap jost_halfline(PotentialSpec q) {
    if (q.is_interval())
      throw Error(ErrorKind::Contract, "WeylMap::jost_halfline: half-line support required");
    WeylMap w;
    w.kind_ = WeylKind::JostHalfLine;
    w.dim_ = q.channels();
    w.q_ = std::make_shared<PotentialSpec>(std::move(q));
    return w;
  }
  static WeylMap interval(PotentialSpec q) {
    if (!q.is_interval())
      throw Error(ErrorKind::Contract, "WeylMap::interval: interval support required");
    WeylMap w;
    w.kind_ = WeylKind::Interval;
    w.dim_ = 2 * q.channels();
    w.q_ = std::make_shared<PotentialSpec>(std::move(q));
    return w;
  }
  static WeylMap tabulated(std::vector<cx> zs, std::vector<CMat> ms) {
    if (zs.size() != ms.size() || zs.size() < 2)
      throw Error(ErrorKind::Parameter, "WeylMap::tabulated: need matching samples, at least 2");
    WeylMap w;
    w.kind_ = WeylKind::Tabulated;
    w.dim_ = ms.front().rows();
    w.table_z_ = std::move(zs);
    w.table_m_ = std::move(ms);
    return w;
  }
  static WeylMap custom(std::size_t dim, std::function<CMat(cx)> fn) {
    WeylMap w;
    w.kind_ = WeylKind::Custom;
    w.dim_ = dim;
    w.fn_ = std::move(fn);
    return w;
  }

  WeylKind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }
  bool determinant_grade() const noexcept { return kind_ != WeylKind::Tabulated; }
  const PotentialSpec* potential() const noexcept { return q_.get(); }

  const std::vector<double>& singular_hints() const noexcept { return hints_; }
  WeylMap with_hints(std::vector<double> hints) const {
    WeylMap w = *this;
    w.hints_ = std::move(hints);
    return w;
  }

  CMat eval(cx z) const {
    switch (kind_) {
      case WeylKind::FreeHalfLine: return weyl_free_halfline(z, dim_);
      case WeylKind::JostHalfLine: return weyl_halfline(*q_, z);
      case WeylKind::Interval: return weyl_interval(*q_, z);
      case WeylKind::Custom: return fn_(z);
      case WeylKind::Tabulated: {
        // nearest segment in sample order, linear in the parameterization
        std::size_t best = 0;
        double bd = std::abs(z - table_z_[0]);
        for (std::size_t i = 1; i < table_z_.size(); ++i) {
          const double d = std::abs(z - table_z_[i]);
          if (d < bd) { bd = d; best = i; }
        }
        const std::size_t j = (best + 1 < table_z_.size()) ? best + 1 : best - 1;
        const cx dz = table_z_[j] - table_z_[best];
        double t = 0.0;
        if (std::abs(dz) > 0.0)
          t = std::max(0.0, std::min(1.0, ((z - table_z_[best]) / dz).real()));
        return table_m_[best] * cx(1.0 - t, 0.0) + table_m_[j] * cx(t, 0.0);
      }
    }
    throw Error(ErrorKind::Parameter, "WeylMap: bad kind");
  }

private:
  WeylKind kind_ = WeylKind::FreeHalfLine;
  std::size_t dim_ = 0;
  std::shared_ptr<const PotentialSpec> q_;
  std::function<CMat(cx)> fn_;
  std::vector<cx> table_z_;
  std::vector<CMat> table_m_;
  std::vector<double> hints_;
};

// Detected pole behaviour along a real grid: points where ||M|| blows up.
inline std::vector<double> scan_singular_hints(const WeylMap& w, const std::vector<double>& ts,
                                               double eps = 1e-9, double blowup = 1e8) {
  std::vector<double> hints;
  for (double t : ts) {
    bool singular = false;
    try {
      singular = w.eval(cx(t, eps)).norm_max() > blowup;
    } catch (const Error&) {
      singular = true;
    }
    if (singular) hints.push_back(t);
  }
  return hints;
}

// --- gamma field ---------------------------------------------------------------

enum class TripletKind { HalfLine, Interval };

// Defect-solution basis normalized so Gamma0 acts as the identity on boundary
// coordinates; sampled on a spatial grid.
struct GammaSample {
  cx z;
  std::vector<double> xs;
  CMat basis;   // (len(xs) * n) x m, column j = gamma(z) e_j sampled
  CMat gamma0;  // Gamma0 of the columns (should be the identity)
  CMat gamma1;  // Gamma1 of the columns (equals M(z))
};

inline GammaSample gamma_field(const PotentialSpec& q, TripletKind kind, cx z,
                               const std::vector<double>& xs) {
  if (xs.size() < 2 || xs.front() != 0.0)
    throw Error(ErrorKind::Parameter, "gamma_field: grid must start at 0");
  const std::size_t n = q.channels();
  GammaSample out;
  out.z = z;
  out.xs = xs;

  if (kind == TripletKind::HalfLine) {
    // column j: F(z,x) F(z,0)^{-1} e_j; Gamma0 f = f(0), Gamma1 f = f'(0)
    out.basis = CMat(xs.size() * n, n);
    CMat f0inv, f0p;
    if (q.is_zero()) {
      f0inv = CMat::identity(n);
      f0p = CMat::identity(n) * (cx(0, 1) * sqrt_upper(z));
      for (std::size_t g = 0; g < xs.size(); ++g) {
        const cx e = std::exp(cx(0, 1) * sqrt_upper(z) * xs[g]);
        for (std::size_t i = 0; i < n; ++i) out.basis(g * n + i, i) = e;
      }
      out.gamma0 = CMat::identity(n);
      out.gamma1 = f0p;
      return out;
    }
    JostValue j = odeprop::jost(q, z);
    const double smin = cxlinalg::sigma_min(j.F0);
    if (smin <= 1e-12 * std::max(cxlinalg::sigma_max(j.F0), 1e-300))
      throw Error(ErrorKind::SpectralPoint, "gamma_field: F(z,0) singular");
    f0inv = cxlinalg::lu_solve(cxlinalg::lu_factor(j.F0), CMat::identity(n));
    // propagate f = C(x) F0 + S(x) F0p through the C/S basis, then normalize
    auto samples = odeprop::propagate_on_grid(q, z, xs);
    const CMat a = j.F0 * f0inv;   // = I
    const CMat b = j.F0p * f0inv;  // = M(z)
    for (std::size_t g = 0; g < xs.size(); ++g) {
      const CMat fx = samples[g].C * a + samples[g].S * b;
      out.basis.set_block(g * n, 0, fx);
    }
    out.gamma0 = a;
    out.gamma1 = b;
    return out;
  }

  // interval triplet: columns [C(x) S(x)] T0^{-1} e_j over the 2n-dim basis
  if (!q.is_interval()) throw Error(ErrorKind::Contract, "gamma_field: interval support required");
  if (std::abs(xs.back() - q.endpoint()) > 1e-12)
    throw Error(ErrorKind::Parameter, "gamma_field: interval grid must end at b");
  auto samples = odeprop::propagate_on_grid(q, z, xs);
  const FundamentalPair& pb = samples.back();
  auto t = detail::interval_trace_matrices(pb);
  const double smin = cxlinalg::sigma_min(t.T0);
  if (smin <= 1e-12 * std::max(cxlinalg::sigma_max(t.T0), 1e-300))
    throw Error(ErrorKind::SpectralPoint, "gamma_field: T0 singular (Dirichlet spectrum)");
  const CMat coords = cxlinalg::lu_solve(cxlinalg::lu_factor(t.T0), CMat::identity(2 * n));
  out.basis = CMat(xs.size() * n, 2 * n);
  for (std::size_t g = 0; g < xs.size(); ++g) {
    CMat us(n, 2 * n);
    us.set_block(0, 0, samples[g].C);
    us.set_block(0, n, samples[g].S);
    out.basis.set_block(g * n, 0, us * coords);
  }
  out.gamma0 = t.T0 * coords;  // identity
  out.gamma1 = t.T1 * coords;  // M(z)
  return out;
}

// Trapezoid L2 pairing of two sampled gamma fields: gamma(zl)^* gamma(zr).
inline CMat gamma_pairing(const GammaSample& left, const GammaSample& right) {
  if (left.xs.size() != right.xs.size())
    throw Error(ErrorKind::Dimension, "gamma_pairing: grids differ");
  const std::size_t n = left.basis.rows() / left.xs.size();
  const std::size_t ml = left.basis.cols(), mr = right.basis.cols();
  CMat acc(ml, mr);
  for (std::size_t g = 0; g + 1 < left.xs.size(); ++g) {
    const double h = right.xs[g + 1] - right.xs[g];
    CMat a0 = left.basis.block(g * n, 0, n, ml).adjoint() * right.basis.block(g * n, 0, n, mr);
    CMat a1 = left.basis.block((g + 1) * n, 0, n, ml).adjoint() *
              right.basis.block((g + 1) * n, 0, n, mr);
    acc = acc + (a0 + a1) * cx(0.5 * h, 0.0);
  }
  return acc;
}

// --- Herglotz reporting -----------------------------------------------------------

struct HerglotzPoint {
  cx z;
  double min_imag_eig = 0.0;
  double symmetry_defect = 0.0;
  bool evaluated = false;
  bool pass = false;
  std::string error;
};

struct HerglotzReport {
  std::vector<HerglotzPoint> points;
  bool all_pass = true;
  double worst_min_imag_eig = 0.0;
  double worst_symmetry_defect = 0.0;
};

inline HerglotzReport herglotz_report(const WeylMap& w, const std::vector<cx>& grid,
                                      double tol = 1e-8) {
  HerglotzReport rep;
  rep.worst_min_imag_eig = std::numeric_limits<double>::infinity();
  for (cx z : grid) {
    HerglotzPoint p;
    p.z = z;
    if (z.imag() <= 0.0)
      throw Error(ErrorKind::Parameter, "herglotz_report: grid must lie in the open upper half-plane");
    try {
      const CMat m = w.eval(z);
      const CMat mbar = w.eval(std::conj(z));
      const CMat im = cxlinalg::skew_part_over_i(m);
      auto eig = cxlinalg::hermitian_eig(im);
      p.min_imag_eig = eig.values.front();
      p.symmetry_defect = (mbar - m.adjoint()).norm_max();
      p.evaluated = true;
      p.pass = (p.min_imag_eig >= -tol) && (p.symmetry_defect <= tol);
    } catch (const Error& e) {
      p.error = e.what();
      p.pass = false;
    }
    rep.all_pass = rep.all_pass && p.pass;
    if (p.evaluated) {
      rep.worst_min_imag_eig = std::min(rep.worst_min_imag_eig, p.min_imag_eig);
      rep.worst_symmetry_defect = std::max(rep.worst_symmetry_defect, p.symmetry_defect);
    }
    rep.points.push_back(std::move(p));
  }
  return rep;
}

} // namespace weyl

using weyl::WeylMap;
using weyl::GammaSample;

} // namespace btdet
