#pragma once

// Perturbation determinants of extension pairs in ratio and regularized form,
// path evaluation with branch-continued logarithms, and the resolvent-trace
// log-derivative.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "btdet/cxlinalg.hpp"
#include "btdet/errors.hpp"
#include "btdet/triplets.hpp"
#include "btdet/util.hpp"

namespace btdet {
namespace pdet {

namespace detail {

inline void require_invertible(const CMat& d, const char* who, ErrorKind kind) {
  auto s = cxlinalg::singular_values(d);
  if (s.empty() || s.front() <= 0.0 || s.back() <= 1e-12 * s.front())
    throw Error(kind, std::string(who) + ": matrix singular to tolerance");
}

} // namespace detail

// det(B' - M(z)) / det(B - M(z))
inline cx pdet_ratio(const ExtensionPair& pair, cx z) {
  const CMat m = pair.weyl.eval(z);
  const CMat den = pair.B.matrix() - m;
  if (!triplets::is_resolvent_point(pair.B, m))
    throw Error(ErrorKind::Pole, "pdet_ratio: z in the spectrum of A_B");
  return cxlinalg::det(pair.Bprime.matrix() - m) / cxlinalg::det(den);
}

// det(I - (mu - B)^{-1} (mu - M(z))); the determinant of {A_B, A_0} with
// respect to the transformed triplet, up to a z-independent constant.
inline cx pdet_regularized(const BoundaryOperator& b, double mu, const WeylMap& w, cx z) {
  if (!w.determinant_grade())
    throw Error(ErrorKind::Contract, "pdet_regularized: tabulated Weyl maps are plotting-only");
  const std::size_t m = b.dim();
  const CMat shift = CMat::identity(m) * cx(mu, 0.0) - b.matrix();
  auto s = cxlinalg::singular_values(shift);
  if (s.empty() || s.front() <= 0.0 || s.back() <= 1e-12 * s.front())
    throw Error(ErrorKind::Parameter, "pdet_regularized: mu in the spectrum of B");
  const CMat mz = w.eval(z);
  const CMat x = cxlinalg::lu_solve(cxlinalg::lu_factor(shift),
                                    CMat::identity(m) * cx(mu, 0.0) - mz);
  return cxlinalg::det(CMat::identity(m) - x);
}

inline cx pdet_pair_regularized(const ExtensionPair& pair, double mu, cx z) {
  const cx den = pdet_regularized(pair.B, mu, pair.weyl, z);
  if (std::abs(den) < 1e-300)
    throw Error(ErrorKind::Pole, "pdet_pair_regularized: denominator vanished");
  return pdet_regularized(pair.Bprime, mu, pair.weyl, z) / den;
}

// --- path evaluation --------------------------------------------------------------

struct Form {
  enum Kind { Ratio, Regularized } kind = Ratio;
  double mu = 0.0;

  static Form ratio() { return Form{Ratio, 0.0}; }
  static Form regularized(double mu) { return Form{Regularized, mu}; }
};

inline cx eval_form(const ExtensionPair& pair, const Form& form, cx z) {
  return form.kind == Form::Ratio ? pdet_ratio(pair, z)
                                  : pdet_pair_regularized(pair, form.mu, z);
}

// Determinant samples along a path with the unwrapped logarithm.
struct DetPath {
  Form form;
  std::vector<cx> path;
  std::vector<cx> values;
  BranchLog log;
};

constexpr double kPathZeroGuard = 1e-12;

// Evaluates the determinant along the path, refining near small |Delta| and
// unresolved phase jumps; zeros must be enclosed by contours, not traversed.
inline DetPath eval_path(const ExtensionPair& pair, std::vector<cx> path, Form form = Form::ratio(),
                         cx seed = cx(0.0, 0.0), unsigned jobs = 1) {
  if (path.size() < 2) throw Error(ErrorKind::Parameter, "eval_path: need at least 2 points");
  DetPath out;
  out.form = form;
  std::vector<cx> values;
  int zero_strikes = 0;
  for (int pass = 0; pass < 64; ++pass) {
    values.assign(path.size(), cx(0.0, 0.0));
    std::vector<std::string> errs(path.size());
    parallel_for(
        path.size(),
        [&](std::size_t i) {
          try {
            values[i] = eval_form(pair, form, path[i]);
          } catch (const Error& e) {
            errs[i] = e.what();
          }
        },
        jobs);
    for (std::size_t i = 0; i < path.size(); ++i)
      if (!errs[i].empty())
        throw PathError(ErrorKind::Pole, "eval_path: " + errs[i] + " at path index " + std::to_string(i), i);

    // near-zero guard: refine around the offending sample, then give up
    std::size_t zero_at = path.size();
    for (std::size_t i = 0; i < values.size(); ++i)
      if (std::abs(values[i]) < kPathZeroGuard) { zero_at = i; break; }
    if (zero_at < path.size()) {
      if (++zero_strikes > 3)
        throw PathError(ErrorKind::ZeroCrossing, "eval_path: determinant vanishes on the path",
                        zero_at);
      std::vector<cx> refined;
      for (std::size_t i = 0; i < path.size(); ++i) {
        if (i > 0 && (i == zero_at || i == zero_at + 1))
          refined.push_back(0.5 * (path[i - 1] + path[i]));
        refined.push_back(path[i]);
      }
      path.swap(refined);
      continue;
    }

    try {
      out.log = cxlinalg::unwrap_log_det(path, values, seed);
      out.path = std::move(path);
      out.values = std::move(values);
      return out;
    } catch (const PathError& e) {
      if (e.kind() != ErrorKind::Refinement) throw;
      const std::size_t k = e.index();
      std::vector<cx> refined;
      for (std::size_t i = 0; i < path.size(); ++i) {
        if (i == k) refined.push_back(0.5 * (path[i - 1] + path[i]));
        refined.push_back(path[i]);
      }
      path.swap(refined);
    }
  }
  throw Error(ErrorKind::Refinement, "eval_path: refinement budget exhausted");
}

// --- log derivative --------------------------------------------------------------

// (d/dz) log Delta by a 4-point complex stencil; equals
// tr((A_B - z)^{-1} - (A_{B'} - z)^{-1}) on the joint resolvent set.
inline cx log_derivative(const ExtensionPair& pair, cx z, double step = 0.0,
                         Form form = Form::ratio()) {
  if (step <= 0.0) step = 1e-4 * std::max(1.0, std::abs(z));
  cx base, vpr, vmr, vpi, vmi;
  try {
    base = eval_form(pair, form, z);
    vpr = eval_form(pair, form, z + step);
    vmr = eval_form(pair, form, z - step);
    vpi = eval_form(pair, form, z + cx(0, 1) * step);
    vmi = eval_form(pair, form, z - cx(0, 1) * step);
  } catch (const Error& e) {
    throw Error(ErrorKind::Stencil, std::string("log_derivative: pole within stencil: ") + e.what());
  }
  if (std::abs(base) < kPathZeroGuard)
    throw Error(ErrorKind::Stencil, "log_derivative: determinant vanishes at the stencil center");
  auto rel_log = [&](cx v) {
    const cx r = v / base;
    if (std::abs(r - cx(1, 0)) > 0.9)
      throw Error(ErrorKind::Stencil, "log_derivative: determinant varies too fast across stencil");
    return std::log(r);
  };
  const cx d_real = (rel_log(vpr) - rel_log(vmr)) / (2.0 * step);
  const cx d_imag = (rel_log(vpi) - rel_log(vmi)) / (cx(0, 2) * step);
  return 0.5 * (d_real + d_imag);
}

} // namespace pdet

using pdet::DetPath;

} // namespace btdet
