#pragma once

// Boundary-operator algebra: extension parameters A_B, spectrum predicates,
// the Krein resolvent correction as a grid kernel, J-unitary triplet
// transforms, characteristic functions, and real/imaginary decomposition.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "btdet/cxlinalg.hpp"
#include "btdet/errors.hpp"
#include "btdet/weyl.hpp"

namespace btdet {
namespace triplets {

enum class BoundaryClass { Selfadjoint, Dissipative, Accumulative, General };

inline const char* boundary_class_name(BoundaryClass c) {
  switch (c) {
    case BoundaryClass::Selfadjoint: return "selfadjoint";
    case BoundaryClass::Dissipative: return "dissipative";
    case BoundaryClass::Accumulative: return "accumulative";
    case BoundaryClass::General: return "general";
  }
  return "?";
}

// Complex m x m matrix parameterizing the extension A_B = ker(Gamma1 - B Gamma0),
// with the classification derived from B_I = (B - B^*)/(2i).
class BoundaryOperator {
public:
  explicit BoundaryOperator(CMat b) : b_(std::move(b)) {
    b_.require_square("BoundaryOperator");
    b_.require_finite("BoundaryOperator");
    const CMat bi = cxlinalg::skew_part_over_i(b_);
    if ((b_ - b_.adjoint()).norm_max() <= 1e-12) {
      cls_ = BoundaryClass::Selfadjoint;
    } else {
      auto eig = cxlinalg::hermitian_eig(bi);
      const double lo = eig.values.front(), hi = eig.values.back();
      if (lo >= -1e-12)
        cls_ = BoundaryClass::Dissipative;
      else if (hi <= 1e-12)
        cls_ = BoundaryClass::Accumulative;
      else
        cls_ = BoundaryClass::General;
    }
  }

  const CMat& matrix() const noexcept { return b_; }
  std::size_t dim() const noexcept { return b_.rows(); }
  BoundaryClass cls() const noexcept { return cls_; }
  bool selfadjoint() const noexcept { return cls_ == BoundaryClass::Selfadjoint; }
  bool dissipative() const noexcept {
    return cls_ == BoundaryClass::Dissipative || cls_ == BoundaryClass::Selfadjoint;
  }
  bool accumulative() const noexcept {
    return cls_ == BoundaryClass::Accumulative || cls_ == BoundaryClass::Selfadjoint;
  }

  BoundaryOperator adjoint() const { return BoundaryOperator(b_.adjoint()); }

private:
  CMat b_;
  BoundaryClass cls_;
};

// Ordered pair of extensions over one Weyl map; the determinant numerator
// carries Bprime.
struct ExtensionPair {
  BoundaryOperator Bprime;
  BoundaryOperator B;
  WeylMap weyl;

  ExtensionPair(BoundaryOperator bp, BoundaryOperator b, WeylMap w)
      : Bprime(std::move(bp)), B(std::move(b)), weyl(std::move(w)) {
    if (Bprime.dim() != B.dim())
      throw Error(ErrorKind::Dimension, "ExtensionPair: boundary operators differ in size");
    if (weyl.dim() != B.dim())
      throw Error(ErrorKind::Dimension, "ExtensionPair: Weyl map dimension mismatch");
    if (!weyl.determinant_grade())
      throw Error(ErrorKind::Contract, "ExtensionPair: tabulated Weyl maps are plotting-only");
  }

  ExtensionPair swapped() const { return ExtensionPair(B, Bprime, weyl); }
  ExtensionPair adjoints() const { return ExtensionPair(Bprime.adjoint(), B.adjoint(), weyl); }
};

// z is a resolvent point of A_B iff B - M(z) is boundedly invertible.
inline bool is_resolvent_point(const BoundaryOperator& b, const CMat& mz) {
  if (b.dim() != mz.rows() || !mz.square())
    throw Error(ErrorKind::Dimension, "is_resolvent_point: dimension mismatch");
  const CMat d = b.matrix() - mz;
  auto s = cxlinalg::singular_values(d);
  if (s.empty() || s.front() <= 0.0) return false;
  return s.back() > 1e-10 * s.front();
}

// --- Krein resolvent correction ----------------------------------------------

// Sampled kernel of gamma(z) (B - M(z))^{-1} gamma(conj z)^*, representing
// (A_B - z)^{-1} - (A_0 - z)^{-1} on the grid; trace by trapezoid quadrature
// of the channel-diagonal.
struct KreinCorrection {
  cx z;
  std::vector<double> xs;
  CMat kernel;  // (len(xs)*n) x (len(xs)*n)
  cx trace;
  std::size_t boundary_dim = 0;  // rank of the kernel is at most this
};

inline KreinCorrection krein_correction(const GammaSample& at_z, const GammaSample& at_zbar,
                                        const BoundaryOperator& b, const CMat& mz) {
  if (at_z.xs != at_zbar.xs)
    throw Error(ErrorKind::Parameter, "krein_correction: gamma samples on different grids");
  if (std::abs(at_zbar.z - std::conj(at_z.z)) > 1e-14 * std::max(1.0, std::abs(at_z.z)))
    throw Error(ErrorKind::Parameter, "krein_correction: second sample must sit at conj(z)");
  if (!is_resolvent_point(b, mz))
    throw Error(ErrorKind::SpectralPoint, "krein_correction: z in the spectrum of A_B");

  const std::size_t m = b.dim();
  const CMat inv = cxlinalg::lu_solve(cxlinalg::lu_factor(b.matrix() - mz), CMat::identity(m));
  KreinCorrection out;
  out.z = at_z.z;
  out.xs = at_z.xs;
  out.boundary_dim = m;
  out.kernel = at_z.basis * inv * at_zbar.basis.adjoint();

  const std::size_t n = at_z.basis.rows() / at_z.xs.size();
  cx acc = 0.0;
  for (std::size_t g = 0; g + 1 < out.xs.size(); ++g) {
    const double h = out.xs[g + 1] - out.xs[g];
    cx d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d0 += out.kernel(g * n + i, g * n + i);
      d1 += out.kernel((g + 1) * n + i, (g + 1) * n + i);
    }
    acc += 0.5 * h * (d0 + d1);
  }
  out.trace = acc;
  return out;
}

// --- J-unitary triplet transforms ------------------------------------------------

constexpr double kJUnitaryTol = 1e-10;

// J = [[0, -iI],[iI, 0]] on the doubled boundary space.
inline CMat j_matrix(std::size_t m) {
  CMat j(2 * m, 2 * m);
  for (std::size_t i = 0; i < m; ++i) {
    j(i, m + i) = cx(0, -1);
    j(m + i, i) = cx(0, 1);
  }
  return j;
}

inline double j_unitarity_defect(const CMat& x) {
  if (!x.square() || x.rows() % 2 != 0)
    throw Error(ErrorKind::Dimension, "j_unitarity_defect: need an even square matrix");
  const CMat j = j_matrix(x.rows() / 2);
  return (x.adjoint() * j * x - j).norm_max();
}

// Mobius action of a J-unitary block matrix on the boundary operator and the
// Weyl value: Y -> (X11 Y + X12)(X21 Y + X22)^{-1}.
inline std::pair<CMat, CMat> transform_triplet(const CMat& x, const BoundaryOperator& b,
                                               const CMat& mz) {
  const std::size_t m = b.dim();
  if (x.rows() != 2 * m || x.cols() != 2 * m)
    throw Error(ErrorKind::Dimension, "transform_triplet: X must be 2m x 2m");
  const double defect = j_unitarity_defect(x);
  if (defect > kJUnitaryTol)
    throw Error(ErrorKind::Contract,
                "transform_triplet: X not J-unitary (defect " + std::to_string(defect) + ")");
  const CMat x11 = x.block(0, 0, m, m), x12 = x.block(0, m, m, m);
  const CMat x21 = x.block(m, 0, m, m), x22 = x.block(m, m, m, m);
  auto mobius = [&](const CMat& y) {
    const CMat den = x21 * y + x22;
    auto s = cxlinalg::singular_values(den);
    if (s.empty() || s.back() <= 1e-12 * std::max(s.front(), 1e-300))
      throw SingularityError("transform_triplet: singular denominator",
                             s.empty() ? 0.0 : s.front() / std::max(s.back(), 1e-300));
    return (x11 * y + x12) * cxlinalg::lu_solve(cxlinalg::lu_factor(den), CMat::identity(m));
  };
  return {mobius(b.matrix()), mobius(mz)};
}

// --- decomposition and characteristic function -------------------------------------

struct Decomposition {
  CMat B_R;       // (B + B^*)/2
  CMat B_I;       // (B - B^*)/(2i)
  CMat J;         // sign(B_I), extended by the identity on ker(B_I)
  CMat absB_I;    // |B_I|
  CMat sqrt_abs;  // |B_I|^{1/2}
};

inline Decomposition decompose(const BoundaryOperator& b) {
  Decomposition d;
  d.B_R = cxlinalg::hermitian_part(b.matrix());
  d.B_I = cxlinalg::skew_part_over_i(b.matrix());
  const std::size_t m = b.dim();
  auto eig = cxlinalg::hermitian_eig(d.B_I, true);
  const double scale = std::max(std::abs(eig.values.front()), std::abs(eig.values.back()));
  const double kernel_tol = 1e-12 * std::max(1.0, scale);
  CMat sgn(m, m), mag(m, m), srt(m, m);
  for (std::size_t k = 0; k < m; ++k) {
    const double lam = eig.values[k];
    const double s = (std::abs(lam) <= kernel_tol) ? 1.0 : (lam > 0.0 ? 1.0 : -1.0);
    sgn(k, k) = s;
    mag(k, k) = std::abs(lam);
    srt(k, k) = std::sqrt(std::abs(lam));
  }
  const CMat u = eig.vectors;
  d.J = u * sgn * u.adjoint();
  d.absB_I = u * mag * u.adjoint();
  d.sqrt_abs = u * srt * u.adjoint();
  return d;
}

// W(z) = I + 2i |B_I|^{1/2} (B^* - M(z))^{-1} |B_I|^{1/2} J; contractive in the
// upper half-plane when A_B is m-dissipative (J = I there).
inline CMat characteristic_function(const BoundaryOperator& b, const CMat& mz) {
  const std::size_t m = b.dim();
  if (mz.rows() != m || !mz.square())
    throw Error(ErrorKind::Dimension, "characteristic_function: dimension mismatch");
  const CMat bstar_m = b.matrix().adjoint() - mz;
  auto s = cxlinalg::singular_values(bstar_m);
  if (s.empty() || s.back() <= 1e-12 * std::max(s.front(), 1e-300))
    throw Error(ErrorKind::SpectralPoint, "characteristic_function: B^* - M(z) singular");
  Decomposition d = decompose(b);
  const CMat core =
      cxlinalg::lu_solve(cxlinalg::lu_factor(bstar_m), d.sqrt_abs * d.J);
  return CMat::identity(m) + cx(0, 2) * (d.sqrt_abs * core);
}

} // namespace triplets

using triplets::BoundaryOperator;
using triplets::ExtensionPair;
using triplets::BoundaryClass;

} // namespace btdet
