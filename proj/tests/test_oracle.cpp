#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "btdet/oracle.hpp"
#include "btdet/pdet.hpp"
#include "btdet/weyl.hpp"
#include "test_util.hpp"

using namespace btdet;
using namespace btdet::oracle;
using namespace btdet::odeprop;
using namespace btdet::triplets;
using testutil::random_cmat;
using testutil::random_hermitian;

namespace {

BoundaryOperator interval_b(const CMat& b) { return BoundaryOperator(b); }

BoundaryOperator neumann2() { return interval_b(CMat(2, 2)); }

double rel(cx got, cx want) { return std::abs(got - want) / std::max(1e-300, std::abs(want)); }

} // namespace

TEST_CASE("BandLu: banded solve matches the dense path") {
  auto g = testutil::rng(61);
  const std::size_t n = 40, kl = 3;
  BandMat b(n, kl, kl);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = (i > kl ? i - kl : 0); j <= std::min(n - 1, i + kl); ++j)
      b.at(i, j) = testutil::random_unit_box(g) + (i == j ? cx(4, 0) : cx(0, 0));
  CMat dense = b.dense();
  BandLu lu(b);
  std::vector<cx> rhs(n);
  for (auto& v : rhs) v = testutil::random_unit_box(g);
  CMat rhs_m(n, 1);
  for (std::size_t i = 0; i < n; ++i) rhs_m(i, 0) = rhs[i];
  lu.solve_inplace(rhs);
  CMat want = cxlinalg::solve(dense, rhs_m);
  double err = 0.0;
  for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(rhs[i] - want(i, 0)));
  CHECK(err < 1e-11);

  // trace of the inverse against the dense inverse
  cx tr_band = lu.inverse_trace();
  cx tr_dense = cxlinalg::inverse(dense).trace();
  CHECK(rel(tr_band, tr_dense) < 1e-11);
}

TEST_CASE("discretize: free interval Dirichlet reference has lowest eigenvalue 1") {
  auto q = PotentialSpec::zero(1, Support::Interval, kPi);
  auto om = discretize_reference(q, 2000);
  CHECK(om.band.hermiticity_defect() < 1e-12);
  const cx lam = eigenvalue_near(om, cx(0.9, 0.0));
  CHECK(std::abs(lam - cx(1, 0)) < 1e-5);
}

TEST_CASE("discretize: free interval Neumann both ends has lowest eigenvalue 0") {
  auto q = PotentialSpec::zero(1, Support::Interval, kPi);
  auto om = discretize(q, neumann2(), 1000);
  CHECK(om.band.hermiticity_defect() < 1e-10 * om.band.norm_max());
  const cx lam = eigenvalue_near(om, cx(-0.05, 0.0));
  CHECK(std::abs(lam) < 1e-6);
}

TEST_CASE("discretize: Robin eigenvalues converge at O(h^2)") {
  // interval [0,pi], separated Robin f'(0) = f(0), f'(b) = -f(b):
  // B11 = 1 (so f'(b) = -f(b)), B22 = 1 (so f'(0) = f(0))
  auto q = PotentialSpec::zero(1, Support::Interval, kPi);
  CMat b(2, 2);
  b(0, 0) = 1.0;
  b(1, 1) = 1.0;
  auto om1 = discretize(q, interval_b(b), 250);
  auto om2 = discretize(q, interval_b(b), 500);
  auto om4 = discretize(q, interval_b(b), 1000);
  const double l1 = eigenvalue_near(om1, cx(0.1, 0)).real();
  const double l2 = eigenvalue_near(om2, cx(0.1, 0)).real();
  const double l4 = eigenvalue_near(om4, cx(0.1, 0)).real();
  // successive errors shrink by ~4; Richardson-extrapolated value is stable
  const double r12 = std::abs(l1 - l2), r24 = std::abs(l2 - l4);
  CHECK(r12 / r24 > 3.0);
  CHECK(r12 / r24 < 5.0);
  const double extrap = l4 + (l4 - l2) / 3.0;
  const double extrap2 = l2 + (l2 - l1) / 3.0;
  CHECK(std::abs(extrap - extrap2) < 1e-6);
}

TEST_CASE("discretize: dissipative B = i I2 spectrum stays in the closed upper half-plane") {
  auto q = PotentialSpec::zero(1, Support::Interval, kPi);
  auto om = discretize(q, interval_b(CMat::identity(2) * cx(0, 1)), 220);
  auto eig = eigenvalues(om);
  for (auto v : eig) CHECK(v.imag() > -1e-8 * std::max(1.0, std::abs(v)));
}

TEST_CASE("discretize_halfline: Robin h=-1 bound state at z=-1") {
  auto q = PotentialSpec::zero(1, Support::HalfLine, 1.0);
  CMat bl(1, 1, {cx(-1, 0)});
  HalflineTruncation tr;
  tr.L = 40.0;
  tr.z_ref = cx(-1.0, 0.0);
  auto om = discretize_halfline(q, &bl, 2000, tr);
  CHECK(om.band.hermiticity_defect() < 1e-10 * om.band.norm_max());
  const cx lam = eigenvalue_near(om, cx(-0.9, 0.0));
  CHECK(std::abs(lam - cx(-1, 0)) < 2e-3);  // O(h^2) at h = 0.02
}

TEST_CASE("resolvent_trace_diff: rank-one boundary change matches d/dz log Delta") {
  auto q = PotentialSpec::zero(1, Support::HalfLine, 1.0);
  CMat b1(1, 1, {cx(1, 0)}), b2(1, 1, {cx(2, 0)});
  HalflineTruncation tr;
  tr.L = 40.0;
  tr.z_ref = cx(-1.0, 0.0);
  auto om1 = discretize_halfline(q, &b1, 2000, tr);
  auto om2 = discretize_halfline(q, &b2, 2000, tr);
  const cx z(0, 2);
  // pair (B'=h2, B=h1): d/dz log Delta = tr((A_{h1}-z)^{-1} - (A_{h2}-z)^{-1})
  ExtensionPair pair(BoundaryOperator(b2), BoundaryOperator(b1), WeylMap::free_halfline(1));
  const cx want = pdet::log_derivative(pair, z);
  const cx got = resolvent_trace_diff(om1, om2, z);
  CHECK(std::abs(got - want) < 1e-3 * std::max(1.0, std::abs(want)));
}

TEST_CASE("resolvent_trace_diff: Krein correction trace against the discretized pair") {
  // free half-line Robin h=1 against the Dirichlet reference at z=-1; the
  // grid-kernel trace (see triplets) equals 1/4 analytically
  auto q = PotentialSpec::zero(1, Support::HalfLine, 1.0);
  CMat bl(1, 1, {cx(1, 0)});
  HalflineTruncation tr;
  tr.L = 40.0;
  tr.z_ref = cx(-1.0, 0.0);
  auto om_robin = discretize_halfline(q, &bl, 2000, tr);
  auto om_dir = discretize_halfline(q, nullptr, 2000, tr);
  const cx diff = resolvent_trace_diff(om_robin, om_dir, cx(-1, 0));
  CHECK(std::abs(diff - cx(0.25, 0.0)) < 1e-3);
}

TEST_CASE("resolvent_trace_diff: mesh doubling stability") {
  auto q = PotentialSpec::zero(1, Support::HalfLine, 1.0);
  CMat b1(1, 1, {cx(1, 0)}), b2(1, 1, {cx(2, 0)});
  HalflineTruncation tr;
  tr.L = 40.0;
  tr.z_ref = cx(-1.0, 0.0);
  const cx z(0, 2);
  auto d1 = resolvent_trace_diff(discretize_halfline(q, &b2, 1000, tr),
                                 discretize_halfline(q, &b1, 1000, tr), z);
  auto d2 = resolvent_trace_diff(discretize_halfline(q, &b2, 2000, tr),
                                 discretize_halfline(q, &b1, 2000, tr), z);
  CHECK(std::abs(d1 - d2) <= 1e-3 * std::max(1.0, std::abs(d2)));
}

TEST_CASE("additive_pdet: fixtures and determinant property suite") {
  // V = 0
  auto g = testutil::rng(71);
  CMat h = random_cmat(g, 4, 4);
  CHECK(rel(additive_pdet(h, CMat(4, 4), cx(0, 3)), cx(1, 0)) < 1e-14);
  // scalar: H = 0, V = 1, z = i: det(1 + 1/(0 - i)) = 1 + i
  CMat h1(1, 1), v1(1, 1, {cx(1, 0)});
  CHECK(rel(additive_pdet(h1, v1, cx(0, 1)), cx(1, 1)) < 1e-14);

  for (int rep = 0; rep < 25; ++rep) {
    CMat hh = random_cmat(g, 5, 5);
    CMat va = random_cmat(g, 5, 5), vb = random_cmat(g, 5, 5);
    const cx z(0.3, 2.1);
    // chain rule on (H, H+Va, H+Va+Vb)
    const cx lhs = additive_pdet(hh + va, vb, z) * additive_pdet(hh, va, z);
    const cx rhs = additive_pdet(hh, va + vb, z);
    CHECK(rel(lhs, rhs) < 1e-10);
    // inversion
    CHECK(rel(additive_pdet(hh, va, z) * additive_pdet(hh + va, -va, z), cx(1, 0)) < 1e-10);
    // conjugation
    CHECK(rel(additive_pdet(hh.adjoint(), va.adjoint(), z),
              std::conj(additive_pdet(hh, va, std::conj(z)))) < 1e-10);
    // log-derivative: d/dz log Delta = tr((H-z)^{-1} - (H'-z)^{-1})
    const double st = 1e-5;
    const cx dlog = (std::log(additive_pdet(hh, va, z + st) / additive_pdet(hh, va, z)) -
                     std::log(additive_pdet(hh, va, z - st) / additive_pdet(hh, va, z))) /
                    (2.0 * st);
    const CMat r = cxlinalg::inverse(hh - CMat::identity(5) * z);
    const CMat rp = cxlinalg::inverse(hh + va - CMat::identity(5) * z);
    CHECK(std::abs(dlog - (r.trace() - rp.trace())) < 1e-6);
    // quotient identity (property 7)
    const cx zeta(-0.8, 1.4);
    const CMat rz = cxlinalg::inverse(hh - CMat::identity(5) * z);
    const CMat rpz = cxlinalg::inverse(hh + va - CMat::identity(5) * zeta);
    const cx q7 = cxlinalg::det(CMat::identity(5) + (z - zeta) * rpz * va * rz);
    CHECK(rel(additive_pdet(hh, va, z) / additive_pdet(hh, va, zeta), q7) < 1e-9);
  }
}

TEST_CASE("matrix_ssf: diagonal fixture and exact identities") {
  // H = diag(0,2), V = diag(1,0): xi = 1 on [0,1), 0 elsewhere; int xi = 1
  CMat h = CMat::diagonal({cx(0, 0), cx(2, 0)});
  CMat v = CMat::diagonal({cx(1, 0), cx(0, 0)});
  auto ssf = matrix_ssf(h, v);
  CHECK(ssf.xi(0.5) == 1);
  CHECK(ssf.xi(-0.5) == 0);
  CHECK(ssf.xi(1.5) == 0);
  CHECK(ssf.xi(2.5) == 0);
  CHECK(std::abs(ssf.integral() - 1.0) < 1e-14);
  CHECK(std::abs(ssf.integral() - ssf.tr_v) < 1e-14);

  // V = 0 gives xi == 0
  auto z0 = matrix_ssf(h, CMat(2, 2));
  CHECK(z0.xi(0.5) == 0);
  CHECK(z0.integral() == 0.0);
}

TEST_CASE("matrix_ssf: random Hermitian with rank-2 V, machine-exact integral") {
  auto g = testutil::rng(83);
  CMat h = random_hermitian(g, 8, 2.0);
  CMat u = random_cmat(g, 8, 2);
  CMat v = u * u.adjoint();  // rank-2 Hermitian
  auto ssf = matrix_ssf(h, v);
  CHECK(std::abs(ssf.integral() - ssf.tr_v) < 1e-12 * std::max(1.0, std::abs(ssf.tr_v)));
  for (cx z : {cx(0, 1), cx(0, 3), cx(1, 2)})
    CHECK(matrix_ssf_krein_residual(h, v, ssf, z) < 1e-6);
}

TEST_CASE("accumulative_identities: diagonal accumulative fixture") {
  CMat h = CMat::diagonal({cx(0, -1), cx(0, -2)});
  CMat v = CMat::diagonal({cx(0.1, 0), cx(0, 0)});
  std::vector<double> t_grid;
  for (int i = 0; i <= 4000; ++i) t_grid.push_back(-60.0 + 120.0 * i / 4000.0);
  std::vector<double> ladder = {1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  auto rep = accumulative_identities(h, v, t_grid, ladder, {cx(1, 2), cx(0, 3)});
  CHECK(rep.pass_y);
  CHECK(std::abs(rep.y_limit + cx(0.1, 0)) < 1e-5);
  CHECK(rep.pass_omega);
  CHECK(rep.pass_trace);
}

TEST_CASE("accumulative_identities: Hermitian V against matrix_ssf") {
  auto g = testutil::rng(89);
  CMat h = random_hermitian(g, 4, 1.0);
  CMat u = random_cmat(g, 4, 1);
  CMat v = u * u.adjoint();  // Hermitian rank 1
  std::vector<double> t_grid;
  for (int i = 0; i <= 6000; ++i) t_grid.push_back(-30.0 + 60.0 * i / 6000.0);
  std::vector<double> ladder = {1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  auto rep = accumulative_identities(h, v, t_grid, ladder, {cx(0, 2)});
  auto ssf = matrix_ssf(h, v);
  // omega is real and matches the counting-function shift on the grid
  double worst = 0.0;
  for (std::size_t i = 0; i < t_grid.size(); i += 17) {
    const double t = t_grid[i];
    bool near_jump = false;
    for (double e : ssf.eig_h)
      if (std::abs(t - e) < 0.05) near_jump = true;
    for (double e : ssf.eig_hp)
      if (std::abs(t - e) < 0.05) near_jump = true;
    if (near_jump) continue;
    CHECK(std::abs(rep.omega[i].imag()) < 1e-6);
    worst = std::max(worst, std::abs(rep.omega[i].real() - ssf.xi(t)));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("discretize: contract violations are rejected") {
  auto q = PotentialSpec::zero(1, Support::Interval, kPi);
  CHECK_THROWS_AS(discretize(q, neumann2(), 8), Error);                 // N too small
  CHECK_THROWS_AS(discretize(q, BoundaryOperator(CMat::identity(1)), 64), Error);  // wrong dim
  auto qh = PotentialSpec::zero(1, Support::HalfLine, 1.0);
  CHECK_THROWS_AS(discretize(qh, neumann2(), 64), Error);              // wrong support
}
