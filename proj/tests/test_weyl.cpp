#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "btdet/weyl.hpp"
#include "test_util.hpp"

using namespace btdet;
using namespace btdet::weyl;
using namespace btdet::odeprop;

TEST_CASE("weyl_free_halfline: closed-form values and cut rejection") {
  CHECK(std::abs(weyl_free_halfline(cx(-1, 0), 1)(0, 0) - cx(-1, 0)) < 1e-15);
  // z = i: M = i e^{i pi/4} I_2
  CMat m = weyl_free_halfline(cx(0, 1), 2);
  const cx want = cx(0, 1) * std::exp(cx(0, kPi / 4.0));
  CHECK(std::abs(m(0, 0) - want) < 1e-15);
  CHECK(std::abs(m(1, 1) - want) < 1e-15);
  CHECK(std::abs(m(0, 1)) == 0.0);
  CHECK(std::abs(weyl_free_halfline(cx(-4, 0), 1)(0, 0) - cx(-2, 0)) < 1e-15);
  CHECK_THROWS_AS(weyl_free_halfline(cx(2, 0), 1), Error);
}

TEST_CASE("weyl_halfline: numerically zero potential reproduces the free map") {
  // a zero potential that is not flagged as such, to exercise the Jost path
  auto q = PotentialSpec::from_function(1, Support::HalfLine, 3.0,
                                        [](double) { return CMat(1, 1); }, 0.0);
  for (cx z : {cx(-1.0, 0.0), cx(0.5, 1.0), cx(-2.0, -0.7)}) {
    const cx got = weyl_halfline(q, z)(0, 0);
    const cx want = weyl_free_halfline(z, 1)(0, 0);
    CHECK(std::abs(got - want) < 1e-10);
  }
}

TEST_CASE("weyl_halfline: square well matches the two-region m-function") {
  auto q = PotentialSpec::square_well(0.5, 1.0);
  const cx z(-1.0, 0.0);
  const cx got = weyl_halfline(q, z)(0, 0);
  CHECK(std::abs(got - testutil::square_well_oracle(0.5, z).m()) < 1e-8);
}

TEST_CASE("weyl_halfline: Herglotz property at z = 2i for a small potential") {
  auto q = PotentialSpec::from_function(
      2, Support::HalfLine, 2.0,
      [](double x) {
        CMat m(2, 2);
        m(0, 0) = 0.3 * std::exp(-x);
        m(0, 1) = cx(0.1, 0.05) * std::exp(-2.0 * x);
        m(1, 0) = std::conj(m(0, 1));
        m(1, 1) = -0.2 * std::exp(-x);
        return m;
      },
      1.0);
  CMat m = weyl_halfline(q, cx(0, 2));
  auto eig = cxlinalg::hermitian_eig(cxlinalg::skew_part_over_i(m));
  CHECK(eig.values.front() >= -1e-8);
}

TEST_CASE("weyl_interval: z -> 0 limit of the free case on [0,pi]") {
  auto q = PotentialSpec::zero(1, Support::Interval, kPi);
  CMat m = weyl_interval(q, cx(1e-12, 0.0));
  const double w = -1.0 / kPi;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(m(i, j) - cx(w, 0.0)) < 1e-6);
  CHECK(std::abs(cxlinalg::det(m)) < 1e-10);
}

TEST_CASE("weyl_interval: hyperbolic closed form at z=-1 and real-z symmetry") {
  auto q = PotentialSpec::zero(1, Support::Interval, kPi);
  CMat m = weyl_interval(q, cx(-1.0, 0.0));
  const double coth = std::cosh(kPi) / std::sinh(kPi);
  const double csch = 1.0 / std::sinh(kPi);
  CHECK(std::abs(m(0, 0) - cx(-coth, 0)) < 1e-9);
  CHECK(std::abs(m(0, 1) - cx(-csch, 0)) < 1e-9);
  CHECK(std::abs(m(1, 0) - cx(-csch, 0)) < 1e-9);
  CHECK(std::abs(m(1, 1) - cx(-coth, 0)) < 1e-9);
  // real z: M(conj z) = M(z)^* collapses to "M is real"
  CHECK((m - m.conj()).norm_max() < 1e-10);
}

TEST_CASE("weyl_interval: Nevanlinna property at z=i") {
  auto q = PotentialSpec::from_function(
      1, Support::Interval, kPi, [](double x) { return CMat(1, 1, {cx(0.3 * std::cos(x), 0.0)}); },
      1.0);
  CMat m = weyl_interval(q, cx(0, 1));
  auto eig = cxlinalg::hermitian_eig(cxlinalg::skew_part_over_i(m));
  CHECK(eig.values.front() >= -1e-8);
}

TEST_CASE("weyl_interval: direct assembly agrees with the printed (1,1) block") {
  auto q = PotentialSpec::from_function(
      1, Support::Interval, 2.0, [](double x) { return CMat(1, 1, {cx(0.2 * x, 0.0)}); }, 0.4);
  for (cx z : {cx(-1.0, 0.4), cx(2.3, 1.0)}) {
    CMat full = weyl_interval(q, z);
    CMat b11 = weyl_interval_block11(q, z);
    CHECK(std::abs(full(0, 0) - b11(0, 0)) < 1e-9);
  }
}

TEST_CASE("gamma_field: free half-line defect solution is e^{-x}") {
  auto q = PotentialSpec::zero(1, Support::HalfLine, 6.0);
  std::vector<double> xs;
  for (int i = 0; i <= 60; ++i) xs.push_back(0.1 * i);
  GammaSample g = gamma_field(q, TripletKind::HalfLine, cx(-1, 0), xs);
  for (std::size_t k = 0; k < xs.size(); ++k)
    CHECK(std::abs(g.basis(k, 0) - std::exp(-xs[k])) < 1e-12);
  CHECK(std::abs(g.gamma0(0, 0) - cx(1, 0)) < 1e-12);
}

TEST_CASE("gamma_field: interval columns have Gamma0 = standard basis") {
  auto q = PotentialSpec::zero(1, Support::Interval, kPi);
  std::vector<double> xs;
  for (int i = 0; i <= 400; ++i) xs.push_back(kPi * i / 400.0);
  GammaSample g = gamma_field(q, TripletKind::Interval, cx(-1, 0), xs);
  CHECK((g.gamma0 - CMat::identity(2)).norm_max() < 1e-8);
  // gamma1 must reproduce the Weyl matrix
  CMat m = weyl_interval(q, cx(-1, 0));
  CHECK((g.gamma1 - m).norm_max() < 1e-8);
}

TEST_CASE("gamma_field: difference identity M(z) - M(zeta)^* = (z - conj zeta) gamma(zeta)^* gamma(z)") {
  auto q = PotentialSpec::zero(1, Support::Interval, kPi);
  std::vector<double> xs;
  for (int i = 0; i <= 4000; ++i) xs.push_back(kPi * i / 4000.0);
  const cx z(-1.0, 0.5), zeta(-0.7, -0.3);
  GammaSample gz = gamma_field(q, TripletKind::Interval, z, xs);
  GammaSample gzeta = gamma_field(q, TripletKind::Interval, zeta, xs);
  CMat lhs = weyl_interval(q, z) - weyl_interval(q, zeta).adjoint();
  CMat rhs = weyl::gamma_pairing(gzeta, gz) * (z - std::conj(zeta));
  CHECK((lhs - rhs).norm_max() < 1e-6);
}

TEST_CASE("herglotz_report: free maps pass, conjugated fixture is flagged") {
  std::vector<cx> grid;
  for (int i = 1; i <= 20; ++i) grid.push_back(cx(-3.0 + 0.4 * i, 0.3 + 0.1 * i));

  auto rep = herglotz_report(WeylMap::free_halfline(1), grid);
  CHECK(rep.all_pass);
  CHECK(rep.worst_min_imag_eig > 0.0);

  auto q = PotentialSpec::zero(1, Support::Interval, kPi);
  auto rep2 = herglotz_report(WeylMap::interval(q), grid);
  CHECK(rep2.all_pass);

  // negative control 1: conjugated map keeps the symmetry identity but flips
  // the sign of Im M on the upper half-plane
  auto conj_map = WeylMap::custom(1, [](cx z) { return weyl_free_halfline(std::conj(z), 1); });
  auto rep3 = herglotz_report(conj_map, grid);
  CHECK_FALSE(rep3.all_pass);
  CHECK(rep3.worst_min_imag_eig < -1e-8);
  CHECK(rep3.worst_symmetry_defect < 1e-10);

  // negative control 2: constant dissipative shift breaks M(conj z) = M(z)^*
  // while keeping Im M positive
  auto shifted = WeylMap::custom(
      1, [](cx z) { return weyl_free_halfline(z, 1) + CMat::identity(1) * cx(0, 0.1); });
  auto rep4 = herglotz_report(shifted, grid);
  CHECK_FALSE(rep4.all_pass);
  CHECK(rep4.worst_symmetry_defect > 0.19);
}

TEST_CASE("WeylMap: tabulated sources are not determinant grade") {
  std::vector<cx> zs = {cx(0, 1), cx(1, 1)};
  std::vector<CMat> ms = {CMat::identity(1), CMat::identity(1) * cx(2, 0)};
  auto w = WeylMap::tabulated(zs, ms);
  CHECK_FALSE(w.determinant_grade());
  CHECK(std::abs(w.eval(cx(0.5, 1.0))(0, 0) - cx(1.5, 0.0)) < 1e-12);
  CHECK(WeylMap::free_halfline(1).determinant_grade());
}

TEST_CASE("scan_singular_hints: detects the Dirichlet pole of the free interval map") {
  auto q = PotentialSpec::zero(1, Support::Interval, kPi);
  auto w = WeylMap::interval(q);
  auto hints = weyl::scan_singular_hints(w, {0.5, 1.0, 2.0});
  REQUIRE(hints.size() == 1);
  CHECK(hints[0] == 1.0);
}
