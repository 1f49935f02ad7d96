#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>

#include "btdet/odeprop.hpp"
#include "test_util.hpp"

using namespace btdet;
using namespace btdet::odeprop;

using testutil::square_well_oracle;

TEST_CASE("fundamental_solutions: free closed forms at b=pi, z=1") {
  auto q = PotentialSpec::zero(1, Support::Interval, kPi);
  auto p = fundamental_solutions(q, cx(1.0, 0.0));
  CHECK(std::abs(p.C(0, 0) - cx(-1, 0)) < 1e-10);
  CHECK(std::abs(p.S(0, 0)) < 1e-10);
  CHECK(std::abs(p.Cp(0, 0)) < 1e-10);
  CHECK(std::abs(p.Sp(0, 0) - cx(-1, 0)) < 1e-10);
}

TEST_CASE("fundamental_solutions: initial-condition limit as b -> 0") {
  auto q = PotentialSpec::zero(2, Support::Interval, 1e-4);
  auto p = fundamental_solutions(q, cx(3.0, 1.0));
  CHECK((p.C - CMat::identity(2)).norm_max() < 1e-7);
  CHECK(p.S.norm_max() < 2e-4);
}

TEST_CASE("fundamental_solutions: free z-grid matches trig closed forms") {
  auto q = PotentialSpec::zero(1, Support::Interval, 1.7);
  for (cx z : {cx(0.5, 0.0), cx(2.0, 1.0), cx(-3.0, 0.2), cx(4.0, -2.0)}) {
    auto p = fundamental_solutions(q, z);
    const cx k = std::sqrt(z);
    const cx c = std::cos(k * 1.7), s = std::sin(k * 1.7) / k;
    CHECK(std::abs(p.C(0, 0) - c) <= 1e-10 * std::max(1.0, std::abs(c)));
    CHECK(std::abs(p.S(0, 0) - s) <= 1e-10 * std::max(1.0, std::abs(s)));
  }
}

TEST_CASE("fundamental_solutions: constant potential shifts the spectral parameter") {
  const double c0 = 0.7;
  auto q = PotentialSpec::from_function(
      2, Support::Interval, 1.3,
      [](double) { return CMat::identity(2) * cx(0.7, 0.0); }, 0.7 * 1.3);
  const cx z(2.0, 0.3);
  auto p = fundamental_solutions(q, z);
  const cx k = std::sqrt(z - c0);
  CHECK(std::abs(p.C(0, 0) - std::cos(k * 1.3)) < 1e-9);
  CHECK(std::abs(p.C(0, 1)) < 1e-10);
}

TEST_CASE("fundamental_solutions: symplectic identity at real z") {
  auto q = PotentialSpec::from_function(
      2, Support::Interval, 2.0,
      [](double x) {
        CMat m(2, 2);
        m(0, 0) = 0.2 * std::cos(x);
        m(0, 1) = 0.1 * std::sin(x);
        m(1, 0) = 0.1 * std::sin(x);
        m(1, 1) = -0.1;
        return m;
      },
      1.0);
  for (double z : {-1.5, 0.3, 2.0, 7.5}) {
    auto p = fundamental_solutions(q, cx(z, 0.0));
    CHECK(p.symplectic_defect() < 1e-8);
  }
}

TEST_CASE("propagate_on_grid agrees with the adaptive endpoint") {
  auto q = PotentialSpec::from_function(
      1, Support::Interval, kPi, [](double x) { return CMat(1, 1, {cx(0.4 * std::sin(x), 0.0)}); },
      0.8);
  std::vector<double> grid;
  for (int i = 0; i <= 64; ++i) grid.push_back(kPi * i / 64.0);
  auto samples = propagate_on_grid(q, cx(1.5, 0.5), grid);
  auto endp = fundamental_solutions(q, cx(1.5, 0.5));
  CHECK((samples.back().C - endp.C).norm_max() < 1e-7);
  CHECK((samples.back().Sp - endp.Sp).norm_max() < 1e-7);
}

TEST_CASE("jost: free potential is exact") {
  auto q = PotentialSpec::zero(1, Support::HalfLine, 5.0);
  auto j1 = jost(q, cx(-1.0, 0.0));
  CHECK(std::abs(j1.F0(0, 0) - cx(1, 0)) < 1e-14);
  CHECK(std::abs(j1.F0p(0, 0) - cx(-1, 0)) < 1e-14);  // i * i * 1

  auto j2 = jost(q, cx(0.0, 2.0));
  const cx want = cx(0, 1) * sqrt_upper(cx(0.0, 2.0));
  CHECK(std::abs(j2.F0p(0, 0) - want) < 1e-14);
}

TEST_CASE("jost: square well matches the two-region closed form") {
  auto q = PotentialSpec::square_well(0.5, 1.0);
  const cx z(-1.0, 0.0);
  auto j = jost(q, z);
  auto want = square_well_oracle(0.5, z);
  CHECK(std::abs(j.F0(0, 0) - want.F0) < 1e-8);
  CHECK(std::abs(j.F0p(0, 0) - want.F0p) < 1e-8);
  CHECK(j.residual <= 1e-9);
}

TEST_CASE("jost: residual history decreases inside the contraction radius") {
  auto q = PotentialSpec::square_well(0.5, 1.0);
  auto j = jost(q, cx(-1.0, 0.5));
  REQUIRE(j.residual_history.size() >= 3);
  for (std::size_t k = 1; k < j.residual_history.size(); ++k)
    CHECK(j.residual_history[k] <= j.residual_history[k - 1] * 1.001 + 1e-15);
}

TEST_CASE("jost: branch-cut arguments are rejected") {
  auto q = PotentialSpec::square_well(0.5, 1.0);
  CHECK_THROWS_AS(jost(q, cx(2.0, 0.0)), Error);
  CHECK_THROWS_AS(jost(q, cx(0.0, 0.0)), Error);
}

TEST_CASE("jost: analyticity smoke test across stencil directions") {
  auto q = PotentialSpec::square_well(0.4, 1.0);
  const cx z(-1.2, 0.7);
  const double s = 1e-3;
  auto f = [&](cx zz) { return jost(q, zz).F0(0, 0); };
  const cx central = (f(z + s) - f(z - s)) / (2.0 * s);
  const cx onesided = (f(z + s) - f(z)) / s;
  CHECK(std::abs(central - onesided) < 5.0 * s * std::max(1.0, std::abs(central)));
}

TEST_CASE("PotentialSpec: CSV ingestion round trip") {
  const char* path = "potential_roundtrip.csv";
  {
    std::ofstream out(path);
    out << "x,ReQ00,ImQ00\n";
    for (int i = 0; i <= 40; ++i) {
      const double x = i * 0.1;
      out << x << "," << -0.5 * std::exp(-x) << ",0\n";
    }
  }
  auto q = PotentialSpec::from_csv(path, Support::HalfLine);
  CHECK(q.channels() == 1);
  CHECK(std::abs(q.endpoint() - 4.0) < 1e-12);
  CHECK(std::abs(q(1.0)(0, 0).real() + 0.5 * std::exp(-1.0)) < 1e-3);   // linear interp
  CHECK(std::abs(q(0.05)(0, 0).real() + 0.5 * (1.0 + std::exp(-0.1)) / 2.0) < 1e-3);
  CHECK(q(15.0).norm_max() == 0.0);  // beyond cutoff
  std::remove(path);
}

TEST_CASE("PotentialSpec: broken CSV rejected, non-Hermitian rejected") {
  const char* path = "potential_bad.csv";
  {
    std::ofstream out(path);
    out << "0,1\n0.5,1\n";  // 2 columns: not 1 + 2n^2
  }
  CHECK_THROWS_AS(PotentialSpec::from_csv(path, Support::HalfLine), Error);
  std::remove(path);

  CHECK_THROWS_AS(PotentialSpec::from_function(
                      2, Support::Interval, 1.0,
                      [](double) {
                        CMat m(2, 2);
                        m(0, 1) = cx(1.0, 0.0);  // not Hermitian
                        return m;
                      },
                      1.0),
                  Error);
}
