#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "gconv/vector_fields.hpp"

using namespace gconv;

namespace {

Point pt(std::initializer_list<double> v) {
  Point x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

}  // namespace

TEST_SUITE("vector_fields") {

TEST_CASE("euclidean coefficient is the identity") {
  const auto f = make_family(FamilyKind::euclidean, 2);
  CHECK(f.n() == 2);
  CHECK(f.m() == 2);
  const Mat c = f.coeff(pt({0.3, -7.0}));
  CHECK(c.isApprox(Mat::Identity(2, 2)));
  const Vec g = f.x_gradient(pt({3.0, 4.0}), pt({0.1, 0.2}));
  CHECK(g[0] == 3.0);
  CHECK(g[1] == 4.0);
}

TEST_CASE("grushin coefficient and gradient") {
  const auto f = make_family("grushin");
  const Mat c = f.coeff(pt({2.0, 5.0}));
  CHECK(c(0, 0) == 1.0);
  CHECK(c(0, 1) == 0.0);
  CHECK(c(1, 0) == 0.0);
  CHECK(c(1, 1) == 2.0);

  const Vec g = f.x_gradient(pt({1.0, 1.0}), pt({2.0, -3.0}));
  CHECK(g[0] == 1.0);
  CHECK(g[1] == 2.0);

  const Vec z = f.x_gradient(pt({0.0, 7.0}), pt({0.0, 0.4}));
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 0.0);
}

TEST_CASE("heisenberg convention") {
  const auto f = make_family("heisenberg");
  CHECK(f.n() == 3);
  CHECK(f.m() == 2);
  Mat expected(2, 3);
  expected << 1, 0, 0, 0, 1, 0;
  CHECK(f.coeff(pt({0, 0, 0})).isApprox(expected));
  const Mat c = f.coeff(pt({2.0, 4.0, 1.0}));
  CHECK(c(0, 2) == doctest::Approx(-2.0));
  CHECK(c(1, 2) == doctest::Approx(1.0));
}

TEST_CASE("family names parse and reject") {
  CHECK(make_family("euclidean:3").n() == 3);
  CHECK(make_family("euclidean:4").m() == 4);
  CHECK_THROWS_AS(make_family("euclidean:0"), ConfigError);
  CHECK_THROWS_AS(make_family("euclidean:5"), ConfigError);
  CHECK_THROWS_AS(make_family("sierpinski"), ConfigError);
}

TEST_CASE("dimension mismatch is a contract violation") {
  const auto f = make_family("grushin");
  CHECK_THROWS_AS(f.x_gradient(pt({1.0, 2.0, 3.0}), pt({0.0, 0.0})), ContractViolation);
  CHECK_THROWS_AS(f.coeff(pt({1.0})), ContractViolation);
}

TEST_CASE("x_gradient is linear in du") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (const char* name : {"euclidean:3", "grushin", "heisenberg"}) {
    const auto f = make_family(name);
    for (int trial = 0; trial < 200; ++trial) {
      Point x(f.n());
      Vec a(f.n()), b(f.n());
      for (int d = 0; d < f.n(); ++d) {
        x[d] = u(rng);
        a[d] = u(rng);
        b[d] = u(rng);
      }
      const double s = u(rng);
      const Vec lhs = f.x_gradient(a + s * b, x);
      const Vec rhs = f.x_gradient(a, x) + s * f.x_gradient(b, x);
      CHECK((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }
  }
}

TEST_CASE("lic report") {
  SUBCASE("euclidean has full rank everywhere") {
    const auto rep = lic_report(make_family("euclidean:2"), Box::cube(2, -5, 5), 500);
    CHECK(rep.deficient_fraction == 0.0);
    CHECK(rep.witnesses.empty());
    CHECK(rep.n_samples == 500);
  }
  SUBCASE("grushin off the degenerate line") {
    const auto rep = lic_report(make_family("grushin"), Box::cube(2, -1, 1), 2000);
    CHECK(rep.deficient_fraction == 0.0);
  }
  SUBCASE("grushin on the degenerate line") {
    std::vector<Point> pts;
    for (int i = 0; i < 25; ++i) pts.push_back(pt({0.0, -1.0 + 0.08 * i}));
    const auto rep = lic_report_at(make_family("grushin"), pts);
    CHECK(rep.deficient_fraction == 1.0);
    CHECK(rep.witnesses.size() == 10);
    for (const auto& w : rep.witnesses) CHECK(w[0] == 0.0);
  }
  SUBCASE("rank deficiency exactly at x = 0") {
    const auto f = make_family("grushin");
    CHECK(coefficient_rank(f, pt({0.0, 0.3})) == 1);
    CHECK(coefficient_rank(f, pt({1e-12, 0.3})) == 2);
    CHECK(coefficient_rank(f, pt({-0.2, 0.3})) == 2);
  }
  SUBCASE("heisenberg has full rank") {
    const auto rep = lic_report(make_family("heisenberg"), Box::cube(3, -1, 1), 500);
    CHECK(rep.deficient_fraction == 0.0);
  }
}

TEST_CASE("lipschitz estimates") {
  CHECK(lipschitz_estimate(make_family("grushin"), Box::cube(2, -1, 1), 5000) <= 1.0 + 1e-9);
  CHECK(lipschitz_estimate(make_family("euclidean:2"), Box::unit(2), 100) == 0.0);
  const double lh = lipschitz_estimate(make_family("heisenberg"), Box::cube(3, -1, 1), 5000);
  CHECK(lh <= 0.5 + 1e-9);
  CHECK(lh > 0.45);
}

TEST_CASE("lic sampling is seeded") {
  const auto f = make_family("grushin");
  const auto a = lic_report(f, Box::cube(2, -1, 1), 100, 3);
  const auto b = lic_report(f, Box::cube(2, -1, 1), 100, 3);
  CHECK(a.deficient_fraction == b.deficient_fraction);
}

}
