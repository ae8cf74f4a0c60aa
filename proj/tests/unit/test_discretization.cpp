#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>

#include "gconv/discretization.hpp"
#include "gconv/field_io.hpp"

using namespace gconv;
using std::numbers::pi;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "gconv_unit" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE("discretization") {

TEST_CASE("grid layout") {
  const Grid g(Box({{0.0, 2.0}, {-1.0, 1.0}}), std::vector<int>{5, 3});
  CHECK(g.node_count() == 15);
  CHECK(g.cell_count() == 8);
  CHECK(g.spacing(0) == doctest::Approx(0.5));
  CHECK(g.spacing(1) == doctest::Approx(1.0));
  CHECK(g.corners() == 4);
  const auto idx = g.node_multi(7);
  CHECK(idx[0] == 2);
  CHECK(idx[1] == 1);
  CHECK(g.node_index(idx) == 7);
  CHECK(g.node_point(7)[0] == doctest::Approx(1.0));
  CHECK(g.node_point(7)[1] == doctest::Approx(0.0));
  CHECK(g.is_boundary(0));
  CHECK_FALSE(g.is_boundary(7));
  CHECK(g.cell_volume() == doctest::Approx(0.5));
  CHECK_THROWS_AS(Grid(Box::unit(1), 2), ConfigError);
}

TEST_CASE("zero boundary functions") {
  const Grid g(Box::unit(2), 9);
  const auto u = DiscreteFunction::sample(g, [](const Point&) { return 3.0; }, true);
  for (std::size_t i = 0; i < g.node_count(); ++i) CHECK(u[i] == (g.is_boundary(i) ? 0.0 : 3.0));
  const auto v = DiscreteFunction::sample(g, [](const Point&) { return 3.0; }, false);
  CHECK(v.pinned().values() == u.values());
  CHECK(((u + u) - u * 2.0).values().norm() == 0.0);
}

TEST_CASE("gradient of affine functions is exact") {
  SUBCASE("1d") {
    const Grid g(Box::unit(1), 17);
    const auto u = DiscreteFunction::sample(g, [](const Point& x) { return x[0]; }, false);
    const auto flux = discrete_x_gradient(make_family("euclidean:1"), u);
    for (std::size_t c = 0; c < g.cell_count(); ++c) CHECK(flux.cell_mean(c)[0] == doctest::Approx(1.0).epsilon(1e-12));
    for (Eigen::Index q = 0; q < flux.values().cols(); ++q) CHECK(flux.values()(0, q) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("3d") {
    const Grid g(Box::cube(3, -1, 2), 6);
    const auto u = DiscreteFunction::sample(
        g, [](const Point& x) { return 2.0 * x[0] - x[1] + 0.5 * x[2] + 7.0; }, false);
    const auto flux = discrete_x_gradient(make_family("euclidean:3"), u);
    Eigen::Vector3d expected(2.0, -1.0, 0.5);
    for (Eigen::Index q = 0; q < flux.values().cols(); ++q) {
      CHECK((flux.values().col(q) - expected).norm() <= 1e-12);
    }
  }
}

TEST_CASE("grushin gradient of y") {
  const Grid g(Box::unit(2), 4);
  const auto u = DiscreteFunction::sample(g, [](const Point& x) { return x[1]; }, false);
  const auto flux = discrete_x_gradient(make_family("grushin"), u);
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    const Vec m = flux.cell_mean(c);
    CHECK(m[0] == doctest::Approx(0.0));
    CHECK(m[1] == doctest::Approx(g.cell_center(c)[0]));
  }
  // middle column of cells is centred at x = 0.5
  const std::size_t mid = 1;
  CHECK(g.cell_center(mid)[0] == doctest::Approx(0.5));
  CHECK(flux.cell_mean(mid)[0] == doctest::Approx(0.0));
  CHECK(flux.cell_mean(mid)[1] == doctest::Approx(0.5));
}

TEST_CASE("zero function has zero flux") {
  for (const char* name : {"euclidean:2", "grushin"}) {
    const Grid g(Box::cube(2, -1, 1), 9);
    CHECK(discrete_x_gradient(make_family(name), DiscreteFunction::zeros(g)).values().norm() == 0.0);
  }
}

TEST_CASE("x-gradient is linear") {
  const Grid g(Box::cube(2, -1, 1), 11);
  const auto f = make_family("grushin");
  Rng rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::VectorXd a(g.node_count()), b(g.node_count());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a[i] = u(rng);
    b[i] = u(rng);
  }
  const DiscreteFunction fa(g, a, false), fb(g, b, false);
  const auto lhs = discrete_x_gradient(f, fa + fb * 2.5).values();
  const auto rhs = discrete_x_gradient(f, fa).values() + 2.5 * discrete_x_gradient(f, fb).values();
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("weak divergence is the transpose of the gradient") {
  const Grid g(Box::cube(2, -1, 1), 9);
  const XGradient xg(make_family("grushin"), g);
  Rng rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::VectorXd flat(static_cast<Eigen::Index>(xg.point_count()) * xg.m());
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] = u(rng);
  Eigen::VectorXd v(g.node_count());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = u(rng);
  const DiscreteFunction fv = DiscreteFunction(g, v, false).pinned();
  const double lhs = xg.point_weight() * flat.dot(xg.apply_nodal(fv.values()));
  const Eigen::VectorXd div = xg.weak_divergence_interior(flat);
  const double rhs = g.nodal_volume() * div.dot(xg.restrict_to_interior(fv.values()));
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("lp norms") {
  SUBCASE("unit mass") {
    const Grid g(Box::unit(2), 9);
    const auto one = DiscreteFunction::sample(g, [](const Point&) { return 1.0; }, false);
    CHECK(lp_norm(one, 2.0) == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("constant on a box") {
    const Grid g(Box({{0.0, 2.0}, {0.0, 3.0}}), 5);
    const auto c = DiscreteFunction::sample(g, [](const Point&) { return -1.5; }, false);
    for (double p : {2.0, 3.0, 5.0}) CHECK(lp_norm(c, p) == doctest::Approx(1.5 * std::pow(6.0, 1.0 / p)));
  }
  SUBCASE("x on the unit interval") {
    double prev = 1.0;
    for (int n : {17, 33, 65, 129}) {
      const Grid g(Box::unit(1), n);
      const auto u = DiscreteFunction::sample(g, [](const Point& x) { return x[0]; }, false);
      const double err = std::abs(lp_norm(u, 2.0) - 1.0 / std::sqrt(3.0));
      CHECK(err <= 2.0 * g.spacing(0));
      CHECK(err < prev);
      prev = err;
    }
  }
  SUBCASE("triangle inequality and homogeneity") {
    const Grid g(Box::unit(2), 12);
    Rng rng(21);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::VectorXd a(g.node_count()), b(g.node_count());
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        a[i] = nd(rng);
        b[i] = nd(rng);
      }
      const DiscreteFunction fa(g, a, false), fb(g, b, false);
      for (double p : {1.0, 2.0, 3.5}) {
        CHECK(lp_norm(fa + fb, p) <= lp_norm(fa, p) + lp_norm(fb, p) + 1e-12);
        CHECK(lp_norm(fa * -3.0, p) == doctest::Approx(3.0 * lp_norm(fa, p)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("gradient error decreases at first order") {
  const auto f = make_family("euclidean:2");
  std::vector<double> errs;
  const std::vector<int> ns{9, 17, 33, 65};
  for (int n : ns) {
    const Grid g(Box::unit(2), n);
    const auto u = DiscreteFunction::sample(
        g, [](const Point& x) { return std::sin(pi * x[0]) * std::cos(2.0 * x[1]) + x[0] * x[0] * x[1]; }, false);
    const XGradient xg(f, g);
    const auto flux = xg.apply(u);
    double acc = 0.0;
    for (std::size_t qp = 0; qp < xg.point_count(); ++qp) {
      const Point c = xg.cell_center(xg.point_cell(qp));
      const double gx = pi * std::cos(pi * c[0]) * std::cos(2.0 * c[1]) + 2.0 * c[0] * c[1];
      const double gy = -2.0 * std::sin(pi * c[0]) * std::sin(2.0 * c[1]) + c[0] * c[0];
      const double e = std::hypot(flux.values()(0, static_cast<Eigen::Index>(qp)) - gx,
                                  flux.values()(1, static_cast<Eigen::Index>(qp)) - gy);
      acc += e * e * xg.point_weight();
    }
    errs.push_back(std::sqrt(acc));
  }
  for (std::size_t k = 1; k < errs.size(); ++k) {
    const double slope = std::log2(errs[k - 1] / errs[k]);
    CAPTURE(k);
    CHECK(slope >= 0.9);
  }
}

TEST_CASE("dual norm of the constant density") {
  const Grid g(Box::unit(1), 257);
  const auto one = DiscreteFunction::sample(g, [](const Point&) { return 1.0; }, true);
  const auto fam = make_family("euclidean:1");
  CHECK(dual_norm_estimate(one, fam, 2.0) == doctest::Approx(std::sqrt(1.0 / 12.0)).epsilon(1e-3));
  CHECK(dual_norm_estimate(DiscreteFunction::zeros(g), fam, 2.0) == 0.0);
  CHECK(dual_norm_estimate(one * -3.0, fam, 2.0) == doctest::Approx(3.0 * dual_norm_estimate(one, fam, 2.0)).epsilon(1e-12));
}

TEST_CASE("riesz solve reproduces the Poisson profile") {
  const Grid g(Box::unit(1), 129);
  auto xg = std::make_shared<const XGradient>(make_family("euclidean:1"), g);
  const RieszMap riesz(xg);
  const auto w = riesz.solve(DiscreteFunction::sample(g, [](const Point&) { return 1.0; }, true));
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const double x = g.node_point(i)[0];
    CHECK(w[i] == doctest::Approx(x * (1 - x) / 2).epsilon(1e-10));
  }
}

TEST_CASE("dual norm bounds for p > 2") {
  const Grid g(Box::unit(1), 129);
  auto xg = std::make_shared<const XGradient>(make_family("euclidean:1"), g);
  const DualNormEstimator est(xg, 3.0, 32);
  const auto s = DiscreteFunction::sample(g, [](const Point& x) { return std::sin(pi * x[0]); }, true);
  CHECK(est.estimate(s) > 0.0);
  CHECK(est.estimate(s) <= est.upper_bound(s) * (1 + 1e-12));
  CHECK(est.upper_bound_factor() == doctest::Approx(1.0));
  const Grid big(Box({{0.0, 2.0}}), 65);
  const DualNormEstimator est2(std::make_shared<const XGradient>(make_family("euclidean:1"), big), 4.0, 8);
  CHECK(est2.upper_bound_factor() == doctest::Approx(std::pow(2.0, 0.25)));
}

TEST_CASE("poincare ratio") {
  SUBCASE("first sine mode") {
    const Grid g(Box::unit(1), 257);
    const XGradient xg(make_family("euclidean:1"), g);
    const auto s = DiscreteFunction::sample(g, [](const Point& x) { return std::sin(pi * x[0]); }, true);
    CHECK(poincare_quotient(xg, s, 2.0) == doctest::Approx(1.0 / (pi * pi)).epsilon(1e-3));
  }
  SUBCASE("random trials stay below the eigenvalue bound") {
    const auto res = poincare_ratio(make_family("euclidean:1"), Grid(Box::unit(1), 257), 2.0, 50);
    CHECK(res.trials == 50);
    CHECK(res.ratio <= 1.0 / (pi * pi) + 1e-4);
    CHECK(res.ratio > 0.05);
  }
  SUBCASE("grushin gives a finite positive value") {
    const auto res = poincare_ratio(make_family("grushin"), Grid(Box::cube(2, -1, 1), 33), 2.0, 20);
    CHECK(std::isfinite(res.ratio));
    CHECK(res.ratio > 0.0);
  }
}

TEST_CASE("sine dictionary") {
  const Grid g(Box::unit(2), 17);
  const SineDictionary dict(g, 4);
  CHECK(dict.size() == 16);
  const auto psi = dict.function(5);
  CHECK(psi.zero_boundary());
  const auto pair = dict.nodal_pairings(psi);
  CHECK(std::abs(pair[5]) == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(std::abs(pair[0]) < 1e-12);
  const SineDictionary capped(Grid(Box::unit(1), 5), 16);
  CHECK(capped.size() == 3);
}

TEST_CASE("csv round trip") {
  const auto dir = scratch("csv");
  const Grid g(Box({{0.0, 1.0}, {-2.0, 2.0}}), std::vector<int>{5, 7});
  const auto u = DiscreteFunction::sample(g, [](const Point& x) { return std::exp(x[0]) * x[1] / 3.0; }, true);
  write_csv(u, dir / "u.csv");
  const auto back = read_csv(g, dir / "u.csv", true);
  CHECK(back.values() == u.values());
  std::ifstream in(dir / "u.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "x0,x1,value");
  CHECK_THROWS(read_csv(Grid(Box::unit(1), 9), dir / "u.csv", true));
}

TEST_CASE("binary round trip") {
  const auto dir = scratch("bin");
  const Grid g(Box::cube(3, 0, 1), 4);
  const auto u = DiscreteFunction::sample(g, [](const Point& x) { return x[0] - 2 * x[1] + x[2] / 7.0; }, false);
  write_binary(u, dir / "u");
  CHECK(std::filesystem::file_size(dir / "u.bin") == g.node_count() * 8);
  const auto back = read_binary(dir / "u");
  CHECK(back.grid() == g);
  CHECK(back.values() == u.values());
}

TEST_CASE("flux csv and trajectory") {
  const auto dir = scratch("traj");
  const Grid g(Box::unit(1), 9);
  const auto u = DiscreteFunction::sample(g, [](const Point& x) { return x[0] * x[0]; }, true);
  write_csv(discrete_x_gradient(make_family("euclidean:1"), u), dir / "flux.csv");
  std::ifstream in(dir / "flux.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "x0,m0");
  Trajectory traj{{0.0, 0.5, 1.0}, {u, u * 0.5, u * 0.25}};
  const auto files = write_trajectory(traj, dir / "t");
  CHECK(files.size() == 4);
  CHECK(std::filesystem::exists(dir / "t" / "manifest.json"));
}

}
