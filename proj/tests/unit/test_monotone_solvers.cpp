#include <doctest.h>

#include <cmath>
#include <numbers>

#include "gconv/solvers.hpp"

using namespace gconv;
using std::numbers::pi;

namespace {

const auto kLine = make_family("euclidean:1");

DiscreteFunction constant(const Grid& g, double c) {
  return DiscreteFunction::sample(g, [c](const Point&) { return c; }, true);
}

double l2(const DiscreteFunction& u) { return lp_norm(u, 2.0); }

}  // namespace

TEST_SUITE("monotone_solvers") {

TEST_CASE("operator on the first sine mode") {
  const Grid g(Box::unit(1), 257);
  const auto s = DiscreteFunction::sample(g, [](const Point& x) { return std::sin(pi * x[0]); }, true);
  const auto au = apply_operator(kLine, make_p_laplacian(2.0, constant_weight(1.0)), s);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    if (!g.is_boundary(i)) worst = std::max(worst, std::abs(au[i] - pi * pi * s[i]));
  }
  CHECK(worst <= 1e-3 * pi * pi);
  CHECK(apply_operator(kLine, make_p_laplacian(3.0, constant_weight(1.0)), DiscreteFunction::zeros(g)).values().norm() == 0.0);
}

TEST_CASE("operator is linear for linear maps") {
  const Grid g(Box::cube(2, -1, 1), 9);
  const auto fam = make_family("grushin");
  const auto a = make_p_laplacian(2.0, sine_weight(2.0, 1.0));
  const auto u = DiscreteFunction::sample(g, [](const Point& x) { return x[0] * x[1]; }, true);
  const auto v = DiscreteFunction::sample(g, [](const Point& x) { return std::cos(x[0]); }, true);
  const auto lhs = apply_operator(fam, a, u + v * 3.0);
  const auto rhs = apply_operator(fam, a, u) + apply_operator(fam, a, v) * 3.0;
  CHECK((lhs - rhs).values().cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + rhs.values().cwiseAbs().maxCoeff()));
}

TEST_CASE("Poisson on the unit interval") {
  const Grid g(Box::unit(1), 257);
  const auto [u, rep] = solve_elliptic({kLine, make_p_laplacian(2.0, constant_weight(1.0)), constant(g, 1.0), g});
  CHECK(rep.converged);
  CHECK(rep.residual_dual <= rep.tol);
  CHECK(u.values().maxCoeff() == doctest::Approx(0.125).epsilon(1e-3 / 0.125));
  CHECK(rep.apriori_ok);
  CHECK(rep.norm <= 1.05 * rep.bound);
}

TEST_CASE("zero datum gives the zero solution") {
  for (double p : {2.0, 3.0}) {
    const Grid g(Box::unit(2), 17);
    const auto [u, rep] = solve_elliptic({make_family("grushin"), make_p_laplacian(p, constant_weight(1.0)),
                                          DiscreteFunction::zeros(g), g});
    CHECK(rep.converged);
    CHECK(u.values().cwiseAbs().maxCoeff() <= rep.tol);
  }
}

TEST_CASE("grushin solution is symmetric under x -> -x") {
  const Grid g(Box::cube(2, -1, 1), 33);
  const auto [u, rep] = solve_elliptic({make_family("grushin"), make_p_laplacian(2.0, constant_weight(1.0)), constant(g, 1.0), g});
  CHECK(rep.converged);
  CHECK(rep.residual_dual <= rep.tol);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    auto idx = g.node_multi(i);
    idx[0] = g.nodes(0) - 1 - idx[0];
    worst = std::max(worst, std::abs(u[i] - u[g.node_index(idx)]));
  }
  CHECK(worst <= 1e-6 * u.values().cwiseAbs().maxCoeff());
}

TEST_CASE("certified residual is nonincreasing") {
  const Grid g(Box::unit(1), 129);
  const auto a = make_oscillating(make_p_laplacian(3.0, two_phase_weight(1.0, 4.0)), 4);
  const auto [u, rep] = solve_elliptic({kLine, a, constant(g, 1.0), g});
  CHECK(rep.converged);
  REQUIRE(rep.descent_history.size() >= 2);
  for (std::size_t k = 1; k < rep.descent_history.size(); ++k) {
    CHECK(rep.descent_history[k] <= rep.descent_history[k - 1]);
  }
  CHECK(rep.certified_history.back() <= rep.tol);
}

TEST_CASE("different initial iterates reach the same solution") {
  const Grid g(Box::unit(2), 17);
  const auto fam = make_family("euclidean:2");
  const auto a = make_p_laplacian(3.0, sine_weight(2.0, 1.0));
  const MonotoneSolver solver(fam, g);
  const auto datum = constant(g, 2.0);
  const auto [u0, r0] = solver.solve_elliptic(a, datum);
  const auto start = DiscreteFunction::sample(g, [](const Point& x) { return 5.0 * x[0] * x[1]; }, true);
  const auto [u1, r1] = solver.solve_elliptic(a, datum, start);
  CHECK(r0.converged);
  CHECK(r1.converged);
  CHECK(v_norm(solver.x_gradient(), u0 - u1, 3.0) <= 10.0 * r0.tol);
}

TEST_CASE("a-priori bound on random data") {
  const Grid g(Box::unit(1), 65);
  const MonotoneSolver solver(kLine, g, {.check_structure = false});
  const auto a = make_p_laplacian(2.0, sine_weight(2.0, 1.0));
  Rng rng(17);
  std::normal_distribution<double> nd;
  int ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd v(g.node_count());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = nd(rng);
    const auto datum = DiscreteFunction(g, v, false).pinned();
    const auto [u, rep] = solver.solve_elliptic(a, datum);
    // alpha = w_min = 1 at p = 2
    const double bound = solver.dual_bound(datum, 2.0);
    if (rep.converged && v_norm(solver.x_gradient(), u, 2.0) <= 1.05 * bound) ++ok;
    CHECK(rep.apriori_ok);
  }
  CHECK(ok == 100);
}

TEST_CASE("structure check runs before solving") {
  const Grid g(Box::unit(1), 17);
  const auto bad = make_shifted(make_p_laplacian(2.0, constant_weight(1.0)), 1.0);
  CHECK_THROWS_AS(solve_elliptic({kLine, bad, constant(g, 1.0), g}), ContractViolation);
}

TEST_CASE("wrong grid is rejected") {
  const Grid g(Box::unit(1), 17);
  const MonotoneSolver solver(kLine, g);
  CHECK_THROWS_AS(solver.solve_elliptic(make_p_laplacian(2.0, constant_weight(1.0)), constant(Grid(Box::unit(1), 33), 1.0)),
                  ContractViolation);
}

TEST_CASE("iteration cap raises NonConvergence") {
  const Grid g(Box::unit(1), 65);
  const auto a = make_oscillating(make_p_laplacian(4.0, two_phase_weight(1.0, 4.0)), 8);
  SolverOptions o;
  o.max_iter = 2;
  o.tol = 1e-12;
  try {
    solve_elliptic({kLine, a, constant(g, 1.0), g}, o);
    FAIL("expected NonConvergence");
  } catch (const NonConvergence& e) {
    CHECK(e.iterations() == 2);
    CHECK(e.best_residual() > 0.0);
  }
}

TEST_CASE("heat equation decays like the first mode") {
  const Grid g(Box::unit(1), 257);
  const auto phi = DiscreteFunction::sample(g, [](const Point& x) { return std::sin(pi * x[0]); }, true);
  const auto [traj, rep] = solve_parabolic({kLine, make_p_laplacian(2.0, constant_weight(1.0)),
                                            {DiscreteFunction::zeros(g)}, phi, g, 0.1, 200});
  CHECK(rep.converged);
  CHECK(traj.size() == 201);
  CHECK(traj.times.back() == doctest::Approx(0.1));
  CHECK(traj.states.front().values() == phi.values());
  const auto exact = phi * std::exp(-pi * pi * 0.1);
  CHECK(l2(traj.final_state() - exact) <= 0.02 * l2(exact));
}

TEST_CASE("stationary data give a constant trajectory") {
  const Grid g(Box::unit(1), 129);
  const auto a = make_oscillating(make_p_laplacian(2.0, sine_weight(2.0, 1.0)), 4);
  const MonotoneSolver solver(kLine, g);
  const auto datum = constant(g, 1.0);
  const auto [u, er] = solver.solve_elliptic(a, datum);
  const auto [traj, rep] = solver.solve_parabolic(a, {datum}, u, 0.1, 10);
  CHECK(rep.converged);
  for (std::size_t k = 1; k < traj.size(); ++k) {
    CHECK(l2(traj.states[k] - traj.states[k - 1]) <= rep.tol);
  }
}

TEST_CASE("zero data give the zero trajectory") {
  const Grid g(Box::unit(2), 9);
  const auto [traj, rep] = solve_parabolic({make_family("grushin"), make_p_laplacian(3.0, constant_weight(1.0)),
                                            {DiscreteFunction::zeros(g)}, DiscreteFunction::zeros(g), g, 0.5, 5});
  for (const auto& s : traj.states) CHECK(s.values().cwiseAbs().maxCoeff() == 0.0);
  CHECK(rep.apriori_ok);
}

TEST_CASE("energy stays bounded") {
  const Grid g(Box::unit(1), 65);
  const auto phi = DiscreteFunction::sample(g, [](const Point& x) { return x[0] * (1 - x[0]); }, true);
  const auto [traj, rep] = solve_parabolic({kLine, make_oscillating(make_p_laplacian(3.0, two_phase_weight(1.0, 4.0)), 4),
                                            {constant(g, 3.0)}, phi, g, 1.0, 20});
  CHECK(rep.apriori_ok);
  CHECK(rep.norm <= rep.bound * 1.05);
  CHECK(rep.norm >= l2(phi) * (1 - 1e-12));
}

TEST_CASE("implicit steps converge for every tested time step") {
  const Grid g(Box::unit(1), 65);
  const auto a = make_oscillating(make_p_laplacian(3.0, sine_weight(2.0, 1.0)), 4);
  const auto phi = DiscreteFunction::sample(g, [](const Point& x) { return std::sin(pi * x[0]); }, true);
  for (int K : {1, 4, 64, 1024}) {
    const auto [traj, rep] = solve_parabolic({kLine, a, {constant(g, 1.0)}, phi, g, 1.0, K});
    CAPTURE(K);
    CHECK(rep.converged);
    CHECK(rep.residual_bound <= rep.tol);
  }
}

TEST_CASE("time-dependent sources follow the time grid") {
  const Grid g(Box::unit(1), 33);
  const MonotoneSolver solver(kLine, g);
  const auto a = make_p_laplacian(2.0, constant_weight(1.0));
  std::vector<DiscreteFunction> f;
  for (int k = 0; k <= 4; ++k) f.push_back(constant(g, k));
  const auto [traj, rep] = solver.solve_parabolic(a, f, DiscreteFunction::zeros(g), 1.0, 4);
  CHECK(traj.size() == 5);
  CHECK_THROWS_AS(solver.solve_parabolic(a, {f[0], f[1]}, DiscreteFunction::zeros(g), 1.0, 4), ContractViolation);
  CHECK_THROWS_AS(solver.solve_parabolic(a, {f[0]}, DiscreteFunction::zeros(g), 1.0, 0), ContractViolation);
}

}
