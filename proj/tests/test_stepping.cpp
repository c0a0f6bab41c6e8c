#include <doctest.h>

#include <cmath>
#include <random>

#include "chdbc/initdata.hpp"
#include "chdbc/stepping.hpp"
#include "oracles.hpp"

using namespace chdbc;
using doctest::Approx;

namespace {

// Stacked residual rebuilt from dense element matrices and graph formulas.
Eigen::VectorXd dense_residual(const SolverConfig& c, const SimState& next, const SimState& prev,
                               const CoupledField& f) {
  const StripMesh m = c.mesh.build();
  const auto n = static_cast<Eigen::Index>(m.bulk_size());
  const Eigen::MatrixXd kb = oracle::p1_stiffness(m);
  const Eigen::MatrixXd ks = oracle::p1_surface_stiffness(m);
  const auto wb = oracle::lumped_bulk_mass(m);
  Eigen::VectorXd mass(n);
  for (Eigen::Index i = 0; i < n; ++i) mass[i] = wb[static_cast<std::size_t>(i)];
  for (std::size_t k = 0; k < m.boundary_size(); ++k) mass[static_cast<Eigen::Index>(m.boundary_to_bulk(k))] += m.hx();

  Eigen::VectorXd u(n), mu(n), uo(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto q = static_cast<std::size_t>(i);
    u[i] = next.u.bulk[q];
    mu[i] = next.mu.bulk[q];
    uo[i] = prev.u.bulk[q];
  }
  const CoupledField& us = c.scheme == Scheme::fully_implicit ? next.u : prev.u;
  auto beta = [&](const MonotoneGraph& g, double r) {
    return c.lambda > 0 ? oracle::yosida(g, c.lambda, r) : min_section(g, r);
  };

  Eigen::VectorXd r(2 * n);
  r.head(n) = mass.cwiseProduct(u - uo) / c.dt + (kb + ks) * mu;
  Eigen::VectorXd r2 = mass.cwiseProduct(mu) - kb * u - c.delta * (ks * u);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto q = static_cast<std::size_t>(i);
    r2[i] -= wb[q] * (beta(c.pair.bulk_graph, u[i]) + c.pair.pi_bulk.value(us.bulk[q]) - f.bulk[q]);
  }
  for (std::size_t k = 0; k < m.boundary_size(); ++k) {
    const auto p = static_cast<Eigen::Index>(m.boundary_to_bulk(k));
    r2[p] -= m.hx() * (beta(c.pair.boundary_graph, u[p]) + c.pair.pi_boundary.value(us.boundary[k]) -
                       f.boundary[k]);
  }
  r.tail(n) = r2;
  return r;
}

SolverConfig small_config(PotentialPair pair, double delta, double lambda = 0.0) {
  SolverConfig c;
  c.mesh = {16, 17, 1.0, 1.0};
  c.pair = pair;
  c.delta = delta;
  c.lambda = lambda;
  c.dt = 1e-3;
  c.T = 0.05;
  return c;
}

CoupledField stripe(const StripMesh& m, const PotentialPair& p, double amplitude = 0.8) {
  return generate(m, {ProfileKind::tanh_stripe, 0.0, amplitude, 0.2}, p);
}

}  // namespace

TEST_CASE("residual matches a dense assembly oracle on a 6x5 mesh") {
  struct Case {
    PotentialPair pair;
    double delta, lambda;
    Scheme scheme;
  };
  PotentialPair mixed = PotentialPair::regular();
  mixed.boundary_graph = MonotoneGraph::logarithmic(2.0);
  mixed.pi_boundary.slope = -4.0;
  const Case cases[] = {
      {PotentialPair::regular(), 0.3, 0.0, Scheme::fully_implicit},
      {PotentialPair::regular(), 0.0, 0.0, Scheme::convex_splitting},
      {mixed, 0.2, 0.0, Scheme::convex_splitting},
      {PotentialPair::logarithmic(), 0.1, 0.0, Scheme::fully_implicit},
      {PotentialPair::obstacle(), 0.05, 0.01, Scheme::convex_splitting},
  };
  std::mt19937_64 rng(21);
  for (const auto& cs : cases) {
    SolverConfig c;
    c.mesh = {6, 5, 1.2, 0.9};
    c.pair = cs.pair;
    c.delta = cs.delta;
    c.lambda = cs.lambda;
    c.scheme = cs.scheme;
    c.dt = 0.01;
    c.T = 0.1;
    const StripMesh m = c.mesh.build();
    CoupledField f = CoupledField::zeros(m);
    std::uniform_real_distribution<double> ud(-1, 1);
    for (auto& v : f.bulk) v = ud(rng);
    for (auto& v : f.boundary) v = ud(rng);
    c.f.g.push_back({f, 0.0});

    SimState prev, next;
    prev.u = oracle::random_field(m, rng, -0.9, 0.9);
    prev.mu = oracle::random_field(m, rng);
    next.u = oracle::random_field(m, rng, -0.9, 0.9);
    next.mu = oracle::random_field(m, rng);
    next.t = c.dt;
    const Vector got = residual(next, prev, c);
    const Eigen::VectorXd want = dense_residual(c, next, prev, f);
    CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, want.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("constant stationary state has zero residual and is a fixed point") {
  for (auto scheme : {Scheme::convex_splitting, Scheme::fully_implicit}) {
    SolverConfig c = small_config(PotentialPair::regular(), 0.1);
    c.scheme = scheme;
    Stepper s(c);
    const SimState st = s.initial_state(CoupledField::constant(s.mesh(), 0.3));
    SimState guess = st;
    guess.t += c.dt;
    CHECK(s.residual(guess, st).cwiseAbs().maxCoeff() < 1e-13);
    const SimState next = s.step(st);
    for (std::size_t i = 0; i < next.u.bulk.size(); ++i) CHECK(next.u.bulk[i] == Approx(0.3).epsilon(1e-12));
  }
}

TEST_CASE("a step conserves the mean from a random start") {
  SolverConfig c = small_config(PotentialPair::regular(), 0.1);
  const StripMesh m = c.mesh.build();
  const CoupledField u0 = generate(m, {ProfileKind::random_smooth, 0.1, 0.6, 0.1, 42}, c.pair);
  Stepper s(c);
  const SimState st = s.initial_state(u0);
  const SimState next = s.step(st);
  CHECK(std::abs(mean(m, next.u) - mean(m, u0)) <= 1e-11);
  CHECK(next.residual <= c.newton_tol);
}

TEST_CASE("convex splitting dissipates energy over 50 steps") {
  for (const auto& pair : {PotentialPair::regular(), PotentialPair::logarithmic()}) {
    SolverConfig c = small_config(pair, 0.1);
    const StripMesh m = c.mesh.build();
    const Trajectory tr = run(c, stripe(m, pair), {});
    REQUIRE(tr.diagnostics.size() == 51);
    for (std::size_t n = 1; n < tr.diagnostics.size(); ++n) {
      CHECK(tr.diagnostics[n].energy <= tr.diagnostics[n - 1].energy + 10 * c.newton_tol);
    }
  }
}

TEST_CASE("T = dt reproduces a single step") {
  SolverConfig c = small_config(PotentialPair::regular(), 0.1);
  c.T = c.dt;
  const StripMesh m = c.mesh.build();
  const CoupledField u0 = stripe(m, c.pair);
  const Trajectory tr = run(c, u0);
  REQUIRE(tr.states.size() == 2);
  Stepper s(c);
  const SimState one = s.step(s.initial_state(u0));
  CHECK(tr.states[1].u == one.u);
  CHECK(tr.states[1].mu == one.mu);
}

TEST_CASE("constant data give a constant trajectory") {
  SolverConfig c = small_config(PotentialPair::regular(), 0.1);
  c.T = 0.01;
  const StripMesh m = c.mesh.build();
  const Trajectory tr = run(c, CoupledField::constant(m, -0.4));
  for (const auto& st : tr.states)
    for (double v : st.u.bulk) CHECK(v == Approx(-0.4).epsilon(1e-12));
  for (const auto& d : tr.diagnostics) CHECK(d.mass == Approx(-0.4).epsilon(1e-13));
}

TEST_CASE("diagnostics stay bounded uniformly as delta decreases") {
  std::vector<double> sup_v, int_mu;
  for (double delta : {1e-1, 1e-2, 1e-3}) {
    SolverConfig c = small_config(PotentialPair::regular(), delta);
    const StripMesh m = c.mesh.build();
    const Trajectory tr = run(c, stripe(m, c.pair));
    double sv = 0.0, im = 0.0;
    for (const auto& d : tr.diagnostics) sv = std::max(sv, d.u_V);
    for (std::size_t n = 1; n < tr.diagnostics.size(); ++n) im += c.dt * tr.diagnostics[n].grad_mu * tr.diagnostics[n].grad_mu;
    sup_v.push_back(sv);
    int_mu.push_back(im);
  }
  for (std::size_t k = 1; k < 3; ++k) {
    CHECK(sup_v[k] <= 1.5 * sup_v[0]);
    CHECK(int_mu[k] <= 1.5 * int_mu[0]);
  }
}

TEST_CASE("delta = 0 recovers the pointwise boundary law") {
  SolverConfig c = small_config(PotentialPair::regular(), 0.0);
  const StripMesh m = c.mesh.build();
  const Trajectory tr = run(c, stripe(m, c.pair));
  for (const auto& d : tr.diagnostics) CHECK(d.boundary_relation <= 10 * c.newton_tol);
  for (const auto& st : tr.states) CHECK(st.mu.trace_compatible(m));
}

TEST_CASE("boundary law also holds for delta > 0 with the surface diffusion term") {
  SolverConfig c = small_config(PotentialPair::regular(), 0.2);
  c.T = 0.01;
  const StripMesh m = c.mesh.build();
  const Trajectory tr = run(c, stripe(m, c.pair));
  for (const auto& d : tr.diagnostics) CHECK(d.boundary_relation <= 10 * c.newton_tol);
}

TEST_CASE("obstacle penalization overshoot is bounded and shrinks with lambda") {
  // a strong concave part makes the obstacle active on the unit strip
  const PotentialPair pair = PotentialPair::obstacle(30.0);
  std::vector<double> overshoot;
  for (double lam : {4e-3, 2e-3, 1e-3}) {
    SolverConfig c = small_config(pair, 0.1, lam);
    c.dt = 1e-4;
    c.T = 0.01;
    const StripMesh m = c.mesh.build();
    const Trajectory tr = run(c, generate(m, {ProfileKind::tanh_stripe, 0.0, 0.9, 0.2}, pair));
    double over = 0.0, cmax = 0.0;
    for (const auto& st : tr.states) {
      for (double v : st.u.bulk) over = std::max(over, std::abs(v) - 1.0);
      for (double v : st.xi.bulk) cmax = std::max(cmax, std::abs(v));
      for (double v : st.xi.boundary) cmax = std::max(cmax, std::abs(v));
    }
    CHECK(over <= cmax * lam * (1 + 1e-9) + 1e-14);
    overshoot.push_back(std::max(over, 0.0));
  }
  CHECK(overshoot[0] > 0);
  CHECK(overshoot[1] <= overshoot[0]);
  CHECK(overshoot[2] <= overshoot[1]);
}

TEST_CASE("Jacobian reuse does not change the converged states") {
  SolverConfig c = small_config(PotentialPair::regular(), 0.1);
  c.T = 0.01;
  c.newton_tol = 1e-11;
  const StripMesh m = c.mesh.build();
  const CoupledField u0 = stripe(m, c.pair);
  const Trajectory a = run(c, u0);
  c.reuse_jacobian = false;
  const Trajectory b = run(c, u0);
  double diff = 0.0;
  for (std::size_t n = 0; n < a.states.size(); ++n)
    for (std::size_t i = 0; i < a.states[n].u.bulk.size(); ++i)
      diff = std::max(diff, std::abs(a.states[n].u.bulk[i] - b.states[n].u.bulk[i]));
  CHECK(diff < 1e-9);
}

TEST_CASE("Newton failure reports iterations and the last residual") {
  SolverConfig c = small_config(PotentialPair::regular(), 0.1);
  c.newton_max_iter = 1;
  c.newton_tol = 1e-300;
  const StripMesh m = c.mesh.build();
  Stepper s(c);
  try {
    s.step(s.initial_state(stripe(m, c.pair)));
    FAIL("expected NewtonDivergence");
  } catch (const NewtonDivergence& e) {
    CHECK(e.iterations == 1);
    CHECK(e.last_residual > 0);
  }
}

TEST_CASE("solver configuration validation") {
  SolverConfig c = small_config(PotentialPair::obstacle(), 0.1, 0.0);
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.lambda = 1e-3;
  CHECK_NOTHROW(c.validate());
  c.dt = 2 * c.T;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  SolverConfig d = small_config(PotentialPair::regular(), -0.1);
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
  CHECK(scheme_from_string(to_string(Scheme::fully_implicit)) == Scheme::fully_implicit);
  CHECK_THROWS(scheme_from_string("explicit"));
}

TEST_CASE("time-dependent sources are evaluated at the new time level") {
  SolverConfig c = small_config(PotentialPair::regular(), 0.1);
  const StripMesh m = c.mesh.build();
  c.f.h.push_back({CoupledField::constant(m, 1.0), 2.0});
  CHECK_FALSE(c.f.autonomous());
  const CoupledField f = c.f.evaluate(m, 0.125);
  CHECK(f.bulk[0] == Approx(std::cos(2 * M_PI * 2.0 * 0.125)));
  const Trajectory tr = run(c, stripe(m, c.pair));
  // a mean-carrying source does not change the mean of u
  for (const auto& d : tr.diagnostics) CHECK(d.mass == Approx(tr.diagnostics[0].mass).epsilon(1e-12).scale(1.0));
}
