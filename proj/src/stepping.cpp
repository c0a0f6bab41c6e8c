#include "chdbc/stepping.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace chdbc {

namespace {

constexpr double kDomainFraction = 0.99;
constexpr double kLagContraction = 0.1;

// Largest step fraction keeping every value strictly inside a bounded open
// domain, backing off to a fixed fraction of the distance to the wall.
double interior_step(const Interval& d, const Vector& u, const Vector& du) {
  if (!d.bounded()) return 1.0;
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (du[i] > 0) alpha = std::min(alpha, kDomainFraction * (d.hi - u[i]) / du[i]);
    else if (du[i] < 0) alpha = std::min(alpha, kDomainFraction * (d.lo - u[i]) / du[i]);
  }
  return std::max(alpha, 0.0);
}

}  // namespace

std::string_view to_string(Scheme s) {
  return s == Scheme::fully_implicit ? "fully_implicit" : "convex_splitting";
}

Scheme scheme_from_string(std::string_view name) {
  if (name == "fully_implicit") return Scheme::fully_implicit;
  if (name == "convex_splitting") return Scheme::convex_splitting;
  throw std::invalid_argument("unknown scheme '" + std::string(name) + "'");
}

CoupledField Source::evaluate(const StripMesh& mesh, double t) const {
  CoupledField f = CoupledField::zeros(mesh);
  for (const auto* terms : {&g, &h}) {
    for (const auto& term : *terms) {
      require_sized(mesh, term.profile);
      const double s = term.frequency == 0.0 ? 1.0 : std::cos(2.0 * M_PI * term.frequency * t);
      CoupledField scaled = term.profile;
      scaled *= s;
      f += scaled;
    }
  }
  return f;
}

bool Source::autonomous() const {
  auto still = [](const std::vector<SourceTerm>& v) {
    return std::all_of(v.begin(), v.end(), [](const SourceTerm& s) { return s.frequency == 0.0; });
  };
  return still(g) && still(h);
}

void SolverConfig::validate() const {
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  if (!(T > 0) || dt > T * (1.0 + 1e-12)) throw std::invalid_argument("need 0 < dt <= T");
  if (!(delta >= 0) || !std::isfinite(delta)) throw std::invalid_argument("delta must be finite and >= 0");
  if (!(lambda >= 0)) throw std::invalid_argument("lambda must be >= 0");
  if (lambda == 0 && (!pair.bulk_graph.single_valued() || !pair.boundary_graph.single_valued())) {
    throw std::invalid_argument("lambda > 0 is required for multivalued graphs");
  }
  if (!(newton_tol > 0) || newton_max_iter < 1) {
    throw std::invalid_argument("newton_tol must be > 0 and newton_max_iter >= 1");
  }
}

int SolverConfig::steps() const { return static_cast<int>(std::lround(T / dt)); }

Stepper::Stepper(SolverConfig config)
    : config_(std::move(config)), mesh_(config_.mesh.build()) {
  config_.validate();
  op_ = std::make_unique<CoupledOperator>(mesh_);
  bulk_w_ = op_->bulk_mass();
  surf_w_ = op_->surface_mass();
}

CoupledField Stepper::xi_of(const CoupledField& u) const {
  CoupledField xi = CoupledField::zeros(mesh_);
  const auto& pr = config_.pair;
  try {
    for (std::size_t i = 0; i < u.bulk.size(); ++i) {
      xi.bulk[i] = regularized(pr.bulk_graph, config_.lambda, u.bulk[i]);
    }
    for (std::size_t k = 0; k < u.boundary.size(); ++k) {
      xi.boundary[k] = regularized(pr.boundary_graph, config_.lambda, u.boundary[k]);
    }
  } catch (const DomainError& e) {
    throw DomainEscape(std::string("state left the graph domain: ") + e.what());
  }
  return xi;
}

SimState Stepper::initial_state(const CoupledField& u0, double t) const {
  if (!u0.trace_compatible(mesh_)) {
    throw std::invalid_argument("initial field must be trace-compatible and sized for the mesh");
  }
  const auto& pr = config_.pair;
  const CoupledField f = config_.f.evaluate(mesh_, t);
  SimState s;
  s.t = t;
  s.u = u0;
  s.xi = xi_of(u0);
  const Vector u = to_vector(mesh_, u0);
  Vector rhs = op_->bulk_stiffness() * u + config_.delta * (op_->surface_stiffness() * u);
  for (std::size_t i = 0; i < u0.bulk.size(); ++i) {
    rhs[static_cast<Eigen::Index>(i)] +=
        bulk_w_[static_cast<Eigen::Index>(i)] * (s.xi.bulk[i] + pr.pi_bulk.value(u0.bulk[i]) - f.bulk[i]);
  }
  for (std::size_t k = 0; k < u0.boundary.size(); ++k) {
    const auto p = static_cast<Eigen::Index>(mesh_.boundary_to_bulk(k));
    rhs[p] += mesh_.boundary_weights()[k] *
              (s.xi.boundary[k] + pr.pi_boundary.value(u0.boundary[k]) - f.boundary[k]);
  }
  s.mu = from_vector(mesh_, rhs.cwiseQuotient(op_->mass()));
  return s;
}

Vector Stepper::residual(const SimState& next, const SimState& prev) const {
  const auto n = static_cast<Eigen::Index>(mesh_.bulk_size());
  const auto& pr = config_.pair;
  const double dt = config_.dt;
  const CoupledField f = config_.f.evaluate(mesh_, next.t);
  const Vector u = to_vector(mesh_, next.u);
  const Vector mu = to_vector(mesh_, next.mu);
  const Vector u_old = to_vector(mesh_, prev.u);
  const CoupledField& u_star = config_.scheme == Scheme::fully_implicit ? next.u : prev.u;

  Vector r(2 * n);
  r.head(n) = op_->mass().cwiseProduct(u - u_old) / dt + op_->laplacian() * mu;
  Vector r2 = op_->mass().cwiseProduct(mu) - op_->bulk_stiffness() * u -
              config_.delta * (op_->surface_stiffness() * u);
  try {
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      r2[i] -= bulk_w_[i] * (regularized(pr.bulk_graph, config_.lambda, u[i]) +
                             pr.pi_bulk.value(u_star.bulk[ui]) - f.bulk[ui]);
    }
    for (std::size_t k = 0; k < mesh_.boundary_size(); ++k) {
      const auto p = static_cast<Eigen::Index>(mesh_.boundary_to_bulk(k));
      r2[p] -= mesh_.boundary_weights()[k] *
               (regularized(pr.boundary_graph, config_.lambda, u[p]) +
                pr.pi_boundary.value(u_star.boundary[k]) - f.boundary[k]);
    }
  } catch (const DomainError& e) {
    throw DomainEscape(std::string("Newton iterate left the graph domain: ") + e.what());
  }
  r.tail(n) = r2;
  return r;
}

double Stepper::residual_metric(const Vector& r) const {
  const auto n = static_cast<Eigen::Index>(mesh_.bulk_size());
  const Vector& m = op_->mass();
  const double r1 = (r.head(n).cwiseAbs().cwiseQuotient(m)).maxCoeff() * config_.dt;
  const double r2 = (r.tail(n).cwiseAbs().cwiseQuotient(m)).maxCoeff();
  return std::max(r1, r2);
}

SparseMatrix Stepper::jacobian(const Vector& u) const {
  const auto n = static_cast<Eigen::Index>(mesh_.bulk_size());
  const auto& pr = config_.pair;
  const bool implicit_pi = config_.scheme == Scheme::fully_implicit;
  const Vector& m = op_->mass();

  Vector diag(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = bulk_w_[i] * (regularized_slope(pr.bulk_graph, config_.lambda, u[i]) +
                             (implicit_pi ? pr.pi_bulk.derivative(u[i]) : 0.0));
    if (surf_w_[i] > 0) {
      s += surf_w_[i] * (regularized_slope(pr.boundary_graph, config_.lambda, u[i]) +
                         (implicit_pi ? pr.pi_boundary.derivative(u[i]) : 0.0));
    }
    diag[i] = s;
  }

  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(16 * n));
  for (Eigen::Index i = 0; i < n; ++i) {
    t.emplace_back(i, i, m[i] / config_.dt);
    t.emplace_back(n + i, n + i, m[i]);
    // the surface block is added with coefficient delta even when it is zero so
    // the sparsity pattern never changes
    t.emplace_back(n + i, i, -diag[i]);
  }
  for (Eigen::Index col = 0; col < n; ++col) {
    for (SparseMatrix::InnerIterator it(op_->laplacian(), col); it; ++it) {
      t.emplace_back(it.row(), n + col, it.value());
    }
    for (SparseMatrix::InnerIterator it(op_->bulk_stiffness(), col); it; ++it) {
      t.emplace_back(n + it.row(), col, -it.value());
    }
    for (SparseMatrix::InnerIterator it(op_->surface_stiffness(), col); it; ++it) {
      t.emplace_back(n + it.row(), col, -config_.delta * it.value());
    }
  }
  SparseMatrix j(2 * n, 2 * n);
  j.setFromTriplets(t.begin(), t.end());
  return j;
}

void Stepper::refactor(const Vector& u) {
  const SparseMatrix j = jacobian(u);
  if (!pattern_ready_) {
    lu_.analyzePattern(j);
    pattern_ready_ = true;
  }
  lu_.factorize(j);
  if (lu_.info() != Eigen::Success) {
    factor_ready_ = false;
    throw NewtonDivergence("singular Newton Jacobian", 0, kInfinity);
  }
  factor_ready_ = true;
}

SimState Stepper::step(const SimState& state) {
  const auto n = static_cast<Eigen::Index>(mesh_.bulk_size());
  const auto& pr = config_.pair;
  SimState next = state;
  next.t = state.t + config_.dt;

  Vector u = to_vector(mesh_, state.u);
  Vector mu = to_vector(mesh_, state.mu);
  const bool guard = config_.lambda == 0.0;
  double metric = 0.0;
  double last_metric = kInfinity;
  for (int it = 0;; ++it) {
    next.u = from_vector(mesh_, u);
    next.mu = from_vector(mesh_, mu);
    const Vector r = residual(next, state);
    metric = residual_metric(r);
    if (!std::isfinite(metric)) {
      throw NewtonDivergence("Newton produced a non-finite residual", it, metric);
    }
    if (metric <= config_.newton_tol) {
      next.newton_iterations = it;
      break;
    }
    if (it >= config_.newton_max_iter) {
      std::ostringstream msg;
      msg << "Newton did not converge in " << it << " iterations at t=" << next.t
          << " (residual " << metric << ")";
      throw NewtonDivergence(msg.str(), it, metric);
    }
    // a lagged factorization is kept while it still contracts the residual fast
    const bool slow = metric > kLagContraction * last_metric;
    if (!config_.reuse_jacobian || !factor_ready_ || slow) refactor(u);
    last_metric = metric;
    const Vector neg_r = -r;
    const Vector d = lu_.solve(neg_r);
    double alpha = 1.0;
    if (guard) {
      alpha = std::min(interior_step(pr.bulk_graph.domain(), u, d.head(n)),
                       interior_step(pr.boundary_graph.domain(), u, d.head(n)));
    }
    u += alpha * d.head(n);
    mu += alpha * d.tail(n);
  }
  next.xi = xi_of(next.u);
  next.residual = metric;
  return next;
}

std::vector<double> Stepper::boundary_relation(const SimState& state, const SimState& prev) const {
  const auto& pr = config_.pair;
  const CoupledField f = config_.f.evaluate(mesh_, state.t);
  const CoupledField& u_star = config_.scheme == Scheme::fully_implicit ? state.u : prev.u;
  const Vector u = to_vector(mesh_, state.u);
  const Vector ku = op_->bulk_stiffness() * u;
  const Vector ksu = op_->surface_stiffness() * u;
  std::vector<double> out(mesh_.boundary_size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::size_t p = mesh_.boundary_to_bulk(k);
    const auto pi = static_cast<Eigen::Index>(p);
    const double wg = mesh_.boundary_weights()[k];
    // bulk pointwise law at the node: -Lap u = mu - xi - pi(u) + f
    const double neg_lap = state.mu.bulk[p] - state.xi.bulk[p] - pr.pi_bulk.value(u_star.bulk[p]) + f.bulk[p];
    const double dnu = (ku[pi] - bulk_w_[pi] * neg_lap) / wg;
    const double neg_lap_gamma = ksu[pi] / wg;
    out[k] = state.mu.boundary[k] - (dnu + config_.delta * neg_lap_gamma + state.xi.boundary[k] +
                                     pr.pi_boundary.value(u_star.boundary[k]) - f.boundary[k]);
  }
  return out;
}

Diagnostics Stepper::diagnose(const SimState& state, const SimState& prev) const {
  Diagnostics d;
  d.t = state.t;
  d.mass = mean(mesh_, state.u);
  const CoupledField f = config_.f.evaluate(mesh_, state.t);
  d.energy = energy(*op_, state.u, config_.pair, config_.delta, f, config_.lambda);
  d.grad_mu = norm(*op_, state.mu, NormKind::V0);
  d.u_V = norm(*op_, state.u, NormKind::V);
  d.xi_H = norm(*op_, state.xi, NormKind::H);
  double worst = 0.0;
  for (double v : boundary_relation(state, prev)) worst = std::max(worst, std::abs(v));
  d.boundary_relation = worst;
  d.newton_iterations = state.newton_iterations;
  d.residual = state.residual;
  return d;
}

SimState step(const SimState& state, const SolverConfig& config) {
  Stepper s(config);
  return s.step(state);
}

Vector residual(const SimState& next, const SimState& prev, const SolverConfig& config) {
  return Stepper(config).residual(next, prev);
}

Trajectory run(Stepper& stepper, const CoupledField& u0, const RunOptions& opts) {
  Trajectory traj;
  const int steps = stepper.config().steps();
  traj.states.reserve(static_cast<std::size_t>(steps) + 1);
  SimState s = stepper.initial_state(u0);
  if (opts.compute_diagnostics) traj.diagnostics.push_back(stepper.diagnose(s, s));
  traj.states.push_back(s);
  for (int n = 0; n < steps; ++n) {
    SimState next = stepper.step(s);
    if (opts.compute_diagnostics) traj.diagnostics.push_back(stepper.diagnose(next, s));
    s = std::move(next);
    SimState stored = s;
    if (!opts.keep_auxiliary) {
      stored.mu = {};
      stored.xi = {};
    }
    traj.states.push_back(std::move(stored));
  }
  if (!opts.keep_auxiliary) {
    traj.states.front().mu = {};
    traj.states.front().xi = {};
  }
  return traj;
}

Trajectory run(const SolverConfig& config, const CoupledField& u0, const RunOptions& opts) {
  Stepper s(config);
  return run(s, u0, opts);
}

}  // namespace chdbc
