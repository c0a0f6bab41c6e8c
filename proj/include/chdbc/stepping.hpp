#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include <Eigen/SparseLU>

#include "chdbc/geometry.hpp"
#include "chdbc/graphs.hpp"
#include "chdbc/operators.hpp"

namespace chdbc {

class NewtonDivergence : public std::runtime_error {
 public:
  NewtonDivergence(const std::string& what, int iterations, double last_residual)
      : std::runtime_error(what), iterations(iterations), last_residual(last_residual) {}
  int iterations;
  double last_residual;
};

class DomainEscape : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Scheme { fully_implicit, convex_splitting };
std::string_view to_string(Scheme s);
Scheme scheme_from_string(std::string_view name);

struct MeshParams {
  int nx = 64;
  int ny = 65;
  double lx = 1.0;
  double ly = 1.0;

  StripMesh build() const { return StripMesh(nx, ny, lx, ly); }
  bool operator==(const MeshParams&) const = default;
};

/// Sampled spatial profile modulated in time by cos(2 pi frequency t).
struct SourceTerm {
  CoupledField profile;
  double frequency = 0.0;
};

/// Source f = g + h. The split is metadata; only the sum enters the solver.
struct Source {
  std::vector<SourceTerm> g;
  std::vector<SourceTerm> h;

  CoupledField evaluate(const StripMesh& mesh, double t) const;
  bool autonomous() const;
  bool empty() const { return g.empty() && h.empty(); }
};

struct SolverConfig {
  MeshParams mesh;
  PotentialPair pair = PotentialPair::regular();
  double delta = 0.0;
  double lambda = 0.0;
  double dt = 1e-4;
  double T = 0.1;
  Scheme scheme = Scheme::convex_splitting;
  double newton_tol = 1e-9;
  int newton_max_iter = 25;
  // reuse the last Jacobian factorization across iterations and steps while
  // the residual contracts by at least a factor 10 per iteration
  bool reuse_jacobian = true;
  Source f;

  /// Throws std::invalid_argument on inconsistent parameters.
  void validate() const;
  int steps() const;
};

/// Triplet (u, mu, xi) at time t; xi holds the nodal values of the
/// regularized graphs and is not trace-compatible in general.
struct SimState {
  double t = 0.0;
  CoupledField u;
  CoupledField mu;
  CoupledField xi;
  int newton_iterations = 0;
  double residual = 0.0;
};

struct Diagnostics {
  double t = 0.0;
  double mass = 0.0;
  double energy = 0.0;
  double grad_mu = 0.0;   // ||mu||_V0
  double u_V = 0.0;
  double xi_H = 0.0;
  double boundary_relation = 0.0;  // max nodal residual of the pointwise boundary law
  int newton_iterations = 0;
  double residual = 0.0;
};

struct Trajectory {
  std::vector<SimState> states;
  std::vector<Diagnostics> diagnostics;
};

struct RunOptions {
  // keep mu and xi in stored states (u is always kept)
  bool keep_auxiliary = true;
  bool compute_diagnostics = true;
};

/// Implicit Euler for the Yosida-regularized coupled system.
///
/// Unknowns are (u, mu) on the V-dofs. Row block R1 is the mass balance
///   M (u+ - u)/dt + L mu+,
/// row block R2 the chemical potential
///   M mu+ - K u+ - delta K_Gamma u+ - W (beta_lambda(u+) + pi(u*) - f),
/// with u* = u+ (fully implicit) or u* = u (convex splitting), W the lumped
/// bulk/boundary weights. The Newton convergence metric is
///   max_i max(|R1_i| dt / M_i, |R2_i| / M_i).
class Stepper {
 public:
  explicit Stepper(SolverConfig config);

  const SolverConfig& config() const { return config_; }
  const StripMesh& mesh() const { return mesh_; }
  const CoupledOperator& op() const { return *op_; }

  /// Consistent state at time t for the given u: mu from the R2 row.
  SimState initial_state(const CoupledField& u0, double t = 0.0) const;

  Vector residual(const SimState& next, const SimState& prev) const;
  double residual_metric(const Vector& r) const;

  SimState step(const SimState& state);

  /// Nodal residual mu_Gamma - [d_nu u - delta Lap_Gamma u + xi_Gamma +
  /// pi_Gamma - f_Gamma] with d_nu u recovered from the discrete bulk row.
  std::vector<double> boundary_relation(const SimState& state, const SimState& prev) const;

  Diagnostics diagnose(const SimState& state, const SimState& prev) const;

 private:
  CoupledField xi_of(const CoupledField& u) const;
  SparseMatrix jacobian(const Vector& u_next) const;
  void refactor(const Vector& u);

  SolverConfig config_;
  StripMesh mesh_;
  std::unique_ptr<CoupledOperator> op_;
  Vector bulk_w_, surf_w_;
  Eigen::SparseLU<SparseMatrix> lu_;
  bool pattern_ready_ = false;
  bool factor_ready_ = false;
};

SimState step(const SimState& state, const SolverConfig& config);
Vector residual(const SimState& next, const SimState& prev, const SolverConfig& config);

/// Time series from u0 up to T. The first entry is the initial state.
Trajectory run(const SolverConfig& config, const CoupledField& u0, const RunOptions& opts = {});
Trajectory run(Stepper& stepper, const CoupledField& u0, const RunOptions& opts = {});

}  // namespace chdbc
