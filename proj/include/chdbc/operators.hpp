#pragma once

#include <memory>
#include <string_view>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "chdbc/geometry.hpp"
#include "chdbc/graphs.hpp"

namespace chdbc {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

class NonzeroMeanError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class NormKind { H, V, Z, Vstar, V0 };
std::string_view to_string(NormKind kind);

/// Bulk values of a trace-compatible field as a vector over the V-dofs.
Vector to_vector(const StripMesh& mesh, const CoupledField& field);
CoupledField from_vector(const StripMesh& mesh, const Vector& v);

class FftPlan;

/// Discrete coupled operator L on trace-compatible fields.
///
/// Degrees of freedom are the bulk nodes; boundary values are their traces.
/// Dual vectors live on the same dofs as quadrature-weighted nodal functionals,
/// so that <w, z> = sum_i w_i z_i. The bulk Dirichlet form is the P1 form on
/// the right-triangle split of the grid (5-point stencil, half weight on
/// boundary rows); the boundary form is the periodic 3-point stencil on each
/// boundary curve.
///
/// Immutable after construction. Solves use a cached sparse Cholesky
/// factorization of L with one dof pinned, which is safe for concurrent reads.
class CoupledOperator {
 public:
  explicit CoupledOperator(const StripMesh& mesh);
  ~CoupledOperator();
  CoupledOperator(const CoupledOperator&) = delete;
  CoupledOperator& operator=(const CoupledOperator&) = delete;

  const StripMesh& mesh() const { return mesh_; }
  std::size_t size() const { return mesh_.bulk_size(); }

  const SparseMatrix& bulk_stiffness() const { return bulk_stiffness_; }
  const SparseMatrix& surface_stiffness() const { return surface_stiffness_; }
  /// bulk + surface stiffness
  const SparseMatrix& laplacian() const { return laplacian_; }

  // Lumped masses on the V-dofs: bulk weights, boundary weights scattered to
  // the boundary nodes, and their sum.
  const Vector& bulk_mass() const { return bulk_mass_; }
  const Vector& surface_mass() const { return surface_mass_; }
  const Vector& mass() const { return mass_; }

  double total_measure() const { return mesh_.area() + mesh_.perimeter(); }

  /// Riesz embedding H -> V*: the functional v -> (z, v)_H for any pair z.
  Vector to_dual(const CoupledField& field) const;
  double dual_mean(const Vector& dual) const;

  Vector apply(const Vector& v) const { return laplacian_ * v; }
  /// Mean-zero v with L v = rhs; throws NonzeroMeanError if m(rhs) != 0.
  Vector solve(const Vector& rhs) const;

  /// Spectral H^{1/2} norm squared of the boundary part.
  double boundary_half_norm_sq(const CoupledField& field) const;

 private:
  StripMesh mesh_;
  SparseMatrix bulk_stiffness_, surface_stiffness_, laplacian_;
  Vector bulk_mass_, surface_mass_, mass_;
  Eigen::SimplicialLDLT<SparseMatrix> pinned_factor_;
  std::unique_ptr<FftPlan> fft_;
};

/// Generalized mean (int_Omega z + int_Gamma z_Gamma) / (|Omega| + |Gamma|).
double mean(const StripMesh& mesh, const CoupledField& field);

/// L v as a dual vector; v must be trace-compatible.
Vector apply_L(const CoupledOperator& op, const CoupledField& field);

/// Mean-zero trace-compatible v with L v = rhs.
CoupledField solve_L_inv(const CoupledOperator& op, const Vector& rhs);

double norm(const CoupledOperator& op, const CoupledField& field, NormKind kind);

/// Discrete free energy
///   1/2 |grad u|^2 + delta/2 |grad_Gamma u_Gamma|^2 + int (beta_hat + pi_hat)(u)
///   + int_Gamma (beta_hat_Gamma + pi_hat_Gamma)(u_Gamma) - (f, u)_H.
/// With lambda > 0 the primitives are the Moreau envelopes of beta_hat.
/// Returns +inf when a nodal value leaves the closure of a domain.
double energy(const CoupledOperator& op, const CoupledField& u, const PotentialPair& pair,
              double delta, const CoupledField& f, double lambda = 0.0);

struct PoincareResult {
  double constant = 0.0;    // C_p
  double eigenvalue = 0.0;  // smallest nonzero generalized eigenvalue of (L, mass)
  CoupledField eigenvector;
  int iterations = 0;
};

/// Smallest C with ||z||_V <= C ||z||_V0 on mean-zero trace-compatible fields,
/// by inverse power iteration with the constant mode deflated.
PoincareResult discrete_poincare_constant(const CoupledOperator& op, double tol = 1e-8);

}  // namespace chdbc
