#pragma once

#include <cstdint>
#include <stdexcept>
#include <string_view>

#include "chdbc/geometry.hpp"
#include "chdbc/graphs.hpp"

namespace chdbc {

class InadmissibleProfile : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ProfileKind { constant, tanh_stripe, cosine, random_smooth };
std::string_view to_string(ProfileKind k);
ProfileKind profile_kind_from_string(std::string_view name);

/// Spatial profile description.
///
///   constant       mean
///   tanh_stripe    mean + amplitude * tanh(cos(2 pi x / Lx) / width), two
///                  vertical interfaces crossing both boundary curves
///   cosine         mean + amplitude * cos(2 pi x / Lx) cos(pi y / Ly)
///   random_smooth  mean + amplitude * (normalized sum of random low Fourier
///                  modes), seeded
///
/// Values are clamped into the closure of the common graph domain shrunk by
/// `margin` when that domain is bounded.
struct ProfileSpec {
  ProfileKind kind = ProfileKind::constant;
  double mean = 0.0;
  double amplitude = 0.0;
  double width = 0.1;
  std::uint64_t seed = 1;
  double margin = 0.05;
  int modes = 4;  // random_smooth: max wavenumber in each direction

  bool operator==(const ProfileSpec&) const = default;
};

/// Trace-compatible field with finite primitives for `pair`.
CoupledField generate(const StripMesh& mesh, const ProfileSpec& spec, const PotentialPair& pair);

/// Profile without domain clamping or admissibility checks (used for sources).
CoupledField generate_unclamped(const StripMesh& mesh, const ProfileSpec& spec);

/// Throws InadmissibleProfile when a primitive is infinite at some node.
void check_admissible(const StripMesh& mesh, const CoupledField& u, const PotentialPair& pair);

struct PreparedData {
  CoupledField field;
  int newton_iterations = 0;
  double residual = 0.0;
  double v_norm = 0.0;                 // ||u0^delta||_V (bulk)
  double v_norm_bound = 0.0;           // sqrt(||u0||_V^2 + 2 int beta_hat_Gamma(u0))
  double boundary_primitive = 0.0;     // int_Gamma beta_hat_Gamma(u0^delta)
  bool energy_bound_holds = false;     // 1/2||u0^d||_V^2 + int bhat_G(u0^d) <= same for u0
};

/// Elliptic preparation of delta-dependent initial data:
///   u - delta Lap u = u0 in Omega,  -d_nu u in beta_Gamma(u) on Gamma,
/// solved by Newton on the weak form
///   (u - u0, z)_Omega + delta (grad u, grad z) + delta (beta_Gamma,lambda(u), z)_Gamma = 0.
PreparedData prepare_initial_data(const StripMesh& mesh, const CoupledField& u0, double delta,
                                  const MonotoneGraph& boundary_graph, double lambda,
                                  double tol = 1e-12, int max_iter = 50);

}  // namespace chdbc
