#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chdbc/initdata.hpp"
#include "chdbc/stepping.hpp"

namespace chdbc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SourceSpec {
  bool enabled = false;
  ProfileSpec profile{ProfileKind::constant, 0.0, 0.0, 0.1, 1, 0.0, 4};
  double frequency = 0.0;

  bool operator==(const SourceSpec&) const = default;
};

/// Declarative description of a run, sweep, dependence check or data
/// preparation. Stored as sectioned `key = value` text:
///
///   [mesh]       nx ny lx ly
///   [potential]  bulk boundary c1 c2 bulk_slope boundary_slope pi_bulk pi_boundary M
///   [solver]     delta deltas lambda dt T scheme newton_tol newton_max_iter reuse_jacobian
///   [initial]    kind mean amplitude width seed margin modes
///   [source_g]   enabled kind mean amplitude width seed modes frequency   (same for [source_h])
///   [depcheck]   epsilons deltas
///   [prep]       delta deltas
///   [output]     dir checkpoint_every threads
///
/// Lists are comma separated. `lambda`, `pi_bulk` and `pi_boundary` may be
/// `auto`, which selects 0 / 1e-3 (single-valued / multivalued graphs) and the
/// double-well slopes of the graph kinds.
struct RunConfig {
  MeshParams mesh{64, 65, 1.0, 1.0};

  GraphKind bulk_potential = GraphKind::cubic;
  GraphKind boundary_potential = GraphKind::cubic;
  double c1 = 2.0;
  double c2 = 1.0;
  double bulk_slope = 1.0;      // linear graph slope
  double boundary_slope = 1.0;
  std::optional<double> pi_bulk;
  std::optional<double> pi_boundary;
  double M = 1.0;

  double delta = 0.1;
  std::vector<double> deltas{0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625};
  std::optional<double> lambda;
  double dt = 1e-4;
  double T = 0.1;
  Scheme scheme = Scheme::convex_splitting;
  double newton_tol = 1e-9;
  int newton_max_iter = 25;
  bool reuse_jacobian = true;

  ProfileSpec initial{ProfileKind::tanh_stripe, 0.0, 0.8, 0.2, 1, 0.05, 4};
  SourceSpec source_g;
  SourceSpec source_h;

  std::vector<double> dep_epsilons{1e-2, 1e-3, 1e-4};
  std::vector<double> dep_deltas{0.1, 0.01, 0.0};

  double prep_delta = 0.01;
  std::vector<double> prep_deltas{0.1, 0.01, 0.001};

  std::string out_dir = "out";
  int checkpoint_every = 0;  // 0: initial and final fields only
  int threads = 1;

  PotentialPair pair() const;
  double effective_lambda() const;
  SolverConfig solver(double delta_value) const;
  SolverConfig solver() const { return solver(delta); }
  Source source(const StripMesh& mesh) const;
  CoupledField initial_field(const StripMesh& mesh) const;

  /// Pair validation, lambda/graph consistency and mean admissibility of the
  /// initial field. Throws ConfigError.
  void validate() const;

  /// Flat key -> value view, keys as "section.key".
  std::map<std::string, std::string> to_map() const;
  std::string serialize() const;
  /// Resolved configuration as comment lines ("# section.key = value").
  std::vector<std::string> header_lines() const;

  static RunConfig parse(std::istream& in);
  static RunConfig parse_string(const std::string& text);
  static RunConfig load(const std::string& path);

  bool operator==(const RunConfig&) const = default;
};

std::string format_double(double v);
std::string format_list(const std::vector<double>& v);

}  // namespace chdbc
