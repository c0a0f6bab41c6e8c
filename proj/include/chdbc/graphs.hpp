#pragma once

#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace chdbc {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NonconvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Closed, open or half-open interval of the real line; infinite ends are open.
struct Interval {
  double lo = -kInfinity;
  double hi = kInfinity;
  bool lo_closed = false;
  bool hi_closed = false;

  static Interval real_line() { return {}; }
  static Interval closed(double a, double b) { return {a, b, true, true}; }
  static Interval open(double a, double b) { return {a, b, false, false}; }

  bool contains(double r) const {
    return (lo_closed ? r >= lo : r > lo) && (hi_closed ? r <= hi : r < hi);
  }
  bool closure_contains(double r) const { return r >= lo && r <= hi; }
  bool interior_contains(double r) const { return r > lo && r < hi; }
  bool bounded() const { return lo > -kInfinity && hi < kInfinity; }
  bool subset_of(const Interval& other) const;
  bool operator==(const Interval&) const = default;
};

enum class GraphKind { cubic, logarithmic, obstacle, linear, zero, custom };

std::string_view to_string(GraphKind kind);
GraphKind graph_kind_from_string(std::string_view name);

/// User-supplied monotone graph. `value` must be the minimal section on the
/// domain and `primitive` its convex antiderivative vanishing at 0.
struct CustomGraph {
  std::function<double(double)> value;
  std::function<double(double)> primitive;
  Interval domain = Interval::real_line();
};

/// Maximal monotone graph beta = d(beta_hat) on the real line with 0 in beta(0).
///
/// The multivalued graph is never materialized: consumers go through
/// min_section, resolvent and yosida. `param` is the slope for the linear
/// graph and is otherwise descriptive (c1 or c2 of the full potential).
struct MonotoneGraph {
  GraphKind kind = GraphKind::zero;
  double param = 0.0;
  CustomGraph custom{};

  static MonotoneGraph cubic() { return {GraphKind::cubic, 0.0, {}}; }
  static MonotoneGraph logarithmic(double c1 = 2.0) {
    return {GraphKind::logarithmic, c1, {}};
  }
  static MonotoneGraph obstacle(double c2 = 1.0) {
    return {GraphKind::obstacle, c2, {}};
  }
  static MonotoneGraph linear(double slope) {
    return {GraphKind::linear, slope, {}};
  }
  static MonotoneGraph zero() { return {GraphKind::zero, 0.0, {}}; }
  static MonotoneGraph from_custom(CustomGraph g) {
    return {GraphKind::custom, 0.0, std::move(g)};
  }

  Interval domain() const;
  /// True when beta(r) is a singleton everywhere on the domain.
  bool single_valued() const;
};

/// beta°(r): element of beta(r) of least modulus. Throws DomainError off D(beta).
double min_section(const MonotoneGraph& g, double r);

/// (I + lambda beta)^{-1} r.
double resolvent(const MonotoneGraph& g, double lambda, double r);

/// Yosida approximation (r - resolvent)/lambda.
double yosida(const MonotoneGraph& g, double lambda, double r);

/// Derivative of the Yosida approximation in r.
double yosida_slope(const MonotoneGraph& g, double lambda, double r);

/// Convex primitive beta_hat(r); +inf outside the closure of the domain.
double primitive(const MonotoneGraph& g, double r);

/// Moreau envelope beta_hat(J r) + (r - J r)^2 / (2 lambda), the primitive of
/// the Yosida approximation.
double yosida_primitive(const MonotoneGraph& g, double lambda, double r);

// Single-valued surrogate used by the solvers: yosida for lambda > 0, the
// minimal section for lambda == 0.
double regularized(const MonotoneGraph& g, double lambda, double r);
double regularized_slope(const MonotoneGraph& g, double lambda, double r);
double regularized_primitive(const MonotoneGraph& g, double lambda, double r);

/// Lipschitz perturbation pi(r) = slope * r.
struct Perturbation {
  double slope = 0.0;

  double value(double r) const { return slope * r; }
  double derivative(double) const { return slope; }
  double primitive(double r) const { return 0.5 * slope * r * r; }
  double lipschitz() const { return slope < 0 ? -slope : slope; }
};

/// Bulk and boundary potentials F' = beta + pi, F_Gamma' = beta_Gamma + pi_Gamma.
struct PotentialPair {
  MonotoneGraph bulk_graph;
  MonotoneGraph boundary_graph;
  Perturbation pi_bulk;
  Perturbation pi_boundary;
  double M = 1.0;

  /// The double-well splits of the classical regular, logarithmic and double
  /// obstacle potentials, used on both bulk and boundary.
  static PotentialPair regular();
  static PotentialPair logarithmic(double c1 = 2.0);
  static PotentialPair obstacle(double c2 = 1.0);
};

/// Perturbation slope matching the double-well split of a graph kind.
double default_pi_slope(const MonotoneGraph& g);

struct PairReport {
  bool domain_inclusion = false;
  bool domination = false;  // |beta°| <= M (1 + |beta_Gamma°|) on every sample
  bool same_growth = false;  // equal domains plus the two-sided growth bound
  double worst_sample = 0.0;  // sample with the largest domination excess
  double worst_excess = 0.0;  // |beta°| - M(1 + |beta_Gamma°|) at worst_sample
  int samples = 0;

  bool pass() const { return domain_inclusion && domination; }
};

/// Samples D(beta_Gamma) and checks domination and same growth.
/// Unbounded domain ends are truncated at +-10.
PairReport validate_pair(const PotentialPair& p, int sample_count);

}  // namespace chdbc
