#include "chdbc/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace chdbc {

namespace {

constexpr double kResidualTol = 1e-12;
constexpr double kFdStep = 1e-6;
constexpr int kMaxRootIter = 400;

double custom_slope(const CustomGraph& g, double r) {
  const Interval d = g.domain;
  double lo = r - kFdStep;
  double hi = r + kFdStep;
  if (!d.contains(lo)) lo = r;
  if (!d.contains(hi)) hi = r;
  if (hi == lo) return 0.0;
  return (g.value(hi) - g.value(lo)) / (hi - lo);
}

double graph_slope(const MonotoneGraph& g, double x) {
  switch (g.kind) {
    case GraphKind::cubic:
      return 3.0 * x * x;
    case GraphKind::logarithmic:
      return 2.0 / ((1.0 - x) * (1.0 + x));
    case GraphKind::linear:
      return g.param;
    case GraphKind::obstacle:
    case GraphKind::zero:
      return 0.0;
    case GraphKind::custom:
      return custom_slope(g.custom, x);
  }
  return 0.0;
}

// Root of x + lambda*beta(x) = r on the bracket [a, b] (ends may be singular),
// Newton with bisection safeguard. h is increasing on the bracket.
double solve_resolvent(const MonotoneGraph& g, double lambda, double r,
                       double a, double b, double x0) {
  auto h = [&](double x) { return x + lambda * min_section(g, x) - r; };
  const double scale = std::max(1.0, std::abs(r));
  double x = std::clamp(x0, a, b);
  if (!g.domain().contains(x)) x = 0.5 * (a + b);
  for (int it = 0; it < kMaxRootIter; ++it) {
    const double hx = h(x);
    if (std::abs(hx) <= kResidualTol * scale) return x;
    if (hx > 0) b = x; else a = x;
    if (b - a <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x))) {
      return x;
    }
    const double dh = 1.0 + lambda * graph_slope(g, x);
    double next = x - hx / dh;
    if (!(next > a && next < b) || !std::isfinite(next)) next = 0.5 * (a + b);
    if (next == x) return x;
    x = next;
  }
  std::ostringstream msg;
  msg << "resolvent of " << to_string(g.kind) << " graph did not converge for r=" << r
      << ", lambda=" << lambda;
  throw NonconvergenceError(msg.str());
}

std::string describe(double r) {
  std::ostringstream s;
  s << r;
  return s.str();
}

}  // namespace

bool Interval::subset_of(const Interval& other) const {
  const bool lo_ok = lo > other.lo || (lo == other.lo && (other.lo_closed || !lo_closed));
  const bool hi_ok = hi < other.hi || (hi == other.hi && (other.hi_closed || !hi_closed));
  return lo_ok && hi_ok;
}

std::string_view to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::cubic: return "cubic";
    case GraphKind::logarithmic: return "logarithmic";
    case GraphKind::obstacle: return "obstacle";
    case GraphKind::linear: return "linear";
    case GraphKind::zero: return "zero";
    case GraphKind::custom: return "custom";
  }
  return "unknown";
}

GraphKind graph_kind_from_string(std::string_view name) {
  for (auto k : {GraphKind::cubic, GraphKind::logarithmic, GraphKind::obstacle,
                 GraphKind::linear, GraphKind::zero}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown graph kind '" + std::string(name) + "'");
}

Interval MonotoneGraph::domain() const {
  switch (kind) {
    case GraphKind::logarithmic: return Interval::open(-1.0, 1.0);
    case GraphKind::obstacle: return Interval::closed(-1.0, 1.0);
    case GraphKind::custom: return custom.domain;
    default: return Interval::real_line();
  }
}

bool MonotoneGraph::single_valued() const {
  // a custom graph may hide vertical segments at closed domain ends
  if (kind == GraphKind::custom) {
    const Interval d = custom.domain;
    return !(d.lo_closed && d.lo > -kInfinity) && !(d.hi_closed && d.hi < kInfinity);
  }
  return kind != GraphKind::obstacle;
}

double min_section(const MonotoneGraph& g, double r) {
  if (!g.domain().contains(r)) {
    throw DomainError(std::string(to_string(g.kind)) + " graph: r=" + describe(r) +
                      " outside D(beta)");
  }
  switch (g.kind) {
    case GraphKind::cubic: return r * r * r;
    case GraphKind::logarithmic: return std::log((1.0 + r) / (1.0 - r));
    case GraphKind::obstacle: return 0.0;
    case GraphKind::linear: return g.param * r;
    case GraphKind::zero: return 0.0;
    case GraphKind::custom: return g.custom.value(r);
  }
  return 0.0;
}

double resolvent(const MonotoneGraph& g, double lambda, double r) {
  if (!(lambda > 0)) throw std::invalid_argument("resolvent requires lambda > 0");
  switch (g.kind) {
    case GraphKind::obstacle:
      return std::clamp(r, -1.0, 1.0);
    case GraphKind::linear:
      return r / (1.0 + lambda * g.param);
    case GraphKind::zero:
      return r;
    case GraphKind::cubic:
      return solve_resolvent(g, lambda, r, std::min(0.0, r), std::max(0.0, r),
                             r / (1.0 + lambda * 3.0 * r * r));
    case GraphKind::logarithmic: {
      // the root lies between 0 and r, strictly inside (-1, 1)
      const double a = r < 0 ? std::max(r, -1.0) : 0.0;
      const double b = r > 0 ? std::min(r, 1.0) : 0.0;
      return solve_resolvent(g, lambda, r, a, b, 0.5 * (a + b));
    }
    case GraphKind::custom: {
      const Interval d = g.custom.domain;
      const double a = r < 0 ? std::max(r, d.lo) : 0.0;
      const double b = r > 0 ? std::min(r, d.hi) : 0.0;
      // closed domain ends carry vertical segments: the root may sit on them
      if (r > 0 && d.hi_closed && b == d.hi && b + lambda * min_section(g, b) <= r) return b;
      if (r < 0 && d.lo_closed && a == d.lo && a + lambda * min_section(g, a) >= r) return a;
      return solve_resolvent(g, lambda, r, a, b, 0.5 * (a + b));
    }
  }
  return r;
}

double yosida(const MonotoneGraph& g, double lambda, double r) {
  return (r - resolvent(g, lambda, r)) / lambda;
}

double yosida_slope(const MonotoneGraph& g, double lambda, double r) {
  if (g.kind == GraphKind::obstacle) {
    return (r > -1.0 && r < 1.0) ? 0.0 : 1.0 / lambda;
  }
  const double x = resolvent(g, lambda, r);
  if (g.kind == GraphKind::custom && !g.custom.domain.interior_contains(x)) {
    return 1.0 / lambda;
  }
  const double s = graph_slope(g, x);
  if (!std::isfinite(s)) return 1.0 / lambda;
  return s / (1.0 + lambda * s);
}

double primitive(const MonotoneGraph& g, double r) {
  switch (g.kind) {
    case GraphKind::cubic:
      return 0.25 * r * r * r * r;
    case GraphKind::logarithmic: {
      if (r < -1.0 || r > 1.0) return kInfinity;
      auto xlogx = [](double x) { return x > 0 ? x * std::log(x) : 0.0; };
      return xlogx(1.0 + r) + xlogx(1.0 - r);
    }
    case GraphKind::obstacle:
      return (r >= -1.0 && r <= 1.0) ? 0.0 : kInfinity;
    case GraphKind::linear:
      return 0.5 * g.param * r * r;
    case GraphKind::zero:
      return 0.0;
    case GraphKind::custom:
      if (!g.custom.domain.closure_contains(r)) return kInfinity;
      return g.custom.primitive(r);
  }
  return 0.0;
}

double yosida_primitive(const MonotoneGraph& g, double lambda, double r) {
  const double x = resolvent(g, lambda, r);
  return primitive(g, x) + (r - x) * (r - x) / (2.0 * lambda);
}

double regularized(const MonotoneGraph& g, double lambda, double r) {
  return lambda > 0 ? yosida(g, lambda, r) : min_section(g, r);
}

double regularized_slope(const MonotoneGraph& g, double lambda, double r) {
  if (lambda > 0) return yosida_slope(g, lambda, r);
  if (!g.domain().contains(r)) {
    throw DomainError(std::string(to_string(g.kind)) + " graph: r=" + describe(r) +
                      " outside D(beta)");
  }
  return graph_slope(g, r);
}

double regularized_primitive(const MonotoneGraph& g, double lambda, double r) {
  return lambda > 0 ? yosida_primitive(g, lambda, r) : primitive(g, r);
}

double default_pi_slope(const MonotoneGraph& g) {
  switch (g.kind) {
    case GraphKind::cubic: return -1.0;
    case GraphKind::logarithmic: return -2.0 * g.param;
    case GraphKind::obstacle: return -2.0 * g.param;
    default: return 0.0;
  }
}

PotentialPair PotentialPair::regular() {
  return {MonotoneGraph::cubic(), MonotoneGraph::cubic(), {-1.0}, {-1.0}, 1.0};
}

PotentialPair PotentialPair::logarithmic(double c1) {
  return {MonotoneGraph::logarithmic(c1), MonotoneGraph::logarithmic(c1), {-2.0 * c1},
          {-2.0 * c1}, 1.0};
}

PotentialPair PotentialPair::obstacle(double c2) {
  return {MonotoneGraph::obstacle(c2), MonotoneGraph::obstacle(c2), {-2.0 * c2},
          {-2.0 * c2}, 1.0};
}

PairReport validate_pair(const PotentialPair& p, int sample_count) {
  if (sample_count < 2) throw std::invalid_argument("validate_pair needs >= 2 samples");
  PairReport rep;
  const Interval db = p.bulk_graph.domain();
  const Interval dg = p.boundary_graph.domain();
  rep.domain_inclusion = dg.subset_of(db);
  rep.domination = true;
  rep.same_growth = (db == dg) && p.M >= 1.0;
  rep.worst_excess = -kInfinity;

  const double lo = std::max(dg.lo, -10.0);
  const double hi = std::min(dg.hi, 10.0);
  const bool lo_in = dg.lo_closed || dg.lo == -kInfinity;
  const bool hi_in = dg.hi_closed || dg.hi == kInfinity;
  const double off_lo = lo_in ? 0.0 : 1.0;
  const double off_hi = hi_in ? 0.0 : 1.0;
  const double denom = sample_count - 1 + off_lo + off_hi;

  for (int k = 0; k < sample_count; ++k) {
    const double r = lo + (hi - lo) * (k + off_lo) / denom;
    const double bg = std::abs(min_section(p.boundary_graph, r));
    double excess;
    double bb = kInfinity;
    if (db.contains(r)) {
      bb = std::abs(min_section(p.bulk_graph, r));
      excess = bb - p.M * (1.0 + bg);
    } else {
      excess = kInfinity;
    }
    if (excess > rep.worst_excess) {
      rep.worst_excess = excess;
      rep.worst_sample = r;
    }
    if (excess > 0) rep.domination = false;
    if (!(bg / p.M - p.M <= bb && bb <= p.M * (bg + 1.0))) rep.same_growth = false;
    ++rep.samples;
  }
  if (!rep.domain_inclusion) rep.domination = false;
  rep.same_growth = rep.same_growth && rep.domination;
  return rep;
}

}  // namespace chdbc
