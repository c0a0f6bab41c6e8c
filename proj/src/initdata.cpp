#include "chdbc/initdata.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/SparseCholesky>

#include "chdbc/operators.hpp"

namespace chdbc {

std::string_view to_string(ProfileKind k) {
  switch (k) {
    case ProfileKind::constant: return "constant";
    case ProfileKind::tanh_stripe: return "tanh_stripe";
    case ProfileKind::cosine: return "cosine";
    case ProfileKind::random_smooth: return "random_smooth";
  }
  return "?";
}

ProfileKind profile_kind_from_string(std::string_view name) {
  for (auto k : {ProfileKind::constant, ProfileKind::tanh_stripe, ProfileKind::cosine,
                 ProfileKind::random_smooth}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown profile kind '" + std::string(name) + "'");
}

CoupledField generate_unclamped(const StripMesh& mesh, const ProfileSpec& spec) {
  std::vector<double> bulk(mesh.bulk_size(), spec.mean);
  const double kx = 2.0 * M_PI / mesh.lx();
  const double ky = M_PI / mesh.ly();
  switch (spec.kind) {
    case ProfileKind::constant:
      break;
    case ProfileKind::tanh_stripe:
      if (!(spec.width > 0)) throw InadmissibleProfile("tanh_stripe needs width > 0");
      for (int j = 0; j < mesh.ny(); ++j) {
        for (int i = 0; i < mesh.nx(); ++i) {
          bulk[mesh.index(i, j)] += spec.amplitude * std::tanh(std::cos(kx * mesh.x(i)) / spec.width);
        }
      }
      break;
    case ProfileKind::cosine:
      for (int j = 0; j < mesh.ny(); ++j) {
        for (int i = 0; i < mesh.nx(); ++i) {
          bulk[mesh.index(i, j)] +=
              spec.amplitude * std::cos(kx * mesh.x(i)) * std::cos(ky * mesh.y(j));
        }
      }
      break;
    case ProfileKind::random_smooth: {
      if (spec.modes < 1) throw InadmissibleProfile("random_smooth needs modes >= 1");
      std::mt19937_64 rng(spec.seed);
      std::uniform_real_distribution<double> coef(-1.0, 1.0);
      std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
      std::vector<double> noise(mesh.bulk_size(), 0.0);
      for (int p = 1; p <= spec.modes; ++p) {
        for (int q = 0; q <= spec.modes; ++q) {
          const double a = coef(rng) / (p * p + q * q);
          const double ph = phase(rng);
          for (int j = 0; j < mesh.ny(); ++j) {
            for (int i = 0; i < mesh.nx(); ++i) {
              noise[mesh.index(i, j)] += a * std::cos(p * kx * mesh.x(i) + ph) * std::cos(q * ky * mesh.y(j));
            }
          }
        }
      }
      double peak = 0.0;
      for (double v : noise) peak = std::max(peak, std::abs(v));
      if (peak > 0) {
        for (std::size_t n = 0; n < bulk.size(); ++n) bulk[n] += spec.amplitude * noise[n] / peak;
      }
      break;
    }
  }
  return CoupledField::lift(mesh, std::move(bulk));
}

void check_admissible(const StripMesh& mesh, const CoupledField& u, const PotentialPair& pair) {
  require_sized(mesh, u);
  for (double r : u.bulk) {
    if (!std::isfinite(primitive(pair.bulk_graph, r))) {
      throw InadmissibleProfile("bulk value " + std::to_string(r) + " has infinite primitive");
    }
  }
  for (double r : u.boundary) {
    if (!std::isfinite(primitive(pair.boundary_graph, r))) {
      throw InadmissibleProfile("boundary value " + std::to_string(r) + " has infinite primitive");
    }
  }
}

CoupledField generate(const StripMesh& mesh, const ProfileSpec& spec, const PotentialPair& pair) {
  CoupledField u = generate_unclamped(mesh, spec);
  const Interval db = pair.bulk_graph.domain();
  const Interval dg = pair.boundary_graph.domain();
  const double lo = std::max(db.lo, dg.lo);
  const double hi = std::min(db.hi, dg.hi);
  if (lo > -kInfinity || hi < kInfinity) {
    const double a = lo > -kInfinity ? lo + spec.margin : -kInfinity;
    const double b = hi < kInfinity ? hi - spec.margin : kInfinity;
    if (!(a <= b)) throw InadmissibleProfile("margin leaves an empty admissible interval");
    for (auto& v : u.bulk) v = std::clamp(v, a, b);
    for (auto& v : u.boundary) v = std::clamp(v, a, b);
  }
  check_admissible(mesh, u, pair);
  return u;
}

PreparedData prepare_initial_data(const StripMesh& mesh, const CoupledField& u0, double delta,
                                  const MonotoneGraph& boundary_graph, double lambda, double tol,
                                  int max_iter) {
  if (!(delta > 0)) throw std::invalid_argument("prepare_initial_data needs delta > 0");
  if (lambda == 0 && !boundary_graph.single_valued()) {
    throw std::invalid_argument("prepare_initial_data needs lambda > 0 for a multivalued graph");
  }
  require_sized(mesh, u0);
  const CoupledOperator op(mesh);
  const auto n = static_cast<Eigen::Index>(mesh.bulk_size());
  const Vector& wb = op.bulk_mass();
  const Vector& wg = op.surface_mass();
  const Vector target = Eigen::Map<const Vector>(u0.bulk.data(), n);
  const Interval dom = boundary_graph.domain();

  Vector u = target;
  // start inside the domain on the boundary nodes
  if (dom.lo > -kInfinity || dom.hi < kInfinity) {
    for (std::size_t k = 0; k < mesh.boundary_size(); ++k) {
      const auto p = static_cast<Eigen::Index>(mesh.boundary_to_bulk(k));
      if (!dom.contains(u[p])) u[p] = 0.0;
    }
  }

  auto residual = [&](const Vector& x) {
    Vector r = wb.cwiseProduct(x - target) + delta * (op.bulk_stiffness() * x);
    for (std::size_t k = 0; k < mesh.boundary_size(); ++k) {
      const auto p = static_cast<Eigen::Index>(mesh.boundary_to_bulk(k));
      r[p] += delta * wg[p] * regularized(boundary_graph, lambda, x[p]);
    }
    return r;
  };

  PreparedData out;
  Eigen::SimplicialLDLT<SparseMatrix> solver;
  bool analyzed = false;
  for (int it = 0;; ++it) {
    const Vector r = residual(u);
    const double metric = r.cwiseAbs().cwiseQuotient(op.mass()).maxCoeff();
    if (metric <= tol) {
      out.newton_iterations = it;
      out.residual = metric;
      break;
    }
    if (it >= max_iter || !std::isfinite(metric)) {
      throw NonconvergenceError("prepare_initial_data: Newton did not converge (residual " +
                                std::to_string(metric) + ")");
    }
    Vector diag = wb;
    for (std::size_t k = 0; k < mesh.boundary_size(); ++k) {
      const auto p = static_cast<Eigen::Index>(mesh.boundary_to_bulk(k));
      diag[p] += delta * wg[p] * regularized_slope(boundary_graph, lambda, u[p]);
    }
    SparseMatrix j = delta * op.bulk_stiffness();
    j += SparseMatrix(diag.asDiagonal());
    if (!analyzed) {
      solver.analyzePattern(j);
      analyzed = true;
    }
    solver.factorize(j);
    if (solver.info() != Eigen::Success) {
      throw NonconvergenceError("prepare_initial_data: Jacobian factorization failed");
    }
    const Vector d = solver.solve(-r);
    double alpha = 1.0;
    if (lambda == 0 && dom.bounded()) {
      for (std::size_t k = 0; k < mesh.boundary_size(); ++k) {
        const auto p = static_cast<Eigen::Index>(mesh.boundary_to_bulk(k));
        if (d[p] > 0) alpha = std::min(alpha, 0.99 * (dom.hi - u[p]) / d[p]);
        if (d[p] < 0) alpha = std::min(alpha, 0.99 * (dom.lo - u[p]) / d[p]);
      }
    }
    u += alpha * d;
  }

  out.field = from_vector(mesh, u);
  auto bulk_v_sq = [&](const Vector& x) {
    return x.dot(wb.cwiseProduct(x)) + x.dot(op.bulk_stiffness() * x);
  };
  auto bnd_primitive = [&](const Vector& x) {
    double s = 0.0;
    for (std::size_t k = 0; k < mesh.boundary_size(); ++k) {
      const auto p = static_cast<Eigen::Index>(mesh.boundary_to_bulk(k));
      s += mesh.boundary_weights()[k] * primitive(boundary_graph, x[p]);
    }
    return s;
  };
  const double lhs_v = bulk_v_sq(u);
  const double rhs_v = bulk_v_sq(target);
  out.v_norm = std::sqrt(lhs_v);
  out.boundary_primitive = bnd_primitive(u);
  const double rhs_prim = bnd_primitive(target);
  out.v_norm_bound = std::sqrt(rhs_v + 2.0 * rhs_prim);
  out.energy_bound_holds =
      0.5 * lhs_v + out.boundary_primitive <= (0.5 * rhs_v + rhs_prim) * (1.0 + 1e-12) + 1e-14;
  return out;
}

}  // namespace chdbc
