#include "chdbc/operators.hpp"

#include <cmath>
#include <complex>
#include <mutex>
#include <random>

#include <fftw3.h>

namespace chdbc {

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

void add_edge(std::vector<Eigen::Triplet<double>>& t, std::size_t a, std::size_t b, double w) {
  const auto ia = static_cast<Eigen::Index>(a);
  const auto ib = static_cast<Eigen::Index>(b);
  t.emplace_back(ia, ia, w);
  t.emplace_back(ib, ib, w);
  t.emplace_back(ia, ib, -w);
  t.emplace_back(ib, ia, -w);
}

void require_trace_compatible(const StripMesh& mesh, const CoupledField& f, const char* what) {
  require_sized(mesh, f);
  if (!f.trace_compatible(mesh)) {
    throw std::invalid_argument(std::string(what) + " requires a trace-compatible field");
  }
}

}  // namespace

class FftPlan {
 public:
  explicit FftPlan(int n) : n_(n) {
    std::vector<double> in(n);
    std::vector<fftw_complex> out(n / 2 + 1);
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(n, in.data(), out.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  ~FftPlan() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  std::vector<std::complex<double>> forward(const double* data) const {
    std::vector<double> in(data, data + n_);
    std::vector<fftw_complex> out(n_ / 2 + 1);
    fftw_execute_dft_r2c(plan_, in.data(), out.data());
    std::vector<std::complex<double>> res(out.size());
    for (std::size_t k = 0; k < out.size(); ++k) res[k] = {out[k][0], out[k][1]};
    return res;
  }

 private:
  int n_;
  fftw_plan plan_;
};

std::string_view to_string(NormKind kind) {
  switch (kind) {
    case NormKind::H: return "H";
    case NormKind::V: return "V";
    case NormKind::Z: return "Z";
    case NormKind::Vstar: return "Vstar";
    case NormKind::V0: return "V0";
  }
  return "?";
}

Vector to_vector(const StripMesh& mesh, const CoupledField& field) {
  require_sized(mesh, field);
  return Eigen::Map<const Vector>(field.bulk.data(), static_cast<Eigen::Index>(field.bulk.size()));
}

CoupledField from_vector(const StripMesh& mesh, const Vector& v) {
  if (static_cast<std::size_t>(v.size()) != mesh.bulk_size()) {
    throw SizeMismatch("vector is not sized for this mesh");
  }
  return CoupledField::lift(mesh, std::vector<double>(v.data(), v.data() + v.size()));
}

CoupledOperator::CoupledOperator(const StripMesh& mesh) : mesh_(mesh) {
  const auto n = static_cast<Eigen::Index>(mesh.bulk_size());
  const int nx = mesh.nx();
  const int ny = mesh.ny();
  const double hx = mesh.hx();
  const double hy = mesh.hy();

  std::vector<Eigen::Triplet<double>> tb;
  for (int j = 0; j < ny; ++j) {
    const double cx = (mesh.on_boundary(j) ? 0.5 : 1.0) * hy / hx;
    for (int i = 0; i < nx; ++i) {
      add_edge(tb, mesh.index(i, j), mesh.index(i + 1, j), cx);
      if (j + 1 < ny) add_edge(tb, mesh.index(i, j), mesh.index(i, j + 1), hx / hy);
    }
  }
  bulk_stiffness_.resize(n, n);
  bulk_stiffness_.setFromTriplets(tb.begin(), tb.end());

  std::vector<Eigen::Triplet<double>> ts;
  for (int j : {0, ny - 1}) {
    for (int i = 0; i < nx; ++i) add_edge(ts, mesh.index(i, j), mesh.index(i + 1, j), 1.0 / hx);
  }
  surface_stiffness_.resize(n, n);
  surface_stiffness_.setFromTriplets(ts.begin(), ts.end());
  laplacian_ = bulk_stiffness_ + surface_stiffness_;

  bulk_mass_ = Eigen::Map<const Vector>(mesh.bulk_weights().data(), n);
  surface_mass_ = Vector::Zero(n);
  for (std::size_t k = 0; k < mesh.boundary_size(); ++k) {
    surface_mass_[static_cast<Eigen::Index>(mesh.boundary_to_bulk(k))] += mesh.boundary_weights()[k];
  }
  mass_ = bulk_mass_ + surface_mass_;

  // Pin dof 0: L restricted to the remaining dofs is SPD since ker L = constants.
  std::vector<Eigen::Triplet<double>> tr;
  for (Eigen::Index col = 1; col < n; ++col) {
    for (SparseMatrix::InnerIterator it(laplacian_, col); it; ++it) {
      if (it.row() > 0) tr.emplace_back(it.row() - 1, col - 1, it.value());
    }
  }
  SparseMatrix reduced(n - 1, n - 1);
  reduced.setFromTriplets(tr.begin(), tr.end());
  pinned_factor_.compute(reduced);
  if (pinned_factor_.info() != Eigen::Success) {
    throw NonconvergenceError("factorization of the coupled operator failed");
  }
  fft_ = std::make_unique<FftPlan>(nx);
}

CoupledOperator::~CoupledOperator() = default;

Vector CoupledOperator::to_dual(const CoupledField& field) const {
  require_sized(mesh_, field);
  Vector d(size());
  const auto& wb = mesh_.bulk_weights();
  for (std::size_t i = 0; i < wb.size(); ++i) d[static_cast<Eigen::Index>(i)] = wb[i] * field.bulk[i];
  const auto& wg = mesh_.boundary_weights();
  for (std::size_t k = 0; k < wg.size(); ++k) {
    d[static_cast<Eigen::Index>(mesh_.boundary_to_bulk(k))] += wg[k] * field.boundary[k];
  }
  return d;
}

double CoupledOperator::dual_mean(const Vector& dual) const {
  return dual.sum() / total_measure();
}

Vector CoupledOperator::solve(const Vector& rhs) const {
  if (static_cast<std::size_t>(rhs.size()) != size()) throw SizeMismatch("solve: rhs size mismatch");
  const double m = dual_mean(rhs);
  const double scale = std::max(1.0, rhs.cwiseAbs().sum() / total_measure());
  if (std::abs(m) > 1e-10 * scale) {
    throw NonzeroMeanError("solve_L_inv: right-hand side has nonzero mean " + std::to_string(m));
  }
  // remove the roundoff-level mean so the pinned row is consistent
  const Vector b = rhs - (rhs.sum() / mass_.sum()) * mass_;
  Vector v = Vector::Zero(size());
  v.tail(v.size() - 1) = pinned_factor_.solve(b.tail(b.size() - 1));
  if (pinned_factor_.info() != Eigen::Success) {
    throw NonconvergenceError("solve_L_inv: back-substitution failed");
  }
  v.array() -= mass_.dot(v) / mass_.sum();
  const double bn = b.norm();
  if (bn > 0 && (laplacian_ * v - b).norm() > 1e-10 * bn) {
    throw NonconvergenceError("solve_L_inv: relative residual above 1e-10");
  }
  return v;
}

double CoupledOperator::boundary_half_norm_sq(const CoupledField& field) const {
  const int nx = mesh_.nx();
  double total = 0.0;
  for (int curve = 0; curve < 2; ++curve) {
    const auto spec = fft_->forward(field.boundary.data() + static_cast<std::ptrdiff_t>(curve) * nx);
    for (int k = 0; k <= nx / 2; ++k) {
      const double kappa = 2.0 * M_PI * k / mesh_.lx();
      const double mult = (k == 0 || 2 * k == nx) ? 1.0 : 2.0;
      // Parseval: hx * sum |z_i|^2 = (hx / nx) * sum_k |Z_k|^2
      total += mult * std::sqrt(1.0 + kappa * kappa) * std::norm(spec[k]) * mesh_.hx() / nx;
    }
  }
  return total;
}

double mean(const StripMesh& mesh, const CoupledField& field) {
  const auto [b, g] = integrate(mesh, field);
  return (b + g) / (mesh.area() + mesh.perimeter());
}

Vector apply_L(const CoupledOperator& op, const CoupledField& field) {
  require_trace_compatible(op.mesh(), field, "apply_L");
  return op.apply(to_vector(op.mesh(), field));
}

CoupledField solve_L_inv(const CoupledOperator& op, const Vector& rhs) {
  return from_vector(op.mesh(), op.solve(rhs));
}

double norm(const CoupledOperator& op, const CoupledField& field, NormKind kind) {
  const StripMesh& mesh = op.mesh();
  require_sized(mesh, field);
  auto h_sq = [&] {
    double s = 0.0;
    const auto& wb = mesh.bulk_weights();
    const auto& wg = mesh.boundary_weights();
    for (std::size_t i = 0; i < wb.size(); ++i) s += wb[i] * field.bulk[i] * field.bulk[i];
    for (std::size_t k = 0; k < wg.size(); ++k) s += wg[k] * field.boundary[k] * field.boundary[k];
    return s;
  };
  switch (kind) {
    case NormKind::H:
      return std::sqrt(h_sq());
    case NormKind::V0: {
      require_trace_compatible(mesh, field, "V0 norm");
      const Vector v = to_vector(mesh, field);
      return std::sqrt(std::max(0.0, v.dot(op.laplacian() * v)));
    }
    case NormKind::V: {
      require_trace_compatible(mesh, field, "V norm");
      const Vector v = to_vector(mesh, field);
      return std::sqrt(h_sq() + std::max(0.0, v.dot(op.laplacian() * v)));
    }
    case NormKind::Z: {
      require_trace_compatible(mesh, field, "Z norm");
      const Vector v = to_vector(mesh, field);
      double bulk_sq = v.dot(op.bulk_stiffness() * v);
      const auto& wb = mesh.bulk_weights();
      for (std::size_t i = 0; i < wb.size(); ++i) bulk_sq += wb[i] * field.bulk[i] * field.bulk[i];
      return std::sqrt(std::max(0.0, bulk_sq) + op.boundary_half_norm_sq(field));
    }
    case NormKind::Vstar: {
      const Vector d = op.to_dual(field);
      const double m = op.dual_mean(d);
      const Vector centered = d - m * op.mass();
      const Vector w = op.solve(centered);
      return std::sqrt(std::max(0.0, w.dot(op.laplacian() * w)) + m * m);
    }
  }
  return 0.0;
}

double energy(const CoupledOperator& op, const CoupledField& u, const PotentialPair& pair,
              double delta, const CoupledField& f, double lambda) {
  const StripMesh& mesh = op.mesh();
  require_trace_compatible(mesh, u, "energy");
  require_sized(mesh, f);
  const Vector v = to_vector(mesh, u);
  double e = 0.5 * v.dot(op.bulk_stiffness() * v) + 0.5 * delta * v.dot(op.surface_stiffness() * v);
  const auto& wb = mesh.bulk_weights();
  for (std::size_t i = 0; i < wb.size(); ++i) {
    const double r = u.bulk[i];
    const double b = regularized_primitive(pair.bulk_graph, lambda, r);
    if (!std::isfinite(b)) return kInfinity;
    e += wb[i] * (b + pair.pi_bulk.primitive(r) - f.bulk[i] * r);
  }
  const auto& wg = mesh.boundary_weights();
  for (std::size_t k = 0; k < wg.size(); ++k) {
    const double r = u.boundary[k];
    const double b = regularized_primitive(pair.boundary_graph, lambda, r);
    if (!std::isfinite(b)) return kInfinity;
    e += wg[k] * (b + pair.pi_boundary.primitive(r) - f.boundary[k] * r);
  }
  return e;
}

PoincareResult discrete_poincare_constant(const CoupledOperator& op, double tol) {
  const Vector& mass = op.mass();
  const auto n = static_cast<Eigen::Index>(op.size());
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);

  auto deflate = [&](Vector& x) { x.array() -= mass.dot(x) / mass.sum(); };
  auto normalize = [&](Vector& x) { x /= std::sqrt(x.dot(mass.cwiseProduct(x))); };
  deflate(v);
  normalize(v);

  double lambda_prev = 0.0;
  for (int it = 1; it <= 2000; ++it) {
    // M v has zero sum because v has zero weighted mean
    Vector w = op.solve(mass.cwiseProduct(v));
    deflate(w);
    normalize(w);
    v = std::move(w);
    const double lambda = v.dot(op.laplacian() * v);
    if (it > 1 && std::abs(lambda - lambda_prev) <= tol * lambda) {
      PoincareResult res;
      res.eigenvalue = lambda;
      res.constant = std::sqrt(1.0 + 1.0 / lambda);
      res.eigenvector = from_vector(op.mesh(), v);
      res.iterations = it;
      return res;
    }
    lambda_prev = lambda;
  }
  throw NonconvergenceError("inverse power iteration for the Poincare constant did not converge");
}

}  // namespace chdbc
