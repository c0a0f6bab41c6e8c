#include "chdbc/geometry.hpp"

#include <string>

namespace chdbc {

StripMesh::StripMesh(int nx, int ny, double lx, double ly)
    : nx_(nx), ny_(ny), lx_(lx), ly_(ly) {
  if (nx < 4 || ny < 4) {
    throw std::invalid_argument("strip mesh needs nx, ny >= 4 (got " + std::to_string(nx) +
                                ", " + std::to_string(ny) + ")");
  }
  if (!(lx > 0) || !(ly > 0)) throw std::invalid_argument("strip mesh needs lx, ly > 0");
  hx_ = lx / nx;
  hy_ = ly / (ny - 1);

  boundary_to_bulk_.resize(boundary_size());
  for (int i = 0; i < nx; ++i) {
    boundary_to_bulk_[i] = index(i, 0);
    boundary_to_bulk_[nx + i] = index(i, ny - 1);
  }
  bulk_w_.resize(bulk_size());
  for (int j = 0; j < ny; ++j) {
    const double wy = on_boundary(j) ? 0.5 * hy_ : hy_;
    for (int i = 0; i < nx; ++i) bulk_w_[index(i, j)] = hx_ * wy;
  }
  boundary_w_.assign(boundary_size(), hx_);
}

CoupledField CoupledField::zeros(const StripMesh& mesh) { return constant(mesh, 0.0); }

CoupledField CoupledField::constant(const StripMesh& mesh, double c) {
  return {std::vector<double>(mesh.bulk_size(), c), std::vector<double>(mesh.boundary_size(), c)};
}

CoupledField CoupledField::lift(const StripMesh& mesh, std::vector<double> bulk) {
  if (bulk.size() != mesh.bulk_size()) throw SizeMismatch("lift: bulk array size mismatch");
  auto b = trace(mesh, bulk);
  return {std::move(bulk), std::move(b)};
}

bool CoupledField::trace_compatible(const StripMesh& mesh) const {
  if (!sized_for(mesh)) return false;
  for (std::size_t k = 0; k < boundary.size(); ++k) {
    if (boundary[k] != bulk[mesh.boundary_to_bulk(k)]) return false;
  }
  return true;
}

namespace {

void require_same_shape(const CoupledField& a, const CoupledField& b) {
  if (a.bulk.size() != b.bulk.size() || a.boundary.size() != b.boundary.size()) {
    throw SizeMismatch("coupled fields have different shapes");
  }
}

}  // namespace

CoupledField& CoupledField::operator+=(const CoupledField& o) {
  require_same_shape(*this, o);
  for (std::size_t i = 0; i < bulk.size(); ++i) bulk[i] += o.bulk[i];
  for (std::size_t i = 0; i < boundary.size(); ++i) boundary[i] += o.boundary[i];
  return *this;
}

CoupledField& CoupledField::operator-=(const CoupledField& o) {
  require_same_shape(*this, o);
  for (std::size_t i = 0; i < bulk.size(); ++i) bulk[i] -= o.bulk[i];
  for (std::size_t i = 0; i < boundary.size(); ++i) boundary[i] -= o.boundary[i];
  return *this;
}

CoupledField& CoupledField::operator*=(double s) {
  for (auto& v : bulk) v *= s;
  for (auto& v : boundary) v *= s;
  return *this;
}

std::vector<double> trace(const StripMesh& mesh, std::span<const double> bulk) {
  if (bulk.size() != mesh.bulk_size()) throw SizeMismatch("trace: bulk array size mismatch");
  std::vector<double> out(mesh.boundary_size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = bulk[mesh.boundary_to_bulk(k)];
  return out;
}

void require_sized(const StripMesh& mesh, const CoupledField& field) {
  if (!field.sized_for(mesh)) throw SizeMismatch("field is not sized for this mesh");
}

std::pair<double, double> integrate(const StripMesh& mesh, const CoupledField& field) {
  require_sized(mesh, field);
  double bulk = 0.0;
  double bnd = 0.0;
  const auto& wb = mesh.bulk_weights();
  const auto& wg = mesh.boundary_weights();
  for (std::size_t i = 0; i < wb.size(); ++i) bulk += wb[i] * field.bulk[i];
  for (std::size_t i = 0; i < wg.size(); ++i) bnd += wg[i] * field.boundary[i];
  return {bulk, bnd};
}

}  // namespace chdbc
