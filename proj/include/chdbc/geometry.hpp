#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace chdbc {

class SizeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Tensor grid on [0,Lx) x [0,Ly], periodic in x. The boundary consists of the
/// two periodic curves y = 0 (bottom) and y = Ly (top).
///
/// Bulk node (i, j) has index j*nx + i. Boundary node k < nx is the bottom node
/// (k, 0); boundary node nx + k is the top node (k, ny-1). Lumped quadrature:
/// uniform in x, trapezoidal in y.
class StripMesh {
 public:
  StripMesh(int nx, int ny, double lx, double ly);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double lx() const { return lx_; }
  double ly() const { return ly_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }

  std::size_t bulk_size() const { return static_cast<std::size_t>(nx_) * ny_; }
  std::size_t boundary_size() const { return 2 * static_cast<std::size_t>(nx_); }

  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * nx_ + static_cast<std::size_t>(wrap(i));
  }
  int wrap(int i) const { return ((i % nx_) + nx_) % nx_; }

  double x(int i) const { return i * hx_; }
  double y(int j) const { return j * hy_; }

  /// Bulk index of boundary node k.
  std::size_t boundary_to_bulk(std::size_t k) const { return boundary_to_bulk_[k]; }
  const std::vector<std::size_t>& boundary_nodes() const { return boundary_to_bulk_; }
  bool on_boundary(int j) const { return j == 0 || j == ny_ - 1; }

  const std::vector<double>& bulk_weights() const { return bulk_w_; }
  const std::vector<double>& boundary_weights() const { return boundary_w_; }

  double area() const { return lx_ * ly_; }
  double perimeter() const { return 2.0 * lx_; }

  bool operator==(const StripMesh& o) const {
    return nx_ == o.nx_ && ny_ == o.ny_ && lx_ == o.lx_ && ly_ == o.ly_;
  }

 private:
  int nx_, ny_;
  double lx_, ly_, hx_, hy_;
  std::vector<std::size_t> boundary_to_bulk_;
  std::vector<double> bulk_w_;
  std::vector<double> boundary_w_;
};

/// Bulk/boundary pair (z, z_Gamma). Trace-compatible when z_Gamma is exactly
/// the restriction of z to the boundary nodes.
struct CoupledField {
  std::vector<double> bulk;
  std::vector<double> boundary;

  static CoupledField zeros(const StripMesh& mesh);
  static CoupledField constant(const StripMesh& mesh, double c);
  /// Trace-compatible field with the given bulk values.
  static CoupledField lift(const StripMesh& mesh, std::vector<double> bulk);

  bool sized_for(const StripMesh& mesh) const {
    return bulk.size() == mesh.bulk_size() && boundary.size() == mesh.boundary_size();
  }
  bool trace_compatible(const StripMesh& mesh) const;

  CoupledField& operator+=(const CoupledField& o);
  CoupledField& operator-=(const CoupledField& o);
  CoupledField& operator*=(double s);
  friend CoupledField operator+(CoupledField a, const CoupledField& b) { return a += b; }
  friend CoupledField operator-(CoupledField a, const CoupledField& b) { return a -= b; }
  friend CoupledField operator*(double s, CoupledField a) { return a *= s; }
  bool operator==(const CoupledField&) const = default;
};

std::vector<double> trace(const StripMesh& mesh, std::span<const double> bulk);

/// Quadrature values (int_Omega z, int_Gamma z_Gamma).
std::pair<double, double> integrate(const StripMesh& mesh, const CoupledField& field);

void require_sized(const StripMesh& mesh, const CoupledField& field);

}  // namespace chdbc
