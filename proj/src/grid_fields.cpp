#include "cwm/grid_fields.hpp"

#include "cwm/parallel.hpp"

#include <cmath>

namespace cwm::grid {

void Grid2D::validate() const {
  if (n < 16) throw ValidationError("grid.n must be >= 16");
  if ((n & (n - 1)) != 0) throw ValidationError("grid.n must be a power of two");
  if (!(h > 0)) throw ValidationError("grid.h must be > 0");
}

MatrixXd shift(const MatrixXd& f, const Grid2D& g, int axis, int dir) {
  const int n = g.n;
  MatrixXd out(f.rows(), f.cols());
  if (axis == 0) {
    for (int j = 0; j < n; ++j) {
      const int base = n * j;
      for (int i = 0; i < n; ++i)
        out.col(base + i) = f.col(base + g.wrap(i + dir));
    }
  } else {
    for (int j = 0; j < n; ++j) {
      const int js = g.wrap(j + dir);
      out.middleCols(n * j, n) = f.middleCols(n * js, n);
    }
  }
  return out;
}

MatrixXd central_diff(const MatrixXd& f, const Grid2D& g, int axis) {
  MatrixXd out = shift(f, g, axis, +1);
  out -= shift(f, g, axis, -1);
  out *= 1.0 / (2.0 * g.h);
  return out;
}

MatrixXd laplacian(const MatrixXd& f, const Grid2D& g) {
  MatrixXd out = shift(f, g, 0, +1);
  out += shift(f, g, 0, -1);
  out += shift(f, g, 1, +1);
  out += shift(f, g, 1, -1);
  out -= 4.0 * f;
  out *= 1.0 / (g.h * g.h);
  return out;
}

double integrate(const Grid2D& g, const VectorXd& values) {
  if (values.size() != g.num_nodes())
    throw ShapeMismatch("integrate: field size does not match grid");
  return g.h * g.h * par::pairwise_sum(values.data(), values.size());
}

MatrixXd restrict_field(const MatrixXd& f, const Grid2D& g) {
  const int n = g.n;
  if (n % 2 != 0) throw ShapeMismatch("restrict: odd grid");
  const int nc = n / 2;
  MatrixXd out(f.rows(), nc * nc);
  for (int j = 0; j < nc; ++j)
    for (int i = 0; i < nc; ++i)
      out.col(i + nc * j) = f.col(2 * i + n * (2 * j));
  return out;
}

MatrixXd prolong_field(const MatrixXd& f, const Grid2D& g) {
  const int n = g.n;
  const int nf = 2 * n;
  MatrixXd out(f.rows(), nf * nf);
  for (int j = 0; j < n; ++j) {
    const int jp = g.wrap(j + 1);
    for (int i = 0; i < n; ++i) {
      const int ip = g.wrap(i + 1);
      const auto c00 = f.col(i + n * j);
      const auto c10 = f.col(ip + n * j);
      const auto c01 = f.col(i + n * jp);
      const auto c11 = f.col(ip + n * jp);
      out.col(2 * i + nf * (2 * j)) = c00;
      out.col(2 * i + 1 + nf * (2 * j)) = 0.5 * (c00 + c10);
      out.col(2 * i + nf * (2 * j + 1)) = 0.5 * (c00 + c01);
      out.col(2 * i + 1 + nf * (2 * j + 1)) = 0.25 * (c00 + c10 + c01 + c11);
    }
  }
  return out;
}

MapField restrict_map(const MapField& f) {
  MapField out;
  out.grid = Grid2D{f.grid.n / 2, 2.0 * f.grid.h};
  out.target = f.target;
  out.t = f.t;
  out.phi = restrict_field(f.phi, f.grid);
  out.phi_t = restrict_field(f.phi_t, f.grid);
  return out;
}

MapField prolong_map(const MapField& f) {
  MapField out;
  out.grid = Grid2D{2 * f.grid.n, 0.5 * f.grid.h};
  out.target = f.target;
  out.t = f.t;
  out.phi = prolong_field(f.phi, f.grid);
  geom::project_point_cols(f.target, out.phi);
  out.phi_t = prolong_field(f.phi_t, f.grid);
  geom::project_tangent_cols(out.phi, out.phi_t);
  return out;
}

MatrixXd map_derivative(const MapField& f, int axis) {
  MatrixXd d = central_diff(f.phi, f.grid, axis);
  geom::project_tangent_cols(f.phi, d);
  return d;
}

void check_map_invariants(const MapField& f, double tol_point, double tol_tangent) {
  const double r2 = f.target.radius_sq();
  const RowVectorXd q = geom::mink_inner_cols(f.phi, f.phi);
  const RowVectorXd tq = geom::mink_inner_cols(f.phi_t, f.phi);
  for (Eigen::Index c = 0; c < q.size(); ++c) {
    if (std::abs(q(c) + r2) > tol_point * r2)
      throw NumericalError("map invariant violated: point off the sheet");
    if (std::abs(tq(c)) > tol_tangent * r2)
      throw NumericalError("map invariant violated: phi_t not tangent");
  }
}

}  // namespace cwm::grid
