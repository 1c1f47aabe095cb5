#pragma once

#include "cwm/target_geometry.hpp"
#include "cwm/types.hpp"

#include <vector>

// Discrete fields on a 2D periodic grid.  A field with d components per node
// is stored as a d x n^2 matrix; node (i, j) lives in column i + n*j with
// coordinates (i*h, j*h).  All stencils wrap periodically and commute with
// grid translations exactly.
namespace cwm::grid {

struct Grid2D {
  int n = 64;      // nodes per side, power of two, >= 16
  double h = 1.0 / 64.0;  // spacing

  double extent() const { return n * h; }
  int num_nodes() const { return n * n; }
  int idx(int i, int j) const { return wrap(i) + n * wrap(j); }
  int wrap(int i) const { return ((i % n) + n) % n; }
  double x1(int c) const { return (c % n) * h; }
  double x2(int c) const { return (c / n) * h; }
  void validate() const;
  bool operator==(const Grid2D& o) const { return n == o.n && h == o.h; }
};

// A time slice of the map: hyperboloid point and tangent time-derivative per
// node, plus the wave-time stamp.
struct MapField {
  Grid2D grid;
  geom::TargetConfig target;
  MatrixXd phi;    // (m+1) x N, on the sheet
  MatrixXd phi_t;  // (m+1) x N, tangent at phi
  double t = 0.0;
};

struct ScalarField {
  Grid2D grid;
  VectorXd v;  // N
};

struct VecField {
  Grid2D grid;
  int m = 2;
  MatrixXd v;  // m x N
};

// Skew m x m matrix per node, stored column-major flattened (m^2 x N).
struct SkewField {
  Grid2D grid;
  int m = 2;
  MatrixXd v;  // m^2 x N
};

// Periodic shift of node data by one cell along an axis (0 -> x1, 1 -> x2).
MatrixXd shift(const MatrixXd& f, const Grid2D& g, int axis, int dir);

// Second-order centered difference, componentwise.
MatrixXd central_diff(const MatrixXd& f, const Grid2D& g, int axis);

// Standard 5-point Laplacian.
MatrixXd laplacian(const MatrixXd& f, const Grid2D& g);

// h^2 * sum over nodes, with a fixed pairwise reduction tree.
double integrate(const Grid2D& g, const VectorXd& values);

// Injection restriction / bilinear prolongation by factor two.
MatrixXd restrict_field(const MatrixXd& f, const Grid2D& g);
MatrixXd prolong_field(const MatrixXd& f, const Grid2D& g);
MapField restrict_map(const MapField& f);
MapField prolong_map(const MapField& f);

// Spatial partial derivatives of phi, tangent-projected at phi.
MatrixXd map_derivative(const MapField& f, int axis);

void check_map_invariants(const MapField& f, double tol_point = 1e-10,
                          double tol_tangent = 1e-8);

}  // namespace cwm::grid
