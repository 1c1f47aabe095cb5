#pragma once

#include "cwm/types.hpp"

#include <cmath>

// Exact geometry of the constant-curvature target N = H^m realized as the
// upper sheet <x,x>_M = -1/|kappa| in Minkowski R^{1,m}.  Points and tangent
// vectors are ambient (m+1)-vectors; all operations are pure and closed-form.
namespace cwm::geom {

struct TargetConfig {
  int m = 2;          // target dimension, >= 2
  double kappa = -1;  // sectional curvature, < 0

  int ambient_dim() const { return m + 1; }
  double radius() const { return 1.0 / std::sqrt(-kappa); }
  double radius_sq() const { return -1.0 / kappa; }
  void validate() const;
};

// Ambient bilinear form of signature (-,+,...,+).
double mink_inner(const VectorXd& u, const VectorXd& v);

// Column-batched Minkowski inner products: result(c) = <A.col(c), B.col(c)>_M.
RowVectorXd mink_inner_cols(const MatrixXd& A, const MatrixXd& B);

// Radial rescaling onto the upper sheet.  Throws NotTimelike when the
// input is not in the open timelike upper cone.
VectorXd project_point(const TargetConfig& tc, const VectorXd& v);
void project_point_cols(const TargetConfig& tc, MatrixXd& pts);

// Minkowski-orthogonal projection onto T_p N: v - (<v,p>/<p,p>) p.
VectorXd project_tangent(const VectorXd& p, const VectorXd& v);
void project_tangent_cols(const MatrixXd& pts, MatrixXd& vecs);

// |v|_h for tangent vectors (the induced metric is positive there).
double tangent_norm(const VectorXd& v);

VectorXd geodesic_exp(const TargetConfig& tc, const VectorXd& p, const VectorXd& v);
VectorXd log_map(const TargetConfig& tc, const VectorXd& p, const VectorXd& q);
double distance(const TargetConfig& tc, const VectorXd& p, const VectorXd& q);

// Levi-Civita transport of w from p to q along the unique geodesic; a linear
// isometry, the identity when q == p.
VectorXd parallel_transport(const TargetConfig& tc, const VectorXd& p,
                            const VectorXd& q, const VectorXd& w);

// R(X,Y)Z = kappa (<Y,Z>_h X - <X,Z>_h Y) for tangent vectors at one point.
VectorXd curvature_op(const TargetConfig& tc, const VectorXd& X,
                      const VectorXd& Y, const VectorXd& Z);

// Gram-Schmidt in the induced metric.  `raw` holds m ambient columns; the
// result holds m orthonormal tangent columns.  Throws DegenerateFrame.
MatrixXd orthonormalize(const TargetConfig& tc, const VectorXd& p,
                        const MatrixXd& raw);

// Base point (r, 0, ..., 0) and the standard frame there (spatial axes).
VectorXd base_point(const TargetConfig& tc);
MatrixXd standard_frame(const TargetConfig& tc, const VectorXd& p);

// Iterated exp/log (Karcher) mean of the columns of `points`.
VectorXd karcher_mean(const TargetConfig& tc, const MatrixXd& points,
                      int max_iter = 64, double tol = 1e-14);

}  // namespace cwm::geom
