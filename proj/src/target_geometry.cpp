#include "cwm/target_geometry.hpp"

#include <cmath>

namespace cwm::geom {

void TargetConfig::validate() const {
  if (m < 2) throw ValidationError("target.m must be >= 2");
  if (!(kappa < 0)) throw ValidationError("target.kappa must be < 0");
}

double mink_inner(const VectorXd& u, const VectorXd& v) {
  return u.dot(v) - 2.0 * u(0) * v(0);
}

RowVectorXd mink_inner_cols(const MatrixXd& A, const MatrixXd& B) {
  RowVectorXd r = (A.cwiseProduct(B)).colwise().sum();
  r -= 2.0 * (A.row(0).cwiseProduct(B.row(0)));
  return r;
}

VectorXd project_point(const TargetConfig& tc, const VectorXd& v) {
  const double q = mink_inner(v, v);
  if (!(q < 0.0) || !(v(0) > 0.0))
    throw NotTimelike("project_point: input not in the upper timelike cone");
  return v * (tc.radius() / std::sqrt(-q));
}

void project_point_cols(const TargetConfig& tc, MatrixXd& pts) {
  const RowVectorXd q = mink_inner_cols(pts, pts);
  for (Eigen::Index c = 0; c < pts.cols(); ++c) {
    if (!(q(c) < 0.0) || !(pts(0, c) > 0.0))
      throw NotTimelike("project_point: node left the upper timelike cone");
    pts.col(c) *= tc.radius() / std::sqrt(-q(c));
  }
}

VectorXd project_tangent(const VectorXd& p, const VectorXd& v) {
  return v - (mink_inner(v, p) / mink_inner(p, p)) * p;
}

void project_tangent_cols(const MatrixXd& pts, MatrixXd& vecs) {
  const RowVectorXd num = mink_inner_cols(vecs, pts);
  const RowVectorXd den = mink_inner_cols(pts, pts);
  for (Eigen::Index c = 0; c < vecs.cols(); ++c)
    vecs.col(c) -= (num(c) / den(c)) * pts.col(c);
}

double tangent_norm(const VectorXd& v) {
  return std::sqrt(std::max(0.0, mink_inner(v, v)));
}

VectorXd geodesic_exp(const TargetConfig& tc, const VectorXd& p, const VectorXd& v) {
  const double r = tc.radius();
  const double len = tangent_norm(v);
  if (len == 0.0) return p;
  const double theta = len / r;
  return std::cosh(theta) * p + (r * std::sinh(theta) / len) * v;
}

VectorXd log_map(const TargetConfig& tc, const VectorXd& p, const VectorXd& q) {
  const double r = tc.radius();
  const double c = -mink_inner(p, q) / tc.radius_sq();  // cosh(d/r)
  const double d = r * std::acosh(std::max(1.0, c));
  VectorXd u = project_tangent(p, q);
  const double ulen = tangent_norm(u);
  if (ulen == 0.0 || d == 0.0) return VectorXd::Zero(p.size());
  return (d / ulen) * u;
}

double distance(const TargetConfig& tc, const VectorXd& p, const VectorXd& q) {
  const double c = -mink_inner(p, q) / tc.radius_sq();
  return tc.radius() * std::acosh(std::max(1.0, c));
}

VectorXd parallel_transport(const TargetConfig& tc, const VectorXd& p,
                            const VectorXd& q, const VectorXd& w) {
  const double r = tc.radius();
  const VectorXd u = log_map(tc, p, q);
  const double ulen = tangent_norm(u);
  if (ulen == 0.0) return w;
  const VectorXd uhat = u / ulen;
  const double theta = ulen / r;
  // Unit tangent of the geodesic on arrival at q.
  const VectorXd tq = (std::sinh(theta) / r) * p + std::cosh(theta) * uhat;
  const double a = mink_inner(w, uhat);
  VectorXd out = w + a * (tq - uhat);
  return project_tangent(q, out);
}

VectorXd curvature_op(const TargetConfig& tc, const VectorXd& X,
                      const VectorXd& Y, const VectorXd& Z) {
  return tc.kappa * (mink_inner(Y, Z) * X - mink_inner(X, Z) * Y);
}

MatrixXd orthonormalize(const TargetConfig& tc, const VectorXd& p,
                        const MatrixXd& raw) {
  const int m = tc.m;
  if (raw.cols() != m)
    throw ShapeMismatch("orthonormalize: expected m raw vectors");
  MatrixXd e(p.size(), m);
  double scale = 0.0;
  for (int i = 0; i < m; ++i) scale = std::max(scale, raw.col(i).norm());
  if (scale == 0.0) throw DegenerateFrame("orthonormalize: zero input");
  for (int i = 0; i < m; ++i) {
    VectorXd v = project_tangent(p, raw.col(i));
    for (int j = 0; j < i; ++j) v -= mink_inner(v, e.col(j)) * e.col(j);
    // second pass for orthogonality to rounding
    for (int j = 0; j < i; ++j) v -= mink_inner(v, e.col(j)) * e.col(j);
    const double len = tangent_norm(v);
    if (len < 1e-12 * scale)
      throw DegenerateFrame("orthonormalize: rank < m");
    e.col(i) = v / len;
  }
  return e;
}

VectorXd base_point(const TargetConfig& tc) {
  VectorXd p = VectorXd::Zero(tc.ambient_dim());
  p(0) = tc.radius();
  return p;
}

MatrixXd standard_frame(const TargetConfig& tc, const VectorXd& p) {
  MatrixXd raw = MatrixXd::Zero(tc.ambient_dim(), tc.m);
  for (int i = 0; i < tc.m; ++i) raw(i + 1, i) = 1.0;
  return orthonormalize(tc, p, raw);
}

VectorXd karcher_mean(const TargetConfig& tc, const MatrixXd& points,
                      int max_iter, double tol) {
  VectorXd p = project_point(tc, points.rowwise().mean());
  const double inv_n = 1.0 / static_cast<double>(points.cols());
  for (int it = 0; it < max_iter; ++it) {
    VectorXd g = VectorXd::Zero(p.size());
    for (Eigen::Index c = 0; c < points.cols(); ++c)
      g += log_map(tc, p, points.col(c));
    g *= inv_n;
    p = geodesic_exp(tc, p, g);
    if (tangent_norm(g) < tol * tc.radius()) break;
  }
  return p;
}

}  // namespace cwm::geom
