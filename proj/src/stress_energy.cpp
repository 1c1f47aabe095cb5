#include "cwm/stress_energy.hpp"

#include "cwm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace cwm::stress {

namespace {

// Bilinear sample of every row of f at the (periodic) physical point (x, y).
VectorXd bilinear(const Grid2D& g, const MatrixXd& f, double x, double y) {
  const double u = x / g.h;
  const double v = y / g.h;
  const double fu = u - std::floor(u);
  const double fv = v - std::floor(v);
  const long i0 = static_cast<long>(std::floor(u));
  const long j0 = static_cast<long>(std::floor(v));
  auto wrap = [&](long k) {
    long r = k % g.n;
    return static_cast<int>(r < 0 ? r + g.n : r);
  };
  const int i1 = wrap(i0 + 1), iw = wrap(i0);
  const int j1 = wrap(j0 + 1), jw = wrap(j0);
  return (1 - fu) * (1 - fv) * f.col(iw + g.n * jw) +
         fu * (1 - fv) * f.col(i1 + g.n * jw) +
         (1 - fu) * fv * f.col(iw + g.n * j1) + fu * fv * f.col(i1 + g.n * j1);
}

struct Eta {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

// Quintic smoothstep and derivatives, clamped outside [0, 1].
void smoothstep(double u, double& s, double& s1, double& s2) {
  if (u <= 0.0) {
    s = s1 = s2 = 0.0;
  } else if (u >= 1.0) {
    s = 1.0;
    s1 = s2 = 0.0;
  } else {
    s = ((6 * u - 15) * u + 10) * u * u * u;
    s1 = ((30 * u - 60) * u + 30) * u * u;
    s2 = ((120 * u - 180) * u + 60) * u;
  }
}

Eta eta_eval(const ConeGeometry& cone, double t) {
  const double tau = t - cone.apex_t;
  const double tau1 = cone.t1 - cone.apex_t;  // < 0
  const double tau2 = cone.t2 - cone.apex_t;  // < tau1
  const double wu = -0.5 * tau2;  // ramp up over [tau2, tau2/2]
  const double wd = -tau1;        // ramp down over [2 tau1, tau1]
  double a, a1, a2, b, b1, b2;
  smoothstep((tau - tau2) / wu, a, a1, a2);
  smoothstep((tau1 - tau) / wd, b, b1, b2);
  a1 /= wu;
  a2 /= wu * wu;
  b1 /= -wd;
  b2 /= wd * wd;
  Eta e;
  e.value = a * b;
  e.d1 = a1 * b + a * b1;
  e.d2 = a2 * b + 2 * a1 * b1 + a * b2;
  return e;
}

// Trapezoid weights over the slices of `slices` whose times fall in
// [t_lo, t_hi]; returns indices and weights, validating uniform spacing.
void slab_slices(const std::vector<StressEnergyField>& slices, double t_lo,
                 double t_hi, std::vector<int>& idx, std::vector<double>& w) {
  idx.clear();
  w.clear();
  for (int i = 0; i < static_cast<int>(slices.size()); ++i)
    if (slices[i].t >= t_lo - 1e-12 && slices[i].t <= t_hi + 1e-12)
      idx.push_back(i);
  if (idx.size() < 2)
    throw ValidationError("cone slab must contain at least two time slices");
  const double dt = slices[idx[1]].t - slices[idx[0]].t;
  for (std::size_t k = 1; k < idx.size(); ++k) {
    const double d = slices[idx[k]].t - slices[idx[k - 1]].t;
    if (std::abs(d - dt) > 1e-9 * std::max(1.0, std::abs(dt)))
      throw GridMismatch("cone slab slices are not uniformly spaced");
  }
  w.assign(idx.size(), dt);
  w.front() = 0.5 * dt;
  w.back() = 0.5 * dt;
}

}  // namespace

int StressEnergyField::row(int alpha, int beta) {
  if (alpha > beta) std::swap(alpha, beta);
  static constexpr int tbl[3][3] = {{0, 1, 2}, {-1, 3, 4}, {-1, -1, 5}};
  if (alpha < 0 || beta > 2) throw ValidationError("stress index out of range");
  return tbl[alpha][beta];
}

void ConeGeometry::validate() const {
  if (!(t2 < t1 && t1 < apex_t))
    throw ValidationError("cone: need t2 < t1 < apex_t");
}

StressEnergyField stress_tensor(const Grid2D& g, const MatrixXd& psi_t,
                                const MatrixXd& psi_x1, const MatrixXd& psi_x2,
                                double t) {
  const Eigen::Index N = psi_t.cols();
  if (psi_x1.cols() != N || psi_x2.cols() != N)
    throw ShapeMismatch("stress_tensor: component field sizes differ");
  StressEnergyField out;
  out.grid = g;
  out.t = t;
  out.T.resize(6, N);
  const RowVectorXd q0 = psi_t.colwise().squaredNorm();
  const RowVectorXd q1 = psi_x1.colwise().squaredNorm();
  const RowVectorXd q2 = psi_x2.colwise().squaredNorm();
  const RowVectorXd S = -q0 + q1 + q2;  // <psi^g, psi_g>
  out.T.row(0) = q0 + 0.5 * S;
  out.T.row(1) = (psi_t.array() * psi_x1.array()).colwise().sum();
  out.T.row(2) = (psi_t.array() * psi_x2.array()).colwise().sum();
  out.T.row(3) = q1 - 0.5 * S;
  out.T.row(4) = (psi_x1.array() * psi_x2.array()).colwise().sum();
  out.T.row(5) = q2 - 0.5 * S;
  return out;
}

StressEnergyField stress_tensor(const GaugeFieldSet& f, double t, int k) {
  const auto& lvl = f.levels.at(k);
  return stress_tensor(f.grid, lvl.psi_t, lvl.psi_x1, lvl.psi_x2, t);
}

StressEnergyField stress_tensor(const MapField& state) {
  // Ambient route: the psi inner products equal the Minkowski inner products
  // of the tangent-projected partial derivatives.
  MatrixXd d1 = grid::central_diff(state.phi, state.grid, 0);
  MatrixXd d2 = grid::central_diff(state.phi, state.grid, 1);
  geom::project_tangent_cols(state.phi, d1);
  geom::project_tangent_cols(state.phi, d2);
  const Eigen::Index N = state.phi.cols();
  StressEnergyField out;
  out.grid = state.grid;
  out.t = state.t;
  out.T.resize(6, N);
  const RowVectorXd q0 = geom::mink_inner_cols(state.phi_t, state.phi_t);
  const RowVectorXd q1 = geom::mink_inner_cols(d1, d1);
  const RowVectorXd q2 = geom::mink_inner_cols(d2, d2);
  const RowVectorXd S = -q0 + q1 + q2;
  out.T.row(0) = q0 + 0.5 * S;
  out.T.row(1) = geom::mink_inner_cols(state.phi_t, d1);
  out.T.row(2) = geom::mink_inner_cols(state.phi_t, d2);
  out.T.row(3) = q1 - 0.5 * S;
  out.T.row(4) = geom::mink_inner_cols(d1, d2);
  out.T.row(5) = q2 - 0.5 * S;
  return out;
}

MatrixXd divergence_residual(const std::vector<StressEnergyField>& slices,
                             double dt, int center) {
  if (center < 1 || center + 1 >= static_cast<int>(slices.size()))
    throw GridMismatch("divergence_residual: need slices on both sides");
  const Grid2D& g = slices[center].grid;
  for (const auto& s : slices)
    if (s.grid.n != g.n || s.T.cols() != slices[center].T.cols())
      throw GridMismatch("divergence_residual: slice grids differ");
  const StressEnergyField& c = slices[center];
  MatrixXd out(3, c.T.cols());
  for (int beta = 0; beta < 3; ++beta) {
    const int r0 = StressEnergyField::row(0, beta);
    const MatrixXd dtT = (slices[center + 1].T.row(r0) -
                          slices[center - 1].T.row(r0)) /
                         (2.0 * dt);
    const MatrixXd d1 =
        grid::central_diff(c.T.row(StressEnergyField::row(1, beta)), g, 0);
    const MatrixXd d2 =
        grid::central_diff(c.T.row(StressEnergyField::row(2, beta)), g, 1);
    out.row(beta) = -dtT + d1 + d2;
  }
  return out;
}

VectorXd coverage_weights(const Grid2D& g, const Vector2d& center, double R) {
  const double L = g.extent();
  if (!(R > 0.0)) throw ConeOutsideBox("disk radius is not positive");
  if (R + g.h >= 0.5 * L)
    throw ConeOutsideBox("disk does not fit inside half the box");
  const double hh = 0.5 * g.h;
  VectorXd w(g.num_nodes());
  par::parallel_for(g.num_nodes(), [&](std::ptrdiff_t b, std::ptrdiff_t e) {
  for (int c = static_cast<int>(b); c < static_cast<int>(e); ++c) {
    const double dx = std::remainder(g.x1(c) - center(0), L);
    const double dy = std::remainder(g.x2(c) - center(1), L);
    // Nearest / farthest points of the cell from the disk center.
    const double nx = std::max(0.0, std::abs(dx) - hh);
    const double ny = std::max(0.0, std::abs(dy) - hh);
    const double fx = std::abs(dx) + hh;
    const double fy = std::abs(dy) + hh;
    if (fx * fx + fy * fy <= R * R) {
      w(c) = 1.0;
    } else if (nx * nx + ny * ny >= R * R) {
      w(c) = 0.0;
    } else {
      // Exact circle-cell overlap: integrate the covered height
      // min(dy+hh, half(x)) - max(dy-hh, -half(x)), half(x) = sqrt(R^2-x^2),
      // splitting [dx-hh, dx+hh] where the active branch changes.
      const double a = std::max(dx - hh, -R);
      const double b = std::min(dx + hh, R);
      double area = 0.0;
      if (b > a) {
        double bp[6] = {a, b, 0, 0, 0, 0};
        int nbp = 2;
        for (double yedge : {dy - hh, dy + hh}) {
          const double rad = R * R - yedge * yedge;
          if (rad > 0.0) {
            const double xr = std::sqrt(rad);
            for (double xk : {-xr, xr})
              if (xk > a && xk < b) bp[nbp++] = xk;
          }
        }
        std::sort(bp, bp + nbp);
        // Antiderivative of sqrt(R^2 - x^2).
        auto G = [R](double x) {
          const double rad = std::max(0.0, R * R - x * x);
          return 0.5 * (x * std::sqrt(rad) +
                        R * R * std::asin(std::clamp(x / R, -1.0, 1.0)));
        };
        for (int q = 0; q + 1 < nbp; ++q) {
          const double p0 = bp[q], p1 = bp[q + 1];
          if (!(p1 > p0)) continue;
          const double xm = 0.5 * (p0 + p1);
          const double half = std::sqrt(std::max(0.0, R * R - xm * xm));
          const double hi_c = dy + hh, lo_c = dy - hh;
          double seg = 0.0;
          seg += (hi_c <= half) ? hi_c * (p1 - p0) : G(p1) - G(p0);
          seg -= (lo_c >= -half) ? lo_c * (p1 - p0) : -(G(p1) - G(p0));
          if (std::min(hi_c, half) > std::max(lo_c, -half)) area += seg;
        }
      }
      w(c) = std::clamp(area / (g.h * g.h), 0.0, 1.0);
    }
  }
  });
  return w;
}

double cone_energy(const StressEnergyField& slice, const ConeGeometry& cone) {
  const double R = cone.radius_at(slice.t);
  const VectorXd w = coverage_weights(slice.grid, cone.apex_x, R);
  const VectorXd vals = w.array() * slice.T.row(0).transpose().array();
  return grid::integrate(slice.grid, vals);
}

namespace {

int circle_samples(const Grid2D& g, double R) {
  const int by_h = static_cast<int>(std::ceil(2.0 * M_PI * R / g.h));
  return std::max(64, 4 * by_h);
}

}  // namespace

double flux_integral(const std::vector<StressEnergyField>& slices,
                     const ConeGeometry& cone, double t_lo, double t_hi) {
  std::vector<int> idx;
  std::vector<double> tw;
  slab_slices(slices, t_lo, t_hi, idx, tw);
  double total = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const StressEnergyField& s = slices[idx[k]];
    const double R = cone.radius_at(s.t);
    if (!(R > 0.0)) throw ConeOutsideBox("flux slice is past the apex");
    const int nth = circle_samples(s.grid, R);
    double ring = 0.0;
    for (int q = 0; q < nth; ++q) {
      const double th = 2.0 * M_PI * q / nth;
      const double w1 = std::cos(th), w2 = std::sin(th);
      const VectorXd T = bilinear(s.grid, s.T, cone.apex_x(0) + R * w1,
                                  cone.apex_x(1) + R * w2);
      ring += T(0) - w1 * T(1) - w2 * T(2);  // T_L0
    }
    total += tw[k] * ring * (2.0 * M_PI / nth) * R;
  }
  return total;
}

double eta_profile(const ConeGeometry& cone, double t) {
  return eta_eval(cone, t).value;
}

double eta_profile_dd(const ConeGeometry& cone, double t) {
  return eta_eval(cone, t).d2;
}

TL0Result tl0_decomposition(const GaugeFieldSet& f, const ConeGeometry& cone,
                            double t, int k, int n_samples) {
  const double R = cone.radius_at(t);
  if (!(R > 0.0)) throw ConeOutsideBox("sample time is past the apex");
  const StressEnergyField T = stress_tensor(f, t, k);
  const auto& lvl = f.levels.at(k);

  TL0Result out;
  out.lhs.resize(n_samples);
  out.rhs.resize(n_samples);
  for (int q = 0; q < n_samples; ++q) {
    const double th = 2.0 * M_PI * q / n_samples;
    const double w1 = std::cos(th), w2 = std::sin(th);
    const double x = cone.apex_x(0) + R * w1;
    const double y = cone.apex_x(1) + R * w2;
    const VectorXd Tv = bilinear(f.grid, T.T, x, y);
    out.lhs(q) = Tv(0) - w1 * Tv(1) - w2 * Tv(2);
    const VectorXd p0 = bilinear(f.grid, lvl.psi_t, x, y);
    const VectorXd p1 = bilinear(f.grid, lvl.psi_x1, x, y);
    const VectorXd p2 = bilinear(f.grid, lvl.psi_x2, x, y);
    const VectorXd pL = p0 - w1 * p1 - w2 * p2;
    const VectorXd pang = -w2 * p1 + w1 * p2;
    out.rhs(q) = 0.5 * pL.squaredNorm() + 0.5 * pang.squaredNorm();
  }
  out.defect = (out.lhs - out.rhs).cwiseAbs().maxCoeff();
  out.min_value = out.lhs.minCoeff();
  return out;
}

StokesResult stokes_check(const std::vector<StressEnergyField>& slices,
                          const XFieldSpec& X, const ConeGeometry& cone) {
  cone.validate();
  const bool mollified = (X.kind == XFieldSpec::Kind::Mollified);
  if (mollified) {
    if (!(cone.epsilon > 0.0))
      throw SingularField("mollified Stokes field requires epsilon > 0");
    if (!(cone.lambda() > 4.0))
      throw ValidationError("mollified Stokes field requires lambda > 4");
  }

  std::vector<int> idx;
  std::vector<double> tw;
  slab_slices(slices, cone.t2, cone.t1, idx, tw);
  if (std::abs(slices[idx.front()].t - cone.t2) > 1e-9 ||
      std::abs(slices[idx.back()].t - cone.t1) > 1e-9)
    throw GridMismatch("stokes_check: slices must hit t2 and t1 exactly");

  const Grid2D& g = slices[idx[0]].grid;
  const double tau1 = cone.t1 - cone.apex_t;

  // X^beta (upper index) at physical (t, x).
  auto Xvec = [&](double t, double dx1, double dx2, double rho) {
    Eigen::Vector3d out;
    if (!mollified) {
      out << 1.0, 0.0, 0.0;
      return out;
    }
    const Eta e = eta_eval(cone, t);
    const double tau = t - cone.apex_t;
    const double xt0 = tau + cone.epsilon * tau1;
    out(0) = e.value * xt0 / rho - e.d1 * rho;
    out(1) = e.value * dx1 / rho;
    out(2) = e.value * dx2 / rho;
    return out;
  };
  auto rho_tilde = [&](double t, double dx1, double dx2) {
    if (!mollified) return 1.0;  // unused
    const double tau = t - cone.apex_t;
    const double xt0 = tau + cone.epsilon * tau1;
    const double r2 = xt0 * xt0 - dx1 * dx1 - dx2 * dx2;
    if (!(r2 > 0.0))
      throw SingularField("rho-tilde not positive on the truncated cone");
    return std::sqrt(r2);
  };

  // int_{D(t)} T_{0b} X^b with coverage weights.
  auto disk_term = [&](const StressEnergyField& s) {
    const double R = cone.radius_at(s.t);
    const VectorXd w = coverage_weights(g, cone.apex_x, R);
    VectorXd vals = VectorXd::Zero(g.num_nodes());
    for (int c = 0; c < g.num_nodes(); ++c) {
      if (w(c) == 0.0) continue;
      const double dx1 = std::remainder(g.x1(c) - cone.apex_x(0), g.extent());
      const double dx2 = std::remainder(g.x2(c) - cone.apex_x(1), g.extent());
      const Eigen::Vector3d Xb =
          Xvec(s.t, dx1, dx2, rho_tilde(s.t, dx1, dx2));
      vals(c) = w(c) * (s.T(0, c) * Xb(0) + s.T(1, c) * Xb(1) +
                        s.T(2, c) * Xb(2));
    }
    return grid::integrate(g, vals);
  };

  StokesResult res;
  res.disk_far = disk_term(slices[idx.front()]);   // at t2
  res.disk_near = disk_term(slices[idx.back()]);   // at t1

  if (!mollified) {
    res.mantle = flux_integral(slices, cone, cone.t2, cone.t1);
    res.bulk = 0.0;
  } else {
    // Mantle: oint (T_{0b} - w_j T_{jb}) X^b R dtheta, trapezoid in t.
    double mantle = 0.0, bulk = 0.0, bulk_main = 0.0, bulk_eta2 = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const StressEnergyField& s = slices[idx[k]];
      const double R = cone.radius_at(s.t);
      const Eta e = eta_eval(cone, s.t);
      const double tau = s.t - cone.apex_t;
      const double xt0 = tau + cone.epsilon * tau1;

      const int nth = circle_samples(g, R);
      double ring = 0.0;
      for (int q = 0; q < nth; ++q) {
        const double th = 2.0 * M_PI * q / nth;
        const double w1 = std::cos(th), w2 = std::sin(th);
        const double dx1 = R * w1, dx2 = R * w2;
        const VectorXd T = bilinear(g, s.T, cone.apex_x(0) + dx1,
                                    cone.apex_x(1) + dx2);
        const Eigen::Vector3d Xb =
            Xvec(s.t, dx1, dx2, rho_tilde(s.t, dx1, dx2));
        const double f0 = T(0) * Xb(0) + T(1) * Xb(1) + T(2) * Xb(2);
        const double f1 = T(1) * Xb(0) + T(3) * Xb(1) + T(4) * Xb(2);
        const double f2 = T(2) * Xb(0) + T(4) * Xb(1) + T(5) * Xb(2);
        ring += f0 - w1 * f1 - w2 * f2;
      }
      mantle += tw[k] * ring * (2.0 * M_PI / nth) * R;

      // Bulk: eta |xt^a psi_a|^2 / rho^3 + eta'' rho T_00, where
      // |xt^a psi_a|^2 = T_ab xt^a xt^b + rho^2 tr(T); trace terms cancel
      // against the contraction of T with d^a(xt^b / rho).
      const VectorXd w = coverage_weights(g, cone.apex_x, R);
      VectorXd vmain = VectorXd::Zero(g.num_nodes());
      VectorXd veta2 = VectorXd::Zero(g.num_nodes());
      for (int c = 0; c < g.num_nodes(); ++c) {
        if (w(c) == 0.0) continue;
        const double dx1 = std::remainder(g.x1(c) - cone.apex_x(0), g.extent());
        const double dx2 = std::remainder(g.x2(c) - cone.apex_x(1), g.extent());
        const double rho = rho_tilde(s.t, dx1, dx2);
        const double Txx = xt0 * xt0 * s.T(0, c) + 2 * xt0 * dx1 * s.T(1, c) +
                           2 * xt0 * dx2 * s.T(2, c) + dx1 * dx1 * s.T(3, c) +
                           2 * dx1 * dx2 * s.T(4, c) + dx2 * dx2 * s.T(5, c);
        const double tr = -s.T(0, c) + s.T(3, c) + s.T(5, c);
        const double contraction = Txx + rho * rho * tr;
        vmain(c) = w(c) * e.value * contraction / (rho * rho * rho);
        veta2(c) = w(c) * e.d2 * rho * s.T(0, c);
      }
      bulk_main += tw[k] * grid::integrate(g, vmain);
      bulk_eta2 += tw[k] * grid::integrate(g, veta2);
    }
    bulk = bulk_main + bulk_eta2;
    res.mantle = mantle;
    res.bulk = bulk;
    res.bulk_main = bulk_main;
    res.bulk_eta2 = bulk_eta2;
  }
  res.defect =
      std::abs(res.disk_far - res.disk_near - res.mantle - res.bulk);
  return res;
}

double selfsimilar_functional(const std::vector<StressEnergyField>& slices,
                              const ConeGeometry& cone, double T_lo, double T_hi,
                              std::vector<double>* block_integrals) {
  std::vector<int> idx;
  std::vector<double> tw;
  slab_slices(slices, T_lo, T_hi, idx, tw);
  std::map<int, double> blocks;
  double total = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const StressEnergyField& s = slices[idx[k]];
    const double tau = s.t - cone.apex_t;
    if (!(tau < 0.0)) throw ConeOutsideBox("slab reaches past the apex");
    const double R = -tau;
    const Grid2D& g = s.grid;
    const VectorXd w = coverage_weights(g, cone.apex_x, R);
    VectorXd vals = VectorXd::Zero(g.num_nodes());
    for (int c = 0; c < g.num_nodes(); ++c) {
      if (w(c) == 0.0) continue;
      const double dx1 = std::remainder(g.x1(c) - cone.apex_x(0), g.extent());
      const double dx2 = std::remainder(g.x2(c) - cone.apex_x(1), g.extent());
      const double tr = -s.T(0, c) + s.T(3, c) + s.T(5, c);
      // |(1/tau) psi_S|^2 = |psi_0 + (x_j / tau) psi_j|^2 from the tensor
      // components; <psi_0, psi_0> = T00 + tr, <psi_j, psi_j> = Tjj - tr.
      const double q = (s.T(0, c) + tr) +
                       (2.0 / tau) * (dx1 * s.T(1, c) + dx2 * s.T(2, c)) +
                       (dx1 * dx1 * (s.T(3, c) - tr) +
                        2 * dx1 * dx2 * s.T(4, c) +
                        dx2 * dx2 * (s.T(5, c) - tr)) /
                           (tau * tau);
      vals(c) = w(c) * q;
    }
    const double I = grid::integrate(g, vals) * tw[k] / (-tau);
    total += I;
    blocks[static_cast<int>(std::floor(std::log2(-tau)))] += I;
  }
  if (block_integrals) {
    block_integrals->clear();
    for (const auto& [b, v] : blocks) block_integrals->push_back(v);
  }
  const double norm =
      std::abs(std::log((T_hi - cone.apex_t) / (T_lo - cone.apex_t)));
  return total / norm;
}

ConeReport build_cone_report(const std::vector<StressEnergyField>& slices,
                             const ConeGeometry& cone) {
  if (slices.size() < 2)
    throw ValidationError("cone report needs at least two slices");
  ConeReport rep;
  rep.n = slices[0].grid.n;
  rep.h = slices[0].grid.h;
  rep.dt = slices[1].t - slices[0].t;
  for (const auto& s : slices) {
    rep.times.push_back(s.t);
    rep.energies.push_back(cone_energy(s, cone));
  }
  rep.E0 = rep.energies.front();
  for (std::size_t i = 0; i + 1 < slices.size(); ++i) {
    const double flux =
        flux_integral(slices, cone, slices[i].t, slices[i + 1].t);
    rep.fluxes.push_back(flux);
    rep.defects.push_back(
        std::abs(rep.energies[i + 1] + flux - rep.energies[i]));
  }
  rep.scaled_decay = selfsimilar_functional(
      slices, cone, slices.front().t, slices.back().t, &rep.block_integrals);
  return rep;
}

}  // namespace cwm::stress
