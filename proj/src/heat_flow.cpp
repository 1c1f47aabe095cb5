#include "cwm/heat_flow.hpp"

#include <cmath>

namespace cwm::heat {

using geom::mink_inner_cols;

void HeatConfig::validate() const {
  if (!(ratio > 1.0 && ratio <= 1.2))
    throw ValidationError("heat.ratio must lie in (1, 1.2]");
  if (max_levels < 1) throw ValidationError("heat.max_levels must be >= 1");
  if (!(stability_factor > 0 && stability_factor <= 0.25))
    throw ValidationError("heat.stability_factor must lie in (0, 0.25]");
}

MatrixXd heat_velocity(const Grid2D& g, const geom::TargetConfig& tc,
                       const MatrixXd& phi) {
  MatrixXd lap = grid::laplacian(phi, g);
  geom::project_tangent_cols(phi, lap);
  return lap;
}

void heat_step(const Grid2D& g, const geom::TargetConfig& tc, MatrixXd& phi,
               MatrixXd* passenger, double ds, double stability_factor) {
  if (!(ds > 0) || ds > stability_factor * g.h * g.h * (1.0 + 1e-12))
    throw StabilityViolation("heat_step: ds exceeds the explicit stability bound");
  const double r2 = tc.radius_sq();
  const MatrixXd lap = grid::laplacian(phi, g);
  const RowVectorXd lp = mink_inner_cols(lap, phi);
  // G(phi) = Lap phi - (<Lap phi, phi>/<phi,phi>) phi, <phi,phi> = -r^2.
  MatrixXd vel = lap + phi * (lp.array() / r2).matrix().asDiagonal();

  if (passenger) {
    // Exact linearization of G at phi in the direction of the passenger.
    MatrixXd& V = *passenger;
    const MatrixXd lapV = grid::laplacian(V, g);
    const RowVectorXd t1 = mink_inner_cols(lapV, phi);
    const RowVectorXd t2 = mink_inner_cols(lap, V);
    MatrixXd dG = lapV + phi * ((t1 + t2).array() / r2).matrix().asDiagonal()
                  + V * (lp.array() / r2).matrix().asDiagonal();
    V += ds * dG;
  }

  phi += ds * vel;
  geom::project_point_cols(tc, phi);
  if (passenger) geom::project_tangent_cols(phi, *passenger);
}

double sup_gradient(const Grid2D& g, const geom::TargetConfig& tc,
                    const MatrixXd& phi) {
  MatrixXd d1 = grid::central_diff(phi, g, 0);
  MatrixXd d2 = grid::central_diff(phi, g, 1);
  geom::project_tangent_cols(phi, d1);
  geom::project_tangent_cols(phi, d2);
  const RowVectorXd sq =
      mink_inner_cols(d1, d1) + mink_inner_cols(d2, d2);
  return std::sqrt(std::max(0.0, sq.maxCoeff()));
}

double dirichlet_energy(const Grid2D& g, const geom::TargetConfig& tc,
                        const MatrixXd& phi) {
  MatrixXd d1 = grid::central_diff(phi, g, 0);
  MatrixXd d2 = grid::central_diff(phi, g, 1);
  geom::project_tangent_cols(phi, d1);
  geom::project_tangent_cols(phi, d2);
  const VectorXd dens =
      0.5 * (mink_inner_cols(d1, d1) + mink_inner_cols(d2, d2)).transpose();
  return grid::integrate(g, dens);
}

HeatLadder build_ladder(const MapField& state, const HeatConfig& cfg) {
  cfg.validate();
  const Grid2D& g = state.grid;
  const geom::TargetConfig& tc = state.target;
  const double ds_stable = cfg.stability_factor * g.h * g.h;
  const double ds0 = cfg.ds0 > 0 ? cfg.ds0 : ds_stable;

  HeatLadder lad;
  lad.base_t = state.t;
  lad.grid = g;
  lad.target = tc;

  MatrixXd phi = state.phi;
  MatrixXd phi_t = state.phi_t;
  auto record = [&](double s) {
    lad.s_levels.push_back(s);
    lad.phi.push_back(phi);
    lad.dphi_ds.push_back(heat_velocity(g, tc, phi));
    lad.dphi_dt.push_back(phi_t);
    lad.sup_grad.push_back(sup_gradient(g, tc, phi));
  };
  record(0.0);
  lad.eps_stop_abs = cfg.eps_stop_rel * lad.sup_grad[0];

  double s = 0.0;
  double interval = ds0;
  bool converged = lad.sup_grad[0] <= lad.eps_stop_abs;
  while (!converged) {
    if (lad.levels() >= cfg.max_levels)
      throw NoConvergence("build_ladder: max_levels reached before eps_stop");
    const int nsub = std::max(1, static_cast<int>(std::ceil(interval / ds_stable)));
    const double ds = interval / nsub;
    for (int k = 0; k < nsub; ++k)
      heat_step(g, tc, phi, &phi_t, ds, cfg.stability_factor);
    s += interval;
    record(s);
    interval *= cfg.ratio;
    converged = lad.sup_grad.back() <= lad.eps_stop_abs;
  }

  lad.phi_infinity = geom::karcher_mean(tc, lad.phi.back());
  double tail = 0.0;
  for (Eigen::Index c = 0; c < phi.cols(); ++c)
    tail = std::max(tail, geom::distance(tc, lad.phi_infinity, phi.col(c)));
  lad.tail_distance = tail;
  return lad;
}

HeatLadder build_ladder_fixed(const MapField& state,
                              const std::vector<double>& s_levels,
                              double stability_factor) {
  const Grid2D& g = state.grid;
  const geom::TargetConfig& tc = state.target;
  const double ds_stable = stability_factor * g.h * g.h;

  HeatLadder lad;
  lad.base_t = state.t;
  lad.grid = g;
  lad.target = tc;

  MatrixXd phi = state.phi;
  MatrixXd phi_t = state.phi_t;
  auto record = [&](double s) {
    lad.s_levels.push_back(s);
    lad.phi.push_back(phi);
    lad.dphi_ds.push_back(heat_velocity(g, tc, phi));
    lad.dphi_dt.push_back(phi_t);
    lad.sup_grad.push_back(sup_gradient(g, tc, phi));
  };
  if (s_levels.empty() || s_levels.front() != 0.0)
    throw ValidationError("build_ladder_fixed: s_levels must start at 0");
  record(0.0);
  for (std::size_t k = 1; k < s_levels.size(); ++k) {
    const double interval = s_levels[k] - s_levels[k - 1];
    if (!(interval > 0))
      throw ValidationError("build_ladder_fixed: s_levels must increase");
    const int nsub = std::max(1, static_cast<int>(std::ceil(interval / ds_stable)));
    const double ds = interval / nsub;
    for (int j = 0; j < nsub; ++j)
      heat_step(g, tc, phi, &phi_t, ds, stability_factor);
    record(s_levels[k]);
  }
  lad.eps_stop_abs = lad.sup_grad.back();
  lad.phi_infinity = geom::karcher_mean(tc, lad.phi.back());
  double tail = 0.0;
  for (Eigen::Index c = 0; c < phi.cols(); ++c)
    tail = std::max(tail, geom::distance(tc, lad.phi_infinity, phi.col(c)));
  lad.tail_distance = tail;
  return lad;
}

}  // namespace cwm::heat
