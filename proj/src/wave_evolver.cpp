#include "cwm/wave_evolver.hpp"

#include <cmath>

namespace cwm::wave {

using geom::mink_inner_cols;

double bump_profile(double rho) {
  const double r2 = rho * rho;
  if (r2 >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - r2));
}

namespace {
// Minimum-image displacement on the torus.
double torus_dist(const Grid2D& g, double x1, double x2, const Vector2d& c) {
  const double L = g.extent();
  double d1 = std::remainder(x1 - c(0), L);
  double d2 = std::remainder(x2 - c(1), L);
  return std::sqrt(d1 * d1 + d2 * d2);
}
}  // namespace

MapField make_initial_data(const Grid2D& g, const geom::TargetConfig& tc,
                           const InitialDataSpec& spec, double margin) {
  g.validate();
  tc.validate();
  const double L = g.extent();
  if (spec.width + margin > 0.5 * L)
    throw SupportTooLarge("initial data support + margin exceeds half the box");

  VectorXd p0 = spec.p0.size() ? spec.p0 : geom::base_point(tc);
  VectorXd dir = spec.direction;
  if (!dir.size()) {
    dir = VectorXd::Zero(tc.ambient_dim());
    dir(1) = 1.0;
  }
  dir = geom::project_tangent(p0, dir);
  const double dlen = geom::tangent_norm(dir);
  if (dlen == 0.0) throw ValidationError("initial data direction is normal to the sheet");
  dir /= dlen;

  MapField f;
  f.grid = g;
  f.target = tc;
  f.t = 0.0;
  const int N = g.num_nodes();
  f.phi.resize(tc.ambient_dim(), N);
  for (int c = 0; c < N; ++c) {
    double chi = 0.0;
    for (const auto& ctr : spec.centers)
      chi += spec.amplitude * bump_profile(torus_dist(g, g.x1(c), g.x2(c), ctr) / spec.width);
    f.phi.col(c) = geom::geodesic_exp(tc, p0, chi * dir);
  }

  if (spec.kind == InitialDataSpec::Kind::BoostedBump) {
    f.phi_t = grid::central_diff(f.phi, g, 0);
    f.phi_t *= -spec.boost_speed;
    geom::project_tangent_cols(f.phi, f.phi_t);
  } else {
    f.phi_t = MatrixXd::Zero(tc.ambient_dim(), N);
  }
  return f;
}

void wave_step(MapField& state, double dt) {
  const double r2 = state.target.radius_sq();
  const double beta = 0.5 * dt * dt;
  const MatrixXd lap0 = grid::laplacian(state.phi, state.grid);

  // Drift with the position multiplier: phi' = c + beta*lambda*phi, lambda
  // the root of the per-node constraint quadratic that vanishes as dt -> 0.
  MatrixXd c = state.phi + dt * state.phi_t + beta * lap0;
  const RowVectorXd cc = mink_inner_cols(c, c);
  const RowVectorXd cp = mink_inner_cols(c, state.phi);
  RowVectorXd lambda(c.cols());
  for (Eigen::Index k = 0; k < c.cols(); ++k) {
    const double a = -r2 * beta * beta;
    const double b = 2.0 * beta * cp(k);
    const double c0 = cc(k) + r2;
    const double disc = b * b - 4.0 * a * c0;
    if (!(disc >= 0.0))
      throw NotTimelike("wave_step: constraint solve failed (reduce dt or mesh)");
    const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    lambda(k) = (q != 0.0) ? c0 / q : 0.0;
  }
  MatrixXd phi_new = c + state.phi * (beta * lambda.array()).matrix().asDiagonal();
  for (Eigen::Index k = 0; k < phi_new.cols(); ++k)
    if (!(phi_new(0, k) > 0.0))
      throw NotTimelike("wave_step: node left the upper sheet");

  // Velocity half-kicks; the final multiplier restores exact tangency.
  MatrixXd v = state.phi_t + (0.5 * dt) * (lap0 + state.phi * lambda.asDiagonal());
  v += (0.5 * dt) * grid::laplacian(phi_new, state.grid);
  const RowVectorXd wp = mink_inner_cols(v, phi_new);
  const RowVectorXd mu = wp / (0.5 * dt * r2);
  v += (0.5 * dt) * (phi_new * mu.asDiagonal());

  state.phi = std::move(phi_new);
  state.phi_t = std::move(v);
  state.t += dt;
}

double energy(const MapField& state) {
  return grid::integrate(state.grid, energy_density(state).v);
}

grid::ScalarField energy_density(const MapField& state) {
  const MatrixXd d1 = grid::map_derivative(state, 0);
  const MatrixXd d2 = grid::map_derivative(state, 1);
  RowVectorXd dens = mink_inner_cols(state.phi_t, state.phi_t);
  dens += mink_inner_cols(d1, d1);
  dens += mink_inner_cols(d2, d2);
  grid::ScalarField out;
  out.grid = state.grid;
  out.v = 0.5 * dens.transpose();
  return out;
}

Trajectory evolve(const MapField& init, double T, double dt, int snapshot_every) {
  if (!(dt > 0)) throw ValidationError("evolve: dt must be > 0");
  if (snapshot_every < 1) snapshot_every = 1;
  Trajectory traj;
  traj.dt = dt;
  MapField state = init;
  traj.slices.push_back(state);
  traj.times.push_back(state.t);
  traj.energies.push_back(energy(state));
  const int steps = static_cast<int>(std::llround(T / dt));
  for (int k = 1; k <= steps; ++k) {
    wave_step(state, dt);
    traj.energies.push_back(energy(state));
    if (k % snapshot_every == 0 || k == steps) {
      traj.slices.push_back(state);
      traj.times.push_back(state.t);
    }
  }
  return traj;
}

}  // namespace cwm::wave
