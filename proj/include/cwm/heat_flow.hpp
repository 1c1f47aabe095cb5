#pragma once

#include "cwm/grid_fields.hpp"

#include <vector>

// Harmonic-map heat flow in the auxiliary variable s for a fixed wave-time
// slice, producing the nonlinear Littlewood-Paley ladder.  Explicit Euler
// sub-steps with ds <= h^2/4; output levels on a geometric s-grid.
namespace cwm::heat {

using grid::Grid2D;
using grid::MapField;

struct HeatConfig {
  double ds0 = -1.0;          // first interval; defaults to h^2/4
  double ratio = 1.1;         // geometric growth of output intervals
  double eps_stop_rel = 1e-6; // stop when sup-gradient <= rel * initial
  int max_levels = 400;
  double stability_factor = 0.25;  // ds <= factor * h^2
  void validate() const;
};

struct HeatLadder {
  double base_t = 0.0;
  Grid2D grid;
  geom::TargetConfig target;
  std::vector<double> s_levels;     // s_0 = 0 < s_1 < ... < s_K
  std::vector<MatrixXd> phi;        // map per level
  std::vector<MatrixXd> dphi_ds;    // tangent-projected Laplacian per level
  std::vector<MatrixXd> dphi_dt;    // carried t-derivative per level
  std::vector<double> sup_grad;     // sup_x |d_x phi|_h per level
  VectorXd phi_infinity;            // Karcher mean of the final slice
  double eps_stop_abs = 0.0;
  double tail_distance = 0.0;       // sup_x d(phi(s_K, x), phi_infinity)

  int levels() const { return static_cast<int>(s_levels.size()); }
};

// Tangent-projected Laplacian P_phi(Lap phi); the right-hand side of the flow.
MatrixXd heat_velocity(const Grid2D& g, const geom::TargetConfig& tc,
                       const MatrixXd& phi);

// One explicit Euler step of the flow, followed by exact point projection.
// `passenger`, when non-null, is advanced by the exact linearization of the
// same update and re-projected tangent.  Throws StabilityViolation.
void heat_step(const Grid2D& g, const geom::TargetConfig& tc, MatrixXd& phi,
               MatrixXd* passenger, double ds,
               double stability_factor = 0.25);

double sup_gradient(const Grid2D& g, const geom::TargetConfig& tc,
                    const MatrixXd& phi);

// Integral of 1/2 |d_x phi|^2 (the quantity the flow descends).
double dirichlet_energy(const Grid2D& g, const geom::TargetConfig& tc,
                        const MatrixXd& phi);

// Flows `state` to convergence, recording the geometric ladder.  Throws
// NoConvergence when max_levels is reached before the stopping criterion.
HeatLadder build_ladder(const MapField& state, const HeatConfig& cfg);

// Flows `state` along a prescribed s-grid (no stopping test); used to match
// ladders across adjacent wave times.
HeatLadder build_ladder_fixed(const MapField& state,
                              const std::vector<double>& s_levels,
                              double stability_factor = 0.25);

}  // namespace cwm::heat
