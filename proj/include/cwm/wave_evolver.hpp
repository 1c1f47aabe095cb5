#pragma once

#include "cwm/grid_fields.hpp"

#include <vector>

// Time evolution of the wave map at s = 0 in the extrinsic constrained
// formulation: phi_tt = Lap(phi) + lambda * phi, with the multiplier solved
// per node so the sheet constraint <phi,phi>_M = -1/|kappa| holds exactly
// after every step (a RATTLE-type leapfrog, time-reversible and second
// order).
namespace cwm::wave {

using grid::Grid2D;
using grid::MapField;

struct InitialDataSpec {
  enum class Kind { GeodesicBump, MultiBump, BoostedBump };
  Kind kind = Kind::GeodesicBump;
  double amplitude = 1.0;
  double width = 0.125;  // in length units
  std::vector<Vector2d> centers = {Vector2d(0.5, 0.5)};
  VectorXd direction;  // tangent direction at p0; defaults to e_1
  VectorXd p0;         // defaults to the base point
  double boost_speed = 0.5;  // BoostedBump only
};

struct WaveRunConfig {
  double cfl = 0.4;  // dt = cfl * h
  double T = 0.25;
  InitialDataSpec data;
};

// Smooth compactly supported bump profile, B(0) = 1, B(|rho| >= 1) = 0.
double bump_profile(double rho);

// Builds phi(x) = exp_{p0}(chi(x) v) with chi a compactly supported bump of
// height `amplitude` and radius `width` around each center.  Throws
// SupportTooLarge when width + margin exceeds half the box.
MapField make_initial_data(const Grid2D& g, const geom::TargetConfig& tc,
                           const InitialDataSpec& spec, double margin = 0.0);

// One leapfrog step; phi and phi_t satisfy their invariants exactly on exit.
// Throws NotTimelike when the constraint solve fails (step too large or
// genuine focusing).
void wave_step(MapField& state, double dt);

double energy(const MapField& state);

// Pointwise energy density 1/2 (|phi_t|^2 + |P d1 phi|^2 + |P d2 phi|^2).
grid::ScalarField energy_density(const MapField& state);

struct Trajectory {
  std::vector<MapField> slices;   // every `snapshot_every` steps, ends included
  std::vector<double> times;      // per recorded slice
  std::vector<double> energies;   // per step (index 0 = initial)
  double dt = 0.0;
};

Trajectory evolve(const MapField& init, double T, double dt, int snapshot_every = 1);

}  // namespace cwm::wave
