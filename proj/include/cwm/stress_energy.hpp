#pragma once

#include "cwm/caloric_gauge.hpp"
#include "cwm/wave_evolver.hpp"

#include <vector>

// Stress-energy tensor at s = 0, conservation residuals, truncated-cone
// energy/flux apparatus, the mollified-Stokes check, and the scaled-decay
// functional.  All cone quadratures are second order: disk integrals use
// cell-coverage weights, circle integrals bilinear interpolation.
namespace cwm::stress {

using gauge::GaugeFieldSet;
using gauge::NormPair;
using grid::Grid2D;
using grid::MapField;

// Symmetric 3x3 tensor per node, rows T00, T01, T02, T11, T12, T22.
struct StressEnergyField {
  Grid2D grid;
  double t = 0.0;
  MatrixXd T;  // 6 x N

  static int row(int alpha, int beta);
  // Component field as a 1 x N row expression.
  RowVectorXd comp(int alpha, int beta) const { return T.row(row(alpha, beta)); }
  // Minkowski trace g^{ab} T_ab = -T00 + T11 + T22.
  RowVectorXd trace() const { return -T.row(0) + T.row(3) + T.row(5); }
};

// Truncated forward light cone: apex at (apex_t, apex_x), slab t2 < t1 <
// apex_t.  lambda = |t2 - apex_t| / |t1 - apex_t|; the mollified Stokes field
// requires lambda > 4 and epsilon > 0.
struct ConeGeometry {
  double apex_t = 0.0;
  Vector2d apex_x = Vector2d::Zero();
  double t1 = 0.0;
  double t2 = 0.0;
  double epsilon = 1.0;

  double radius_at(double t) const { return apex_t - t; }
  double lambda() const { return (apex_t - t2) / (apex_t - t1); }
  void validate() const;
};

struct XFieldSpec {
  enum class Kind { TimeTranslation, Mollified };
  Kind kind = Kind::TimeTranslation;
};

struct StokesResult {
  double disk_far = 0.0;    // int_{D(t2)} T_{0b} X^b
  double disk_near = 0.0;   // int_{D(t1)} T_{0b} X^b
  double mantle = 0.0;      // mantle integral of (T_{0b} - w_j T_{jb}) X^b
  double bulk = 0.0;        // int_K T_{ab} d^a X^b
  double bulk_main = 0.0;   // eta |xt^a psi_a|^2 / rho^3 part (>= 0)
  double bulk_eta2 = 0.0;   // eta'' rho T_00 part
  double defect = 0.0;      // |disk_far - disk_near - mantle - bulk|
};

struct ConeReport {
  int n = 0;
  double h = 0.0;
  double dt = 0.0;
  double E0 = 0.0;
  std::vector<double> times;
  std::vector<double> energies;        // cone energy per slice
  std::vector<double> fluxes;          // mantle flux per slice interval
  std::vector<double> defects;         // energy-identity defect per interval
  double scaled_decay = 0.0;           // normalized self-similarity functional
  std::vector<double> block_integrals; // un-normalized, per dyadic |t|-block
};

// --- tensor assembly ----------------------------------------------------------

// From raw derivative components (any orthonormal gauge).
StressEnergyField stress_tensor(const Grid2D& g, const MatrixXd& psi_t,
                                const MatrixXd& psi_x1, const MatrixXd& psi_x2,
                                double t);
// Gauge route: components at s-level k of a field set.
StressEnergyField stress_tensor(const GaugeFieldSet& f, double t, int k = 0);
// Direct route from the map itself (no gauge needed).
StressEnergyField stress_tensor(const MapField& state);

// --- conservation ---------------------------------------------------------------

// Centered d^a T_{ab} at slice `center` of >= 3 consecutive slices with
// uniform spacing dt; rows are beta = t, x1, x2.
MatrixXd divergence_residual(const std::vector<StressEnergyField>& slices,
                             double dt, int center);

// --- cone quadratures -----------------------------------------------------------

// Coverage fraction in [0, 1] of each node's cell by the disk of radius R
// about `center` (min-image); boundary cells by exact circle-cell overlap.
// Throws ConeOutsideBox if the disk does not fit in half the box.
VectorXd coverage_weights(const Grid2D& g, const Vector2d& center, double R);

// int_{|x - x*| <= R(t)} T_00 dx.
double cone_energy(const StressEnergyField& slice, const ConeGeometry& cone);

// T_L0 = T00 - w_j Tj0 sampled on the circle of radius R about the apex.
// int_{t_lo}^{t_hi} oint T_L0 R dtheta dt over the cone mantle (trapezoid in
// t over the slices that fall in [t_lo, t_hi]).
double flux_integral(const std::vector<StressEnergyField>& slices,
                     const ConeGeometry& cone, double t_lo, double t_hi);

// --- null decomposition ------------------------------------------------------------

struct TL0Result {
  VectorXd lhs;        // T_L0 from the interpolated tensor
  VectorXd rhs;        // 0.5 |psi_L|^2 + 0.5 |psi_ang|^2 from interpolated psi
  double defect = 0.0; // sup |lhs - rhs|
  double min_value = 0.0;
};
// Boundary samples on the circle of the cone at slice time `t`; the two
// sides interpolate different quantities, so agreement is a real check.
TL0Result tl0_decomposition(const GaugeFieldSet& f, const ConeGeometry& cone,
                            double t, int k = 0, int n_samples = 256);

// --- Stokes identity ---------------------------------------------------------------

// Both sides of the divergence identity for T_{ab} X^b over the truncated
// cone.  `slices` must cover [t2, t1] with uniform dt and hit the endpoints.
StokesResult stokes_check(const std::vector<StressEnergyField>& slices,
                          const XFieldSpec& X, const ConeGeometry& cone);

// Cutoff profile eta(tau), tau = t - apex_t < 0: quintic-smoothstep ramps,
// identically 1 on (tau2/2, 2*tau1), supported in (tau2, tau1).  Exposed for
// tests together with its analytic second derivative.
double eta_profile(const ConeGeometry& cone, double t);
double eta_profile_dd(const ConeGeometry& cone, double t);

// --- scaled decay -----------------------------------------------------------------

// (1 / |log((T_hi - t*) / (T_lo - t*))|) * sum_t sum_{|x| < |tau|}
// |(1/tau) psi_S|^2 h^2 (dt / |tau|), with psi_S = tau psi_0 + x_j psi_j
// relative to the apex.  Optionally reports the un-normalized integrals per
// dyadic |tau|-block.
double selfsimilar_functional(const std::vector<StressEnergyField>& slices,
                              const ConeGeometry& cone, double T_lo, double T_hi,
                              std::vector<double>* block_integrals = nullptr);

// --- report ----------------------------------------------------------------------

ConeReport build_cone_report(const std::vector<StressEnergyField>& slices,
                             const ConeGeometry& cone);

}  // namespace cwm::stress
