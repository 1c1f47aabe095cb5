#pragma once

#include "cwm/heat_flow.hpp"

#include <map>
#include <string>
#include <vector>

// Canonical heat-temporal (caloric) gauge along a heat-flow ladder: frame
// transport with A_s = 0 by construction, extraction of the differentiated
// fields, gauge transforms, and the structural-identity residual suite.
//
// Index convention: alpha in {0 = t, 1 = x1, 2 = x2}; Minkowski signature
// (-,+,+), so raising an index flips the sign of the t-component only.
namespace cwm::gauge {

using grid::Grid2D;
using grid::MapField;
using heat::HeatConfig;
using heat::HeatLadder;

// Frames are stored flattened: column c of e[k] holds the (m+1) x m frame at
// node c in column-major order (e_i = block i).
struct FrameField {
  Grid2D grid;
  geom::TargetConfig target;
  std::vector<MatrixXd> e;  // per s-level: ((m+1)*m) x N
  VectorXd phi_infinity;
  MatrixXd e_infinity;      // (m+1) x m seed frame
  // Sup over nodes of |<P(delta_s e_j), e_i>| for each backward transport
  // step; O(ds^2) per step when the transport is consistent.
  std::vector<double> step_residual;
};

struct GaugeLevel {
  MatrixXd psi_t, psi_x1, psi_x2, psi_s;  // m x N
  MatrixXd A_x1, A_x2;                    // m^2 x N, exactly skew
  MatrixXd A_t;                           // m^2 x N; empty unless bundled
  bool has_A_t() const { return A_t.size() > 0; }
};

struct GaugeFieldSet {
  Grid2D grid;
  geom::TargetConfig target;
  std::vector<double> s_levels;
  std::vector<GaugeLevel> levels;
};

struct NormPair {
  double sup = 0.0;
  double l2 = 0.0;
};

struct ReportEntry {
  std::string identity;
  std::string norm;
  double value = 0.0;
};

struct ReconstructionReport {
  int n = 0;
  double h = 0.0;
  double ds0 = 0.0;
  double tail_bound = 0.0;
  double psi_correction_ratio = 0.0;  // ||Psi|| / ||psi||
  std::vector<ReportEntry> entries;
};

// --- frame construction -----------------------------------------------------

// Seed at s_max by geodesic transport of e_seed from phi_inf to each node,
// re-orthonormalized; then the backward parallel-transport sweep (discrete
// nabla_s e = 0).
FrameField transport_frame(const HeatLadder& ladder, const VectorXd& phi_inf,
                           const MatrixXd& e_seed);

// --- field extraction --------------------------------------------------------

GaugeFieldSet extract_fields(const HeatLadder& ladder, const FrameField& frames);

// --- gauge action ------------------------------------------------------------

// U: m^2 x N rotation per node (s-independent), or a single m x m matrix
// broadcast over nodes.  Throws NotOrthogonal beyond 1e-10.
void gauge_transform(GaugeFieldSet& fields, FrameField& frames, const MatrixXd& U);

// --- per-node algebra helpers (exposed for tests) -----------------------------

// (u ^ v) w = u <v,w> - v <u,w>; returns the m x m matrix u v^T - v u^T.
MatrixXd wedge(const VectorXd& u, const VectorXd& v);
// Columnwise wedge of two m x N fields -> m^2 x N.
MatrixXd wedge_cols(const MatrixXd& u, const MatrixXd& v);
// Columnwise matrix-vector action of an m^2 x N field on an m x N field.
MatrixXd apply_cols(const MatrixXd& A, const MatrixXd& v);
// Columnwise commutator [A, B] of two m^2 x N fields.
MatrixXd commutator_cols(const MatrixXd& A, const MatrixXd& B);

NormPair field_norms(const Grid2D& g, const MatrixXd& f);

// --- bundles over adjacent wave times ----------------------------------------

// Matched-s-grid ladders, frames and fields at `width` consecutive wave
// times; A_t is filled on the interior slices from the frame t-derivative.
struct GaugeBundle {
  double dt = 0.0;
  int center = 0;
  std::vector<double> times;
  std::vector<HeatLadder> ladders;
  std::vector<FrameField> frames;
  std::vector<GaugeFieldSet> fields;

  const GaugeFieldSet& at(int off) const { return fields[center + off]; }
  const HeatLadder& ladder(int off = 0) const { return ladders[center + off]; }
};

// `slices` must be consecutive trajectory snapshots with uniform spacing dt;
// the center ladder fixes the common s-grid.
GaugeBundle build_gauge_bundle(const std::vector<MapField>& slices, double dt,
                               const HeatConfig& cfg);

// --- covariant derivatives on a bundle ---------------------------------------

// D_alpha psi_beta = d_alpha psi_beta + A_alpha psi_beta at s-level k of the
// center slice.  alpha = 0 uses the bundle's t-neighbors.
MatrixXd covariant_psi(const GaugeBundle& b, int k, int alpha, int beta);
MatrixXd psi_component(const GaugeFieldSet& f, int k, int alpha);
MatrixXd A_component(const GaugeFieldSet& f, int k, int alpha);

// --- structural residuals ------------------------------------------------------

// Zero-torsion: D_alpha psi_beta - D_beta psi_alpha at s-level k,
// keyed "01", "02", "12".
std::map<std::string, NormPair> torsion_residual(const GaugeBundle& b, int k = 0);

// Curvature F_{ab} at level k of the center slice.
MatrixXd curvature_F(const GaugeBundle& b, int k, int alpha, int beta);
// || F_{ab} - kappa psi_a ^ psi_b ||.
std::map<std::string, NormPair> curvature_residual(const GaugeBundle& b, int k = 0);

// Heat-tension consistency and the wave-tension field at level k:
// psi_s vs D_k psi_k, and u = D^alpha psi_alpha.
struct TensionFields {
  MatrixXd psi_s_check;  // D_k psi_k
  MatrixXd u;            // -D_t psi_t + D_1 psi_1 + D_2 psi_2
  NormPair psi_s_residual;
  NormPair u_norm;
};
TensionFields tension_fields(const GaugeBundle& b, int k = 0);

// --- reconstruction identities -------------------------------------------------

struct AReconstruction {
  std::vector<MatrixXd> A;      // reconstructed A_alpha per level
  NormPair residual;            // vs extracted, at s = 0
  double tail_bound = 0.0;
};
// alpha in {1, 2} (or 0 when A_t is available at every level).
AReconstruction reconstruct_A(const GaugeBundle& b, int alpha,
                              double tail_tol = 1e-2);

struct PsiReconstruction {
  MatrixXd psi;           // reconstructed psi_alpha at s = 0
  MatrixXd Psi_correction;
  NormPair residual;
  double correction_ratio = 0.0;  // ||Psi||_2 / ||psi||_2
  double tail_bound = 0.0;
};
PsiReconstruction reconstruct_psi(const GaugeBundle& b, int alpha,
                                  double tail_tol = 1e-2);

// --- evolution-equation residuals ----------------------------------------------

// Discrete residuals of the s-heat equations for psi_alpha and psi_s, the
// inhomogeneous heat equation for the wave-tension field u, and the wave
// equation in t for psi_s; evaluated at interior s-level k of the center.
std::map<std::string, NormPair> evolution_residuals(const GaugeBundle& b, int k);

// --- converse reconstruction ------------------------------------------------------

struct MapReconstruction {
  MatrixXd phi;             // reconstructed map (row-then-column sweep)
  double discrepancy = 0.0; // sup distance to the stored map
  double path_dependence = 0.0;  // row-first vs column-first sup distance
};
MapReconstruction reconstruct_map(const GaugeBundle& b);

}  // namespace cwm::gauge
