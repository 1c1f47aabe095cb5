#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cwm/stress_energy.hpp"

#include <cmath>
#include <random>

using namespace cwm;
using namespace cwm::stress;
using grid::Grid2D;
using grid::MapField;

namespace {

// Smooth data with a genuinely two-dimensional image (the packaged bump
// generators are geodesic-valued, which collapses most of the tensor
// structure).
MapField rich_state(int n, double amp = 1.0) {
  Grid2D g{n, 1.0 / n};
  geom::TargetConfig tc{2, -1.0};
  MapField f;
  f.grid = g;
  f.target = tc;
  f.t = 0;
  const VectorXd p0 = geom::base_point(tc);
  VectorXd e1 = VectorXd::Zero(3), e2 = VectorXd::Zero(3);
  e1(1) = 1;
  e2(2) = 1;
  const int N = g.num_nodes();
  f.phi.resize(3, N);
  f.phi_t.resize(3, N);
  for (int c = 0; c < N; ++c) {
    const double x = 2 * M_PI * g.x1(c), y = 2 * M_PI * g.x2(c);
    const double u1 = amp * (std::sin(x) * std::cos(y) + 0.3 * std::cos(y));
    const double u2 = amp * (0.8 * std::sin(y) * std::cos(x) + 0.2 * std::sin(x));
    f.phi.col(c) = geom::geodesic_exp(tc, p0, (u1 * e1 + u2 * e2).eval());
    f.phi_t.col(c) = 0.5 * amp * (std::cos(x) * e1 + std::sin(x + y) * e2);
  }
  geom::project_tangent_cols(f.phi, f.phi_t);
  return f;
}

// Evolve to t = 0.4 with dt = 1/(2.5 n) so that t = 0.05 and t = 0.4 are
// hit exactly at every refinement level.
std::vector<StressEnergyField> wave_slices(int n, wave::Trajectory* traj_out =
                                                      nullptr) {
  MapField f = rich_state(n);
  const double dt = 1.0 / (2.5 * n);
  wave::Trajectory traj = wave::evolve(f, 0.4, dt, 1);
  std::vector<StressEnergyField> out;
  for (const auto& s : traj.slices) out.push_back(stress_tensor(s));
  if (traj_out) *traj_out = std::move(traj);
  return out;
}

ConeGeometry test_cone(double eps = 1.0) {
  ConeGeometry cone;
  cone.apex_t = 0.45;
  cone.apex_x = Vector2d(0.5, 0.5);
  cone.t1 = 0.4;
  cone.t2 = 0.05;
  cone.epsilon = eps;
  return cone;
}

}  // namespace

TEST_CASE("tensor algebra against a direct oracle") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  Grid2D g{8, 1.0 / 8};
  const int N = g.num_nodes();
  MatrixXd pt(2, N), p1(2, N), p2(2, N);
  for (int c = 0; c < N; ++c)
    for (int i = 0; i < 2; ++i) { pt(i, c) = nd(rng); p1(i, c) = nd(rng); p2(i, c) = nd(rng); }
  StressEnergyField T = stress_tensor(g, pt, p1, p2, 0.25);
  CHECK(T.t == 0.25);
  for (int c = 0; c < N; ++c) {
    const double S = -pt.col(c).squaredNorm() + p1.col(c).squaredNorm() +
                     p2.col(c).squaredNorm();
    CHECK(T.T(StressEnergyField::row(0, 0), c) ==
          doctest::Approx(0.5 * (pt.col(c).squaredNorm() +
                                 p1.col(c).squaredNorm() +
                                 p2.col(c).squaredNorm())).epsilon(1e-13));
    CHECK(T.T(StressEnergyField::row(0, 1), c) ==
          doctest::Approx(pt.col(c).dot(p1.col(c))).epsilon(1e-13));
    CHECK(T.T(StressEnergyField::row(1, 1), c) ==
          doctest::Approx(p1.col(c).squaredNorm() - 0.5 * S).epsilon(1e-13));
    CHECK(T.T(StressEnergyField::row(1, 2), c) ==
          doctest::Approx(p1.col(c).dot(p2.col(c))).epsilon(1e-13));
  }
  // Minkowski trace is -S/2 (index symmetry of row()).
  CHECK(StressEnergyField::row(2, 1) == StressEnergyField::row(1, 2));
  for (int c = 0; c < N; ++c) {
    const double S = -pt.col(c).squaredNorm() + p1.col(c).squaredNorm() +
                     p2.col(c).squaredNorm();
    CHECK(T.trace()(c) == doctest::Approx(-0.5 * S).epsilon(1e-12));
  }
}

TEST_CASE("T00 integrates to the conserved wave energy") {
  MapField f = rich_state(32);
  const double E = wave::energy(f);
  StressEnergyField T = stress_tensor(f);
  const double I = grid::integrate(f.grid, VectorXd(T.T.row(0).transpose()));
  CHECK(std::abs(I - E) < 1e-10 * std::abs(E));
}

TEST_CASE("gauge route agrees with the direct route") {
  MapField f = rich_state(16);
  const double dt = 0.25 * f.grid.h;
  wave::Trajectory traj = wave::evolve(f, 4 * dt, dt, 1);
  heat::HeatConfig cfg;
  cfg.eps_stop_rel = 1e-3;
  gauge::GaugeBundle b = gauge::build_gauge_bundle(traj.slices, dt, cfg);
  StressEnergyField Tg = stress_tensor(b.at(0), traj.slices[b.center].t, 0);
  StressEnergyField Td = stress_tensor(traj.slices[b.center]);
  CHECK((Tg.T - Td.T).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("constant data has vanishing tensor") {
  Grid2D g{8, 1.0 / 8};
  geom::TargetConfig tc{2, -1.0};
  MapField f;
  f.grid = g;
  f.target = tc;
  f.phi = geom::base_point(tc).replicate(1, g.num_nodes());
  f.phi_t = MatrixXd::Zero(3, g.num_nodes());
  CHECK(stress_tensor(f).T.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("divergence residual converges on wave slices, not on heat slices") {
  std::map<int, double> res;
  for (int n : {32, 64}) {
    auto slices = wave_slices(n);
    const int c = static_cast<int>(slices.size()) / 2;
    const double dt = slices[1].t - slices[0].t;
    std::vector<StressEnergyField> tri(slices.begin() + c - 1,
                                       slices.begin() + c + 2);
    res[n] = divergence_residual(tri, dt, 1).cwiseAbs().maxCoeff();
  }
  const double rate = std::log2(res[32] / res[64]);
  INFO("divergence sup ", res[32], " -> ", res[64], " rate ", rate);
  CHECK(rate > 1.8);

  // Negative control: slices taken along the heat flow are not a
  // conservation law in t, so the same residual stays O(1).
  MapField f = rich_state(64);
  const double q = 0.2 * f.grid.h * f.grid.h;
  heat::HeatLadder lad = heat::build_ladder_fixed(f, {0.0, q, 2.0 * q});
  std::vector<StressEnergyField> hs;
  for (int k = 0; k < 3; ++k) {
    MapField m;
    m.grid = f.grid;
    m.target = f.target;
    m.t = k * q;
    m.phi = lad.phi[k];
    m.phi_t = lad.dphi_dt[k];
    hs.push_back(stress_tensor(m));
  }
  const double control = divergence_residual(hs, q, 1).cwiseAbs().maxCoeff();
  INFO("heat-flow control ", control);
  CHECK(control > 100 * res[64]);
}

TEST_CASE("coverage weights integrate to the disk area") {
  const Vector2d ctr(0.47, 0.52);
  const double R = 0.31;
  std::map<int, double> err;
  for (int n : {32, 64}) {
    Grid2D g{n, 1.0 / n};
    const VectorXd w = coverage_weights(g, ctr, R);
    CHECK(w.minCoeff() >= 0.0);
    CHECK(w.maxCoeff() <= 1.0 + 1e-12);
    err[n] = std::abs(grid::integrate(g, w) - M_PI * R * R);
  }
  // The overlap areas are computed in closed form.
  CHECK(err[32] < 1e-12);
  CHECK(err[64] < 1e-12);
  Grid2D g{32, 1.0 / 32};
  CHECK_THROWS_AS(coverage_weights(g, ctr, 0.6), ConeOutsideBox);
}

TEST_CASE("cutoff profile shape and second derivative") {
  ConeGeometry cone = test_cone();
  // Support in (tau2, tau1), identically 1 on (tau2/2, 2 tau1).
  CHECK(eta_profile(cone, cone.apex_t - 0.41) == 0.0);
  CHECK(eta_profile(cone, cone.apex_t - 0.04) == 0.0);
  CHECK(eta_profile(cone, cone.apex_t - 0.19) == 1.0);
  CHECK(eta_profile(cone, cone.apex_t - 0.11) == 1.0);
  for (double tau : {-0.35, -0.27, -0.21, -0.09, -0.06}) {
    const double t = cone.apex_t + tau;
    const double d = 1e-4;
    const double fd = (eta_profile(cone, t + d) - 2 * eta_profile(cone, t) +
                       eta_profile(cone, t - d)) / (d * d);
    CHECK(eta_profile_dd(cone, t) == doctest::Approx(fd).epsilon(1e-4));
    CHECK(eta_profile(cone, t) > 0.0);
    CHECK(eta_profile(cone, t) < 1.0);
  }
}

TEST_CASE("cone energy identity and monotonicity") {
  ConeGeometry cone = test_cone();
  std::map<int, double> defect;
  for (int n : {32, 64}) {
    auto slices = wave_slices(n);
    ConeReport rep = build_cone_report(slices, cone);
    double dmax = 0;
    for (std::size_t i = 0; i + 1 < rep.energies.size(); ++i) {
      dmax = std::max(dmax, rep.defects[i]);
      // Energy decreases up to the quadrature defect.
      CHECK(rep.energies[i + 1] <= rep.energies[i] + rep.defects[i] + 1e-12);
      CHECK(rep.fluxes[i] > -rep.defects[i] - 1e-12);
    }
    defect[n] = dmax;
    CHECK(rep.E0 > 0);
    CHECK(std::isfinite(rep.scaled_decay));
    CHECK(!rep.block_integrals.empty());
  }
  const double rate = std::log2(defect[32] / defect[64]);
  INFO("energy-identity defect ", defect[32], " -> ", defect[64], " rate ", rate);
  CHECK(rate > 1.8);
}

TEST_CASE("null boundary decomposition is nonnegative and consistent") {
  MapField f = rich_state(32);
  const double dt = 0.25 * f.grid.h;
  wave::Trajectory traj = wave::evolve(f, 4 * dt, dt, 1);
  heat::HeatConfig cfg;
  cfg.eps_stop_rel = 1e-3;
  gauge::GaugeBundle b = gauge::build_gauge_bundle(traj.slices, dt, cfg);
  ConeGeometry cone = test_cone();
  const double t = traj.slices[b.center].t;
  TL0Result r = tl0_decomposition(b.at(0), cone, t);
  CHECK(r.min_value >= -1e-10);
  CHECK(r.rhs.minCoeff() >= 0.0);
  // lhs interpolates the tensor, rhs interpolates psi: agreement is O(h^2).
  const double scale = r.lhs.cwiseAbs().maxCoeff();
  INFO("defect ", r.defect, " scale ", scale);
  CHECK(r.defect < 0.05 * scale);
}

TEST_CASE("time-translation Stokes check reproduces the energy identity") {
  auto slices = wave_slices(32);
  ConeGeometry cone = test_cone();
  XFieldSpec X;
  X.kind = XFieldSpec::Kind::TimeTranslation;
  StokesResult res = stokes_check(slices, X, cone);
  // Cross-check each piece against the standalone quadratures.
  int i2 = -1, i1 = -1;
  for (std::size_t i = 0; i < slices.size(); ++i) {
    if (std::abs(slices[i].t - cone.t2) < 1e-12) i2 = static_cast<int>(i);
    if (std::abs(slices[i].t - cone.t1) < 1e-12) i1 = static_cast<int>(i);
  }
  REQUIRE(i2 >= 0);
  REQUIRE(i1 >= 0);
  CHECK(std::abs(res.disk_far - cone_energy(slices[i2], cone)) < 1e-12);
  CHECK(std::abs(res.disk_near - cone_energy(slices[i1], cone)) < 1e-12);
  CHECK(std::abs(res.mantle -
                 flux_integral(slices, cone, cone.t2, cone.t1)) < 1e-12);
  CHECK(res.bulk == 0.0);
  CHECK(res.defect ==
        doctest::Approx(std::abs(res.disk_far - res.disk_near - res.mantle))
            .epsilon(1e-12));

  // Slices that miss the slab endpoints are rejected.
  std::vector<StressEnergyField> off(slices.begin() + i2 + 1, slices.end());
  CHECK_THROWS_AS(stokes_check(off, X, cone), GridMismatch);
}

TEST_CASE("mollified Stokes check: signs, guards, convergence") {
  XFieldSpec X;
  X.kind = XFieldSpec::Kind::Mollified;
  std::map<int, StokesResult> res;
  for (int n : {32, 64}) res[n] = stokes_check(wave_slices(n), X, test_cone());
  // The main bulk term is a weighted square: nonnegative up to quadrature.
  CHECK(res[64].bulk_main >= -1e-10);
  const double scale = std::abs(res[64].disk_far) + std::abs(res[64].mantle) +
                       std::abs(res[64].bulk);
  const double rate = std::log2(res[32].defect / res[64].defect);
  INFO("defect ", res[32].defect, " -> ", res[64].defect, " rate ", rate,
       " scale ", scale);
  CHECK(res[64].defect < 0.02 * scale);
  CHECK(rate > 1.8);

  auto slices = wave_slices(32);
  ConeGeometry bad_eps = test_cone(-1.0);
  CHECK_THROWS_AS(stokes_check(slices, X, bad_eps), SingularField);
  ConeGeometry bad_lambda = test_cone();
  bad_lambda.t2 = 0.35;  // lambda = 2
  CHECK_THROWS_AS(stokes_check(slices, X, bad_lambda), ValidationError);
}

TEST_CASE("self-similar functional against a synthetic oracle") {
  // psi_t constant, psi_x = 0: the integrand is identically 1, so the
  // functional reduces to pi * int |tau| dt / |log ratio|.
  Grid2D g{64, 1.0 / 64};
  const int N = g.num_nodes();
  MatrixXd pt = MatrixXd::Zero(2, N), px = MatrixXd::Zero(2, N);
  pt.row(0).setOnes();
  ConeGeometry cone = test_cone();
  std::vector<StressEnergyField> slices;
  const double dt = 1.0 / 160;
  for (int k = 8; k <= 64; ++k) slices.push_back(stress_tensor(g, pt, px, px, k * dt));
  const double got = selfsimilar_functional(slices, cone, 0.05, 0.4);
  const double tau_lo = 0.05 - cone.apex_t, tau_hi = 0.4 - cone.apex_t;
  const double expect = M_PI * 0.5 * (tau_lo * tau_lo - tau_hi * tau_hi) /
                        std::abs(std::log(tau_hi / tau_lo));
  CHECK(got == doctest::Approx(expect).epsilon(1e-3));
  // Blocks partition the total.
  std::vector<double> blocks;
  selfsimilar_functional(slices, cone, 0.05, 0.4, &blocks);
  double sum = 0;
  for (double b : blocks) sum += b;
  CHECK(sum == doctest::Approx(got * std::abs(std::log(tau_hi / tau_lo)))
                   .epsilon(1e-12));
}
