#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cwm/heat_flow.hpp"
#include "cwm/wave_evolver.hpp"

#include <cmath>

using namespace cwm;
using namespace cwm::heat;
using grid::Grid2D;
using grid::MapField;

namespace {

Grid2D unit_grid(int n) { return Grid2D{n, 1.0 / n}; }

MapField bump_state(const Grid2D& g, const geom::TargetConfig& tc, double amp,
                    double width) {
  wave::InitialDataSpec s;
  s.kind = wave::InitialDataSpec::Kind::BoostedBump;
  s.amplitude = amp;
  s.width = width;
  s.boost_speed = 0.3;
  return wave::make_initial_data(g, tc, s);
}

}  // namespace

TEST_CASE("constant data is a fixed point of the flow") {
  geom::TargetConfig tc{2, -1.0};
  Grid2D g = unit_grid(16);
  MapField f = bump_state(g, tc, 0.0, 0.2);
  MatrixXd phi = f.phi;
  MatrixXd pass = MatrixXd::Zero(3, g.num_nodes());
  for (int k = 0; k < 5; ++k) heat_step(g, tc, phi, &pass, 0.2 * g.h * g.h, 0.25);
  CHECK((phi - f.phi).cwiseAbs().maxCoeff() == 0.0);
  CHECK(sup_gradient(g, tc, phi) == 0.0);
  CHECK(dirichlet_energy(g, tc, phi) == 0.0);
}

TEST_CASE("stability guard") {
  geom::TargetConfig tc;
  Grid2D g = unit_grid(16);
  MapField f = bump_state(g, tc, 0.5, 0.2);
  CHECK_THROWS_AS(heat_step(g, tc, f.phi, nullptr, 0.3 * g.h * g.h, 0.25),
                  StabilityViolation);
  CHECK_THROWS_AS(heat_step(g, tc, f.phi, nullptr, -1.0, 0.25),
                  StabilityViolation);
}

TEST_CASE("small data matches the discrete linear heat oracle") {
  // phi = exp_p(u e1) with |u| ~ 1e-3: the flow linearizes to explicit-Euler
  // linear heat, whose per-step Fourier factor is exactly 1 - ds sym(k).
  geom::TargetConfig tc{2, -1.0};
  Grid2D g = unit_grid(32);
  const double a = 1e-3;
  const int mode = 2;
  const VectorXd p0 = geom::base_point(tc);
  VectorXd e1 = VectorXd::Zero(3);
  e1(1) = 1.0;
  MatrixXd phi(3, g.num_nodes());
  for (int c = 0; c < g.num_nodes(); ++c) {
    const double u = a * std::sin(2 * M_PI * mode * g.x1(c));
    phi.col(c) = geom::geodesic_exp(tc, p0, (u * e1).eval());
  }
  const double ds = 0.2 * g.h * g.h;
  const int steps = 40;
  for (int k = 0; k < steps; ++k) heat_step(g, tc, phi, nullptr, ds, 0.25);
  const double s = std::sin(M_PI * mode * g.h);
  const double sym = 4.0 / (g.h * g.h) * s * s;
  const double factor = std::pow(1.0 - ds * sym, steps);
  double err = 0;
  for (int c = 0; c < g.num_nodes(); ++c) {
    const double expect =
        a * factor * std::sin(2 * M_PI * mode * g.x1(c));
    const VectorXd lg = geom::log_map(tc, p0, phi.col(c));
    err = std::max(err, std::abs(lg(1) - expect));
  }
  CHECK(err < 1e-9);  // nonlinear corrections are O(a^3)
}

TEST_CASE("sup gradient and dirichlet energy decay monotonically") {
  geom::TargetConfig tc{2, -1.0};
  Grid2D g = unit_grid(32);
  MapField f = bump_state(g, tc, 1.2, 0.2);
  HeatConfig cfg;
  cfg.eps_stop_rel = 1e-4;
  HeatLadder lad = build_ladder(f, cfg);
  REQUIRE(lad.levels() > 10);
  double e_prev = dirichlet_energy(g, tc, lad.phi[0]);
  for (int k = 1; k < lad.levels(); ++k) {
    CHECK(lad.sup_grad[k] <= lad.sup_grad[k - 1] + 1e-10 * lad.sup_grad[0]);
    const double e = dirichlet_energy(g, tc, lad.phi[k]);
    CHECK(e <= e_prev + 1e-10 * std::abs(e_prev));
    e_prev = e;
  }
  // Geometric output grid and the stopping rule.
  CHECK(lad.s_levels[1] == doctest::Approx(0.25 * g.h * g.h));
  const double r1 = lad.s_levels[2] - lad.s_levels[1];
  CHECK(r1 / lad.s_levels[1] == doctest::Approx(cfg.ratio));
  CHECK(lad.sup_grad.back() <= lad.eps_stop_abs);
  CHECK(lad.sup_grad[lad.levels() - 2] > lad.eps_stop_abs);
  // Late-flow field is near its Karcher limit.
  CHECK(lad.tail_distance < 1e-2);
}

TEST_CASE("passenger field carries the linearization of the step") {
  // Reference: flow two nearby maps and centre-difference them in ambient
  // coordinates.  The passenger linearizes the Euler update exactly; the
  // projection step contributes an O(ds^2) correction per step, which is
  // what the refinement below must recover.
  geom::TargetConfig tc{2, -1.0};
  Grid2D g = unit_grid(32);
  MapField f = bump_state(g, tc, 0.9, 0.25);
  const double eps = 1e-4;
  double err_prev = 0;
  for (double fac : {0.2, 0.05, 0.0125}) {
    const double ds = fac * g.h * g.h;
    MatrixXd pa = f.phi, pp = f.phi, pm = f.phi;
    MatrixXd pass = f.phi_t;
    for (int c = 0; c < g.num_nodes(); ++c) {
      pp.col(c) = geom::geodesic_exp(tc, pa.col(c),
                                     (eps * f.phi_t.col(c)).eval());
      pm.col(c) = geom::geodesic_exp(tc, pa.col(c),
                                     (-eps * f.phi_t.col(c)).eval());
    }
    heat_step(g, tc, pa, &pass, ds, 0.25);
    heat_step(g, tc, pp, nullptr, ds, 0.25);
    heat_step(g, tc, pm, nullptr, ds, 0.25);
    const double err = ((pp - pm) / (2 * eps) - pass).cwiseAbs().maxCoeff();
    if (err_prev > 0) {
      const double rate = std::log(err_prev / err) / std::log(4.0);
      CHECK(rate > 1.8);
    } else {
      CHECK(err < 1e-3);
    }
    err_prev = err;
  }
}

TEST_CASE("ladder failure modes") {
  geom::TargetConfig tc;
  Grid2D g = unit_grid(16);
  MapField f = bump_state(g, tc, 1.0, 0.2);
  HeatConfig cfg;
  cfg.max_levels = 3;
  CHECK_THROWS_AS(build_ladder(f, cfg), NoConvergence);
  cfg.max_levels = 400;
  cfg.ratio = 1.5;
  CHECK_THROWS_AS(build_ladder(f, cfg), ValidationError);
}

TEST_CASE("fixed-grid ladder reproduces the adaptive one") {
  geom::TargetConfig tc{2, -2.0};
  Grid2D g = unit_grid(32);
  MapField f = bump_state(g, tc, 1.0, 0.2);
  HeatConfig cfg;
  cfg.eps_stop_rel = 1e-3;
  HeatLadder lad = build_ladder(f, cfg);
  HeatLadder fixed = build_ladder_fixed(f, lad.s_levels, cfg.stability_factor);
  REQUIRE(fixed.levels() == lad.levels());
  for (int k = 0; k < lad.levels(); ++k) {
    // The fixed ladder recomputes intervals as differences, so the substep
    // sizes can differ in the last bits; allow roundoff-level slack.
    CHECK((fixed.phi[k] - lad.phi[k]).cwiseAbs().maxCoeff() < 1e-11);
    CHECK((fixed.dphi_dt[k] - lad.dphi_dt[k]).cwiseAbs().maxCoeff() < 1e-10);
  }
  std::vector<double> bad = {0.1, 0.2};
  CHECK_THROWS_AS(build_ladder_fixed(f, bad, 0.25), ValidationError);
}
