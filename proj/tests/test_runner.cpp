#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cwm/parallel.hpp"
#include "cwm/runner.hpp"
#include "cwm/snapshot_io.hpp"

#include <filesystem>
#include <fstream>
#include <string>

using namespace cwm;
using namespace cwm::run;
namespace fs = std::filesystem;

namespace {

const char* kConfig = R"(# smoke configuration
[target]
m = 2
kappa = -1.5

[grid]
n = 16
h = 0.0625

[wave]
cfl = 0.25
T = 0.1875

[data]
kind = geodesic_bump
amplitude = 0.4
width = 0.3
centers = 0.5 0.5

[heat]
ratio = 1.1
eps_stop = 1e-4

[diagnostics]
cone = true
lambda = 8
epsilon = 2

[run]
seed = 7
)";

std::string temp_dir(const char* tag) {
  fs::path p = fs::temp_directory_path() / (std::string("cwm_test_") + tag);
  fs::remove_all(p);
  return p.string();
}

}  // namespace

TEST_CASE("config parsing, defaults, and canonical round trip") {
  RunConfig cfg = parse_config_text(kConfig);
  CHECK(cfg.target.m == 2);
  CHECK(cfg.target.kappa == -1.5);
  CHECK(cfg.grid.n == 16);
  CHECK(cfg.wave.cfl == 0.25);
  CHECK(cfg.wave.data.kind == wave::InitialDataSpec::Kind::GeodesicBump);
  CHECK(cfg.wave.data.amplitude == 0.4);
  CHECK(cfg.heat.eps_stop_rel == 1e-4);
  // Untouched keys keep their defaults.
  CHECK(cfg.heat.max_levels == 400);
  CHECK(cfg.diag.tail_tol == 1e-2);
  CHECK(cfg.output.snapshot_every == 0);
  CHECK(cfg.seed == 7);

  const std::string canon = canonical_config(cfg);
  RunConfig again = parse_config_text(canon);
  CHECK(canonical_config(again) == canon);
}

TEST_CASE("config errors name the offending key") {
  RunConfig cfg = parse_config_text(kConfig);
  cfg.wave.cfl = 0.9;
  try {
    cfg.validate();
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("wave.cfl") != std::string::npos);
  }

  CHECK_THROWS_AS(parse_config_text("[grid]\nbogus = 1\n"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("[nonsense]\nn = 1\n"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("[grid]\nn = frog\n"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("stray = 1\n"), ValidationError);
  // Odd-length centers list cannot form points.
  CHECK_THROWS_AS(parse_config_text("[data]\ncenters = 0.5 0.5 0.25\n"),
                  ValidationError);
}

TEST_CASE("pipeline produces a complete report") {
  RunConfig cfg = parse_config_text(kConfig);
  json rep = run_pipeline(cfg);
  for (const char* key :
       {"config", "wave", "ladder", "gauge", "divergence", "cone", "stokes"})
    CHECK(rep.contains(key));
  CHECK(rep["wave"]["steps"] == 12);
  // Coarse-grid smoke run: the drift just has to be sane here; sharp
  // conservation rates are exercised on resolved data elsewhere.
  CHECK(rep["wave"]["energy_drift"].get<double>() < 0.25);
  CHECK(rep["ladder"]["levels"].get<int>() >= 3);
  for (const char* key : {"torsion", "curvature", "psi_s_residual", "u_norm",
                          "evolution", "reconstruct_A_x1", "reconstruct_psi_x1",
                          "reconstruct_map"})
    CHECK(rep["gauge"].contains(key));
  CHECK(rep["energy_vs_T00"].get<double>() < 1e-10);
  CHECK(rep["stokes"]["mollified"].contains("defect"));
  CHECK(std::isfinite(rep["cone"]["scaled_decay"].get<double>()));
}

TEST_CASE("reports are deterministic across runs and worker counts") {
  RunConfig cfg = parse_config_text(kConfig);
  int& tc = par::thread_count();
  const int saved = tc;
  tc = 1;
  const std::string a = run_pipeline(cfg).dump();
  const std::string b = run_pipeline(cfg).dump();
  tc = 8;
  const std::string c = run_pipeline(cfg).dump();
  tc = saved;
  CHECK(a == b);
  CHECK(a == c);
}

TEST_CASE("output directory contents") {
  RunConfig cfg = parse_config_text(kConfig);
  cfg.output.directory = temp_dir("out");
  cfg.output.snapshot_every = 3;
  cfg.output.csv = true;
  json rep = run_pipeline(cfg);
  const fs::path dir(cfg.output.directory);

  std::ifstream in(dir / "report.json");
  REQUIRE(in.good());
  json from_disk = json::parse(in);
  CHECK(from_disk == rep);

  // Snapshot round trip: initial matches the configured data.
  grid::MapField init = io::read_map_snapshot((dir / "initial").string());
  grid::MapField want =
      wave::make_initial_data(cfg.grid, cfg.target, cfg.wave.data);
  CHECK((init.phi - want.phi).cwiseAbs().maxCoeff() == 0.0);
  CHECK(init.t == 0.0);
  grid::MapField fin = io::read_map_snapshot((dir / "final").string());
  CHECK(fin.t == doctest::Approx(cfg.wave.T));

  for (const char* name : {"energy_vs_t.csv", "supgrad_vs_s.csv",
                           "residual_vs_h.csv", "scaled_decay_blocks.csv",
                           "timing.txt"})
    CHECK(fs::exists(dir / name));
  // snapshot_every = 3 over 13 slices: 0, 3, ..., 12.
  CHECK(fs::exists(dir / "slice_0.phi.cwm"));
  CHECK(fs::exists(dir / "slice_3.phi.cwm"));
  CHECK(fs::exists(dir / "slice_12.phi.cwm"));
  fs::remove_all(dir);
}

TEST_CASE("plot data from an empty report has headers only") {
  const std::string dir = temp_dir("plot");
  emit_plotdata(json::object(), dir);
  for (const char* name : {"energy_vs_t.csv", "supgrad_vs_s.csv",
                           "residual_vs_h.csv", "scaled_decay_blocks.csv"}) {
    std::ifstream in(fs::path(dir) / name);
    REQUIRE(in.good());
    std::string line;
    int lines = 0;
    while (std::getline(in, line))
      if (!line.empty()) ++lines;
    CHECK(lines == 1);
  }
  fs::remove_all(dir);
}

TEST_CASE("convergence study tabulates rates") {
  RunConfig cfg = parse_config_text(kConfig);
  json study = convergence_study(cfg, 2);
  REQUIRE(study.contains("study"));
  for (const char* name : {"energy_drift", "torsion", "curvature",
                           "divergence", "u_boundary", "cone_defect",
                           "stokes_mollified"}) {
    REQUIRE(study["study"].contains(name));
    const auto& tbl = study["study"][name];
    CHECK(tbl["values"].size() == 2);
    CHECK(tbl["rates"].size() == 1);
    CHECK(std::isfinite(tbl["rates"][0].get<double>()));
  }
  // Coarse levels: residuals must at least shrink under refinement.
  CHECK(study["study"]["divergence"]["values"][1].get<double>() <
        study["study"]["divergence"]["values"][0].get<double>());
  CHECK(study["study"]["energy_drift"]["values"][1].get<double>() <
        study["study"]["energy_drift"]["values"][0].get<double>());
  CHECK_THROWS_AS(convergence_study(cfg, 1), ValidationError);
}
