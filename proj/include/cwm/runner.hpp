#pragma once

#include "cwm/heat_flow.hpp"
#include "cwm/stress_energy.hpp"
#include "cwm/wave_evolver.hpp"

#include <json.hpp>

#include <string>
#include <vector>

// Configuration, pipeline orchestration (simulate -> ladder -> gauge ->
// diagnostics), convergence-study driver, and report/plot-data emission.
// Reports are deterministic: identical configs give byte-identical JSON at
// any worker count; wall-clock timing goes to a sidecar file only.
namespace cwm::run {

using nlohmann::json;

struct DiagnosticsConfig {
  bool cone = true;
  double lambda = 8.0;    // |t2 - apex| / |t1 - apex| for the Stokes slab
  double epsilon = 1.0;   // apex mollification for the X-tilde field
  double tail_tol = 1e-2; // reconstruction tail tolerance
  int evolution_level = 1;  // interior s-level for evolution residuals
};

struct OutputConfig {
  std::string directory;     // empty: in-memory report only
  int snapshot_every = 0;    // 0: endpoints only
  bool csv = false;
};

struct RunConfig {
  geom::TargetConfig target;
  grid::Grid2D grid;
  wave::WaveRunConfig wave;
  heat::HeatConfig heat;
  DiagnosticsConfig diag;
  OutputConfig output;
  unsigned seed = 0;

  void validate() const;
};

// Strict TOML-subset parser: [section] headers, key = value lines, '#'
// comments; values are numbers, bare words / quoted strings, or
// space-separated number lists.  Unknown sections or keys raise
// ValidationError naming "section.key".
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::string& path);

// Canonical serialization; parse_config_text(canonical_config(c)) == c.
std::string canonical_config(const RunConfig& cfg);

// Full pipeline: evolve, bundle the center slices, run every residual suite
// and the cone diagnostics, return the report.  When cfg.output.directory is
// set, also writes report.json, snapshots, CSVs, and a timing sidecar.
json run_pipeline(const RunConfig& cfg);

// Re-runs the pipeline at (h, dt, ds)/2^j for j = 0..k-1 and tabulates
// log2-ratio convergence rates for the scalar residual summaries.
json convergence_study(const RunConfig& cfg, int k);

// Columnar CSV extraction from a report (energy vs t, sup-gradient vs s,
// residual-vs-h table when present, scaled-decay blocks).
void emit_plotdata(const json& report, const std::string& directory);

}  // namespace cwm::run
