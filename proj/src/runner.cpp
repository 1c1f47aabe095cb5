#include "cwm/runner.hpp"

#include "cwm/caloric_gauge.hpp"
#include "cwm/parallel.hpp"
#include "cwm/snapshot_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace cwm::run {

namespace fs = std::filesystem;

void RunConfig::validate() const {
  target.validate();
  grid.validate();
  heat.validate();
  if (!(wave.cfl > 0.0 && wave.cfl <= 0.7))
    throw ValidationError("wave.cfl must lie in (0, 0.7]");
  if (!(wave.T > 0.0)) throw ValidationError("wave.T must be > 0");
  const auto& d = wave.data;
  if (!(d.amplitude >= 0.0)) throw ValidationError("data.amplitude must be >= 0");
  if (!(d.width > 0.0 && d.width <= 0.5 * grid.extent()))
    throw ValidationError("data.width must lie in (0, extent/2]");
  if (d.centers.empty()) throw ValidationError("data.centers must not be empty");
  if (!(std::abs(d.boost_speed) < 1.0))
    throw ValidationError("data.boost_speed must lie in (-1, 1)");
  if (!(diag.lambda > 4.0))
    throw ValidationError("diagnostics.lambda must be > 4");
  if (!(diag.epsilon > 0.0))
    throw ValidationError("diagnostics.epsilon must be > 0");
  if (!(diag.tail_tol > 0.0))
    throw ValidationError("diagnostics.tail_tol must be > 0");
  if (diag.evolution_level < 1)
    throw ValidationError("diagnostics.evolution_level must be >= 1");
  if (output.snapshot_every < 0)
    throw ValidationError("output.snapshot_every must be >= 0");
  if (diag.cone) {
    // Apex placed so the slab [0, T] has ratio `lambda`; the base disk must
    // fit inside half the box.
    const double apex = wave.T * diag.lambda / (diag.lambda - 1.0);
    if (apex + grid.h >= 0.5 * grid.extent())
      throw ValidationError(
          "diagnostics.cone does not fit: reduce wave.T or diagnostics.lambda");
  }
}

// --- config text ----------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& sec, const std::string& key,
                 const std::string& v) {
  std::size_t pos = 0;
  double out;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ValidationError(sec + "." + key + ": not a number: '" + v + "'");
  }
  if (pos != v.size())
    throw ValidationError(sec + "." + key + ": trailing junk in '" + v + "'");
  return out;
}

long to_int(const std::string& sec, const std::string& key,
            const std::string& v) {
  const double d = to_double(sec, key, v);
  const long i = std::lround(d);
  if (d != static_cast<double>(i))
    throw ValidationError(sec + "." + key + ": expected an integer, got '" + v + "'");
  return i;
}

bool to_bool(const std::string& sec, const std::string& key,
             const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ValidationError(sec + "." + key + ": expected true/false, got '" + v + "'");
}

std::string unquote(const std::string& v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"')
    return v.substr(1, v.size() - 2);
  return v;
}

std::vector<double> to_list(const std::string& sec, const std::string& key,
                            const std::string& v) {
  std::istringstream in(v);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) out.push_back(to_double(sec, key, tok));
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line, sec;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ParseError("line " + std::to_string(lineno) + ": unterminated section");
      sec = trim(line.substr(1, line.size() - 2));
      if (sec != "target" && sec != "grid" && sec != "wave" && sec != "data" &&
          sec != "heat" && sec != "diagnostics" && sec != "output" && sec != "run")
        throw ValidationError("unknown section [" + sec + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ParseError("line " + std::to_string(lineno) + ": empty key or value");

    auto unknown = [&]() -> ValidationError {
      return ValidationError("unknown key " + sec + "." + key);
    };
    if (sec == "target") {
      if (key == "m") cfg.target.m = static_cast<int>(to_int(sec, key, val));
      else if (key == "kappa") cfg.target.kappa = to_double(sec, key, val);
      else throw unknown();
    } else if (sec == "grid") {
      if (key == "n") cfg.grid.n = static_cast<int>(to_int(sec, key, val));
      else if (key == "h") cfg.grid.h = to_double(sec, key, val);
      else throw unknown();
    } else if (sec == "wave") {
      if (key == "cfl") cfg.wave.cfl = to_double(sec, key, val);
      else if (key == "T") cfg.wave.T = to_double(sec, key, val);
      else throw unknown();
    } else if (sec == "data") {
      auto& d = cfg.wave.data;
      if (key == "kind") {
        const std::string k = unquote(val);
        if (k == "geodesic_bump") d.kind = wave::InitialDataSpec::Kind::GeodesicBump;
        else if (k == "multi_bump") d.kind = wave::InitialDataSpec::Kind::MultiBump;
        else if (k == "boosted_bump") d.kind = wave::InitialDataSpec::Kind::BoostedBump;
        else throw ValidationError("data.kind: unknown kind '" + k + "'");
      } else if (key == "amplitude") d.amplitude = to_double(sec, key, val);
      else if (key == "width") d.width = to_double(sec, key, val);
      else if (key == "boost_speed") d.boost_speed = to_double(sec, key, val);
      else if (key == "centers") {
        const auto xs = to_list(sec, key, val);
        if (xs.empty() || xs.size() % 2 != 0)
          throw ValidationError("data.centers: expected an even-length number list");
        d.centers.clear();
        for (std::size_t i = 0; i + 1 < xs.size(); i += 2)
          d.centers.push_back(Vector2d(xs[i], xs[i + 1]));
      } else throw unknown();
    } else if (sec == "heat") {
      if (key == "ds0") cfg.heat.ds0 = to_double(sec, key, val);
      else if (key == "ratio") cfg.heat.ratio = to_double(sec, key, val);
      else if (key == "eps_stop") cfg.heat.eps_stop_rel = to_double(sec, key, val);
      else if (key == "max_levels")
        cfg.heat.max_levels = static_cast<int>(to_int(sec, key, val));
      else throw unknown();
    } else if (sec == "diagnostics") {
      if (key == "cone") cfg.diag.cone = to_bool(sec, key, val);
      else if (key == "lambda") cfg.diag.lambda = to_double(sec, key, val);
      else if (key == "epsilon") cfg.diag.epsilon = to_double(sec, key, val);
      else if (key == "tail_tol") cfg.diag.tail_tol = to_double(sec, key, val);
      else if (key == "evolution_level")
        cfg.diag.evolution_level = static_cast<int>(to_int(sec, key, val));
      else throw unknown();
    } else if (sec == "output") {
      if (key == "directory") cfg.output.directory = unquote(val);
      else if (key == "snapshot_every")
        cfg.output.snapshot_every = static_cast<int>(to_int(sec, key, val));
      else if (key == "csv") cfg.output.csv = to_bool(sec, key, val);
      else throw unknown();
    } else if (sec == "run") {
      if (key == "seed") cfg.seed = static_cast<unsigned>(to_int(sec, key, val));
      else throw unknown();
    } else {
      throw ValidationError("key '" + key + "' appears before any section");
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string canonical_config(const RunConfig& cfg) {
  std::ostringstream o;
  o << "[target]\nm = " << cfg.target.m << "\nkappa = " << fmt(cfg.target.kappa)
    << "\n\n[grid]\nn = " << cfg.grid.n << "\nh = " << fmt(cfg.grid.h)
    << "\n\n[wave]\ncfl = " << fmt(cfg.wave.cfl) << "\nT = " << fmt(cfg.wave.T)
    << "\n\n[data]\nkind = ";
  switch (cfg.wave.data.kind) {
    case wave::InitialDataSpec::Kind::GeodesicBump: o << "geodesic_bump"; break;
    case wave::InitialDataSpec::Kind::MultiBump: o << "multi_bump"; break;
    case wave::InitialDataSpec::Kind::BoostedBump: o << "boosted_bump"; break;
  }
  o << "\namplitude = " << fmt(cfg.wave.data.amplitude)
    << "\nwidth = " << fmt(cfg.wave.data.width) << "\ncenters =";
  for (const auto& c : cfg.wave.data.centers)
    o << " " << fmt(c(0)) << " " << fmt(c(1));
  o << "\nboost_speed = " << fmt(cfg.wave.data.boost_speed)
    << "\n\n[heat]\nds0 = " << fmt(cfg.heat.ds0)
    << "\nratio = " << fmt(cfg.heat.ratio)
    << "\neps_stop = " << fmt(cfg.heat.eps_stop_rel)
    << "\nmax_levels = " << cfg.heat.max_levels
    << "\n\n[diagnostics]\ncone = " << (cfg.diag.cone ? "true" : "false")
    << "\nlambda = " << fmt(cfg.diag.lambda)
    << "\nepsilon = " << fmt(cfg.diag.epsilon)
    << "\ntail_tol = " << fmt(cfg.diag.tail_tol)
    << "\nevolution_level = " << cfg.diag.evolution_level
    << "\n\n[output]\ndirectory = \"" << cfg.output.directory
    << "\"\nsnapshot_every = " << cfg.output.snapshot_every
    << "\ncsv = " << (cfg.output.csv ? "true" : "false")
    << "\n\n[run]\nseed = " << cfg.seed << "\n";
  return o.str();
}

// --- pipeline -------------------------------------------------------------------

namespace {

json norm_json(const gauge::NormPair& p) {
  return json{{"sup", p.sup}, {"l2", p.l2}};
}

json norm_map_json(const std::map<std::string, gauge::NormPair>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[k] = norm_json(v);
  return j;
}

}  // namespace

json run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  json rep;
  rep["config"] = canonical_config(cfg);
  rep["seed"] = cfg.seed;

  const double dt = cfg.wave.cfl * cfg.grid.h;
  const grid::MapField init =
      wave::make_initial_data(cfg.grid, cfg.target, cfg.wave.data);
  wave::Trajectory traj = wave::evolve(init, cfg.wave.T, dt, 1);
  rep["wave"] = {{"dt", dt},
                 {"steps", static_cast<int>(traj.energies.size()) - 1},
                 {"energies", traj.energies}};
  const double E0 = traj.energies.front();
  double drift = 0.0;
  for (double e : traj.energies)
    drift = std::max(drift, std::abs(e - E0));
  rep["wave"]["energy_drift"] =
      E0 > 0 ? drift / E0 : drift;  // relative when meaningful

  // Caloric gauge bundle at the middle of the trajectory.
  const int nslices = static_cast<int>(traj.slices.size());
  if (nslices < 5)
    throw ValidationError("run_pipeline: need at least 4 wave steps for the bundle");
  const int ic = nslices / 2;
  std::vector<grid::MapField> window(traj.slices.begin() + (ic - 2),
                                     traj.slices.begin() + (ic + 3));
  gauge::GaugeBundle bundle = gauge::build_gauge_bundle(window, dt, cfg.heat);
  const heat::HeatLadder& lad = bundle.ladder();
  rep["ladder"] = {{"base_t", lad.base_t},
                   {"levels", lad.levels()},
                   {"s_levels", lad.s_levels},
                   {"sup_grad", lad.sup_grad},
                   {"eps_stop_abs", lad.eps_stop_abs},
                   {"tail_distance", lad.tail_distance}};
  {
    double sr = 0.0;
    for (double v : bundle.frames[bundle.center].step_residual)
      sr = std::max(sr, v);
    rep["ladder"]["max_transport_residual"] = sr;
  }

  json gj;
  gj["torsion"] = norm_map_json(gauge::torsion_residual(bundle, 0));
  gj["curvature"] = norm_map_json(gauge::curvature_residual(bundle, 0));
  const gauge::TensionFields tf = gauge::tension_fields(bundle, 0);
  gj["psi_s_residual"] = norm_json(tf.psi_s_residual);
  gj["u_norm"] = norm_json(tf.u_norm);
  const int K = lad.levels();
  if (K >= 3) {
    const int lvl = std::clamp(cfg.diag.evolution_level, 1, K - 2);
    gj["evolution_level"] = lvl;
    gj["evolution"] = norm_map_json(gauge::evolution_residuals(bundle, lvl));
    for (int alpha : {1, 2}) {
      const auto ra = gauge::reconstruct_A(bundle, alpha, cfg.diag.tail_tol);
      const auto rp = gauge::reconstruct_psi(bundle, alpha, cfg.diag.tail_tol);
      const std::string sfx = "_x" + std::to_string(alpha);
      gj["reconstruct_A" + sfx] = norm_json(ra.residual);
      gj["reconstruct_A" + sfx + "_tail"] = ra.tail_bound;
      gj["reconstruct_psi" + sfx] = norm_json(rp.residual);
      gj["reconstruct_psi" + sfx + "_ratio"] = rp.correction_ratio;
    }
    const auto rm = gauge::reconstruct_map(bundle);
    gj["reconstruct_map"] = {{"discrepancy", rm.discrepancy},
                             {"path_dependence", rm.path_dependence}};
  }
  rep["gauge"] = gj;

  // Stress-energy suite over the whole trajectory.
  std::vector<stress::StressEnergyField> T;
  T.reserve(traj.slices.size());
  for (const auto& s : traj.slices) T.push_back(stress::stress_tensor(s));
  {
    const MatrixXd div = stress::divergence_residual(T, dt, ic);
    json dj = json::object();
    const char* names[] = {"t", "x1", "x2"};
    for (int beta = 0; beta < 3; ++beta)
      dj[names[beta]] =
          norm_json(gauge::field_norms(cfg.grid, div.row(beta)));
    rep["divergence"] = dj;
    rep["energy_vs_T00"] =
        std::abs(grid::integrate(cfg.grid, VectorXd(T[ic].T.row(0).transpose())) -
                 traj.energies[ic]);
  }

  if (cfg.diag.cone) {
    stress::ConeGeometry cone;
    cone.apex_x = cfg.wave.data.centers.front();
    cone.t2 = traj.times.front();
    cone.t1 = traj.times.back();
    cone.apex_t =
        (cfg.diag.lambda * cone.t1 - cone.t2) / (cfg.diag.lambda - 1.0);
    cone.epsilon = cfg.diag.epsilon;
    const stress::ConeReport cr = stress::build_cone_report(T, cone);
    rep["cone"] = {{"E0", cr.E0},
                   {"times", cr.times},
                   {"energies", cr.energies},
                   {"fluxes", cr.fluxes},
                   {"defects", cr.defects},
                   {"scaled_decay", cr.scaled_decay},
                   {"block_integrals", cr.block_integrals}};
    const auto s_t = stress::stokes_check(
        T, {stress::XFieldSpec::Kind::TimeTranslation}, cone);
    const auto s_x = stress::stokes_check(
        T, {stress::XFieldSpec::Kind::Mollified}, cone);
    rep["stokes"] = {
        {"time_translation", {{"defect", s_t.defect}, {"mantle", s_t.mantle}}},
        {"mollified",
         {{"defect", s_x.defect},
          {"bulk_main", s_x.bulk_main},
          {"bulk_eta2", s_x.bulk_eta2},
          {"mantle", s_x.mantle}}}};
  }

  if (!cfg.output.directory.empty()) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir(cfg.output.directory);
    fs::create_directories(dir);
    {
      std::ofstream out(dir / "report.json");
      if (!out) throw IOError("cannot write report.json");
      out << rep.dump(2) << "\n";
    }
    io::write_map_snapshot((dir / "initial").string(), traj.slices.front());
    io::write_map_snapshot((dir / "final").string(), traj.slices.back());
    if (cfg.output.snapshot_every > 0)
      for (int k = 0; k < nslices; k += cfg.output.snapshot_every)
        io::write_map_snapshot(
            (dir / ("slice_" + std::to_string(k))).string(), traj.slices[k]);
    if (cfg.output.csv) emit_plotdata(rep, cfg.output.directory);
    // Wall clock stays out of the report so reruns are byte-identical.
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::ofstream tout(dir / "timing.txt");
    tout << "output_seconds " << secs << "\n";
  }
  return rep;
}

json convergence_study(const RunConfig& cfg, int k) {
  if (k < 2) throw ValidationError("convergence_study: need k >= 2 levels");
  std::vector<json> reports;
  std::vector<double> hs;
  for (int j = 0; j < k; ++j) {
    RunConfig c = cfg;
    c.grid.n = cfg.grid.n << j;
    c.grid.h = cfg.grid.h / (1 << j);
    c.heat.max_levels = cfg.heat.max_levels;
    c.output.directory.clear();
    hs.push_back(c.grid.h);
    reports.push_back(run_pipeline(c));
  }

  // Scalar residual summaries to tabulate.
  auto metric = [&](const json& r, const std::string& name) -> double {
    if (name == "energy_drift") return r["wave"]["energy_drift"];
    if (name == "torsion") {
      double v = 0;
      for (const auto& [kk, e] : r["gauge"]["torsion"].items())
        v = std::max(v, e["sup"].get<double>());
      return v;
    }
    if (name == "curvature") {
      double v = 0;
      for (const auto& [kk, e] : r["gauge"]["curvature"].items())
        v = std::max(v, e["sup"].get<double>());
      return v;
    }
    if (name == "divergence") {
      double v = 0;
      for (const auto& [kk, e] : r["divergence"].items())
        v = std::max(v, e["sup"].get<double>());
      return v;
    }
    if (name == "u_boundary") return r["gauge"]["u_norm"]["sup"];
    if (name == "cone_defect") {
      double v = 0;
      for (double d : r["cone"]["defects"]) v = std::max(v, d);
      return v;
    }
    if (name == "stokes_mollified")
      return r["stokes"]["mollified"]["defect"];
    throw ValidationError("unknown study metric " + name);
  };

  json table = json::object();
  std::vector<std::string> names = {"energy_drift", "torsion", "curvature",
                                    "divergence",   "u_boundary"};
  if (cfg.diag.cone) {
    names.push_back("cone_defect");
    names.push_back("stokes_mollified");
  }
  for (const auto& name : names) {
    std::vector<double> vals, rates;
    for (int j = 0; j < k; ++j) vals.push_back(metric(reports[j], name));
    for (int j = 1; j < k; ++j)
      rates.push_back(vals[j] > 0 && vals[j - 1] > 0
                          ? std::log2(vals[j - 1] / vals[j])
                          : 0.0);
    table[name] = {{"h", hs}, {"values", vals}, {"rates", rates}};
  }
  json out;
  out["study"] = table;
  out["base_config"] = canonical_config(cfg);
  return out;
}

void emit_plotdata(const json& report, const std::string& directory) {
  const fs::path dir(directory);
  fs::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw IOError(std::string("cannot write ") + name);
    out.precision(17);
    return out;
  };
  {
    auto out = open("energy_vs_t.csv");
    out << "step,t,energy\n";
    if (report.contains("wave")) {
      const double dt = report["wave"]["dt"];
      const auto& es = report["wave"]["energies"];
      for (std::size_t i = 0; i < es.size(); ++i)
        out << i << "," << i * dt << "," << es[i].get<double>() << "\n";
    }
  }
  {
    auto out = open("supgrad_vs_s.csv");
    out << "s,sup_grad\n";
    if (report.contains("ladder")) {
      const auto& ss = report["ladder"]["s_levels"];
      const auto& gg = report["ladder"]["sup_grad"];
      for (std::size_t i = 0; i < ss.size(); ++i)
        out << ss[i].get<double>() << "," << gg[i].get<double>() << "\n";
    }
  }
  {
    auto out = open("residual_vs_h.csv");
    out << "metric,h,value,rate\n";
    if (report.contains("study")) {
      for (const auto& [name, tbl] : report["study"].items()) {
        const auto& hs = tbl["h"];
        const auto& vals = tbl["values"];
        const auto& rates = tbl["rates"];
        for (std::size_t i = 0; i < hs.size(); ++i)
          out << name << "," << hs[i].get<double>() << ","
              << vals[i].get<double>() << ","
              << (i > 0 ? rates[i - 1].get<double>() : 0.0) << "\n";
      }
    }
  }
  {
    auto out = open("scaled_decay_blocks.csv");
    out << "block,integral\n";
    if (report.contains("cone")) {
      const auto& bs = report["cone"]["block_integrals"];
      for (std::size_t i = 0; i < bs.size(); ++i)
        out << i << "," << bs[i].get<double>() << "\n";
    }
  }
}

}  // namespace cwm::run
