#include "cwm/parallel.hpp"
#include "cwm/runner.hpp"
#include "cwm/snapshot_io.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using cwm::run::RunConfig;

int dispatch(const std::string& verb, const std::string& config_path,
             const std::string& out, int levels, bool seed_set, unsigned seed) {
  RunConfig cfg = cwm::run::parse_config(config_path);
  if (!out.empty()) cfg.output.directory = out;
  if (seed_set) cfg.seed = seed;

  if (verb == "simulate" || verb == "diagnose") {
    // `simulate` and `diagnose` share the pipeline; diagnose forces the cone
    // suite on.
    if (verb == "diagnose") cfg.diag.cone = true;
    const auto rep = cwm::run::run_pipeline(cfg);
    if (cfg.output.directory.empty()) std::cout << rep.dump(2) << "\n";
    return 0;
  }
  if (verb == "gauge") {
    cfg.diag.cone = false;
    const auto rep = cwm::run::run_pipeline(cfg);
    if (cfg.output.directory.empty()) std::cout << rep.dump(2) << "\n";
    return 0;
  }
  if (verb == "study") {
    const auto rep = cwm::run::convergence_study(cfg, levels);
    if (out.empty()) {
      std::cout << rep.dump(2) << "\n";
    } else {
      std::ofstream f(out + "/study.json");
      if (!f) throw cwm::IOError("cannot write study.json");
      f << rep.dump(2) << "\n";
      cwm::run::emit_plotdata(rep, out);
    }
    return 0;
  }
  if (verb == "export") {
    cfg.output.csv = true;
    if (cfg.output.directory.empty())
      throw cwm::ValidationError("export requires --out or output.directory");
    const auto rep = cwm::run::run_pipeline(cfg);
    cwm::run::emit_plotdata(rep, cfg.output.directory);
    return 0;
  }
  throw cwm::ValidationError("unknown verb: " + verb);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"constant-negative-curvature wave-map laboratory"};
  app.require_subcommand(1);

  std::string config_path, out;
  int threads = 1;
  unsigned seed = 0;
  bool seed_set = false;
  int levels = 3;

  for (const char* verb : {"simulate", "gauge", "diagnose", "study", "export"}) {
    auto* sub = app.add_subcommand(verb);
    sub->add_option("--config", config_path, "config file path")->required();
    sub->add_option("--out", out, "output directory (overrides config)");
    sub->add_option("--threads", threads, "worker cap (results unchanged)");
    sub->add_option("--seed", seed, "seed override")
        ->each([&seed_set](const std::string&) { seed_set = true; });
    if (std::string(verb) == "study")
      sub->add_option("--levels", levels, "refinement levels (>= 2)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 2 : 0;
  }

  try {
    if (threads < 1) throw cwm::ValidationError("--threads must be >= 1");
    cwm::par::thread_count() = threads;
    const std::string verb = app.get_subcommands().front()->get_name();
    return dispatch(verb, config_path, out, levels, seed_set, seed);
  } catch (const cwm::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const cwm::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const cwm::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
