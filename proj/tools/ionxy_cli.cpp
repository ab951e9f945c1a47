// ionxy command-line front end: one verb per run kind, all driven by a scenario file.

#include "ionxy/error.hpp"
#include "ionxy/scenario.hpp"
#include "ionxy/serialize.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace {

struct Args {
  std::string scenario;
  std::string out;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool quiet = false;
};

std::string default_out() {
  if (const char* env = std::getenv("IONXY_OUT_DIR"); env && *env) return env;
  return "ionxy-out";
}

void write_error(const std::string& dir, const ionxy::Error& e) {
  try {
    ionxy::OutputSink sink(dir);
    sink.write_json("error.json", ionxy::error_json(e));
  } catch (const std::exception&) {
    // the error JSON is best effort when the directory itself is the problem
  }
}

int run(const std::string& verb, const Args& a) {
  try {
    const ionxy::Scenario s = ionxy::parse_scenario(a.scenario);
    ionxy::OutputSink sink(a.out);
    ionxy::RunContext ctx{a.seed, a.jobs, verb, IONXY_VERSION};
    const auto manifest = ionxy::run_scenario(s, sink, ctx);
    std::error_code ec;
    std::filesystem::remove(std::filesystem::path(a.out) / "error.json", ec);  // stale from an earlier failure
    if (!a.quiet) {
      fmt::print("{}: {} outputs in {} ({:.2f} s)\n", verb, manifest["outputs"].size(), a.out,
                 manifest["wall_clock_s"].get<double>());
    }
    return 0;
  } catch (const ionxy::Error& e) {
    std::cerr << fmt::format("ionxy {}: {} in {}/{}: {}{}\n", verb, ionxy::to_string(e.kind()), e.module(),
                             e.operation(), e.what(),
                             e.parameter().empty() ? "" : fmt::format(" [{}]", e.parameter()));
    write_error(a.out, e);
    return ionxy::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "ionxy " << verb << ": internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trapped-ion XY coupling toolkit: modes, couplings, engineering, dynamics and Floquet scans"};
  app.set_version_flag("--version", std::string(IONXY_VERSION));
  app.require_subcommand(1);

  Args args;
  args.out = default_out();
  std::string chosen;
  const char* verbs[][2] = {
      {"modes", "transverse normal modes and mode crowding of a trapped chain"},
      {"couplings", "Ising / XY coupling matrices and validity report for the drive tones"},
      {"engineer", "power-law coupling design with a matched y tone"},
      {"evolve", "full spin-phonon evolution in a truncated Fock space"},
      {"floquet-scan", "alternating XX / YY drive scanned over the Floquet period"},
      {"diagnostics", "second-order Magnus terms of a two-tone drive"},
  };
  for (const auto& v : verbs) {
    CLI::App* sub = app.add_subcommand(v[0], v[1]);
    sub->add_option("--scenario", args.scenario, "scenario file (JSON) or a run manifest")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", args.out, "output directory (default: $IONXY_OUT_DIR or ./ionxy-out)");
    sub->add_option("--seed", args.seed, "seed for thermal sampling");
    sub->add_option("--jobs", args.jobs, "worker threads for scans")->check(CLI::Range(1, 1024));
    sub->add_flag("--quiet", args.quiet, "no summary line");
    sub->callback([&chosen, name = std::string(v[0])] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  return run(chosen, args);
}
