#pragma once

#include "ionxy/chain.hpp"
#include "ionxy/coupling.hpp"
#include "ionxy/drive.hpp"
#include "ionxy/error.hpp"
#include "ionxy/serialize.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ionxy {

// Scenario files are JSON. Every dimensioned quantity is written as "<number> <unit>" (or
// {"value": x, "unit": "..."}); bare numbers are accepted only for dimensionless fields.
//
//   unit system "si":            frequency Hz | kHz | MHz (all times 2 pi) | rad/s
//                                time s | ms | us,  mass u | kg,  delta_k 1/m | 1/um | 1/nm
//   unit system "dimensionless": frequency 2pi (times 2 pi) | rad,  time 1
//   angles everywhere:           rad | deg | pi

enum class RunKind { Modes, Couplings, Engineer, Evolve, FloquetScan, Diagnostics };

std::string to_string(RunKind k);
RunKind run_kind_from(const std::string& verb);

struct ModesSection {
  std::vector<std::size_t> n_scan;  // chain sizes for the crowding table; empty = n_ions only
};

struct EngineerSection {
  std::vector<double> targets{0.5, 1.0, 1.5};
  double j_max{};        // rad/s
  double mu2_offset{};   // rad/s, y tone sits at mu1 + offset
  EngineerOptions options;
};

struct ThermalSection {
  std::vector<double> nbar;  // per included mode
  int samples = 16;
};

struct FitSection {
  std::string column;        // trajectory column, e.g. P_uu or P_up_1
  double t_start{};
  double t_stop{};           // 0 = end of run
};

struct EvolveSection {
  std::string init{"dd"};
  std::vector<int> fock;     // empty = vacuum
  double t_final{};
  double sample_dt{};
  double rtol = 1e-8;
  double atol = 1e-12;
  int steps_per_period = 50;
  bool reference_effective = false;
  std::optional<FitSection> fit;
  std::optional<ThermalSection> thermal;
};

struct FloquetSection {
  std::vector<double> nf_values;
  double j_target{};          // cycles per time unit; 0 = derived from the tones
  double edge_fraction = 0.4;
  std::vector<std::string> inits{"dd", "du"};
  double total_time{};        // 0 = 1 / j_target
  double max_sample_dt = 1.0;
  int min_samples_per_period = 16;
  int n_max = 4;
  bool trajectories = false;
  std::optional<std::pair<double, double>> baseline;  // detunings above the mode, rad per time unit
};

struct DiagnosticsSection {
  double t_final{};           // 0 = 1 / max J
  int points = 200;
  int steps_per_period = 200;
};

struct OutputSection {
  bool gnuplot = false;
  bool states = false;
  std::string time_unit;      // "" = base unit of the scenario
};

struct Scenario {
  RunKind run{RunKind::Modes};
  std::string units{"si"};
  std::size_t n_ions{};
  std::optional<TrapConfig> trap;
  Axis axis{Axis::X};
  std::optional<ModeSet> literal_modes;
  std::vector<std::size_t> mode_mask;  // modes used by couplings / diagnostics; empty = all
  double resonance_guard{};

  HilbertSpec hilbert;                 // modes empty until resolved against the mode set
  bool hilbert_modes_given = false;

  bool has_drive = false;
  DriveProgram drive;

  ModesSection modes;
  EngineerSection engineer;
  EvolveSection evolve;
  FloquetSection floquet;
  DiagnosticsSection diagnostics;
  OutputSection output;

  /// The mode set the run works on: the literal one or chain modes along `axis`.
  ModeSet mode_set() const;
  CouplingOptions coupling_options() const;
};

/// Parses and validates a scenario; throws ParseError, UnknownKey, ValidationError and the
/// coupling-engine precondition errors (ResonantTone, ZigZagUnstable).
Scenario parse_scenario(const std::filesystem::path& path);
Scenario parse_scenario_text(const std::string& text, const std::string& source = "<string>");

/// Canonical form with every default materialised; parse_scenario_text(dump) gives back the same scenario.
json scenario_to_json(const Scenario& s);

struct RunContext {
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string verb;
  std::string tool_version;
};

/// Executes the pipeline, writes outputs and manifest.json into the sink; returns the manifest.
json run_scenario(const Scenario& s, OutputSink& sink, const RunContext& ctx);

/// {error, exit_code, module, operation, parameter, message}
json error_json(const Error& e);

}  // namespace ionxy
