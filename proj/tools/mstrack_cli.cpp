#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "mstrack/csv.hpp"
#include "mstrack/presets.hpp"
#include "mstrack/scenario_io.hpp"
#include "mstrack/simulator.hpp"

using namespace mstrack;

namespace {

enum ExitCode { kOk = 0, kParse = 2, kValidation = 3, kIo = 4 };

/// A path that exists is read as a scenario file; anything else must name a preset.
Scenario resolve_scenario(const std::string& ref) {
  if (std::filesystem::exists(ref)) return load_scenario_file(ref);
  if (has_preset(ref)) return preset(ref);
  throw IoError("no such scenario file or preset: " + ref);
}

void apply_mode(Scenario& s, const std::string& mode) {
  if (mode == "robust") s.controller.mode = ControlMode::Robust;
  if (mode == "point") s.controller.mode = ControlMode::Point;
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    if (!std::cout) throw IoError("cannot write to stdout");
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  out.close();
  if (!out) throw IoError("cannot write " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-sensor target tracking with sensor motion control"};
  app.require_subcommand(1);

  std::string scenario_ref;
  std::uint64_t seed = 0;
  int runs = 1;
  std::string out_path;
  std::string mode;
  bool quiet = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", scenario_ref, "Scenario file or preset name")->required();
    cmd->add_flag("--quiet", quiet, "Suppress progress output on stderr");
  };
  auto add_mode = [&](CLI::App* cmd) {
    cmd->add_option("--mode", mode, "Override the controller mode")->check(CLI::IsMember({"robust", "point"}));
  };

  CLI::App* run = app.add_subcommand("run", "Run one episode and write its trace CSV");
  add_common(run);
  add_mode(run);
  run->add_option("--seed", seed, "Random seed");
  run->add_option("--out", out_path, "Output CSV path (stdout when omitted)");

  CLI::App* mc = app.add_subcommand("mc", "Run a Monte Carlo batch and write the percentile summary CSV");
  add_common(mc);
  add_mode(mc);
  mc->add_option("--seed", seed, "Base seed; run i uses seed + i");
  mc->add_option("--runs", runs, "Number of runs")->check(CLI::PositiveNumber);
  mc->add_option("--out", out_path, "Output CSV path (stdout when omitted)");

  CLI::App* validate = app.add_subcommand("validate", "Parse and validate a scenario, print it normalized");
  add_common(validate);
  add_mode(validate);

  CLI::App* presets = app.add_subcommand("presets", "List bundled presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kParse;
  }

  if (presets->parsed()) {
    for (const auto& name : preset_names()) std::cout << name << '\n';
    return kOk;
  }

  try {
    Scenario scenario = resolve_scenario(scenario_ref);
    apply_mode(scenario, mode);
    validate_scenario(scenario);

    if (validate->parsed()) {
      std::cout << dump_scenario(scenario);
      return kOk;
    }

    std::ostringstream csv;
    if (run->parsed()) {
      const RunResult result = run_episode(scenario, seed);
      write_episode_csv(csv, result);
      if (!quiet) {
        std::cerr << scenario.name << ": " << result.steps << " steps, seed " << seed << ", solver non-convergence "
                  << result.flags.solver_nonconverged << ", singular events " << result.flags.singular_events << '\n';
      }
    } else {
      const McSummary summary = run_monte_carlo(scenario, runs, seed);
      write_summary_csv(csv, summary);
      if (!quiet) std::cerr << scenario.name << ": " << summary.runs << " runs from seed " << seed << '\n';
    }
    write_output(out_path, csv.str());
    return kOk;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kParse;
  } catch (const ScenarioError& e) {
    std::cerr << "invalid scenario: " << e.what() << '\n';
    return kValidation;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  }
}
