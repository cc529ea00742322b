// delaynet command line: run, check-quad, validate, version.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "delaynet/scenario.hpp"

namespace {

struct Flags {
  std::string scenario;
  std::string out;
  std::int64_t seed = -1;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("scenario", f.scenario, "Scenario JSON file")->required();
  cmd->add_option("--out", f.out, "Output directory (overrides the scenario)");
  cmd->add_option("--seed", f.seed, "Probe seed (overrides the scenario)")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--quiet", f.quiet, "Print nothing on success");
}

delaynet::RunOptions options(const Flags& f) {
  delaynet::RunOptions o;
  if (!f.out.empty()) o.out_dir = std::filesystem::path(f.out);
  if (f.seed >= 0) o.seed = static_cast<std::uint64_t>(f.seed);
  return o;
}

// Loads the scenario, printing validation or I/O errors. Returns the exit
// code to use on failure.
std::optional<delaynet::Scenario> load(const Flags& f, int& code) {
  try {
    return delaynet::load_scenario(f.scenario);
  } catch (const delaynet::ScenarioError& e) {
    for (const auto& err : e.errors()) std::cerr << f.scenario << ": " << err.to_string() << '\n';
    code = delaynet::kExitValidation;
  } catch (const delaynet::IoError& e) {
    std::cerr << e.what() << '\n';
    code = delaynet::kExitIo;
  }
  return std::nullopt;
}

int report(const delaynet::RunSummary& s, const Flags& f) {
  if (!f.quiet || s.exit_code != delaynet::kExitOk) s.print(s.exit_code == 0 ? std::cout : std::cerr);
  return s.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulate and verify coupled networks with time-varying and distributed delays"};
  app.require_subcommand(1);
  Flags flags;

  auto* run = app.add_subcommand("run", "Integrate a scenario and write diagnostics");
  add_common(run, flags);
  auto* quad = app.add_subcommand("check-quad", "Falsification check of the scenario's QUAD certificate");
  add_common(quad, flags);
  auto* validate = app.add_subcommand("validate", "Validate a scenario file");
  add_common(validate, flags);
  auto* version = app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : delaynet::kExitValidation;
  }

  if (version->parsed()) {
    std::cout << "delaynet " << delaynet::kVersion << '\n';
    return 0;
  }

  int code = 0;
  auto sc = load(flags, code);
  if (!sc) return code;

  if (validate->parsed()) {
    if (!flags.quiet) std::cout << flags.scenario << ": ok\n";
    return 0;
  }
  if (quad->parsed()) return report(delaynet::check_quad_scenario(*sc, options(flags)), flags);
  return report(delaynet::run_scenario(*sc, options(flags)), flags);
}
