// Command-line front end. Exit codes: 0 success, 2 configuration error,
// 3 physics-constraint error.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "reic/reic.hpp"

namespace {

using namespace reic;
using namespace reic::harness;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::string format = "json";
};

ExperimentConfig resolve(const GlobalOptions& g) {
  ExperimentConfig c = g.config_path.empty() ? ExperimentConfig{} : load_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  if (g.out) c.output_dir = *g.out;
  return c;
}

void print(const RunReport& r, const GlobalOptions& g) {
  std::cout << emit_report(r, g.format == "text" ? ReportFormat::text : ReportFormat::json);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rare-earth ensemble qubit simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "override the config seed");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--format", g.format, "report format")->check(CLI::IsMember({"json", "text"}));

  std::function<void()> action;
  auto recipe_command = [&](const std::string& cmd, const std::string& recipe,
                            const std::string& help) {
    app.add_subcommand(cmd, help)->callback([&, recipe] {
      action = [&, recipe] { print(run_experiment(recipe, resolve(g)), g); };
    });
  };
  recipe_command("pit", "fig2", "burn the simple and the optimal pit");
  recipe_command("burnback", "fig3-burnback", "create the |0> qubit peak inside the pit");
  recipe_command("gate", "gate-grid", "verify dark-state gates on a (theta, phi) grid");
  recipe_command("grape", "grape", "optimize a band-limited transfer pulse");
  recipe_command("grape-study", "fig6-grape-study", "transfer efficiency versus bandwidth");
  recipe_command("readout", "readout", "photon statistics and discrimination");

  bool coherent = false;
  auto* tomo = app.add_subcommand("tomo", "six-state tomography through the full pipeline");
  tomo->add_flag("--coherent", coherent, "switch decoherence off");
  tomo->callback([&] {
    action = [&] {
      print(run_experiment(coherent ? "six-state-tomo" : "fig5-tomo-noise", resolve(g)), g);
    };
  });

  auto* pulse = app.add_subcommand("pulse", "pulse synthesis and characterization");
  pulse->require_subcommand(1);
  pulse->fallthrough();
  double relative_phase = 0.0;
  bool two_colour = false;
  auto* synth = pulse->add_subcommand("synth", "write a sechyp waveform CSV");
  synth->add_flag("--two-color", two_colour, "two-colour version split by the qubit splitting");
  synth->add_option("--phase", relative_phase, "two-colour relative phase, rad");
  synth->callback([&] {
    action = [&] {
      const ExperimentConfig c = resolve(g);
      Waveform w = sechyp(c.pulse.sechyp);
      if (two_colour) w = two_color(w, c.crystal.scheme.ground_splittings[0], relative_phase);
      std::filesystem::create_directories(c.output_dir);
      const auto path = std::filesystem::path(c.output_dir) / "pulse_waveform.csv";
      write_waveform_csv(path, w);
      std::cout << path.string() << "\n";
    };
  });
  pulse->add_subcommand("beat", "beat-note round trip of sechyp and GRAPE pulses")->callback([&] {
    action = [&] { print(run_experiment("fig5-beat", resolve(g)), g); };
  });

  app.add_subcommand("chainmap", "map the qubit chain around the readout ion")->callback([&] {
    action = [&] {
      const ExperimentConfig c = resolve(g);
      IonGeometry geo;
      for (const auto& ion : c.readout.chain)
        geo.qubits.push_back({{ion.position[0], ion.position[1], ion.position[2]}, ion.frequency});
      for (double f : find_chain(geo, c.readout.ion, c.readout.shift_resolution))
        std::cout << format_double(f) << "\n";
    };
  });

  double p = 0.01;
  int n = 5;
  auto* scaling = app.add_subcommand("scaling", "usable-ion fraction p^(n-1)");
  scaling->add_option("-p", p, "probability of a usable neighbour");
  scaling->add_option("-n", n, "qubits in the chain");
  scaling->callback([&] { action = [&] { std::cout << format_double(ensemble_scaling(p, n)) << "\n"; }; });

  std::string recipe_name;
  auto* recipe = app.add_subcommand("recipe", "run a named recipe");
  recipe->add_option("name", recipe_name, "recipe id")->required();
  recipe->callback([&] { action = [&] { print(run_experiment(recipe_name, resolve(g)), g); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    if (action) action();
  } catch (const PhysicsError& e) {
    std::cerr << "physics error: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
