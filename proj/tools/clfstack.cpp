#include "clfstack/commands.hpp"
#include "clfstack/log.hpp"

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include <iostream>

int main(int argc, char** argv) {
  using namespace clfstack;
  CLI::App app{"Prioritized execution of value-function-encoded tasks"};
  app.require_subcommand(1);
  CommandOptions opt;
  app.add_option("--config", opt.config, "Scenario file (JSON)");
  app.add_option("--out", opt.out, "Output directory (overrides output.dir)");
  app.add_option("--seed", opt.seed, "Seed for randomized checks");
  app.add_flag("--quiet", opt.quiet, "Only print errors");

  auto* learn = app.add_subcommand("learn", "Run value iteration and write the grid artifact");
  auto* simulate = app.add_subcommand("simulate", "Simulate a scenario and write its trace");
  simulate->add_flag("--no-plot", opt.no_plot, "Skip SVG output");
  auto* compare = app.add_subcommand(
      "compare-appendix-a", "Compare optimal, min-norm and learned controllers");
  compare->add_flag("--sweep", opt.sweep, "Relearn at 21, 41 and 81 points per axis");
  compare->add_flag("--no-plot", opt.no_plot, "Skip SVG output");
  auto* verify = app.add_subcommand("verify", "Run property suites");
  verify->add_option("suite", opt.suite, "dynamics, valuefn, clf, qp, stack, sim, config or all");
  verify->add_option("--scenarios", opt.scenario_dir, "Directory of scenario files to round-trip");
  auto* plot = app.add_subcommand("plot", "Re-render plots from an existing trace");
  plot->add_option("--trace", opt.trace, "Trace CSV")->required();

  // Global flags are also accepted after the subcommand.
  for (CLI::App* sub : {learn, simulate, compare, verify, plot}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  }
  if (opt.quiet) log::set_min_level(log::Level::error);

  auto needs_config = [&](const char* cmd) {
    if (opt.config.empty()) {
      std::cerr << cmd << ": --config is required\n";
      return false;
    }
    return true;
  };

  try {
    if (learn->parsed()) return needs_config("learn") ? cmd_learn(opt) : kExitValidation;
    if (simulate->parsed()) return needs_config("simulate") ? cmd_simulate(opt) : kExitValidation;
    if (compare->parsed()) {
      return needs_config("compare-appendix-a") ? cmd_compare_appendix_a(opt) : kExitValidation;
    }
    if (verify->parsed()) return cmd_verify(opt);
    if (plot->parsed()) return cmd_plot(opt);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << " (residual " << e.residual() << ")\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitValidation;
}
