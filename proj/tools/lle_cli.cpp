// lle — batch front end for the solitary-wave workbench.
//
//   lle <branch|spectrum|resolvent|evolve|report> [--config PATH] [--out DIR]
//       [--seed N] [--tol X] [--dump-fields]

#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

extern "C" void openblas_set_num_threads(int);

int main(int argc, char** argv)
{
    // Single-threaded BLAS keeps reruns bit-identical.
    openblas_set_num_threads(1);

    CLI::App app{"Lugiato-Lefever solitary-wave workbench"};
    app.set_version_flag("--version", lle::cli::tool_version);
    app.require_subcommand(1, 1);
    app.fallthrough();

    std::optional<std::string> config;
    lle::cli::Overrides ov;
    app.add_option("--config", config, "run configuration (JSON)")->check(CLI::ExistingFile);
    app.add_option("--out", ov.out, "output directory (overrides output_dir)");
    app.add_option("--seed", ov.seed, "seed for randomized perturbations");
    app.add_option("--tol", ov.tol, "Newton tolerance (branch, resolvent) or check tolerance (report)")
        ->check(CLI::PositiveNumber);
    app.add_flag("--dump-fields", ov.dump_fields, "also write intermediate fields as CSV");

    for (const char* name : {"branch", "spectrum", "resolvent", "evolve", "report"}) app.add_subcommand(name);
    app.get_subcommand("branch")->description("continue the solitary-wave branch in eps");
    app.get_subcommand("spectrum")->description("dense spectra, Krein audit and verdicts per branch point");
    app.get_subcommand("resolvent")->description("resolvent scan and high-frequency scaling");
    app.get_subcommand("evolve")->description("perturbed evolution and rate fit");
    app.get_subcommand("report")->description("summary of all artifacts against closed-form predictions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : lle::cli::exit_user_error;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    return lle::cli::run_command(command, config, ov, std::cout, std::cerr);
}
