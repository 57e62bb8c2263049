#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "sublin/cli/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Reflected G-BSDE lattice solver: solve, study and check"};
    app.require_subcommand(1, 1);

    std::string config, out = ".";
    int threads = 0;
    std::string kind;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "INI configuration file")->required();
        sub->add_option("--out", out, "output directory (created if missing)");
        sub->add_option("--threads", threads, "worker threads (0 keeps the runtime default)")
            ->check(CLI::NonNegativeNumber);
    };
    auto* solve = app.add_subcommand("solve", "solve one reflected problem, write surface.csv and summary.csv");
    auto* study = app.add_subcommand("study", "convergence study, write study.csv and study.svg");
    auto* check = app.add_subcommand("check", "inequality and property suite, write checks.csv");
    add_common(solve);
    add_common(study);
    add_common(check);
    study->add_option("--kind", kind, "penalization | picard | refinement (overrides [study] kind)")
        ->check(CLI::IsMember({"penalization", "picard", "refinement"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        sublin::cli::report_error(std::cerr, sublin::cli::ExitCode::config_error, "usage", e.what());
        return sublin::cli::ExitCode::config_error;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    std::optional<std::string> study_kind;
    if (!kind.empty()) study_kind = kind;
    return sublin::cli::run_command(command, config, out, study_kind, threads, std::cerr);
}
