#include <iostream>

#include "CLI11.hpp"
#include "coordlqr/coordcli.hpp"

namespace coordlqr::cli {

int run(int argc, char** argv) {
    CLI::App app{"coordlqr: low-rank coordinated LQR toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    std::string nu_range = "2:128";
    std::string lambda_grid = "0:0.99:21";
    std::string family = "static";
    std::optional<std::uint64_t> seed;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "scenario config (JSON)")->required();
        sub->add_option("--out", out_path, "output file")->required();
        sub->add_option("--seed", seed, "overrides sim.seed");
    };
    CLI::App* synth = app.add_subcommand("synth", "synthesize gains and a cost report (JSON)");
    CLI::App* cost_nu = app.add_subcommand("cost-vs-nu", "per-agent coordination cost against nu (CSV)");
    CLI::App* sweep = app.add_subcommand("sweep", "trade-off curve over a lambda grid (CSV)");
    CLI::App* sim = app.add_subcommand("simulate", "ensemble trajectory (CSV)");
    CLI::App* oracle = app.add_subcommand("oracle", "aggregate oracle cross-check (JSON)");
    for (CLI::App* sub : {synth, cost_nu, sweep, sim, oracle}) {
        common(sub);
    }
    cost_nu->add_option("--nu-range", nu_range, "a:b inclusive");
    sweep->add_option("--lambda-grid", lambda_grid, "a:b:count inclusive");
    sweep->add_option("--weight-family", family, "static or integrator")
        ->check(CLI::IsMember({"static", "integrator"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << error_line("InvalidArgument", e.what(), 2) << '\n';
        return 2;
    }

    try {
        const Scenario sc = load_scenario(config_path, seed);
        std::string output;
        if (synth->parsed()) {
            output = cmd_synth(sc).dump(2) + "\n";
        } else if (cost_nu->parsed()) {
            const auto [lo, hi] = parse_nu_range(nu_range);
            output = cmd_cost_vs_nu(sc, lo, hi);
        } else if (sweep->parsed()) {
            output = cmd_sweep(sc, parse_lambda_grid(lambda_grid), family);
        } else if (sim->parsed()) {
            output = cmd_simulate(sc);
        } else {
            output = cmd_oracle(sc).dump(2) + "\n";
        }
        write_atomic(out_path, output);
    } catch (const Error& e) {
        const int code = exit_code_for(e);
        std::cerr << error_line(to_string(e.code()), e.what(), code) << '\n';
        return code;
    } catch (const std::exception& e) {
        std::cerr << error_line("InternalError", e.what(), 3) << '\n';
        return 3;
    }
    return 0;
}

}  // namespace coordlqr::cli
