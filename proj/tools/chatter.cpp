#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "chatter/app.hpp"

namespace {

std::vector<double> parse_reals(const std::string& text) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(cell, &used);
        } catch (const std::exception&) {
            used = std::string::npos;
        }
        if (used != cell.size()) throw chatter::ConfigError("--p0: '" + cell + "' is not a real number");
        values.push_back(v);
    }
    return values;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace chatter::app;

    CLI::App cli{"Chattering Hamiltonian optimal-control solver"};
    cli.require_subcommand(1);

    auto* solve_cmd = cli.add_subcommand("solve", "Run the shooting solver and export trajectory, schedule and convergence log");
    SolveConfig flags;
    std::string p0_text, config_path;
    double delta_p = 0.0;
    auto* o_problem = solve_cmd->add_option("--problem", flags.problem, "lqr | supply-chain");
    auto* o_intervals = solve_cmd->add_option("--intervals", flags.intervals, "time intervals I");
    auto* o_levels = solve_cmd->add_option("--levels", flags.levels, "levels per control dimension");
    auto* o_cap = solve_cmd->add_option("--level-cap", flags.level_cap, "max levels per interval");
    auto* o_gamma = solve_cmd->add_option("--gamma", flags.gamma, "shooting step size in (0,1]");
    auto* o_delta = solve_cmd->add_option("--delta-p", delta_p, "costate perturbation for sensitivities");
    auto* o_eps = solve_cmd->add_option("--eps", flags.eps, "transversality tolerance");
    auto* o_iters = solve_cmd->add_option("--max-iters", flags.max_iters, "iteration budget");
    auto* o_ridge = solve_cmd->add_option("--ridge", flags.ridge, "ridge added to the correction matrix");
    auto* o_p0 = solve_cmd->add_option("--p0", p0_text, "initial costate, comma-separated");
    auto* o_demand = solve_cmd->add_option("--demand", flags.demand, "constant | seasonal | pulse");
    auto* o_amp = solve_cmd->add_option("--amplitude", flags.amplitude, "demand amplitude");
    auto* o_period = solve_cmd->add_option("--period", flags.period, "demand period");
    auto* o_fixed = solve_cmd->add_option("--fixed-cost-mode", flags.fixed_cost_mode, "always | on-order");
    auto* o_out = solve_cmd->add_option("--out-dir", flags.out_dir, "output directory");
    solve_cmd->add_option("--config", config_path, "JSON config; flags override it");

    auto* validate_cmd = cli.add_subcommand("validate", "Run oracle checks");
    std::string target;
    validate_cmd->add_option("target", target, "lqr | lp | gradients | tables | all")->required();

    auto* export_cmd = cli.add_subcommand("export-fixtures", "Write the embedded data tables as CSV");
    std::string fixture_dir = "fixtures";
    export_cmd->add_option("--out-dir", fixture_dir, "output directory");

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = cli.exit(e);
        return code == 0 ? 0 : kExitError;
    }

    try {
        if (*validate_cmd) return run_validate(target, std::cout);
        if (*export_cmd) return run_export_fixtures(fixture_dir, std::cout);

        SolveConfig config = config_path.empty() ? SolveConfig{} : load_config(config_path);
        if (o_problem->count()) config.problem = flags.problem;
        if (o_intervals->count()) config.intervals = flags.intervals;
        if (o_levels->count()) config.levels = flags.levels;
        if (o_cap->count()) config.level_cap = flags.level_cap;
        if (o_gamma->count()) config.gamma = flags.gamma;
        if (o_delta->count()) config.delta_p = delta_p;
        if (o_eps->count()) config.eps = flags.eps;
        if (o_iters->count()) config.max_iters = flags.max_iters;
        if (o_ridge->count()) config.ridge = flags.ridge;
        if (o_p0->count()) config.p0 = parse_reals(p0_text);
        if (o_demand->count()) config.demand = flags.demand;
        if (o_amp->count()) config.amplitude = flags.amplitude;
        if (o_period->count()) config.period = flags.period;
        if (o_fixed->count()) config.fixed_cost_mode = flags.fixed_cost_mode;
        if (o_out->count()) config.out_dir = flags.out_dir;

        const LogLevel level = log_level_from_env();
        return run_solve(config, std::cerr, level);
    } catch (const std::exception& e) {
        std::cerr << "error [config]: " << e.what() << '\n';
        return kExitError;
    }
}
