#include "chatter/app.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <ostream>
#include <random>
#include <sstream>

#include "chatter/io.hpp"

#ifndef CHATTER_DATA_DIR
#define CHATTER_DATA_DIR "data"
#endif

namespace chatter::app {

using nlohmann::json;

namespace {

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "problem", "intervals", "levels", "level-cap", "gamma", "delta-p", "eps", "max-iters",
        "ridge", "p0", "demand", "amplitude", "period", "fixed-cost-mode", "out-dir", "measurement-replay"};
    return keys;
}

int state_dim_of(const std::string& problem) {
    if (problem == "lqr") return 1;
    if (problem == "supply-chain") return problems::kSupplyChainStateDim;
    throw ConfigError("unknown problem '" + problem + "' (expected lqr or supply-chain)");
}

template <typename T>
T get_as(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

std::string module_of(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return "config";
    if (dynamic_cast<const InfeasibleLevels*>(&e) || dynamic_cast<const EmptyGrid*>(&e)) return "chattering";
    if (dynamic_cast<const NonFiniteEvaluation*>(&e)) return "core-model";
    if (dynamic_cast<const SingularCorrection*>(&e)) return "shooting";
    if (dynamic_cast<const DimensionMismatch*>(&e)) return "propagation";
    return "io";
}

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(6);
    ss << v;
    return ss.str();
}

}  // namespace

void SolveConfig::validate() const {
    const int n = state_dim_of(problem);
    if (intervals < 1) throw ConfigError("intervals must be >= 1");
    if (levels < 2) throw ConfigError("levels must be >= 2");
    if (level_cap < 1) throw ConfigError("level-cap must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
    if (delta_p && !(*delta_p > 0.0)) throw ConfigError("delta-p must be > 0");
    if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
    if (max_iters < 1) throw ConfigError("max-iters must be >= 1");
    if (!(ridge >= 0.0)) throw ConfigError("ridge must be >= 0");
    if (!p0.empty() && static_cast<int>(p0.size()) != n)
        throw ConfigError("p0 has " + std::to_string(p0.size()) + " entries, problem '" + problem + "' needs " +
                          std::to_string(n));
    for (double v : p0)
        if (!std::isfinite(v)) throw ConfigError("p0 entries must be finite");
    const auto profile = problems::parse_demand_profile(demand);
    if (!(amplitude >= 0.0)) throw ConfigError("amplitude must be >= 0");
    if (profile == problems::DemandProfile::Seasonal && !(period > 0.0)) throw ConfigError("period must be > 0");
    if (!(period >= 0.0)) throw ConfigError("period must be >= 0");
    problems::parse_fixed_cost_mode(fixed_cost_mode);
    if (out_dir.empty()) throw ConfigError("out-dir must not be empty");
}

SolveConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    const auto& keys = config_keys();
    for (const auto& [key, _] : j.items())
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw ConfigError("unknown config key '" + key + "'");

    SolveConfig c;
    if (j.contains("problem")) c.problem = get_as<std::string>(j, "problem");
    if (j.contains("intervals")) c.intervals = get_as<int>(j, "intervals");
    if (j.contains("levels")) c.levels = get_as<int>(j, "levels");
    if (j.contains("level-cap")) c.level_cap = get_as<int>(j, "level-cap");
    if (j.contains("gamma")) c.gamma = get_as<double>(j, "gamma");
    if (j.contains("delta-p") && !j.at("delta-p").is_null()) c.delta_p = get_as<double>(j, "delta-p");
    if (j.contains("eps")) c.eps = get_as<double>(j, "eps");
    if (j.contains("max-iters")) c.max_iters = get_as<int>(j, "max-iters");
    if (j.contains("ridge")) c.ridge = get_as<double>(j, "ridge");
    if (j.contains("p0")) c.p0 = get_as<std::vector<double>>(j, "p0");
    if (j.contains("demand")) c.demand = get_as<std::string>(j, "demand");
    if (j.contains("amplitude")) c.amplitude = get_as<double>(j, "amplitude");
    if (j.contains("period")) c.period = get_as<double>(j, "period");
    if (j.contains("fixed-cost-mode")) c.fixed_cost_mode = get_as<std::string>(j, "fixed-cost-mode");
    if (j.contains("out-dir")) c.out_dir = get_as<std::string>(j, "out-dir");
    if (j.contains("measurement-replay") && !j.at("measurement-replay").is_null())
        c.measurement_replay = get_as<std::string>(j, "measurement-replay");
    return c;
}

SolveConfig load_config(const std::filesystem::path& path) { return parse_config(io::read_text(path)); }

std::string serialize_config(const SolveConfig& c) {
    json j;
    j["problem"] = c.problem;
    j["intervals"] = c.intervals;
    j["levels"] = c.levels;
    j["level-cap"] = c.level_cap;
    j["gamma"] = c.gamma;
    j["delta-p"] = c.delta_p ? json(*c.delta_p) : json(nullptr);
    j["eps"] = c.eps;
    j["max-iters"] = c.max_iters;
    j["ridge"] = c.ridge;
    j["p0"] = c.p0;
    j["demand"] = c.demand;
    j["amplitude"] = c.amplitude;
    j["period"] = c.period;
    j["fixed-cost-mode"] = c.fixed_cost_mode;
    j["out-dir"] = c.out_dir;
    j["measurement-replay"] = c.measurement_replay ? json(*c.measurement_replay) : json(nullptr);
    return j.dump(2) + "\n";
}

LogLevel log_level_from_env() {
    const char* v = std::getenv("CHATTER_LOG");
    if (!v || !*v) return LogLevel::Info;
    if (std::strcmp(v, "quiet") == 0) return LogLevel::Quiet;
    if (std::strcmp(v, "info") == 0) return LogLevel::Info;
    if (std::strcmp(v, "debug") == 0) return LogLevel::Debug;
    throw ConfigError(std::string("CHATTER_LOG must be quiet, info or debug (got '") + v + "')");
}

ControlProblem<double> build_problem(const SolveConfig& config) {
    if (config.problem == "lqr") return problems::build_lqr();
    if (config.problem == "supply-chain") {
        problems::SupplyChainOptions opts;
        opts.fixed_cost_mode = problems::parse_fixed_cost_mode(config.fixed_cost_mode);
        const auto demand = problems::synthetic_demand(problems::parse_demand_profile(config.demand),
                                                       config.amplitude, config.period);
        return problems::build_supply_chain(demand, kSupplyChainHorizon, config.intervals, opts);
    }
    throw ConfigError("unknown problem '" + config.problem + "'");
}

ShootingConfig<double> shooting_config(const SolveConfig& config) {
    ShootingConfig<double> s;
    s.gamma = config.gamma;
    s.delta_p = config.delta_p;
    s.epsilon = config.eps;
    s.max_iterations = config.max_iters;
    s.ridge = config.ridge;
    if (!config.p0.empty())
        s.p0_initial = Eigen::Map<const Vector<double>>(config.p0.data(), static_cast<Eigen::Index>(config.p0.size()));
    return s;
}

PropagationOptions<double> propagation_options(const SolveConfig& config) {
    PropagationOptions<double> o;
    o.grid.levels_per_dim = config.levels;
    o.grid.cap = config.level_cap;
    return o;
}

int run_solve(const SolveConfig& config, std::ostream& log, LogLevel level) {
    try {
        config.validate();
        if (level == LogLevel::Debug) log << "config:\n" << serialize_config(config);

        const ControlProblem<double> problem = build_problem(config);
        const auto partition = TimePartition<double>::uniform(problem.horizon, config.intervals);
        auto options = propagation_options(config);
        if (config.measurement_replay)
            options.measurement = io::replay_measurements(*config.measurement_replay, problem.state_dim);

        ProgressSink<double> sink;
        if (level != LogLevel::Quiet) {
            sink = [&log](const ProgressRecord<double>& r) {
                log << "iter " << r.iteration << "  residual " << fmt(r.residual) << "  cost " << fmt(r.cost)
                    << '\n';
            };
        }
        const auto result = solve(problem, partition, shooting_config(config), options, sink);

        const std::filesystem::path out_dir(config.out_dir);
        io::ConvergenceReport report{config.problem, config.intervals, &result, Vector<double>()};
        if (result.trajectory.points.empty()) {
            io::export_convergence(report, out_dir / "convergence.json");
            log << "error: " << result.diagnostic << '\n';
            return kExitError;
        }
        report.terminal_target = terminal_costate(problem, result.trajectory.terminal().x);
        io::export_trajectory(problem, result.trajectory, out_dir / "trajectory.csv");
        io::export_schedule(problem, result.trajectory, out_dir / "schedule.csv");
        io::export_convergence(report, out_dir / "convergence.json");

        if (!result.diagnostic.empty()) {
            log << "error: " << result.diagnostic << '\n';
            return kExitError;
        }
        if (level != LogLevel::Quiet) {
            log << (result.converged ? "converged" : "iteration budget exhausted") << " after "
                << result.iterations << " iterations, residual " << fmt(result.final_residual()) << ", cost "
                << fmt(result.trajectory.accumulated_cost) << '\n';
            if (result.trajectory.clamp_count > 0)
                log << "state clamped " << result.trajectory.clamp_count << " times\n";
        }
        return result.converged ? kExitConverged : kExitBudget;
    } catch (const std::exception& e) {
        log << "error [" << module_of(e) << "]: " << e.what() << '\n';
        return kExitError;
    }
}

std::filesystem::path default_data_dir() {
    if (const char* env = std::getenv("CHATTER_DATA_DIR"); env && *env) return env;
    return CHATTER_DATA_DIR;
}

LqrComparison compare_lqr(int intervals, int levels) {
    const auto problem = problems::build_lqr();
    const auto partition = TimePartition<double>::uniform(problem.horizon, intervals);
    PropagationOptions<double> options;
    options.grid.levels_per_dim = levels;
    const auto result = solve(problem, partition, ShootingConfig<double>{}, options);

    double err = 0.0;
    double scale = 0.0;
    for (const auto& pt : result.trajectory.points) {
        const double exact = problems::lqr_analytic_solution(pt.t).x;
        err = std::max(err, std::abs(pt.x[0] - exact));
        scale = std::max(scale, std::abs(exact));
    }
    const double j_star = problems::lqr_analytic_solution(0.0).j_star;
    return {result.converged, result.iterations, err / scale,
            std::abs(result.trajectory.accumulated_cost - j_star) / j_star};
}

std::vector<CheckResult> validate_lqr() {
    const auto cmp = compare_lqr(100, 101);
    return {
        {"lqr shooting converged", cmp.converged, std::to_string(cmp.iterations) + " iterations"},
        {"lqr state error <= 0.05", cmp.max_relative_state_error <= 0.05,
         "max relative x error " + fmt(cmp.max_relative_state_error)},
        {"lqr cost error <= 0.05", cmp.relative_cost_error <= 0.05,
         "relative cost error " + fmt(cmp.relative_cost_error)},
    };
}

std::vector<CheckResult> validate_lp(int instances, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> size_dist(1, 8);
    std::uniform_real_distribution<double> real_dist(-10.0, 10.0);
    std::uniform_int_distribution<int> tie_dist(-3, 3);

    int optimal = 0;
    int simplex_ok = 0;
    for (int n = 0; n < instances; ++n) {
        const int K = size_dist(rng);
        Vector<double> h(K);
        for (int k = 0; k < K; ++k) h[k] = (n % 2 == 0) ? real_dist(rng) : static_cast<double>(tie_dist(rng));

        const auto measure = solve_measure_lp(h);
        double best_vertex = std::numeric_limits<double>::infinity();
        for (int v = 0; v < K; ++v) {
            double value = 0.0;
            for (int k = 0; k < K; ++k) value += (k == v ? 1.0 : 0.0) * h[k];
            best_vertex = std::min(best_vertex, value);
        }
        if (measure_objective(h, measure) == best_vertex) ++optimal;
        const bool in_box = (measure.weights.array() >= 0.0).all() && (measure.weights.array() <= 1.0).all();
        if (in_box && std::abs(measure.weights.sum() - 1.0) <= 1e-12) ++simplex_ok;
    }
    const std::string of = " / " + std::to_string(instances);
    return {
        {"lp objective equals vertex enumeration", optimal == instances, std::to_string(optimal) + of},
        {"lp measures on the simplex", simplex_ok == instances, std::to_string(simplex_ok) + of},
    };
}

namespace {

struct GradientStats {
    int agree = 0;
    int bitwise = 0;
    double worst_ratio = 0.0;
};

template <typename Sampler>
GradientStats compare_gradients(const ControlProblem<double>& problem, int points, std::mt19937_64& rng,
                                Sampler sample) {
    ControlProblem<double> numeric = problem;
    numeric.hamiltonian_x_gradient = nullptr;
    GradientStats stats;
    for (int n = 0; n < points; ++n) {
        HamiltonianContext<double> ctx;
        Vector<double> u;
        sample(rng, ctx, u);
        const Vector<double> analytic = grad_h_state(problem, ctx, u);
        const Vector<double> fd = grad_h_state(numeric, ctx, u);
        const double tol = std::max(1e-6, 1e-4 * analytic.norm());
        const double diff = (analytic - fd).cwiseAbs().maxCoeff();
        stats.worst_ratio = std::max(stats.worst_ratio, diff / tol);
        if (diff <= tol) ++stats.agree;

        const Vector<double> dh_dp = grad_h_costate(problem, ctx, u);
        const Vector<double> f = problem.dynamics(ctx.time, ctx.state, u);
        if (dh_dp.size() == f.size() &&
            std::memcmp(dh_dp.data(), f.data(), sizeof(double) * static_cast<std::size_t>(f.size())) == 0)
            ++stats.bitwise;
    }
    return stats;
}

}  // namespace

std::vector<CheckResult> validate_gradients(int points, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::vector<CheckResult> checks;
    const std::string of = " / " + std::to_string(points);

    const auto lqr = problems::build_lqr();
    const auto lqr_stats = compare_gradients(lqr, points, rng, [&](auto& g, auto& ctx, auto& u) {
        std::uniform_real_distribution<double> xs(-20.0, 20.0), ps(-50.0, 50.0), us(lqr.control_lower[0],
                                                                                      lqr.control_upper[0]);
        ctx.time = std::uniform_real_distribution<double>(0.0, 1.0)(g);
        ctx.state = Vector<double>::Constant(1, xs(g));
        ctx.costate = Vector<double>::Constant(1, ps(g));
        u = Vector<double>::Constant(1, us(g));
    });

    const auto sc = problems::build_supply_chain(
        problems::synthetic_demand(problems::DemandProfile::Seasonal, 10.0, 1.0), 1.0, 100);
    const auto sc_stats = compare_gradients(sc, points, rng, [&](auto& g, auto& ctx, auto& u) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        ctx.time = unit(g);
        ctx.state.resize(sc.state_dim);
        ctx.costate.resize(sc.state_dim);
        for (int j = 0; j < sc.state_dim; ++j) {
            ctx.state[j] = 50.0 * unit(g);
            ctx.costate[j] = 2000.0 * unit(g) - 1000.0;
        }
        u.resize(sc.control_dim);
        for (int j = 0; j < sc.control_dim; ++j) {
            const double lo = (*sc.control_active_lower)[j];
            const double hi = sc.control_upper[j];
            u[j] = (lo > sc.control_lower[j] && unit(g) < 0.3) ? sc.control_lower[j] : lo + (hi - lo) * unit(g);
        }
    });

    checks.push_back({"lqr analytic dH/dx matches finite differences", lqr_stats.agree == points,
                      std::to_string(lqr_stats.agree) + of + ", worst error/tolerance " + fmt(lqr_stats.worst_ratio)});
    checks.push_back({"lqr dH/dp equals f bitwise", lqr_stats.bitwise == points, std::to_string(lqr_stats.bitwise) + of});
    checks.push_back({"supply-chain analytic dH/dx matches finite differences", sc_stats.agree == points,
                      std::to_string(sc_stats.agree) + of + ", worst error/tolerance " + fmt(sc_stats.worst_ratio)});
    checks.push_back({"supply-chain dH/dp equals f bitwise", sc_stats.bitwise == points,
                      std::to_string(sc_stats.bitwise) + of});
    return checks;
}

std::vector<CheckResult> validate_tables(const std::filesystem::path& data_dir) {
    std::vector<CheckResult> checks;
    for (const auto& fixture : problems::canonical_tables()) {
        const auto path = data_dir / fixture.file_name;
        CheckResult check{"table " + fixture.file_name + " matches embedded constants", false, path.string()};
        try {
            const std::string shipped = problems::canonicalize_csv(io::read_text(path));
            check.passed = shipped == fixture.text;
            if (!check.passed) check.detail += ": contents differ";
        } catch (const std::exception& e) {
            check.detail = e.what();
        }
        checks.push_back(std::move(check));
    }
    return checks;
}

int run_validate(const std::string& target, std::ostream& log, const std::filesystem::path& data_dir) {
    std::vector<CheckResult> checks;
    try {
        const bool all = target == "all";
        if (!all && target != "lqr" && target != "lp" && target != "gradients" && target != "tables")
            throw ConfigError("unknown validation target '" + target + "' (expected lqr, lp, gradients, tables or all)");
        auto append = [&checks](std::vector<CheckResult> more) {
            checks.insert(checks.end(), more.begin(), more.end());
        };
        if (all || target == "tables") append(validate_tables(data_dir));
        if (all || target == "lp") append(validate_lp());
        if (all || target == "gradients") append(validate_gradients());
        if (all || target == "lqr") append(validate_lqr());
    } catch (const std::exception& e) {
        log << "error [" << module_of(e) << "]: " << e.what() << '\n';
        return kExitError;
    }

    int failed = 0;
    for (const auto& c : checks) {
        log << (c.passed ? "[PASS] " : "[FAIL] ") << c.name << ": " << c.detail << '\n';
        if (!c.passed) ++failed;
    }
    if (failed > 0) {
        log << failed << " check(s) failed\n";
        return kExitError;
    }
    return 0;
}

int run_export_fixtures(const std::filesystem::path& out_dir, std::ostream& log) {
    try {
        for (const auto& fixture : problems::canonical_tables()) {
            io::write_text(out_dir / fixture.file_name, fixture.text);
            log << "wrote " << (out_dir / fixture.file_name).string() << '\n';
        }
        return 0;
    } catch (const std::exception& e) {
        log << "error [io]: " << e.what() << '\n';
        return kExitError;
    }
}

}  // namespace chatter::app
