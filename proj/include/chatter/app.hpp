#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "chatter/problems.hpp"
#include "chatter/shooting.hpp"

namespace chatter::app {

/// Everything a `solve` run needs. JSON keys are the kebab-case CLI flag names.
struct SolveConfig {
    std::string problem = "lqr";  ///< lqr | supply-chain
    int intervals = 100;
    int levels = 101;
    int level_cap = 4096;
    double gamma = 0.5;
    std::optional<double> delta_p;
    double eps = 1e-3;
    int max_iters = 500;
    double ridge = 1e-8;
    std::vector<double> p0;
    std::string demand = "seasonal";
    double amplitude = 10.0;
    double period = 1.0;
    std::string fixed_cost_mode = "on-order";
    std::string out_dir = "out";
    /// Trajectory CSV whose x columns are injected as measured states.
    std::optional<std::string> measurement_replay;

    /// Throws ConfigError on any violated invariant.
    void validate() const;
};

SolveConfig parse_config(const std::string& json_text);
SolveConfig load_config(const std::filesystem::path& path);
/// Canonical JSON (sorted keys, two-space indent, trailing newline).
std::string serialize_config(const SolveConfig& config);

enum class LogLevel { Quiet, Info, Debug };
/// Reads CHATTER_LOG; unset means info.
LogLevel log_level_from_env();

/// Built-in problem selected by the config.
ControlProblem<double> build_problem(const SolveConfig& config);
ShootingConfig<double> shooting_config(const SolveConfig& config);
PropagationOptions<double> propagation_options(const SolveConfig& config);

/// Horizon used for the supply-chain benchmark.
inline constexpr double kSupplyChainHorizon = 1.0;

inline constexpr int kExitConverged = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitBudget = 2;

/// Writes trajectory.csv, schedule.csv and convergence.json into out_dir.
/// Returns 0 when converged, 2 when the iteration budget ran out, 1 on error.
int run_solve(const SolveConfig& config, std::ostream& log, LogLevel level = LogLevel::Info);

std::filesystem::path default_data_dir();

/// target: lqr | lp | gradients | tables | all. Returns 0 iff every check passes.
int run_validate(const std::string& target, std::ostream& log,
                 const std::filesystem::path& data_dir = default_data_dir());

/// Writes the canonical table fixtures into out_dir.
int run_export_fixtures(const std::filesystem::path& out_dir, std::ostream& log);

// Individual validation checks, exposed for tests.
struct CheckResult {
    std::string name;
    bool passed;
    std::string detail;
};

struct LqrComparison {
    bool converged;
    int iterations;
    double max_relative_state_error;  ///< max_i |x_i - x*(t_i)| / max_i |x*(t_i)|
    double relative_cost_error;       ///< |J - J*| / J*
};

LqrComparison compare_lqr(int intervals, int levels);

std::vector<CheckResult> validate_lqr();
std::vector<CheckResult> validate_lp(int instances = 1000, unsigned seed = 7);
std::vector<CheckResult> validate_gradients(int points = 1000, unsigned seed = 11);
std::vector<CheckResult> validate_tables(const std::filesystem::path& data_dir);

}  // namespace chatter::app
