#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "chatter/propagation.hpp"
#include "chatter/shooting.hpp"

namespace chatter::io {

/// Trajectory CSV: `t,x_0..x_{n-1},p_0..p_{n-1},u_0..u_{m-1},H,J_cum`, one row
/// per interval start plus a terminal row with empty u/H cells. J_cum is the
/// cost accrued through the end of the row's interval; on the terminal row it
/// includes the terminal cost. Values use 17 significant digits.
void export_trajectory(const ControlProblem<double>& problem, const Trajectory<double>& trajectory,
                       const std::filesystem::path& path);

/// Duty-cycle schedule CSV: `interval,t_start,t_end,level_index,weight,c_0..c_{m-1}`,
/// one row per chattering segment.
void export_schedule(const ControlProblem<double>& problem, const Trajectory<double>& trajectory,
                     const std::filesystem::path& path);

struct ConvergenceReport {
    std::string problem;
    int intervals = 0;
    const ShootingResult<double>* result = nullptr;
    Vector<double> terminal_target;
};

void export_convergence(const ConvergenceReport& report, const std::filesystem::path& path);

/// Parsed trajectory CSV. Empty cells are NaN.
struct TrajectoryTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int column(const std::string& name) const;
};

TrajectoryTable read_trajectory_csv(const std::filesystem::path& path);

/// Replays the x columns of a trajectory CSV as measurements: interval i gets
/// row i's state; intervals beyond the file keep the predicted state.
MeasurementSource<double> replay_measurements(const std::filesystem::path& path, int state_dim);

std::string format_double(double v);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace chatter::io
