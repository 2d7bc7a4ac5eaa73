#include "chatter/io.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace chatter::io {

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    return out;
}

void check_written(const std::ofstream& out, const std::filesystem::path& path) {
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return cells;
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void export_trajectory(const ControlProblem<double>& problem, const Trajectory<double>& trajectory,
                       const std::filesystem::path& path) {
    const int n = problem.state_dim;
    const int m = problem.control_dim;
    auto out = open_for_write(path);

    out << "t";
    for (int j = 0; j < n; ++j) out << ",x_" << j;
    for (int j = 0; j < n; ++j) out << ",p_" << j;
    for (int j = 0; j < m; ++j) out << ",u_" << j;
    out << ",H,J_cum\n";

    double cumulative = 0.0;
    const auto& pts = trajectory.points;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& pt = pts[i];
        out << format_double(pt.t);
        for (int j = 0; j < n; ++j) out << ',' << format_double(pt.x[j]);
        for (int j = 0; j < n; ++j) out << ',' << format_double(pt.p[j]);
        if (pt.is_terminal()) {
            for (int j = 0; j < m; ++j) out << ',';
            out << ',';
            cumulative += eval_terminal_cost(problem, pt.x);
        } else {
            for (int j = 0; j < m; ++j) out << ',' << format_double(pt.u[j]);
            out << ',' << format_double(pt.h_value);
            cumulative += pt.running_cost * (pts[i + 1].t - pt.t);
        }
        out << ',' << format_double(cumulative) << '\n';
    }
    check_written(out, path);
}

void export_schedule(const ControlProblem<double>& problem, const Trajectory<double>& trajectory,
                     const std::filesystem::path& path) {
    const int m = problem.control_dim;
    auto out = open_for_write(path);
    out << "interval,t_start,t_end,level_index,weight";
    for (int j = 0; j < m; ++j) out << ",c_" << j;
    out << '\n';

    const auto& pts = trajectory.points;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const auto& pt = pts[i];
        // realize the signal over the active levels only
        LevelGrid<double> active{pt.active_levels, static_cast<int>(i)};
        ChatteringMeasure<double> weights{Vector<double>(pt.active_index.size()), static_cast<int>(i)};
        for (std::size_t a = 0; a < pt.active_index.size(); ++a)
            weights.weights[static_cast<Eigen::Index>(a)] = pt.measure.weights[pt.active_index[a]];
        const auto signal = realize_signal(active, weights, pt.t, pts[i + 1].t - pt.t);
        for (const auto& seg : signal.segments) {
            out << i << ',' << format_double(seg.start) << ',' << format_double(seg.end) << ','
                << pt.active_index[seg.level_index] << ',' << format_double(weights.weights[seg.level_index]);
            for (int j = 0; j < m; ++j) out << ',' << format_double(active.levels(j, seg.level_index));
            out << '\n';
        }
    }
    check_written(out, path);
}

void export_convergence(const ConvergenceReport& report, const std::filesystem::path& path) {
    using nlohmann::json;
    const auto& r = *report.result;
    auto vec = [](const Vector<double>& v) { return std::vector<double>(v.data(), v.data() + v.size()); };

    json j;
    j["problem"] = report.problem;
    j["intervals"] = report.intervals;
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
    j["residual_history"] = r.residual_history;
    j["final_residual"] = r.final_residual();
    j["fallback_steps"] = r.fallback_steps;
    if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
    if (!r.trajectory.points.empty()) {
        j["cost"] = r.trajectory.accumulated_cost;
        j["clamp_count"] = r.trajectory.clamp_count;
        j["x_T"] = vec(r.trajectory.terminal().x);
        j["p_T"] = vec(r.trajectory.terminal().p);
        j["terminal_costate_target"] = vec(report.terminal_target);
    }
    j["p0_final"] = vec(r.p0_final);

    auto out = open_for_write(path);
    out << j.dump(2) << '\n';
    check_written(out, path);
}

int TrajectoryTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    throw Error("column '" + name + "' not found");
}

TrajectoryTable read_trajectory_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    TrajectoryTable table;
    std::string line;
    if (!std::getline(in, line)) throw Error("'" + path.string() + "' is empty");
    table.header = split(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != table.header.size())
            throw Error("'" + path.string() + "': row has " + std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(table.header.size()));
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) {
            if (c.empty()) {
                row.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            std::size_t used = 0;
            const double v = std::stod(c, &used);
            if (used != c.size()) throw Error("'" + path.string() + "': bad number '" + c + "'");
            row.push_back(v);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

MeasurementSource<double> replay_measurements(const std::filesystem::path& path, int state_dim) {
    const TrajectoryTable table = read_trajectory_csv(path);
    std::vector<Vector<double>> states;
    std::vector<int> cols;
    for (int j = 0; j < state_dim; ++j) cols.push_back(table.column("x_" + std::to_string(j)));
    for (const auto& row : table.rows) {
        Vector<double> x(state_dim);
        for (int j = 0; j < state_dim; ++j) x[j] = row[cols[j]];
        states.push_back(std::move(x));
    }
    return [states](int i, double, const Vector<double>&) -> std::optional<Vector<double>> {
        if (i < 0 || static_cast<std::size_t>(i) >= states.size()) return std::nullopt;
        return states[static_cast<std::size_t>(i)];
    };
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    auto out = open_for_write(path);
    out << text;
    check_written(out, path);
}

}  // namespace chatter::io
