#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <vector>

#include "chatter/chattering.hpp"
#include "chatter/core_model.hpp"

namespace chatter {

/// Partition 0 = t_0 < t_1 < ... < t_I = T.
template <typename Scalar = double>
struct TimePartition {
    Vector<Scalar> times;

    static TimePartition uniform(Scalar horizon, int intervals) {
        if (intervals < 1) throw ConfigError("number of intervals must be >= 1");
        if (!(horizon > Scalar(0))) throw ConfigError("horizon must be > 0");
        TimePartition p;
        p.times.resize(intervals + 1);
        for (int i = 0; i <= intervals; ++i) p.times[i] = horizon * Scalar(i) / Scalar(intervals);
        p.times[intervals] = horizon;
        return p;
    }

    int intervals() const { return static_cast<int>(times.size()) - 1; }
    Scalar delta(int i) const { return times[i + 1] - times[i]; }
    Vector<Scalar> deltas() const { return times.tail(intervals()) - times.head(intervals()); }

    void validate(Scalar horizon) const {
        if (times.size() < 2) throw ConfigError("partition needs at least one interval");
        if (times[0] != Scalar(0)) throw ConfigError("partition must start at 0");
        for (int i = 0; i < intervals(); ++i)
            if (!(times[i + 1] > times[i])) throw ConfigError("partition times must be strictly increasing");
        using std::abs;
        if (abs(deltas().sum() - horizon) > Scalar(1e-10)) throw ConfigError("partition does not end at T");
    }
};

/// State of the solution at the start of one interval (or the terminal point,
/// which has an empty control).
template <typename Scalar = double>
struct TrajectoryPoint {
    Scalar t = Scalar(0);
    Vector<Scalar> x;
    Vector<Scalar> p;
    Vector<Scalar> u;
    ChatteringMeasure<Scalar> measure;
    /// Levels carrying nonzero weight (m x nnz) and their grid indices.
    Matrix<Scalar> active_levels;
    std::vector<int> active_index;
    Scalar h_value = Scalar(0);
    Scalar running_cost = Scalar(0);

    bool is_terminal() const { return u.size() == 0; }
};

template <typename Scalar = double>
struct Trajectory {
    std::vector<TrajectoryPoint<Scalar>> points;
    Scalar accumulated_cost = Scalar(0);
    int clamp_count = 0;
    int intervals() const { return static_cast<int>(points.size()) - 1; }
    const TrajectoryPoint<Scalar>& terminal() const { return points.back(); }
};

/// Feedback hook: given (i, t_i, predicted x_i), optionally return a measured
/// state that replaces the prediction before the interval is solved.
template <typename Scalar = double>
using MeasurementSource =
    std::function<std::optional<Vector<Scalar>>(int, Scalar, const Vector<Scalar>&)>;

template <typename Scalar = double>
struct PropagationOptions {
    GridParams grid;
    Scalar fd_step = Scalar(kDefaultFdStep);
    MeasurementSource<Scalar> measurement;
};

/// x_{i+1} = x_i + dt * sum_k alpha_k f(t_i, x_i, c_k), clamped to the state
/// bounds. Each clamped component increments *clamp_count.
template <typename Scalar>
Vector<Scalar> step_state(const ControlProblem<Scalar>& problem, const HamiltonianContext<Scalar>& ctx,
                          const LevelGrid<Scalar>& grid, const ChatteringMeasure<Scalar>& measure, Scalar dt,
                          int* clamp_count = nullptr) {
    if (grid.size() != measure.size()) throw DimensionMismatch("grid and measure sizes differ");
    Vector<Scalar> rate = Vector<Scalar>::Zero(problem.state_dim);
    Vector<Scalar> level(grid.control_dim());
    for (int k = 0; k < grid.size(); ++k) {
        if (measure.weights[k] == Scalar(0)) continue;
        level = grid.levels.col(k);
        rate.noalias() += measure.weights[k] * grad_h_costate(problem, ctx, level);
    }
    Vector<Scalar> next = ctx.state + dt * rate;
    if (problem.has_state_bounds()) {
        const Vector<Scalar> lo = problem.state_lower_or_inf();
        const Vector<Scalar> hi = problem.state_upper_or_inf();
        for (Eigen::Index j = 0; j < next.size(); ++j) {
            if (next[j] < lo[j] || next[j] > hi[j]) {
                next[j] = next[j] < lo[j] ? lo[j] : hi[j];
                if (clamp_count) ++*clamp_count;
            }
        }
    }
    return next;
}

/// p_{i+1} = p_i - dt * sum_k alpha_k dH/dx(t_i, x_i, p_i, c_k).
template <typename Scalar>
Vector<Scalar> step_costate(const ControlProblem<Scalar>& problem, const HamiltonianContext<Scalar>& ctx,
                            const LevelGrid<Scalar>& grid, const ChatteringMeasure<Scalar>& measure, Scalar dt,
                            Scalar fd_step = Scalar(kDefaultFdStep)) {
    if (grid.size() != measure.size()) throw DimensionMismatch("grid and measure sizes differ");
    Vector<Scalar> rate = Vector<Scalar>::Zero(problem.state_dim);
    Vector<Scalar> level(grid.control_dim());
    for (int k = 0; k < grid.size(); ++k) {
        if (measure.weights[k] == Scalar(0)) continue;
        level = grid.levels.col(k);
        rate.noalias() += measure.weights[k] * grad_h_state(problem, ctx, level, fd_step);
    }
    return ctx.costate - dt * rate;
}

/// H(t, x, p, c_k) for every level of the grid.
template <typename Scalar>
Vector<Scalar> hamiltonian_on_grid(const ControlProblem<Scalar>& problem, const HamiltonianContext<Scalar>& ctx,
                                   const LevelGrid<Scalar>& grid) {
    if (problem.hamiltonian_on_levels) {
        Vector<Scalar> h = problem.hamiltonian_on_levels(ctx.time, ctx.state, ctx.costate, grid.levels);
        if (h.size() != grid.size()) throw DimensionMismatch("batched Hamiltonian returned wrong size");
        detail::check_finite(h, "Hamiltonian");
        return h;
    }
    Vector<Scalar> h(grid.size());
    Vector<Scalar> level(grid.control_dim());
    for (int k = 0; k < grid.size(); ++k) {
        level = grid.levels.col(k);
        h[k] = eval_hamiltonian(problem, ctx, level);
    }
    return h;
}

/**
 * Forward sweep over the partition starting from (x0, p0). Each interval:
 * optional measurement, level grid, per-level Hamiltonian, analytic LP, then
 * one explicit step of state and costate at the interval start. The running
 * cost is the left-endpoint Riemann sum of g at the reconstructed control,
 * plus Psi at the terminal state.
 */
template <typename Scalar>
Trajectory<Scalar> propagate_forward(const ControlProblem<Scalar>& problem, const TimePartition<Scalar>& partition,
                                     const Vector<Scalar>& p0, const PropagationOptions<Scalar>& options) {
    if (p0.size() != problem.state_dim) throw DimensionMismatch("p0 has wrong dimension");
    if (!p0.allFinite()) throw NonFiniteEvaluation("initial costate is not finite");

    const int intervals = partition.intervals();
    Trajectory<Scalar> traj;
    traj.points.reserve(static_cast<std::size_t>(intervals) + 1);

    HamiltonianContext<Scalar> ctx{Scalar(0), problem.initial_state, p0};
    Scalar cost(0);
    for (int i = 0; i < intervals; ++i) {
        try {
            ctx.time = partition.times[i];
            const Scalar dt = partition.delta(i);
            if (options.measurement) {
                if (auto measured = options.measurement(i, ctx.time, ctx.state)) {
                    if (measured->size() != problem.state_dim)
                        throw DimensionMismatch("measured state has wrong dimension");
                    if (!measured->allFinite()) throw NonFiniteEvaluation("measured state is not finite");
                    ctx.state = *measured;
                }
            }

            const LevelGrid<Scalar> grid = generate_levels(problem, ctx.state, dt, options.grid, ctx.time, i);
            const Vector<Scalar> h = hamiltonian_on_grid(problem, ctx, grid);

            TrajectoryPoint<Scalar> point;
            point.t = ctx.time;
            point.x = ctx.state;
            point.p = ctx.costate;
            point.measure = solve_measure_lp(h, i);
            point.u = control_from_measure(grid, point.measure);
            point.h_value = measure_objective(h, point.measure);
            for (int k = 0; k < grid.size(); ++k)
                if (point.measure.weights[k] != Scalar(0)) point.active_index.push_back(k);
            point.active_levels.resize(grid.control_dim(), static_cast<Eigen::Index>(point.active_index.size()));
            for (std::size_t a = 0; a < point.active_index.size(); ++a)
                point.active_levels.col(static_cast<Eigen::Index>(a)) = grid.levels.col(point.active_index[a]);
            point.running_cost =
                detail::checked(problem.running_cost(ctx.time, ctx.state, point.u), "running cost");
            cost += point.running_cost * dt;

            Vector<Scalar> x_next = step_state(problem, ctx, grid, point.measure, dt, &traj.clamp_count);
            Vector<Scalar> p_next = step_costate(problem, ctx, grid, point.measure, dt, options.fd_step);
            traj.points.push_back(std::move(point));
            ctx.state = std::move(x_next);
            ctx.costate = std::move(p_next);
        } catch (const NonFiniteEvaluation& e) {
            rethrow_at_interval(e, i);
        } catch (const InfeasibleLevels& e) {
            rethrow_at_interval(e, i);
        } catch (const DimensionMismatch& e) {
            rethrow_at_interval(e, i);
        }
    }

    TrajectoryPoint<Scalar> terminal;
    terminal.t = partition.times[intervals];
    terminal.x = ctx.state;
    terminal.p = ctx.costate;
    traj.points.push_back(std::move(terminal));
    traj.accumulated_cost = cost + eval_terminal_cost(problem, ctx.state);
    return traj;
}

template <typename Scalar>
Trajectory<Scalar> propagate_forward(const ControlProblem<Scalar>& problem, const TimePartition<Scalar>& partition,
                                     const Vector<Scalar>& p0, const GridParams& grid,
                                     Scalar fd_step = Scalar(kDefaultFdStep)) {
    PropagationOptions<Scalar> options;
    options.grid = grid;
    options.fd_step = fd_step;
    return propagate_forward(problem, partition, p0, options);
}

/// Recomputes sum_i g(t_i, x_i, u_i) * (t_{i+1} - t_i) + Psi(x_T) from stored points.
template <typename Scalar>
Scalar accumulate_cost(const ControlProblem<Scalar>& problem, const Trajectory<Scalar>& trajectory) {
    Scalar cost(0);
    const auto& pts = trajectory.points;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        cost += problem.running_cost(pts[i].t, pts[i].x, pts[i].u) * (pts[i + 1].t - pts[i].t);
    return cost + eval_terminal_cost(problem, pts.back().x);
}

}  // namespace chatter
