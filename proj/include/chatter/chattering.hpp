#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "chatter/core_model.hpp"

namespace chatter {

/// Level-grid construction parameters.
struct GridParams {
    int levels_per_dim = 101;  ///< uniform points per control dimension (>= 2)
    int cap = 4096;            ///< hard limit on the number of grid levels
};

/// Absolute tolerance under which two Hamiltonian values count as tied.
inline constexpr double kLpTieTolerance = 1e-9;

/// Ordered control levels c_k for one interval, stored column-wise (m x K).
template <typename Scalar = double>
struct LevelGrid {
    Matrix<Scalar> levels;
    int interval_index = 0;

    int size() const { return static_cast<int>(levels.cols()); }
    int control_dim() const { return static_cast<int>(levels.rows()); }
};

/// Simplex weights alpha_k over the levels of one interval.
template <typename Scalar = double>
struct ChatteringMeasure {
    Vector<Scalar> weights;
    int interval_index = 0;

    int size() const { return static_cast<int>(weights.size()); }
};

/// Piecewise-constant duty-cycle realization of a measure on one interval.
template <typename Scalar = double>
struct ChatteringSignal {
    struct Segment {
        Scalar start;
        Scalar end;
        int level_index;
        /// alpha_k * dt; end - start differs from it by the rounding of the
        /// absolute times.
        Scalar duration;
    };
    std::vector<Segment> segments;

    Scalar start() const { return segments.front().start; }
    Scalar end() const { return segments.back().end; }

    /// Time spent at level k.
    Scalar occupation(int k) const {
        Scalar total(0);
        for (const auto& s : segments)
            if (s.level_index == k) total += s.duration;
        return total;
    }

    /// Level index active at time t (right-continuous; the last segment owns the endpoint).
    int level_at(Scalar t) const {
        for (const auto& s : segments)
            if (t >= s.start && t < s.end) return s.level_index;
        return segments.back().level_index;
    }
};

namespace detail {

/// Reference control used while searching a single dimension.
enum class OffDimReference { Midpoint, Lower, Upper };

template <typename Scalar>
Vector<Scalar> reference_control(const ControlProblem<Scalar>& problem, OffDimReference ref) {
    switch (ref) {
        case OffDimReference::Lower:
            return problem.control_lower;
        case OffDimReference::Upper:
            return problem.control_upper;
        case OffDimReference::Midpoint:
        default:
            return Scalar(0.5) * (problem.control_lower + problem.control_upper);
    }
}

/// x_min <= x + f(t, x, u) dt <= x_max componentwise.
template <typename Scalar>
bool next_state_within_bounds(const ControlProblem<Scalar>& problem, Scalar t, const Vector<Scalar>& x,
                              const Vector<Scalar>& u, Scalar dt, const Vector<Scalar>& lo,
                              const Vector<Scalar>& hi) {
    const Vector<Scalar> f = problem.dynamics(t, x, u);
    check_finite(f, "dynamics");
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const Scalar next = x[j] + f[j] * dt;
        if (next < lo[j] || next > hi[j]) return false;
    }
    return true;
}

template <typename Scalar>
std::vector<Scalar> uniform_points(Scalar lo, Scalar hi, int count) {
    if (lo == hi || count <= 1) return {lo};
    std::vector<Scalar> pts(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) pts[i] = lo + (hi - lo) * Scalar(i) / Scalar(count - 1);
    pts.back() = hi;
    return pts;
}

/// Fractional parts of square roots of primes; one irrational stride per dimension.
inline double kronecker_stride(int dim) {
    static const int primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
                                 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131};
    constexpr int n_primes = sizeof(primes) / sizeof(primes[0]);
    const int p = dim < n_primes ? primes[dim] : primes[dim % n_primes] + 2 * dim;
    const double r = std::sqrt(static_cast<double>(p));
    return r - std::floor(r);
}

/// `cap` points j = 0.. of the Kronecker sequence mapped onto the index
/// lattice, sorted and deduplicated.
inline std::vector<std::vector<int>> kronecker_rows(const std::vector<int>& sizes, int cap) {
    const std::size_t m = sizes.size();
    std::vector<double> strides(m);
    for (std::size_t d = 0; d < m; ++d) strides[d] = kronecker_stride(static_cast<int>(d));
    std::vector<std::vector<int>> rows;
    rows.reserve(static_cast<std::size_t>(cap));
    for (int j = 0; j < cap; ++j) {
        std::vector<int> idx(m);
        for (std::size_t d = 0; d < m; ++d) {
            const double raw = static_cast<double>(j) * strides[d];
            const double phase = raw - std::floor(raw);
            idx[d] = std::min(sizes[d] - 1, static_cast<int>(phase * sizes[d]));
        }
        rows.push_back(std::move(idx));
    }
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    return rows;
}

}  // namespace detail

/**
 * Largest sub-interval [c_min, c_max] of dimension `dim`'s control bounds whose
 * endpoints keep one Euler step from x inside the state bounds. Other control
 * dimensions are frozen at the midpoint of their bounds; if that reference
 * admits no feasible value the lower, then the upper, corner is tried before
 * giving up. Each violated end is moved by 32 bisection steps towards a
 * feasible anchor.
 */
template <typename Scalar>
std::pair<Scalar, Scalar> level_bound_search(const ControlProblem<Scalar>& problem, const Vector<Scalar>& x,
                                             Scalar dt, int dim, Scalar t = Scalar(0)) {
    const Scalar a = problem.control_lower[dim];
    const Scalar b = problem.control_upper[dim];
    if (!problem.has_state_bounds()) return {a, b};

    const Vector<Scalar> lo = problem.state_lower_or_inf();
    const Vector<Scalar> hi = problem.state_upper_or_inf();

    for (auto ref : {detail::OffDimReference::Midpoint, detail::OffDimReference::Lower,
                     detail::OffDimReference::Upper}) {
        Vector<Scalar> u = detail::reference_control(problem, ref);
        auto feasible = [&](Scalar c) {
            u[dim] = c;
            return detail::next_state_within_bounds(problem, t, x, u, dt, lo, hi);
        };

        const bool feas_a = feasible(a);
        const bool feas_b = feasible(b);
        if (feas_a && feas_b) return {a, b};

        std::optional<Scalar> anchor;
        if (feas_a) {
            anchor = a;
        } else if (feas_b) {
            anchor = b;
        } else {
            constexpr int kScan = 64;
            for (int k = 1; k < kScan && !anchor; ++k) {
                const Scalar c = a + (b - a) * Scalar(k) / Scalar(kScan);
                if (feasible(c)) anchor = c;
            }
        }
        if (!anchor) continue;

        auto bisect = [&](Scalar bad, Scalar good) {
            for (int it = 0; it < 32; ++it) {
                const Scalar mid = Scalar(0.5) * (bad + good);
                if (feasible(mid))
                    good = mid;
                else
                    bad = mid;
            }
            return good;
        };
        const Scalar c_min = feas_a ? a : bisect(a, *anchor);
        const Scalar c_max = feas_b ? b : bisect(b, *anchor);
        return {c_min, c_max};
    }
    throw InfeasibleLevels("no control value in dimension " + std::to_string(dim) +
                           " keeps the next state within bounds");
}

/**
 * Builds the level grid for one interval.
 *
 * Each control dimension gets a uniform grid on its Eq.-(14)-bounded range
 * (semicontinuous dimensions additionally keep their rest level). The grid is
 * the Cartesian product of the per-dimension grids, with the common
 * per-dimension count lowered until the product fits `cap`. When even two
 * points per dimension overflow the cap, `cap` points of the product lattice
 * are taken along a Kronecker sequence (starting at the all-lower corner).
 * Columns are sorted lexicographically and deduplicated.
 */
template <typename Scalar>
LevelGrid<Scalar> generate_levels(const ControlProblem<Scalar>& problem, const Vector<Scalar>& x, Scalar dt,
                                  const GridParams& params, Scalar t = Scalar(0), int interval_index = 0) {
    if (params.levels_per_dim < 2) throw ConfigError("levels per dimension must be >= 2");
    if (params.cap < 1) throw ConfigError("level cap must be >= 1");
    if (!(dt > Scalar(0))) throw ConfigError("dt must be > 0");

    const int m = problem.control_dim;

    struct DimRange {
        std::optional<Scalar> rest;
        std::optional<std::pair<Scalar, Scalar>> active;
    };
    std::vector<DimRange> ranges(static_cast<std::size_t>(m));
    for (int d = 0; d < m; ++d) {
        const auto [c_lo, c_hi] = level_bound_search(problem, x, dt, d, t);
        const Scalar lower = problem.control_lower[d];
        const Scalar active_lower = problem.control_active_lower ? (*problem.control_active_lower)[d] : lower;
        DimRange r;
        if (active_lower > lower) {
            if (c_lo <= lower) r.rest = lower;
            const Scalar lo = std::max(active_lower, c_lo);
            if (lo <= c_hi) r.active = std::make_pair(lo, c_hi);
        } else {
            r.active = std::make_pair(c_lo, c_hi);
        }
        if (!r.rest && !r.active)
            throw InfeasibleLevels("admissible levels of dimension " + std::to_string(d) +
                                   " all violate the state bounds");
        ranges[d] = r;
    }

    auto dim_values = [&](int d, int count) {
        std::vector<Scalar> v;
        if (ranges[d].rest) v.push_back(*ranges[d].rest);
        if (ranges[d].active) {
            const auto pts = detail::uniform_points(ranges[d].active->first, ranges[d].active->second, count);
            v.insert(v.end(), pts.begin(), pts.end());
        }
        return v;
    };
    auto log_product = [&](int count) {
        double lp = 0.0;
        for (int d = 0; d < m; ++d) lp += std::log(static_cast<double>(dim_values(d, count).size()));
        return lp;
    };

    const double log_cap = std::log(static_cast<double>(params.cap)) + 1e-12;
    int count = params.levels_per_dim;
    if (log_product(2) > log_cap)
        count = 2;
    else
        while (count > 2 && log_product(count) > log_cap) --count;

    std::vector<std::vector<Scalar>> values(static_cast<std::size_t>(m));
    for (int d = 0; d < m; ++d) values[d] = dim_values(d, count);

    std::vector<int> sizes(static_cast<std::size_t>(m));
    for (int d = 0; d < m; ++d) sizes[d] = static_cast<int>(values[d].size());

    std::vector<std::vector<int>> product_rows;
    const std::vector<std::vector<int>>* rows_ptr = &product_rows;
    if (log_product(count) <= log_cap) {
        auto& index_rows = product_rows;
        // full Cartesian product, mixed-radix enumeration
        std::vector<int> idx(static_cast<std::size_t>(m), 0);
        while (true) {
            index_rows.push_back(idx);
            int d = m - 1;
            while (d >= 0 && ++idx[d] == sizes[d]) idx[d--] = 0;
            if (d < 0) break;
        }
        std::sort(index_rows.begin(), index_rows.end());
        index_rows.erase(std::unique(index_rows.begin(), index_rows.end()), index_rows.end());
    } else {
        // the subset depends only on the per-dimension sizes; consecutive
        // intervals nearly always repeat them
        thread_local std::pair<std::vector<int>, int> cached_key;
        thread_local std::vector<std::vector<int>> cached_rows;
        if (cached_key.first != sizes || cached_key.second != params.cap || cached_rows.empty()) {
            cached_rows = detail::kronecker_rows(sizes, params.cap);
            cached_key = {sizes, params.cap};
        }
        rows_ptr = &cached_rows;
    }
    const auto& index_rows = *rows_ptr;

    LevelGrid<Scalar> grid;
    grid.interval_index = interval_index;
    grid.levels.resize(m, static_cast<Eigen::Index>(index_rows.size()));
    for (std::size_t k = 0; k < index_rows.size(); ++k)
        for (int d = 0; d < m; ++d) grid.levels(d, static_cast<Eigen::Index>(k)) = values[d][index_rows[k][d]];
    return grid;
}

/**
 * Analytic solution of min sum_k h_k alpha_k over the probability simplex:
 * every level within kLpTieTolerance of the minimum gets an equal share.
 */
template <typename Derived>
ChatteringMeasure<typename Derived::Scalar> solve_measure_lp(const Eigen::MatrixBase<Derived>& h_values,
                                                             int interval_index = 0) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index K = h_values.size();
    if (K == 0) throw EmptyGrid("measure LP needs at least one level");
    if (!h_values.allFinite()) throw NonFiniteEvaluation("hamiltonian values are not finite");

    const Scalar h_min = h_values.minCoeff();
    const Scalar tol = Scalar(kLpTieTolerance);
    Eigen::Index ties = 0;
    for (Eigen::Index k = 0; k < K; ++k)
        if (h_values[k] - h_min <= tol) ++ties;

    ChatteringMeasure<Scalar> measure;
    measure.interval_index = interval_index;
    measure.weights = Vector<Scalar>::Zero(K);
    const Scalar share = Scalar(1) / Scalar(ties);
    for (Eigen::Index k = 0; k < K; ++k)
        if (h_values[k] - h_min <= tol) measure.weights[k] = share;
    return measure;
}

/// Objective value sum_k h_k alpha_k of a measure, accumulated relative to the
/// smallest supported h so that exact ties reproduce that value bit for bit.
template <typename Derived, typename Scalar>
Scalar measure_objective(const Eigen::MatrixBase<Derived>& h_values, const ChatteringMeasure<Scalar>& measure) {
    if (h_values.size() != measure.weights.size()) throw DimensionMismatch("h and measure sizes differ");
    std::optional<Scalar> ref;
    for (Eigen::Index k = 0; k < h_values.size(); ++k)
        if (measure.weights[k] != Scalar(0) && (!ref || h_values[k] < *ref)) ref = h_values[k];
    if (!ref) return Scalar(0);
    Scalar excess(0);
    for (Eigen::Index k = 0; k < h_values.size(); ++k)
        if (measure.weights[k] != Scalar(0)) excess += measure.weights[k] * (h_values[k] - *ref);
    return *ref + excess;
}

/// u = sum_k alpha_k c_k.
template <typename Scalar>
Vector<Scalar> control_from_measure(const LevelGrid<Scalar>& grid, const ChatteringMeasure<Scalar>& measure) {
    if (grid.size() != measure.size())
        throw DimensionMismatch("grid has " + std::to_string(grid.size()) + " levels but measure has " +
                                std::to_string(measure.size()) + " weights");
    Vector<Scalar> u = Vector<Scalar>::Zero(grid.control_dim());
    for (int k = 0; k < grid.size(); ++k)
        if (measure.weights[k] != Scalar(0)) u.noalias() += measure.weights[k] * grid.levels.col(k);
    return u;
}

/// One segment per nonzero weight, in level order, of duration alpha_k * dt.
template <typename Scalar>
ChatteringSignal<Scalar> realize_signal(const LevelGrid<Scalar>& grid, const ChatteringMeasure<Scalar>& measure,
                                        Scalar t_start, Scalar dt) {
    if (grid.size() != measure.size()) throw DimensionMismatch("grid and measure sizes differ");
    if (!(dt > Scalar(0))) throw ConfigError("dt must be > 0");

    ChatteringSignal<Scalar> signal;
    Scalar elapsed(0);
    int last = -1;
    for (int k = 0; k < measure.size(); ++k) {
        if (measure.weights[k] <= Scalar(0)) continue;
        const Scalar start = t_start + elapsed * dt;
        elapsed += measure.weights[k];
        signal.segments.push_back({start, t_start + elapsed * dt, k, measure.weights[k] * dt});
        last = k;
    }
    if (last < 0) throw Error("measure has no positive weight");
    signal.segments.back().end = t_start + dt;
    return signal;
}

}  // namespace chatter
