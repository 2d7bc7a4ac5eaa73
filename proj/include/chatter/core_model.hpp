#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "chatter/errors.hpp"

namespace chatter {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Default relative step for central finite differences: h_j = step * max(1, |x_j|).
inline constexpr double kDefaultFdStep = 1e-6;

/**
 * Continuous optimal control problem
 *
 *   min  int_0^T g(t, x, u) dt + Psi(x(T))
 *   s.t. dx/dt = f(t, x, u),  x(0) = x0,  u(t) in U = [control_lower, control_upper].
 *
 * Evaluators must be deterministic; the solver calls them in arbitrary order.
 * An empty `terminal_cost` means Psi == 0. The optional derivative evaluators
 * replace finite differences when supplied. `hamiltonian_on_levels`, when
 * set, evaluates H at every column of a level matrix in one call and must
 * agree with eval_hamiltonian up to rounding.
 *
 * `control_active_lower` marks semicontinuous control dimensions: where
 * active_lower[j] > control_lower[j] the admissible set of that dimension is
 * {control_lower[j]} U [active_lower[j], control_upper[j]] (for example an
 * order that is either not placed or placed above a minimum quantity).
 */
template <typename Scalar = double>
struct ControlProblem {
    using VectorType = Vector<Scalar>;
    using MatrixType = Matrix<Scalar>;

    using RunningCost = std::function<Scalar(Scalar, const VectorType&, const VectorType&)>;
    using Dynamics = std::function<VectorType(Scalar, const VectorType&, const VectorType&)>;
    using TerminalCost = std::function<Scalar(const VectorType&)>;
    using TerminalGradient = std::function<VectorType(const VectorType&)>;
    using TerminalHessian = std::function<MatrixType(const VectorType&)>;
    using HamiltonianGradient =
        std::function<VectorType(Scalar, const VectorType&, const VectorType&, const VectorType&)>;
    using HamiltonianBatch =
        std::function<VectorType(Scalar, const VectorType&, const VectorType&, const MatrixType&)>;

    std::string name;
    int state_dim = 0;
    int control_dim = 0;
    Scalar horizon = Scalar(1);
    VectorType initial_state;

    RunningCost running_cost;
    Dynamics dynamics;
    TerminalCost terminal_cost;
    TerminalGradient terminal_gradient;
    TerminalHessian terminal_hessian;
    HamiltonianGradient hamiltonian_x_gradient;
    HamiltonianBatch hamiltonian_on_levels;

    VectorType control_lower;
    VectorType control_upper;
    std::optional<VectorType> control_active_lower;

    std::optional<VectorType> state_lower;
    std::optional<VectorType> state_upper;

    bool has_state_bounds() const { return state_lower.has_value() || state_upper.has_value(); }

    /// Lower state bound with -inf filled in when absent.
    VectorType state_lower_or_inf() const {
        return state_lower ? *state_lower
                           : VectorType::Constant(state_dim, -std::numeric_limits<Scalar>::infinity());
    }
    VectorType state_upper_or_inf() const {
        return state_upper ? *state_upper
                           : VectorType::Constant(state_dim, std::numeric_limits<Scalar>::infinity());
    }

    /// Throws ConfigError when dimensions or bounds are inconsistent.
    void validate() const {
        if (state_dim < 1) throw ConfigError("state_dim must be >= 1");
        if (control_dim < 1) throw ConfigError("control_dim must be >= 1");
        if (!(horizon > Scalar(0))) throw ConfigError("horizon must be > 0");
        if (initial_state.size() != state_dim) throw ConfigError("initial_state has wrong size");
        if (!running_cost || !dynamics) throw ConfigError("running_cost and dynamics are required");
        if (control_lower.size() != control_dim || control_upper.size() != control_dim)
            throw ConfigError("control bounds have wrong size");
        for (int j = 0; j < control_dim; ++j)
            if (!(control_lower[j] <= control_upper[j]))
                throw ConfigError("control_lower > control_upper in dimension " + std::to_string(j));
        if (control_active_lower) {
            if (control_active_lower->size() != control_dim)
                throw ConfigError("control_active_lower has wrong size");
            for (int j = 0; j < control_dim; ++j)
                if ((*control_active_lower)[j] < control_lower[j] ||
                    (*control_active_lower)[j] > control_upper[j])
                    throw ConfigError("control_active_lower outside bounds in dimension " +
                                      std::to_string(j));
        }
        if (state_lower && state_lower->size() != state_dim)
            throw ConfigError("state_lower has wrong size");
        if (state_upper && state_upper->size() != state_dim)
            throw ConfigError("state_upper has wrong size");
        if (has_state_bounds()) {
            const VectorType lo = state_lower_or_inf();
            const VectorType hi = state_upper_or_inf();
            for (int j = 0; j < state_dim; ++j)
                if (!(lo[j] <= initial_state[j] && initial_state[j] <= hi[j]))
                    throw ConfigError("initial_state violates state bounds in dimension " +
                                      std::to_string(j));
        }
    }
};

/// The (t, x, p) arguments of H(t, x, p, u).
template <typename Scalar = double>
struct HamiltonianContext {
    Scalar time = Scalar(0);
    Vector<Scalar> state;
    Vector<Scalar> costate;
};

namespace detail {

template <typename Scalar>
Scalar checked(Scalar v, const char* what) {
    if (!std::isfinite(v)) throw NonFiniteEvaluation(std::string(what) + " returned a non-finite value");
    return v;
}

template <typename Derived>
void check_finite(const Eigen::MatrixBase<Derived>& v, const char* what) {
    if (!v.allFinite()) throw NonFiniteEvaluation(std::string(what) + " returned a non-finite value");
}

template <typename Scalar>
Scalar fd_width(Scalar step, Scalar at) {
    using std::abs;
    using std::max;
    return step * max(Scalar(1), abs(at));
}

}  // namespace detail

/// H = g(t,x,u) + p^T f(t,x,u).
template <typename Scalar>
Scalar eval_hamiltonian(const ControlProblem<Scalar>& problem, const HamiltonianContext<Scalar>& ctx,
                        const Vector<Scalar>& u) {
    const Scalar g = detail::checked(problem.running_cost(ctx.time, ctx.state, u), "running cost");
    const Vector<Scalar> f = problem.dynamics(ctx.time, ctx.state, u);
    detail::check_finite(f, "dynamics");
    if (f.size() != problem.state_dim) throw DimensionMismatch("dynamics returned wrong dimension");
    return detail::checked(g + ctx.costate.dot(f), "hamiltonian");
}

/// dH/dp, which is f itself since H is affine in p.
template <typename Scalar>
Vector<Scalar> grad_h_costate(const ControlProblem<Scalar>& problem, const HamiltonianContext<Scalar>& ctx,
                              const Vector<Scalar>& u) {
    Vector<Scalar> f = problem.dynamics(ctx.time, ctx.state, u);
    detail::check_finite(f, "dynamics");
    return f;
}

/// dH/dx: the analytic evaluator when present, else central differences with
/// per-component width fd_step * max(1, |x_j|).
template <typename Scalar>
Vector<Scalar> grad_h_state(const ControlProblem<Scalar>& problem, const HamiltonianContext<Scalar>& ctx,
                            const Vector<Scalar>& u, Scalar fd_step = Scalar(kDefaultFdStep)) {
    if (problem.hamiltonian_x_gradient) {
        Vector<Scalar> g = problem.hamiltonian_x_gradient(ctx.time, ctx.state, ctx.costate, u);
        detail::check_finite(g, "hamiltonian x-gradient");
        return g;
    }
    if (!(fd_step > Scalar(0))) throw ConfigError("fd_step must be > 0");
    const int n = problem.state_dim;
    Vector<Scalar> grad(n);
    HamiltonianContext<Scalar> probe = ctx;
    for (int j = 0; j < n; ++j) {
        const Scalar h = detail::fd_width(fd_step, ctx.state[j]);
        probe.state[j] = ctx.state[j] + h;
        const Scalar plus = eval_hamiltonian(problem, probe, u);
        probe.state[j] = ctx.state[j] - h;
        const Scalar minus = eval_hamiltonian(problem, probe, u);
        probe.state[j] = ctx.state[j];
        grad[j] = (plus - minus) / (Scalar(2) * h);
    }
    detail::check_finite(grad, "finite-difference x-gradient");
    return grad;
}

/// Transversality target p(T) = dPsi/dx at x_final. Exact zeros when Psi == 0.
template <typename Scalar>
Vector<Scalar> terminal_costate(const ControlProblem<Scalar>& problem, const Vector<Scalar>& x_final,
                                Scalar fd_step = Scalar(kDefaultFdStep)) {
    detail::check_finite(x_final, "terminal state");
    const int n = static_cast<int>(x_final.size());
    if (problem.terminal_gradient) {
        Vector<Scalar> g = problem.terminal_gradient(x_final);
        detail::check_finite(g, "terminal gradient");
        return g;
    }
    if (!problem.terminal_cost) return Vector<Scalar>::Zero(n);
    Vector<Scalar> grad(n);
    Vector<Scalar> probe = x_final;
    for (int j = 0; j < n; ++j) {
        const Scalar h = detail::fd_width(fd_step, x_final[j]);
        probe[j] = x_final[j] + h;
        const Scalar plus = detail::checked(problem.terminal_cost(probe), "terminal cost");
        probe[j] = x_final[j] - h;
        const Scalar minus = detail::checked(problem.terminal_cost(probe), "terminal cost");
        probe[j] = x_final[j];
        grad[j] = (plus - minus) / (Scalar(2) * h);
    }
    return grad;
}

/// d2Psi/dx2 at x_final: analytic when supplied, zero for Psi == 0, otherwise
/// central differences of terminal_costate.
template <typename Scalar>
Matrix<Scalar> terminal_hessian(const ControlProblem<Scalar>& problem, const Vector<Scalar>& x_final,
                                Scalar fd_step = Scalar(1e-4)) {
    const int n = static_cast<int>(x_final.size());
    if (problem.terminal_hessian) {
        Matrix<Scalar> h = problem.terminal_hessian(x_final);
        detail::check_finite(h, "terminal hessian");
        return h;
    }
    if (!problem.terminal_cost && !problem.terminal_gradient) return Matrix<Scalar>::Zero(n, n);
    Matrix<Scalar> hess(n, n);
    Vector<Scalar> probe = x_final;
    for (int j = 0; j < n; ++j) {
        const Scalar h = detail::fd_width(fd_step, x_final[j]);
        probe[j] = x_final[j] + h;
        const Vector<Scalar> plus = terminal_costate(problem, probe);
        probe[j] = x_final[j] - h;
        const Vector<Scalar> minus = terminal_costate(problem, probe);
        probe[j] = x_final[j];
        hess.col(j) = (plus - minus) / (Scalar(2) * h);
    }
    return Scalar(0.5) * (hess + hess.transpose());
}

/// Terminal cost Psi(x), zero when none is defined.
template <typename Scalar>
Scalar eval_terminal_cost(const ControlProblem<Scalar>& problem, const Vector<Scalar>& x_final) {
    if (!problem.terminal_cost) return Scalar(0);
    return detail::checked(problem.terminal_cost(x_final), "terminal cost");
}

}  // namespace chatter
