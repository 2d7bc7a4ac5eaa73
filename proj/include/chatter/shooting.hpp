#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "chatter/propagation.hpp"

namespace chatter {

template <typename Scalar = double>
struct ShootingConfig {
    Scalar gamma = Scalar(0.5);
    /// Costate perturbation; when unset, 1e-3 * max(1, ||p0||) at every iteration.
    std::optional<Scalar> delta_p;
    Scalar epsilon = Scalar(1e-3);
    int max_iterations = 500;
    Scalar ridge = Scalar(1e-8);
    /// Initial costate guess; empty means the zero vector.
    Vector<Scalar> p0_initial;

    void validate(int state_dim) const {
        if (!(gamma > Scalar(0) && gamma <= Scalar(1))) throw ConfigError("gamma must lie in (0, 1]");
        if (delta_p && !(*delta_p > Scalar(0))) throw ConfigError("delta-p must be > 0");
        if (!(epsilon > Scalar(0))) throw ConfigError("eps must be > 0");
        if (max_iterations < 1) throw ConfigError("max-iters must be >= 1");
        if (!(ridge >= Scalar(0))) throw ConfigError("ridge must be >= 0");
        if (p0_initial.size() != 0 && p0_initial.size() != state_dim)
            throw ConfigError("p0 has " + std::to_string(p0_initial.size()) + " entries, expected " +
                              std::to_string(state_dim));
        if (!p0_initial.allFinite()) throw ConfigError("p0 must be finite");
    }
};

/// Finite-difference Jacobians of the terminal state and costate w.r.t. p0.
template <typename Scalar = double>
struct SensitivityEstimate {
    Matrix<Scalar> P_x;
    Matrix<Scalar> P_p;
};

template <typename Scalar = double>
struct ShootingResult {
    bool converged = false;
    int iterations = 0;
    std::vector<Scalar> residual_history;
    Trajectory<Scalar> trajectory;
    Vector<Scalar> p0_final;
    /// Iterations where the Newton-type correction was singular and the
    /// plain residual step was taken instead.
    int fallback_steps = 0;
    /// Set when the loop stopped on a solver error other than a non-finite evaluation.
    std::string diagnostic;

    Scalar final_residual() const {
        return residual_history.empty() ? std::numeric_limits<Scalar>::infinity()
                                        : *std::min_element(residual_history.begin(), residual_history.end());
    }
};

template <typename Scalar = double>
struct ProgressRecord {
    int iteration;
    Scalar residual;
    Scalar cost;
};

template <typename Scalar = double>
using ProgressSink = std::function<void(const ProgressRecord<Scalar>&)>;

/// p_T - dPsi/dx(x_T).
template <typename Scalar>
Vector<Scalar> transversality_residual(const ControlProblem<Scalar>& problem, const Trajectory<Scalar>& traj) {
    const auto& end = traj.terminal();
    return end.p - terminal_costate(problem, end.x);
}

/**
 * Column j of P_x (P_p) is (x_T(p0 + delta_p e_j) - x_T(p0)) / delta_p. Each
 * perturbed run re-solves the interval LPs. Pass `nominal` to reuse an
 * existing run from p0.
 */
template <typename Scalar>
SensitivityEstimate<Scalar> finite_diff_sensitivities(const ControlProblem<Scalar>& problem,
                                                      const TimePartition<Scalar>& partition,
                                                      const Vector<Scalar>& p0, Scalar delta_p,
                                                      const PropagationOptions<Scalar>& options,
                                                      const Trajectory<Scalar>* nominal = nullptr) {
    if (!(delta_p > Scalar(0))) throw ConfigError("delta_p must be > 0");
    const int n = problem.state_dim;

    std::optional<Trajectory<Scalar>> own;
    if (!nominal) {
        own = propagate_forward(problem, partition, p0, options);
        nominal = &*own;
    }
    const Vector<Scalar>& x_T = nominal->terminal().x;
    const Vector<Scalar>& p_T = nominal->terminal().p;

    SensitivityEstimate<Scalar> sens{Matrix<Scalar>(n, n), Matrix<Scalar>(n, n)};
    for (int j = 0; j < n; ++j) {
        Vector<Scalar> perturbed = p0;
        perturbed[j] += delta_p;
        try {
            const Trajectory<Scalar> run = propagate_forward(problem, partition, perturbed, options);
            sens.P_x.col(j) = (run.terminal().x - x_T) / delta_p;
            sens.P_p.col(j) = (run.terminal().p - p_T) / delta_p;
        } catch (const Error& e) {
            throw Error(std::string(e.what()) + " [costate perturbation " + std::to_string(j) + "]",
                        e.interval());
        }
    }
    return sens;
}

/// p0 + gamma * (Hess(Psi)(x_T) P_x - P_p + ridge I)^{-1} (p_T - dPsi/dx(x_T)).
template <typename Scalar>
Vector<Scalar> update_initial_costate(const Vector<Scalar>& p0, const SensitivityEstimate<Scalar>& sens,
                                      const Vector<Scalar>& p_T, const Vector<Scalar>& x_T,
                                      const ControlProblem<Scalar>& problem, Scalar gamma, Scalar ridge) {
    if (!sens.P_x.allFinite() || !sens.P_p.allFinite())
        throw NonFiniteEvaluation("sensitivity estimate is not finite");
    const Eigen::Index n = p0.size();
    const Vector<Scalar> residual = p_T - terminal_costate(problem, x_T);
    if (residual.isZero(Scalar(0))) return p0;

    Matrix<Scalar> correction = terminal_hessian(problem, x_T) * sens.P_x - sens.P_p;
    correction.diagonal().array() += ridge;

    const Eigen::PartialPivLU<Matrix<Scalar>> lu(correction);
    const Scalar rcond = lu.rcond();
    if (!(rcond > Scalar(1e-14))) throw SingularCorrection("correction matrix is singular (rcond estimate " +
                                                           std::to_string(static_cast<double>(rcond)) + ")");
    const Vector<Scalar> step = lu.solve(residual);
    if (!step.allFinite() || step.size() != n) throw SingularCorrection("correction step is not finite");
    return p0 + gamma * step;
}

/**
 * Variation-of-extremals loop: propagate from the current p0, stop when
 * ||p_T - dPsi/dx(x_T)|| < epsilon, otherwise estimate sensitivities and
 * correct p0. Returns the lowest-residual iterate. Runs out of budget with
 * converged = false; only non-finite evaluations escape as exceptions.
 */
template <typename Scalar>
ShootingResult<Scalar> solve(const ControlProblem<Scalar>& problem, const TimePartition<Scalar>& partition,
                             const ShootingConfig<Scalar>& config, const PropagationOptions<Scalar>& options,
                             const ProgressSink<Scalar>& sink = {}) {
    problem.validate();
    config.validate(problem.state_dim);
    partition.validate(problem.horizon);

    const int n = problem.state_dim;
    Vector<Scalar> p0 = config.p0_initial.size() == n ? config.p0_initial : Vector<Scalar>::Zero(n);

    ShootingResult<Scalar> result;
    Scalar best = std::numeric_limits<Scalar>::infinity();
    for (int iter = 1; iter <= config.max_iterations; ++iter) {
        try {
            Trajectory<Scalar> traj = propagate_forward(problem, partition, p0, options);
            const Vector<Scalar> residual = transversality_residual(problem, traj);
            const Scalar norm = residual.norm();
            if (!std::isfinite(norm)) throw NonFiniteEvaluation("transversality residual is not finite");

            result.residual_history.push_back(norm);
            result.iterations = iter;
            if (sink) sink({iter, norm, traj.accumulated_cost});

            const bool improved = norm < best;
            if (improved) {
                best = norm;
                result.p0_final = p0;
            }
            if (norm < config.epsilon) {
                result.converged = true;
                result.trajectory = std::move(traj);
                break;
            }
            if (iter == config.max_iterations) {
                if (improved) result.trajectory = std::move(traj);
                break;
            }

            using std::max;
            const Scalar dp = config.delta_p ? *config.delta_p : Scalar(1e-3) * max(Scalar(1), p0.norm());
            const SensitivityEstimate<Scalar> sens =
                finite_diff_sensitivities(problem, partition, p0, dp, options, &traj);
            const Vector<Scalar> current = p0;
            const Vector<Scalar> x_T = traj.terminal().x;
            const Vector<Scalar> p_T = traj.terminal().p;
            if (improved) result.trajectory = std::move(traj);
            try {
                p0 = update_initial_costate(current, sens, p_T, x_T, problem, config.gamma, config.ridge);
            } catch (const SingularCorrection&) {
                p0 = current - config.gamma * residual;
                ++result.fallback_steps;
            }
        } catch (const NonFiniteEvaluation&) {
            throw;
        } catch (const Error& e) {
            result.diagnostic = e.what();
            break;
        }
    }
    return result;
}

}  // namespace chatter
