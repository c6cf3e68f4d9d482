#pragma once

#include <optional>
#include <string>

#include "rfmpc/model.hpp"
#include "rfmpc/signals.hpp"

namespace rfmpc {

struct StageCostParams {
    double lambda_u = 1e-4;
    FunnelFunction funnel;
    ReferenceSignal reference;
};

enum class GradientMethod { Adjoint, FiniteDifference };

struct OcpConfig {
    double horizon_T = 0.75;
    int control_intervals = 15;
    double input_bound_M = 600.0;
    int integration_substeps = 10;
    int max_iterations = 200;
    double gradient_tolerance = 1e-6;
    double infeasibility_penalty_cap = 1e12;
    GradientMethod gradient = GradientMethod::Adjoint;

    /// Throws std::invalid_argument naming the offending field.
    void validate(double delta) const;
};

struct OcpSolution {
    PiecewiseConstantControl control;
    Trajectory predicted_states;
    double cost = 0.0;
    bool converged = false;
    int iterations = 0;
    double input_bound = 0.0;
};

/// Funnel MPC stage cost on the output level; +infinity outside the funnel.
double stage_cost(const StageCostParams& params, double t, const Vector& y, const Vector& u);

double stage_cost(const StageCostParams& params, double t, const Vector& x, const Vector& u,
                  const std::function<Vector(const Vector&)>& h);

/// Discretized open-loop cost of a piecewise-constant control on the OCP grid
/// (+infinity if any quadrature node leaves the funnel).
double ocp_cost(const ControlAffineModel& model, const StageCostParams& params, const OcpConfig& config, double t_k,
                const Vector& x_hat, const PiecewiseConstantControl& control);

/// Gradient of ocp_cost with respect to the control values (one column per interval).
Matrix ocp_gradient(const ControlAffineModel& model, const StageCostParams& params, const OcpConfig& config,
                    double t_k, const Vector& x_hat, const PiecewiseConstantControl& control, GradientMethod method);

/**
 * Minimizes the integrated stage cost over [t_k, t_k + T] subject to
 * |u|_inf <= M by projected gradient descent with Armijo backtracking.
 *
 * Iterates whose prediction leaves the funnel are rejected. The descent starts
 * from the cheapest feasible guess among the warm start and the zero control;
 * when neither is feasible a greedy interval-by-interval search provides one.
 */
OcpSolution solve_ocp(const ControlAffineModel& model, const StageCostParams& params, const OcpConfig& config,
                      double t_k, const Vector& x_hat,
                      const std::optional<PiecewiseConstantControl>& warm_start = std::nullopt);

/// Previous solution shifted left by delta, tail held, clipped to the box.
PiecewiseConstantControl warm_start_shift(const OcpSolution& previous, double delta);

}  // namespace rfmpc
