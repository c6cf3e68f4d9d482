#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "rfmpc/errors.hpp"

namespace rfmpc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Right-hand side of an explicit ODE x' = rhs(t, x).
using OdeRhs = std::function<Vector(double, const Vector&)>;

struct OdeProblem {
    Eigen::Index dimension = 0;
    OdeRhs rhs;
    double t0 = 0.0;
    Vector x0;
};

/// Sampled solution; times[i] belongs to states[i].
struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> states;

    bool empty() const { return times.empty(); }
    const Vector& back() const { return states.back(); }
};

/// One classical RK4 step of length h from (t, x).
Vector rk4_step(const OdeRhs& rhs, double t, const Vector& x, double h);

/**
 * Fixed-step classical Runge-Kutta integration on [prob.t0, t_end].
 *
 * The last step is shortened so the grid lands exactly on t_end. Throws
 * IntegrationDiverged carrying the last time with a finite state as soon as
 * a non-finite state appears.
 */
Trajectory integrate_rk4(const OdeProblem& prob, double t_end, double step);

/// Orthonormal basis of ker H; H must have full row rank.
Matrix null_space_basis(const Matrix& H);

/// Left inverse (V^T V)^{-1} V^T of a full column rank matrix.
Matrix pseudoinverse(const Matrix& V);

/// Number of steps of length at most `step` covering an interval of length `span`.
int step_count(double span, double step);

}  // namespace rfmpc
