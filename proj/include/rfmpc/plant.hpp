#pragma once

#include <functional>
#include <optional>

#include "rfmpc/numerics.hpp"

namespace rfmpc {

/**
 * The controlled system, seen only through simulation.
 *
 * Whatever memory the system has (integral operators, delays, unknown
 * internal states) lives inside `state`; the controller only ever reads
 * `output(state)`. Plants with history buffers are stateful: call reset()
 * before a run and commit() after every accepted integration step.
 */
struct Plant {
    Eigen::Index output_dim = 0;
    Eigen::Index state_dim = 0;
    std::function<Vector(double t, const Vector& x, const Vector& u)> rhs;
    std::function<Vector(const Vector& x)> output;
    Vector initial_state;
    /// Disturbance already included in rhs; exposed for logging only.
    std::function<Vector(double t)> disturbance;
    /// Optional measurement noise added to the sampled output (unused by the shipped scenarios).
    std::function<Vector(double t, const Vector& y)> measurement_noise;
    std::function<void(double t, const Vector& x)> commit;
    std::function<void()> reset;

    Vector measure(double t, const Vector& x) const {
        Vector y = output(x);
        if (measurement_noise) y += measurement_noise(t, y);
        return y;
    }
    void on_step(double t, const Vector& x) const {
        if (commit) commit(t, x);
    }
    void restart() const {
        if (reset) reset();
    }
};

/// Parameters of the exothermic stirred-tank reactor; defaults are the case-study values.
struct ReactorParams {
    double b = 209.2;
    double c1 = -1.0;
    double c2 = 1.0;
    double d = 1.1;
    double q = 1.25;
    double k0 = 72004899337.38588;  // e^25
    double k1 = 8700.0;
    double x1_in = 1.0;
    double x2_in = 0.0;

    void validate() const;
};

/// Reaction heat p = k0 exp(-k1 / y) x1.
double reaction_rate(const ReactorParams& params, double x1, double y);

/// Reactor with state (y, x1, x2): temperature, reactant and product concentration.
Plant reactor_plant(const ReactorParams& params, const Vector& initial);

/// x' = A x + B u + D, y = C x: the reactor with the Arrhenius term linearized
/// around temperature y_bar and reactant concentration x1_in / 2.
struct LinearizedReactor {
    Matrix A;
    Matrix B;
    Matrix C;
    Vector D;
    double a1 = 0.0;
    double a2 = 0.0;
};

LinearizedReactor linearize_reactor(const ReactorParams& params, double y_bar);

/// x' = A x + B (u + delta(t)), y = C x.
Plant linear_operator_plant(const Matrix& A, const Matrix& B, const Matrix& C, const Vector& x0,
                            std::function<Vector(double)> matched_disturbance = {});

/// Wraps `base` so that its right-hand side is evaluated on the state delayed
/// by `delay` (constant initial history). For plants whose state is the output
/// this is y'(t) = F(y(t - delay), u(t)).
Plant delayed_output_plant(const Plant& base, double delay);

}  // namespace rfmpc
