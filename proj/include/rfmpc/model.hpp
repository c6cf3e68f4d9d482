#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "rfmpc/numerics.hpp"

namespace rfmpc {

/// Byrnes-Isidori coordinates (y, eta) = Phi(x) and their inverse.
struct BifTransform {
    std::function<std::pair<Vector, Vector>(const Vector& x)> forward;
    std::function<Vector(const Vector& y, const Vector& eta)> inverse;
};

/**
 * Control-affine surrogate x' = f(x) + g(x) u, y_M = h(x) used for prediction.
 *
 * The Jacobian callbacks are optional. When absent they are replaced by
 * central finite differences.
 */
struct ControlAffineModel {
    Eigen::Index state_dim = 0;
    Eigen::Index output_dim = 0;
    std::function<Vector(const Vector& x)> f;
    std::function<Matrix(const Vector& x)> g;
    std::function<Vector(const Vector& x)> h;
    std::optional<BifTransform> bif;
    Vector initial_state;

    /// d/dx (f(x) + g(x) u)
    std::function<Matrix(const Vector& x, const Vector& u)> dynamics_jacobian;
    /// h'(x)
    std::function<Matrix(const Vector& x)> output_jacobian;

    Vector dynamics(const Vector& x, const Vector& u) const { return f(x) + g(x) * u; }
    Matrix dynamics_jacobian_at(const Vector& x, const Vector& u) const;
    Matrix output_jacobian_at(const Vector& x) const;
};

/// x' = A x + B u + offset, y = C x, with the linear Byrnes-Isidori transform attached.
ControlAffineModel linear_model(const Matrix& A, const Matrix& B, const Matrix& C, const Vector& offset,
                                const Vector& initial_state);

/// Phi(x) = (H x, V^+ (I - G (HG)^{-1} H) x) with im V = ker H.
BifTransform linear_bif(const Matrix& H, const Matrix& G);

enum class InitVariant { OpenLoop, OutputResetKeepInternal, OutputResetZeroInternal };

struct InitializationStrategy {
    InitVariant variant = InitVariant::OpenLoop;
    double xi = 0.0;  // bound on the internal state after a reset
};

/// Selects the model state x_hat for the next prediction from the previous
/// prediction x_pre and the measured output y_hat.
Vector proper_init(const InitializationStrategy& strategy, const ControlAffineModel& model, const Vector& x_pre,
                   const Vector& y_hat);

/// Zero-order-hold control: values[j] acts on [t0 + j*interval, t0 + (j+1)*interval).
struct PiecewiseConstantControl {
    double t0 = 0.0;
    double interval = 0.0;
    std::vector<Vector> values;

    std::size_t index_at(double t) const;
    const Vector& at(double t) const { return values[index_at(t)]; }
    double end_time() const { return t0 + interval * static_cast<double>(values.size()); }
    double breakpoint(std::size_t j) const { return t0 + interval * static_cast<double>(j); }
};

struct Rollout {
    std::vector<double> times;
    std::vector<Vector> states;
    std::vector<Vector> outputs;
};

/// Open-loop prediction on [t0, t_end], restarted at every control breakpoint.
Rollout model_rollout(const ControlAffineModel& model, double t0, const Vector& x0,
                      const PiecewiseConstantControl& control, double t_end, double step);

}  // namespace rfmpc
