#pragma once

#include <functional>

#include "rfmpc/numerics.hpp"

namespace rfmpc {

/// Performance funnel radius psi(t) > 0 with declared bounds.
struct FunnelFunction {
    std::function<double(double)> value;
    double derivative_bound = 0.0;  // sup |psi'|
    double infimum = 0.0;           // inf psi > 0

    double operator()(double t) const { return value(t); }
};

struct ReferenceSignal {
    std::function<Vector(double)> value;
    double derivative_bound = 0.0;
    Eigen::Index dim = 0;

    Vector operator()(double t) const { return value(t); }
};

/// Gain maps of the funnel feedback: alpha: [0,1) -> [1,inf) and a surjection N.
struct GainPair {
    std::function<double(double)> alpha;
    std::function<double(double)> surjection_n;
};

/// Continuous gate beta: [0,1] -> [0, beta_plus], zero up to s_crit.
struct ActivationFunction {
    std::function<double(double)> beta;
    double beta_plus = 0.0;
    double s_crit = 0.0;
};

/// psi(t) = a e^{-lambda t} + c.
FunnelFunction funnel_exp(double a, double lambda, double c);

/// Linear ramp from y_start to y_final over [0, t_final], constant afterwards.
ReferenceSignal ramp_reference(const Vector& y_start, const Vector& y_final, double t_final);

ReferenceSignal constant_reference(const Vector& value);

/// beta(s) = max(0, s - s_crit), beta_plus = 1 - s_crit.
ActivationFunction relu_activation(double s_crit);

/// alpha(s) = 1/(1-s); N(s) = -s if the high-gain sign is known positive, else s sin(s).
GainPair standard_gains(bool definite);

}  // namespace rfmpc
