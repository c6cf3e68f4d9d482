#include "rfmpc/signals.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace rfmpc {

FunnelFunction funnel_exp(double a, double lambda, double c) {
    if (!(c > 0.0)) {
        std::ostringstream msg;
        msg << "funnel_exp: offset c = " << c << " must be positive (inf psi > 0)";
        throw Error(ErrorKind::InvalidFunnel, msg.str());
    }
    if (a < 0.0 || lambda < 0.0) {
        throw Error(ErrorKind::InvalidFunnel, "funnel_exp: amplitude and decay rate must be nonnegative");
    }
    FunnelFunction psi;
    psi.value = [a, lambda, c](double t) { return a * std::exp(-lambda * t) + c; };
    psi.derivative_bound = a * lambda;
    psi.infimum = c;
    return psi;
}

ReferenceSignal ramp_reference(const Vector& y_start, const Vector& y_final, double t_final) {
    if (!(t_final > 0.0)) throw std::invalid_argument("ramp_reference: t_final must be positive");
    if (y_start.size() != y_final.size()) throw std::invalid_argument("ramp_reference: dimension mismatch");
    ReferenceSignal ref;
    const Vector slope = (y_final - y_start) / t_final;
    ref.value = [y_start, y_final, slope, t_final](double t) -> Vector {
        if (t >= t_final) return y_final;
        return y_start + slope * t;
    };
    ref.derivative_bound = slope.norm();
    ref.dim = y_start.size();
    return ref;
}

ReferenceSignal constant_reference(const Vector& value) {
    ReferenceSignal ref;
    ref.value = [value](double) { return value; };
    ref.derivative_bound = 0.0;
    ref.dim = value.size();
    return ref;
}

ActivationFunction relu_activation(double s_crit) {
    if (!(s_crit > 0.0 && s_crit < 1.0)) {
        std::ostringstream msg;
        msg << "relu_activation: s_crit = " << s_crit << " outside (0, 1)";
        throw Error(ErrorKind::InvalidActivation, msg.str());
    }
    ActivationFunction act;
    act.beta = [s_crit](double s) { return s <= s_crit ? 0.0 : s - s_crit; };
    act.beta_plus = 1.0 - s_crit;
    act.s_crit = s_crit;
    return act;
}

GainPair standard_gains(bool definite) {
    GainPair gains;
    gains.alpha = [](double s) {
        if (s >= 1.0) return std::numeric_limits<double>::infinity();
        return 1.0 / (1.0 - std::max(s, 0.0));
    };
    if (definite) {
        gains.surjection_n = [](double s) { return -s; };
    } else {
        gains.surjection_n = [](double s) { return s * std::sin(s); };
    }
    return gains;
}

}  // namespace rfmpc
