#include "rfmpc/plant.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <memory>
#include <sstream>

namespace rfmpc {

void ReactorParams::validate() const {
    auto require_positive = [](double v, const char* name) {
        if (!(v > 0.0)) {
            std::ostringstream msg;
            msg << "reactor parameter " << name << " = " << v << " must be positive";
            throw Error(ErrorKind::InvalidPlant, msg.str());
        }
    };
    require_positive(b, "b");
    require_positive(d, "d");
    require_positive(q, "q");
    require_positive(k0, "k0");
    require_positive(k1, "k1");
    if (x1_in < 0.0 || x2_in < 0.0) {
        throw Error(ErrorKind::InvalidPlant, "reactor feed concentrations must be nonnegative");
    }
}

double reaction_rate(const ReactorParams& params, double x1, double y) {
    return params.k0 * std::exp(-params.k1 / y) * x1;
}

Plant reactor_plant(const ReactorParams& params, const Vector& initial) {
    params.validate();
    if (initial.size() != 3) throw Error(ErrorKind::InvalidPlant, "reactor_plant: initial state must have 3 entries");
    if (!(initial(0) > 0.0)) throw Error(ErrorKind::InvalidPlant, "reactor_plant: initial temperature must be positive");

    Plant plant;
    plant.output_dim = 1;
    plant.state_dim = 3;
    plant.initial_state = initial;
    plant.rhs = [params](double t, const Vector& x, const Vector& u) -> Vector {
        const double y = x(0);
        if (!(y > 0.0)) {
            std::ostringstream msg;
            msg << "reactor temperature " << y << " left the positive domain at t = " << t;
            throw Error(ErrorKind::Domain, msg.str());
        }
        const double p = reaction_rate(params, x(1), y);
        Vector dx(3);
        dx(0) = params.b * p - params.q * y + u(0);
        dx(1) = params.c1 * p + params.d * (params.x1_in - x(1));
        dx(2) = params.c2 * p + params.d * (params.x2_in - x(2));
        return dx;
    };
    plant.output = [](const Vector& x) -> Vector { return x.head(1); };
    return plant;
}

LinearizedReactor linearize_reactor(const ReactorParams& params, double y_bar) {
    params.validate();
    if (!(y_bar > 0.0)) throw Error(ErrorKind::InvalidModel, "linearize_reactor: y_bar must be positive");
    const double a2 = params.k0 * std::exp(-params.k1 / y_bar);
    const double a1 = a2 * params.k1 / (y_bar * y_bar) * (params.x1_in / 2.0);

    LinearizedReactor lin;
    lin.a1 = a1;
    lin.a2 = a2;
    lin.A.resize(3, 3);
    lin.A << params.b * a1 - params.q, params.b * a2, 0.0,
             params.c1 * a1, params.c1 * a2 - params.d, 0.0,
             params.c2 * a1, params.c2 * a2, -params.d;
    lin.B = Matrix::Zero(3, 1);
    lin.B(0, 0) = 1.0;
    lin.C = lin.B.transpose();
    lin.D.resize(3);
    lin.D << -params.b * a1 * y_bar,
             -params.c1 * a1 * y_bar + params.d * params.x1_in,
             -params.c2 * a1 * y_bar + params.d * params.x2_in;
    return lin;
}

Plant linear_operator_plant(const Matrix& A, const Matrix& B, const Matrix& C, const Vector& x0,
                            std::function<Vector(double)> matched_disturbance) {
    const Eigen::Index n = A.rows();
    if (A.cols() != n || B.rows() != n || C.cols() != n || x0.size() != n || C.rows() != B.cols()) {
        throw Error(ErrorKind::InvalidPlant, "linear_operator_plant: inconsistent dimensions");
    }
    const Matrix CB = C * B;
    if (Eigen::FullPivLU<Matrix>(CB).rank() < CB.rows()) {
        throw Error(ErrorKind::InvalidPlant, "linear_operator_plant: CB is singular");
    }

    Plant plant;
    plant.output_dim = C.rows();
    plant.state_dim = n;
    plant.initial_state = x0;
    plant.disturbance = matched_disturbance;
    plant.rhs = [A, B, matched_disturbance](double t, const Vector& x, const Vector& u) -> Vector {
        if (matched_disturbance) return A * x + B * (u + matched_disturbance(t));
        return A * x + B * u;
    };
    plant.output = [C](const Vector& x) -> Vector { return C * x; };
    return plant;
}

namespace {

// State history sampled at committed steps, linearly interpolated.
class StateHistory {
public:
    StateHistory(Vector initial, double horizon) : initial_(std::move(initial)), horizon_(horizon) {}

    void clear() { samples_.clear(); }

    void push(double t, const Vector& x) {
        if (!samples_.empty() && t <= samples_.back().first) {
            // Re-commit at the same time (restart at a breakpoint): overwrite.
            while (!samples_.empty() && samples_.back().first >= t) samples_.pop_back();
        }
        samples_.emplace_back(t, x);
        while (samples_.size() > 2 && samples_[1].first < t - horizon_) samples_.pop_front();
    }

    // Value at time s; (t_now, x_now) is the trial point of the current stage.
    Vector at(double s, double t_now, const Vector& x_now) const {
        if (samples_.empty()) return initial_;
        if (s <= samples_.front().first) return samples_.front().second;
        const auto& last = samples_.back();
        if (s >= last.first) {
            const double span = t_now - last.first;
            if (span <= 0.0) return last.second;
            const double w = std::clamp((s - last.first) / span, 0.0, 1.0);
            return (1.0 - w) * last.second + w * x_now;
        }
        auto hi = std::lower_bound(samples_.begin(), samples_.end(), s,
                                   [](const auto& entry, double value) { return entry.first < value; });
        auto lo = std::prev(hi);
        const double w = (s - lo->first) / (hi->first - lo->first);
        return (1.0 - w) * lo->second + w * hi->second;
    }

private:
    Vector initial_;
    double horizon_;
    std::deque<std::pair<double, Vector>> samples_;
};

}  // namespace

Plant delayed_output_plant(const Plant& base, double delay) {
    if (delay < 0.0) throw Error(ErrorKind::InvalidPlant, "delayed_output_plant: delay must be nonnegative");
    if (delay == 0.0) return base;

    auto history = std::make_shared<StateHistory>(base.initial_state, delay);
    Plant plant = base;
    plant.rhs = [base_rhs = base.rhs, history, delay](double t, const Vector& x, const Vector& u) -> Vector {
        return base_rhs(t, history->at(t - delay, t, x), u);
    };
    plant.commit = [history, base_commit = base.commit](double t, const Vector& x) {
        history->push(t, x);
        if (base_commit) base_commit(t, x);
    };
    plant.reset = [history, base_reset = base.reset]() {
        history->clear();
        if (base_reset) base_reset();
    };
    return plant;
}

}  // namespace rfmpc
