#include "rfmpc/model.hpp"

#include <algorithm>
#include <cmath>

namespace rfmpc {

namespace {

constexpr double kJacobianStep = 1e-6;

Matrix central_difference(const std::function<Vector(const Vector&)>& fn, const Vector& x, Eigen::Index rows) {
    Matrix J(rows, x.size());
    Vector xp = x;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = kJacobianStep * std::max(1.0, std::abs(x(j)));
        xp(j) = x(j) + h;
        const Vector fp = fn(xp);
        xp(j) = x(j) - h;
        const Vector fm = fn(xp);
        xp(j) = x(j);
        J.col(j) = (fp - fm) / (2.0 * h);
    }
    return J;
}

}  // namespace

Matrix ControlAffineModel::dynamics_jacobian_at(const Vector& x, const Vector& u) const {
    if (dynamics_jacobian) return dynamics_jacobian(x, u);
    return central_difference([this, &u](const Vector& z) { return dynamics(z, u); }, x, state_dim);
}

Matrix ControlAffineModel::output_jacobian_at(const Vector& x) const {
    if (output_jacobian) return output_jacobian(x);
    return central_difference(h, x, output_dim);
}

BifTransform linear_bif(const Matrix& H, const Matrix& G) {
    const Eigen::Index m = H.rows();
    const Eigen::Index n = H.cols();
    if (G.rows() != n || G.cols() != m) throw Error(ErrorKind::InvalidModel, "linear_bif: inconsistent dimensions");
    const Matrix HG = H * G;
    Eigen::FullPivLU<Matrix> lu(HG);
    if (lu.rank() < m) throw Error(ErrorKind::InvalidModel, "linear_bif: HG is singular");

    Matrix V;
    try {
        V = null_space_basis(H);
    } catch (const Error& e) {
        throw Error(ErrorKind::InvalidModel, std::string("linear_bif: ") + e.what());
    }
    const Matrix lift = G * lu.inverse();  // G (HG)^{-1}
    const Matrix eta_map = pseudoinverse(V) * (Matrix::Identity(n, n) - lift * H);

    BifTransform bif;
    bif.forward = [H, eta_map](const Vector& x) { return std::make_pair<Vector, Vector>(H * x, eta_map * x); };
    bif.inverse = [lift, V](const Vector& y, const Vector& eta) -> Vector { return lift * y + V * eta; };
    return bif;
}

ControlAffineModel linear_model(const Matrix& A, const Matrix& B, const Matrix& C, const Vector& offset,
                                const Vector& initial_state) {
    const Eigen::Index n = A.rows();
    const Eigen::Index m = C.rows();
    if (A.cols() != n || B.rows() != n || B.cols() != m || C.cols() != n || offset.size() != n ||
        initial_state.size() != n) {
        throw Error(ErrorKind::InvalidModel, "linear_model: inconsistent dimensions");
    }
    if (Eigen::FullPivLU<Matrix>(C * B).rank() < m) {
        throw Error(ErrorKind::InvalidModel, "linear_model: CB is singular (relative degree is not one)");
    }

    ControlAffineModel model;
    model.state_dim = n;
    model.output_dim = m;
    model.f = [A, offset](const Vector& x) -> Vector { return A * x + offset; };
    model.g = [B](const Vector&) -> Matrix { return B; };
    model.h = [C](const Vector& x) -> Vector { return C * x; };
    model.dynamics_jacobian = [A](const Vector&, const Vector&) -> Matrix { return A; };
    model.output_jacobian = [C](const Vector&) -> Matrix { return C; };
    model.bif = linear_bif(C, B);
    model.initial_state = initial_state;
    return model;
}

Vector proper_init(const InitializationStrategy& strategy, const ControlAffineModel& model, const Vector& x_pre,
                   const Vector& y_hat) {
    if (x_pre.size() != model.state_dim || y_hat.size() != model.output_dim) {
        throw std::invalid_argument("proper_init: dimension mismatch");
    }
    switch (strategy.variant) {
        case InitVariant::OpenLoop:
            return x_pre;
        case InitVariant::OutputResetKeepInternal: {
            if (!model.bif) throw Error(ErrorKind::MissingTransform, "proper_init: output reset needs a BIF transform");
            const Vector eta_pre = model.bif->forward(x_pre).second;
            return model.bif->inverse(y_hat, eta_pre);
        }
        case InitVariant::OutputResetZeroInternal: {
            if (!model.bif) throw Error(ErrorKind::MissingTransform, "proper_init: output reset needs a BIF transform");
            return model.bif->inverse(y_hat, Vector::Zero(model.state_dim - model.output_dim));
        }
    }
    return x_pre;
}

std::size_t PiecewiseConstantControl::index_at(double t) const {
    if (values.empty()) throw std::logic_error("PiecewiseConstantControl: no values");
    const double pos = (t - t0) / interval;
    const double j = std::floor(pos + 1e-9);
    if (j <= 0.0) return 0;
    return std::min(values.size() - 1, static_cast<std::size_t>(j));
}

Rollout model_rollout(const ControlAffineModel& model, double t0, const Vector& x0,
                      const PiecewiseConstantControl& control, double t_end, double step) {
    if (t_end < t0) throw std::invalid_argument("model_rollout: t_end precedes t0");

    std::vector<double> cuts{t0};
    for (std::size_t j = 1; j < control.values.size(); ++j) {
        const double b = control.breakpoint(j);
        if (b > t0 + 1e-12 && b < t_end - 1e-12) cuts.push_back(b);
    }
    cuts.push_back(t_end);

    Rollout out;
    out.times.push_back(t0);
    out.states.push_back(x0);
    Vector x = x0;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const Vector u = control.at(cuts[s]);
        OdeProblem prob;
        prob.dimension = model.state_dim;
        prob.rhs = [&model, &u](double, const Vector& z) { return model.dynamics(z, u); };
        prob.t0 = cuts[s];
        prob.x0 = x;
        const double span = cuts[s + 1] - cuts[s];
        if (span <= 0.0) continue;
        const Trajectory seg = integrate_rk4(prob, cuts[s + 1], span / step_count(span, step));
        for (std::size_t i = 1; i < seg.times.size(); ++i) {
            out.times.push_back(seg.times[i]);
            out.states.push_back(seg.states[i]);
        }
        x = seg.back();
    }
    out.outputs.reserve(out.states.size());
    for (const auto& state : out.states) out.outputs.push_back(model.h(state));
    return out;
}

}  // namespace rfmpc
