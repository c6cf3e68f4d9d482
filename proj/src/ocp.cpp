#include "rfmpc/ocp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace rfmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 60;
constexpr int kGreedyLevels = 41;

// Control values stored column-wise: column j acts on interval j.
using ControlMatrix = Matrix;

struct StagePoint {
    double t;
    Vector x;
};

// One RK4 step keeps its four stage evaluation points for the adjoint sweep.
struct StepRecord {
    std::array<StagePoint, 4> stages;
    double h;
    Eigen::Index interval;
};

class Problem {
public:
    Problem(const ControlAffineModel& model, const StageCostParams& params, const OcpConfig& config, double t_k,
            const Vector& x_hat)
        : model_(model),
          params_(params),
          config_(config),
          t_k_(t_k),
          x_hat_(x_hat),
          interval_(config.horizon_T / config.control_intervals),
          step_(interval_ / config.integration_substeps) {}

    Eigen::Index m() const { return model_.output_dim; }
    int intervals() const { return config_.control_intervals; }
    double interval() const { return interval_; }
    double bound() const { return config_.input_bound_M; }

    double interval_start(Eigen::Index j) const { return t_k_ + interval_ * static_cast<double>(j); }

    // Stage cost and feasibility at one quadrature node.
    double running_cost(double t, const Vector& x, const Vector& u) const {
        const Vector e = model_.h(x) - params_.reference(t);
        const double psi = params_.funnel(t);
        const double r = e.squaredNorm();
        const double gap = psi * psi - r;
        if (!(gap > 0.0) || !std::isfinite(r)) return kInf;
        return r / gap + params_.lambda_u * u.squaredNorm();
    }

    // Integrates one interval from x; returns the cost increment (inf if the
    // funnel is left) and advances x. Optionally records the stage points.
    double integrate_interval(Eigen::Index j, const Vector& u, Vector& x, std::vector<StepRecord>* tape,
                              Trajectory* samples) const {
        double cost = 0.0;
        const double t0 = interval_start(j);
        for (int s = 0; s < config_.integration_substeps; ++s) {
            const double t = t0 + step_ * s;
            const double h = step_;
            StepRecord rec;
            rec.h = h;
            rec.interval = j;
            rec.stages[0] = {t, x};
            const Vector k1 = model_.dynamics(x, u);
            const double l1 = running_cost(t, x, u);
            rec.stages[1] = {t + 0.5 * h, x + 0.5 * h * k1};
            const Vector k2 = model_.dynamics(rec.stages[1].x, u);
            const double l2 = running_cost(rec.stages[1].t, rec.stages[1].x, u);
            rec.stages[2] = {t + 0.5 * h, x + 0.5 * h * k2};
            const Vector k3 = model_.dynamics(rec.stages[2].x, u);
            const double l3 = running_cost(rec.stages[2].t, rec.stages[2].x, u);
            rec.stages[3] = {t + h, x + h * k3};
            const Vector k4 = model_.dynamics(rec.stages[3].x, u);
            const double l4 = running_cost(rec.stages[3].t, rec.stages[3].x, u);
            if (!std::isfinite(l1 + l2 + l3 + l4)) return kInf;
            x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (!x.allFinite()) return kInf;
            cost += (h / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
            if (tape) tape->push_back(std::move(rec));
            if (samples) {
                samples->times.push_back(t + h);
                samples->states.push_back(x);
            }
        }
        // Terminal node of the interval must be in the funnel too.
        if (!std::isfinite(running_cost(t0 + interval_, x, u))) return kInf;
        return cost;
    }

    double cost(const ControlMatrix& U, std::vector<StepRecord>* tape = nullptr,
                Trajectory* samples = nullptr) const {
        Vector x = x_hat_;
        double total = 0.0;
        if (samples) {
            samples->times.assign(1, t_k_);
            samples->states.assign(1, x_hat_);
        }
        for (Eigen::Index j = 0; j < U.cols(); ++j) {
            const double c = integrate_interval(j, U.col(j), x, tape, samples);
            if (!std::isfinite(c)) return kInf;
            total += c;
        }
        return total;
    }

    // Discrete adjoint of the RK4 cost quadrature.
    ControlMatrix adjoint_gradient(const ControlMatrix& U, double* cost_out) const {
        std::vector<StepRecord> tape;
        tape.reserve(static_cast<std::size_t>(U.cols()) * static_cast<std::size_t>(config_.integration_substeps));
        const double J = cost(U, &tape);
        if (cost_out) *cost_out = J;
        ControlMatrix grad = ControlMatrix::Zero(U.rows(), U.cols());
        if (!std::isfinite(J)) return grad;

        const Eigen::Index n = model_.state_dim;
        Vector lambda = Vector::Zero(n);
        for (auto it = tape.rbegin(); it != tape.rend(); ++it) {
            const StepRecord& rec = *it;
            const Vector u = U.col(rec.interval);
            const double h = rec.h;
            const std::array<double, 4> w{h / 6.0, h / 3.0, h / 3.0, h / 6.0};
            std::array<Vector, 4> a{w[0] * lambda, w[1] * lambda, w[2] * lambda, w[3] * lambda};
            Vector next = lambda;
            Vector ubar = Vector::Zero(U.rows());
            for (int i = 3; i >= 0; --i) {
                const StagePoint& sp = rec.stages[static_cast<std::size_t>(i)];
                const Matrix Jx = model_.dynamics_jacobian_at(sp.x, u);
                const Matrix Gx = model_.g(sp.x);
                Vector lx;
                Vector lu;
                running_cost_derivatives(sp.t, sp.x, u, lx, lu);
                const Vector zbar = Jx.transpose() * a[static_cast<std::size_t>(i)] + w[static_cast<std::size_t>(i)] * lx;
                next += zbar;
                ubar += Gx.transpose() * a[static_cast<std::size_t>(i)] + w[static_cast<std::size_t>(i)] * lu;
                if (i == 3) a[2] += h * zbar;
                if (i == 2) a[1] += 0.5 * h * zbar;
                if (i == 1) a[0] += 0.5 * h * zbar;
            }
            lambda = std::move(next);
            grad.col(rec.interval) += ubar;
        }
        return grad;
    }

    ControlMatrix finite_difference_gradient(const ControlMatrix& U) const {
        ControlMatrix grad(U.rows(), U.cols());
        ControlMatrix probe = U;
        const double base = cost(U);
        for (Eigen::Index j = 0; j < U.cols(); ++j) {
            for (Eigen::Index i = 0; i < U.rows(); ++i) {
                const double eps = 1e-6 * std::max(1.0, std::abs(U(i, j)));
                probe(i, j) = U(i, j) + eps;
                const double plus = cost(probe);
                probe(i, j) = U(i, j) - eps;
                const double minus = cost(probe);
                probe(i, j) = U(i, j);
                if (std::isfinite(plus) && std::isfinite(minus)) {
                    grad(i, j) = (plus - minus) / (2.0 * eps);
                } else if (std::isfinite(plus)) {
                    grad(i, j) = (plus - base) / eps;
                } else if (std::isfinite(minus)) {
                    grad(i, j) = (base - minus) / eps;
                } else {
                    grad(i, j) = 0.0;
                }
            }
        }
        return grad;
    }

    // Feasibility-seeking guess: interval by interval, the level that brings
    // the predicted error closest to the reference at the interval end.
    std::optional<ControlMatrix> greedy_guess() const {
        ControlMatrix U = ControlMatrix::Zero(m(), intervals());
        Vector x = x_hat_;
        const double M = bound();
        for (Eigen::Index j = 0; j < U.cols(); ++j) {
            Vector best_u = Vector::Zero(m());
            double best_ratio = kInf;
            Vector best_x;
            const int sweeps = m() == 1 ? 1 : 2;
            Vector trial_u = best_u;
            for (int sweep = 0; sweep < sweeps; ++sweep) {
                for (Eigen::Index comp = 0; comp < m(); ++comp) {
                    for (int level = 0; level < kGreedyLevels; ++level) {
                        trial_u = best_u;
                        trial_u(comp) = -M + 2.0 * M * level / (kGreedyLevels - 1);
                        Vector xt = x;
                        if (!std::isfinite(integrate_interval(j, trial_u, xt, nullptr, nullptr))) continue;
                        const double t_end = interval_start(j + 1);
                        const double ratio =
                            (model_.h(xt) - params_.reference(t_end)).norm() / params_.funnel(t_end);
                        if (ratio < best_ratio) {
                            best_ratio = ratio;
                            best_u = trial_u;
                            best_x = xt;
                        }
                    }
                }
            }
            if (!std::isfinite(best_ratio)) return std::nullopt;
            U.col(j) = best_u;
            x = best_x;
        }
        return U;
    }

    ControlMatrix project(const ControlMatrix& U) const { return U.cwiseMax(-bound()).cwiseMin(bound()); }

    PiecewiseConstantControl to_control(const ControlMatrix& U) const {
        PiecewiseConstantControl c;
        c.t0 = t_k_;
        c.interval = interval_;
        c.values.reserve(static_cast<std::size_t>(U.cols()));
        for (Eigen::Index j = 0; j < U.cols(); ++j) c.values.emplace_back(U.col(j));
        return c;
    }

    ControlMatrix from_control(const PiecewiseConstantControl& control) const {
        ControlMatrix U(m(), intervals());
        for (Eigen::Index j = 0; j < U.cols(); ++j) {
            const double mid = interval_start(j) + 0.5 * interval_;
            U.col(j) = control.at(mid);
        }
        return U;
    }

private:
    void running_cost_derivatives(double t, const Vector& x, const Vector& u, Vector& lx, Vector& lu) const {
        const Vector e = model_.h(x) - params_.reference(t);
        const double psi2 = params_.funnel(t) * params_.funnel(t);
        const double gap = psi2 - e.squaredNorm();
        const Vector ly = (2.0 * psi2 / (gap * gap)) * e;
        lx = model_.output_jacobian_at(x).transpose() * ly;
        lu = 2.0 * params_.lambda_u * u;
    }

    const ControlAffineModel& model_;
    const StageCostParams& params_;
    const OcpConfig& config_;
    double t_k_;
    Vector x_hat_;
    double interval_;
    double step_;
};

}  // namespace

void OcpConfig::validate(double delta) const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
    if (!(horizon_T > 0.0)) fail("horizon_T must be positive");
    if (horizon_T < delta) fail("horizon_T < delta");
    if (control_intervals < 1) fail("control_intervals must be positive");
    if (!(input_bound_M > 0.0)) fail("input_bound_M must be positive");
    if (integration_substeps < 1) fail("integration_substeps must be positive");
    if (max_iterations < 1) fail("max_iterations must be positive");
    if (!(gradient_tolerance > 0.0)) fail("gradient_tolerance must be positive");
    if (!(infeasibility_penalty_cap > 0.0)) fail("infeasibility_penalty_cap must be positive");
}

double stage_cost(const StageCostParams& params, double t, const Vector& y, const Vector& u) {
    const Vector e = y - params.reference(t);
    const double psi = params.funnel(t);
    const double r = e.squaredNorm();
    const double gap = psi * psi - r;
    if (!(gap > 0.0)) return kInf;
    return r / gap + params.lambda_u * u.squaredNorm();
}

double stage_cost(const StageCostParams& params, double t, const Vector& x, const Vector& u,
                  const std::function<Vector(const Vector&)>& h) {
    return stage_cost(params, t, h(x), u);
}

double ocp_cost(const ControlAffineModel& model, const StageCostParams& params, const OcpConfig& config, double t_k,
                const Vector& x_hat, const PiecewiseConstantControl& control) {
    const Problem problem(model, params, config, t_k, x_hat);
    return problem.cost(problem.from_control(control));
}

Matrix ocp_gradient(const ControlAffineModel& model, const StageCostParams& params, const OcpConfig& config,
                    double t_k, const Vector& x_hat, const PiecewiseConstantControl& control, GradientMethod method) {
    const Problem problem(model, params, config, t_k, x_hat);
    const Matrix U = problem.from_control(control);
    if (method == GradientMethod::Adjoint) return problem.adjoint_gradient(U, nullptr);
    return problem.finite_difference_gradient(U);
}

OcpSolution solve_ocp(const ControlAffineModel& model, const StageCostParams& params, const OcpConfig& config,
                      double t_k, const Vector& x_hat, const std::optional<PiecewiseConstantControl>& warm_start) {
    config.validate(0.0);
    if (x_hat.size() != model.state_dim) throw std::invalid_argument("solve_ocp: x_hat has wrong dimension");
    {
        const double err = (model.h(x_hat) - params.reference(t_k)).norm();
        const double psi = params.funnel(t_k);
        if (!(err < psi)) {
            std::ostringstream msg;
            msg << "solve_ocp: initial output error " << err << " not inside funnel " << psi << " at t = " << t_k;
            throw Error(ErrorKind::InfeasibleStart, msg.str());
        }
    }

    const Problem problem(model, params, config, t_k, x_hat);
    const double cap = config.infeasibility_penalty_cap;

    // Starting point: cheapest feasible candidate.
    Matrix U;
    double J = kInf;
    if (warm_start && !warm_start->values.empty() && warm_start->values.front().size() == problem.m()) {
        Matrix candidate = problem.project(problem.from_control(*warm_start));
        const double c = problem.cost(candidate);
        if (c < J) {
            J = c;
            U = std::move(candidate);
        }
    }
    {
        Matrix zero = Matrix::Zero(problem.m(), problem.intervals());
        const double c = problem.cost(zero);
        if (c < J) {
            J = c;
            U = std::move(zero);
        }
    }
    if (!std::isfinite(J)) {
        auto guess = problem.greedy_guess();
        if (guess) {
            U = *guess;
            J = problem.cost(U);
        }
    }
    if (!std::isfinite(J)) {
        std::ostringstream msg;
        msg << "solve_ocp: no feasible control found at t = " << t_k;
        throw Error(ErrorKind::OcpInfeasible, msg.str());
    }

    auto evaluate_gradient = [&](const Matrix& at, double& value) -> Matrix {
        if (config.gradient == GradientMethod::Adjoint) return problem.adjoint_gradient(at, &value);
        value = problem.cost(at);
        return problem.finite_difference_gradient(at);
    };

    Matrix G = evaluate_gradient(U, J);
    const Eigen::Index dim = U.size();
    auto vec = [](const Matrix& A) { return Eigen::Map<const Vector>(A.data(), A.size()); };

    // Two-metric projection: bound-active components take plain gradient
    // steps, free components a BFGS-scaled step.
    const double g_inf = G.cwiseAbs().maxCoeff();
    const double initial_scale = g_inf > 0.0 ? 0.05 * problem.bound() / g_inf : 1.0;
    Matrix H = initial_scale * Matrix::Identity(dim, dim);
    bool fresh_metric = true;

    OcpSolution sol;
    sol.input_bound = problem.bound();
    int iter = 0;
    for (; iter < config.max_iterations; ++iter) {
        const Matrix projected_step = problem.project(U - G) - U;
        const double pg = projected_step.cwiseAbs().maxCoeff();
        if (pg <= config.gradient_tolerance) {
            sol.converged = true;
            break;
        }

        const double M = problem.bound();
        const double eps = std::min(1e-6 * M, pg);
        const Vector u = vec(U);
        const Vector g = vec(G);
        std::vector<Eigen::Index> free_idx;
        Vector d = Vector::Zero(dim);
        for (Eigen::Index i = 0; i < dim; ++i) {
            const bool active = (u(i) <= -M + eps && g(i) > 0.0) || (u(i) >= M - eps && g(i) < 0.0);
            if (active) {
                d(i) = -H(i, i) * g(i);
            } else {
                free_idx.push_back(i);
            }
        }
        for (Eigen::Index a : free_idx) {
            double acc = 0.0;
            for (Eigen::Index b : free_idx) acc += H(a, b) * g(b);
            d(a) = -acc;
        }

        bool accepted = false;
        Matrix U_next;
        double J_next = kInf;
        double s = 1.0;
        for (int bt = 0; bt < kMaxBacktracks; ++bt, s *= 0.5) {
            Matrix trial_dir = Eigen::Map<const Matrix>(d.data(), U.rows(), U.cols());
            U_next = problem.project(U + s * trial_dir);
            const Matrix step_taken = U_next - U;
            if (step_taken.cwiseAbs().maxCoeff() == 0.0) break;
            const Vector st = vec(step_taken);
            double predicted = 0.0;
            for (Eigen::Index i = 0; i < dim; ++i) predicted -= g(i) * st(i);
            if (!(predicted > 0.0)) continue;
            double trial = problem.cost(U_next);
            if (!std::isfinite(trial)) trial = cap;
            if (J - trial >= kArmijo * predicted) {
                J_next = trial;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (!fresh_metric) {
                // Stale curvature: restart from a scaled gradient step.
                H = initial_scale * Matrix::Identity(dim, dim);
                fresh_metric = true;
                continue;
            }
            sol.converged = true;
            break;
        }

        double J_eval = 0.0;
        const Matrix G_next = evaluate_gradient(U_next, J_eval);
        const Vector sv = vec(U_next) - u;
        const Vector yv = vec(G_next) - g;
        const double sy = sv.dot(yv);
        if (sy > 1e-12 * sv.norm() * yv.norm()) {
            if (fresh_metric) H = (sy / yv.squaredNorm()) * Matrix::Identity(dim, dim);
            const double rho = 1.0 / sy;
            const Matrix E = Matrix::Identity(dim, dim) - rho * sv * yv.transpose();
            H = E * H * E.transpose() + rho * sv * sv.transpose();
            fresh_metric = false;
        }
        U = U_next;
        G = G_next;
        J = std::isfinite(J_eval) ? J_eval : J_next;
    }

    sol.iterations = iter;
    sol.control = problem.to_control(U);
    sol.cost = problem.cost(U, nullptr, &sol.predicted_states);
    return sol;
}

PiecewiseConstantControl warm_start_shift(const OcpSolution& previous, double delta) {
    const auto& prev = previous.control;
    PiecewiseConstantControl shifted;
    shifted.t0 = prev.t0 + delta;
    shifted.interval = prev.interval;
    const double M = previous.input_bound;
    const double end = prev.end_time();
    shifted.values.reserve(prev.values.size());
    for (std::size_t j = 0; j < prev.values.size(); ++j) {
        const double mid = shifted.breakpoint(j) + 0.5 * shifted.interval;
        Vector v = mid < end ? prev.at(mid) : prev.values.back();
        if (M > 0.0) v = v.cwiseMax(-M).cwiseMin(M);
        shifted.values.push_back(std::move(v));
    }
    return shifted;
}

}  // namespace rfmpc
