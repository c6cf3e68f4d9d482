#include "rfmpc/controller.hpp"

#include <cmath>
#include <sstream>

namespace rfmpc {

void LoopConfig::validate() const {
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
    if (!(sim_step > 0.0)) throw std::invalid_argument("sim_step must be positive");
    if (!(t_end > 0.0)) throw std::invalid_argument("t_end must be positive");
    ocp.validate(delta);
}

double adaptive_funnel(const FunnelFunction& psi, const Vector& y_M, const Vector& y_ref_val, double t,
                       double phi_floor, bool* clamped) {
    const double phi = psi(t) - (y_M - y_ref_val).norm();
    const bool low = !(phi > phi_floor);
    if (clamped) *clamped = low;
    return low ? phi_floor : phi;
}

Vector funnel_control(const FunnelControllerConfig& config, const Vector& e_S, double phi) {
    const Vector w = e_S / phi;
    const double s = w.norm();
    if (!(s < 1.0)) {
        std::ostringstream msg;
        msg << "funnel violation: |e_S| = " << e_S.norm() << " >= phi = " << phi;
        throw Error(ErrorKind::FunnelViolation, msg.str());
    }
    const double gate = config.activation.beta(s);
    if (gate == 0.0) return Vector::Zero(e_S.size());
    return gate * config.gains.surjection_n(config.gains.alpha(s * s)) * w;
}

Plant model_as_plant(const ControlAffineModel& model) {
    Plant plant;
    plant.output_dim = model.output_dim;
    plant.state_dim = model.state_dim;
    plant.initial_state = model.initial_state;
    plant.rhs = [model](double, const Vector& x, const Vector& u) { return model.dynamics(x, u); };
    plant.output = model.h;
    return plant;
}

namespace {

// Instantaneous closed-loop signals at one point of the stacked state.
struct LoopSignals {
    Vector y;
    Vector y_M;
    Vector y_ref;
    double psi = 0.0;
    double phi = 0.0;
    Vector u_fc;
    bool active = false;
    bool clamped = false;
};

class CoSimulation {
public:
    CoSimulation(const Plant& plant, const ControlAffineModel& model, const FunnelFunction& psi,
                 const ReferenceSignal& y_ref, const FunnelControllerConfig& fc, bool fc_enabled)
        : plant_(plant), model_(model), psi_(psi), y_ref_(y_ref), fc_(fc), fc_enabled_(fc_enabled),
          np_(plant.state_dim), nm_(model.state_dim) {}

    LoopSignals signals(double t, const Vector& z) const {
        LoopSignals s;
        s.y = plant_.output(z.head(np_));
        s.y_M = model_.h(z.tail(nm_));
        s.y_ref = y_ref_(t);
        s.psi = psi_(t);
        s.phi = adaptive_funnel(psi_, s.y_M, s.y_ref, t, fc_.phi_floor, &s.clamped);
        if (fc_enabled_) {
            const Vector e_S = s.y - s.y_M;
            s.u_fc = funnel_control(fc_, e_S, s.phi);
            s.active = (e_S / s.phi).norm() > fc_.activation.s_crit;
        } else {
            s.u_fc = Vector::Zero(model_.output_dim);
        }
        return s;
    }

    Vector rhs(double t, const Vector& z, const Vector& u_fmpc) const {
        const LoopSignals s = signals(t, z);
        Vector dz(np_ + nm_);
        dz.head(np_) = plant_.rhs(t, z.head(np_), u_fmpc + s.u_fc);
        dz.tail(nm_) = model_.dynamics(z.tail(nm_), u_fmpc);
        return dz;
    }

    Eigen::Index plant_dim() const { return np_; }
    Eigen::Index model_dim() const { return nm_; }

private:
    const Plant& plant_;
    const ControlAffineModel& model_;
    const FunnelFunction& psi_;
    const ReferenceSignal& y_ref_;
    const FunnelControllerConfig& fc_;
    bool fc_enabled_;
    Eigen::Index np_;
    Eigen::Index nm_;
};

LogSample make_sample(double t, const LoopSignals& s, const Vector& u_fmpc) {
    LogSample sample;
    sample.t = t;
    sample.y = s.y;
    sample.y_M = s.y_M;
    sample.y_ref = s.y_ref;
    sample.psi = s.psi;
    sample.phi = s.phi;
    sample.u_fmpc = u_fmpc;
    sample.u_fc = s.u_fc;
    sample.u_total = u_fmpc + s.u_fc;
    sample.fc_active = s.active;
    return sample;
}

}  // namespace

TrajectoryLog run_robust_fmpc(const Plant& plant, const ControlAffineModel& model, const FunnelFunction& psi,
                              const ReferenceSignal& y_ref, const StageCostParams& params,
                              const FunnelControllerConfig& fc, const LoopConfig& loop_cfg) {
    loop_cfg.validate();
    if (plant.output_dim != model.output_dim) {
        throw Error(ErrorKind::InvalidModel, "run_robust_fmpc: plant and model output dimensions differ");
    }

    TrajectoryLog log;
    plant.restart();
    Vector xp = plant.initial_state;
    plant.on_step(0.0, xp);

    // Startup: y(0) in the funnel and x0 in the admissible initial set.
    {
        const Vector y0 = plant.measure(0.0, xp);
        const Vector r0 = y_ref(0.0);
        const double psi0 = psi(0.0);
        const Vector yM0 = model.h(model.initial_state);
        if (!((y0 - r0).norm() < psi0)) {
            throw LoopError(ErrorKind::InfeasibleStart, 0.0, log, "plant output at t = 0 is outside the funnel");
        }
        if (!((y0 - yM0).norm() < psi0 - (yM0 - r0).norm())) {
            throw LoopError(ErrorKind::InfeasibleStart, 0.0, log,
                            "model initial state violates |y(0) - h(x0)| < psi(0) - |h(x0) - y_ref(0)|");
        }
        if (model.bif) {
            const double eta_norm = model.bif->forward(model.initial_state).second.norm();
            if (eta_norm > loop_cfg.init_strategy.xi) {
                std::ostringstream msg;
                msg << "initial internal state norm " << eta_norm << " exceeds xi = " << loop_cfg.init_strategy.xi;
                log.warnings.push_back(msg.str());
            }
        }
    }

    const CoSimulation cosim(plant, model, psi, y_ref, fc, loop_cfg.fc_enabled);
    const Eigen::Index np = cosim.plant_dim();
    const Eigen::Index nm = cosim.model_dim();
    Vector x_pre = model.initial_state;
    std::optional<PiecewiseConstantControl> warm;
    const double delta = loop_cfg.delta;
    const int cycles = step_count(loop_cfg.t_end, delta);

    Vector z(np + nm);
    for (int k = 0; k < cycles; ++k) {
        const double t_k = delta * k;
        const double t_next = (k + 1 == cycles) ? loop_cfg.t_end : delta * (k + 1);
        try {
            const Vector y_hat = plant.measure(t_k, xp);
            InitializationStrategy strategy = loop_cfg.init_strategy;
            if (loop_cfg.init_override) strategy.variant = loop_cfg.init_override(k);
            const Vector x_hat = proper_init(strategy, model, x_pre, y_hat);

            const OcpSolution sol = solve_ocp(model, params, loop_cfg.ocp, t_k, x_hat, warm);
            CycleRecord rec;
            rec.t_k = t_k;
            rec.x_hat = x_hat;
            rec.x_pre = x_pre;
            rec.cost = sol.cost;
            rec.iterations = sol.iterations;
            rec.converged = sol.converged;

            // Co-integrate plant and model, restarting at control breakpoints.
            z.head(np) = xp;
            z.tail(nm) = x_hat;
            std::vector<double> cuts{t_k};
            for (std::size_t j = 1; j < sol.control.values.size(); ++j) {
                const double b = sol.control.breakpoint(j);
                if (b > t_k + 1e-12 && b < t_next - 1e-12) cuts.push_back(b);
            }
            cuts.push_back(t_next);

            for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
                const Vector u_fmpc = sol.control.at(cuts[s]);
                const OdeRhs rhs = [&cosim, &u_fmpc](double t, const Vector& state) {
                    return cosim.rhs(t, state, u_fmpc);
                };
                const double span = cuts[s + 1] - cuts[s];
                const int steps = step_count(span, loop_cfg.sim_step);
                const double h = span / steps;
                for (int i = 0; i < steps; ++i) {
                    const double t = cuts[s] + h * i;
                    const LoopSignals sig = cosim.signals(t, z);
                    if (sig.clamped) ++log.phi_floor_hits;
                    log.samples.push_back(make_sample(t, sig, u_fmpc));
                    Vector next = rk4_step(rhs, t, z, h);
                    if (!next.allFinite()) {
                        std::ostringstream msg;
                        msg << "closed loop diverged after t = " << t;
                        throw IntegrationDiverged(t, msg.str());
                    }
                    z = std::move(next);
                    plant.on_step(i + 1 == steps ? cuts[s + 1] : t + h, z.head(np));
                }
            }

            xp = z.head(np);
            x_pre = z.tail(nm);
            rec.y_end = plant.output(xp);
            rec.y_M_end = model.h(x_pre);
            rec.phi_end = adaptive_funnel(psi, rec.y_M_end, y_ref(t_next), t_next, fc.phi_floor);
            log.cycles.push_back(std::move(rec));
            warm = warm_start_shift(sol, delta);

            if (k + 1 == cycles) {
                const LoopSignals sig = cosim.signals(t_next, z);
                log.samples.push_back(make_sample(t_next, sig, sol.control.at(t_next - 0.5 * loop_cfg.sim_step)));
            }
        } catch (const LoopError&) {
            throw;
        } catch (const Error& e) {
            std::ostringstream msg;
            msg << "cycle at t_k = " << t_k << ": " << e.what();
            throw LoopError(e.kind(), t_k, std::move(log), msg.str());
        }
    }
    return log;
}

TrajectoryLog run_funnel_control(const Plant& plant, const FunnelFunction& psi, const ReferenceSignal& y_ref,
                                 const FunnelControllerConfig& fc, double t_end, double step) {
    TrajectoryLog log;
    plant.restart();
    Vector x = plant.initial_state;
    plant.on_step(0.0, x);
    const Vector zero = Vector::Zero(plant.output_dim);

    auto evaluate = [&](double t, const Vector& state) {
        LoopSignals s;
        s.y = plant.output(state);
        s.y_M = y_ref(t);
        s.y_ref = s.y_M;
        s.psi = psi(t);
        s.phi = s.psi;
        const Vector e = s.y - s.y_ref;
        s.u_fc = funnel_control(fc, e, s.phi);
        s.active = (e / s.phi).norm() > fc.activation.s_crit;
        return s;
    };
    const OdeRhs rhs = [&](double t, const Vector& state) {
        return plant.rhs(t, state, evaluate(t, state).u_fc);
    };

    const int steps = step_count(t_end, step);
    const double h = t_end / steps;
    try {
        for (int i = 0; i <= steps; ++i) {
            const double t = h * i;
            log.samples.push_back(make_sample(t, evaluate(t, x), zero));
            if (i == steps) break;
            Vector next = rk4_step(rhs, t, x, h);
            if (!next.allFinite()) throw IntegrationDiverged(t, "funnel control loop diverged");
            x = std::move(next);
            plant.on_step(t + h, x);
        }
    } catch (const Error& e) {
        throw LoopError(e.kind(), 0.0, std::move(log), e.what());
    }
    return log;
}

}  // namespace rfmpc
